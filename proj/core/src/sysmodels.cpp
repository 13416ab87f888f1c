#include "keepclose/sysmodels.hpp"

#include <cmath>
#include <string>

#include "keepclose/errors.hpp"

namespace keepclose {

namespace {

std::string shape(const Mat& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

StateSpace new_state_space(Mat A, Mat B, Mat C, Mat D, int disturbance_split) {
  const auto n = A.rows();
  if (A.cols() != n) raise(ErrorCode::DimensionMismatch, "A must be square, got " + shape(A));
  if (B.rows() != n) raise(ErrorCode::DimensionMismatch, "B has " + shape(B) + " against A " + shape(A));
  if (C.cols() != n) raise(ErrorCode::DimensionMismatch, "C has " + shape(C) + " against A " + shape(A));
  if (D.rows() != C.rows() || D.cols() != B.cols())
    raise(ErrorCode::DimensionMismatch, "D has " + shape(D) + ", expected " +
                                            std::to_string(C.rows()) + "x" + std::to_string(B.cols()));
  if (!A.allFinite() || !B.allFinite() || !C.allFinite() || !D.allFinite())
    raise(ErrorCode::NonFiniteEntry, "state-space matrices contain NaN or Inf");
  const int m = static_cast<int>(B.cols());
  if (disturbance_split < 0) disturbance_split = m;
  if (disturbance_split > m)
    raise(ErrorCode::DimensionMismatch, "split index " + std::to_string(disturbance_split) +
                                            " exceeds input count " + std::to_string(m));
  StateSpace s;
  s.A_ = std::move(A);
  s.B_ = std::move(B);
  s.C_ = std::move(C);
  s.D_ = std::move(D);
  s.split_ = disturbance_split;
  return s;
}

bool is_hurwitz(const Mat& A, double tol) {
  if (A.rows() != A.cols()) raise(ErrorCode::DimensionMismatch, "is_hurwitz needs a square matrix");
  if (A.size() == 0) return true;
  Eigen::EigenSolver<Mat> es(A, false);
  if (es.info() != Eigen::Success) raise(ErrorCode::EigenFailure, "eigenvalue iteration did not converge");
  return es.eigenvalues().real().maxCoeff() < -tol;
}

Mat block_diag(const std::vector<Mat>& blocks) {
  Eigen::Index rows = 0, cols = 0;
  for (const auto& b : blocks) {
    rows += b.rows();
    cols += b.cols();
  }
  Mat out = Mat::Zero(rows, cols);
  Eigen::Index r = 0, c = 0;
  for (const auto& b : blocks) {
    out.block(r, c, b.rows(), b.cols()) = b;
    r += b.rows();
    c += b.cols();
  }
  return out;
}

StateSpace block_diag(const std::vector<StateSpace>& systems) {
  if (systems.empty()) raise(ErrorCode::EmptyList, "block_diag needs at least one system");
  if (systems.size() == 1) return systems.front();
  std::vector<Mat> As, Bs, Cs, Ds;
  bool all_control = true;
  int split = 0;
  for (const auto& s : systems) {
    As.push_back(s.A());
    Bs.push_back(s.B());
    Cs.push_back(s.C());
    Ds.push_back(s.D());
    all_control = all_control && s.disturbance_dim() == 0;
    split += s.split();
  }
  return new_state_space(block_diag(As), block_diag(Bs), block_diag(Cs), block_diag(Ds),
                         all_control ? -1 : split);
}

LpvParameterBox LpvParameterBox::make(Vec lower, Vec upper) {
  if (lower.size() != upper.size()) raise(ErrorCode::DimensionMismatch, "box bounds differ in length");
  for (Eigen::Index i = 0; i < lower.size(); ++i) {
    if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]))
      raise(ErrorCode::NonFiniteEntry, "box bound is not finite");
    if (lower[i] > upper[i]) raise(ErrorCode::BoundOrder, "box lower bound exceeds upper bound");
  }
  return LpvParameterBox{std::move(lower), std::move(upper)};
}

bool LpvParameterBox::contains(const Vec& s, double tol) const {
  if (s.size() != lower.size()) return false;
  return ((s.array() >= lower.array() - tol) && (s.array() <= upper.array() + tol)).all();
}

SignalNorms signal_norms(const Mat& samples, double dt) {
  SignalNorms out;
  const Eigen::Index N = samples.rows();
  if (N == 0) return out;
  const Vec sq = samples.rowwise().squaredNorm();
  out.linf = std::sqrt(sq.maxCoeff());
  if (N > 1) {
    const double integral = dt * (sq.sum() - 0.5 * (sq[0] + sq[N - 1]));
    out.l2 = std::sqrt(std::max(0.0, integral));
  }
  return out;
}

Mat matrix_from_json(const nlohmann::json& j) {
  if (j.is_number()) {
    Mat m(1, 1);
    m(0, 0) = j.get<double>();
    return m;
  }
  if (!j.is_array()) raise(ErrorCode::InputError, "matrix must be a JSON array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (rows == 0) return Mat(0, 0);
  if (!j[0].is_array()) {
    Mat m(1, rows);
    for (Eigen::Index c = 0; c < rows; ++c) m(0, c) = j[c].get<double>();
    return m;
  }
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (!j[r].is_array() || static_cast<Eigen::Index>(j[r].size()) != cols)
      raise(ErrorCode::DimensionMismatch, "ragged matrix rows in JSON");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

Vec vector_from_json(const nlohmann::json& j) {
  if (j.is_number()) return Vec::Constant(1, j.get<double>());
  if (!j.is_array()) raise(ErrorCode::InputError, "vector must be a JSON array");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = j[i].get<double>();
  return v;
}

nlohmann::json matrix_to_json(const Mat& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::json vector_to_json(const Vec& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

StateSpace state_space_from_json(const nlohmann::json& j) {
  for (const char* key : {"A", "B", "C", "D"})
    if (!j.contains(key)) raise(ErrorCode::InputError, std::string("system JSON lacks field ") + key);
  Mat A = matrix_from_json(j.at("A"));
  Mat B = matrix_from_json(j.at("B"));
  Mat C = matrix_from_json(j.at("C"));
  Mat D = matrix_from_json(j.at("D"));
  // An empty array stands for a zero matrix of the implied size.
  if (B.size() == 0) B = Mat::Zero(A.rows(), 0);
  if (C.size() == 0) C = Mat::Zero(0, A.rows());
  if (D.size() == 0) D = Mat::Zero(C.rows(), B.cols());
  const int split = j.value("disturbance_split", -1);
  return new_state_space(std::move(A), std::move(B), std::move(C), std::move(D), split);
}

nlohmann::json to_json(const StateSpace& sys) {
  nlohmann::ordered_json j;
  j["A"] = matrix_to_json(sys.A());
  j["B"] = matrix_to_json(sys.B());
  j["C"] = matrix_to_json(sys.C());
  j["D"] = matrix_to_json(sys.D());
  j["disturbance_split"] = sys.split();
  return nlohmann::json(j);
}

}  // namespace keepclose
