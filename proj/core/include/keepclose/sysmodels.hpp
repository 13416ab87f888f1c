#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>
#include <vector>

namespace keepclose {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Continuous-time state-space model (A, B, C, D).
///
/// Input columns [0, split) of B and D form the control input; columns
/// [split, m) form the disturbance input (B-tilde, D-tilde).
class StateSpace {
 public:
  StateSpace() = default;

  const Mat& A() const { return A_; }
  const Mat& B() const { return B_; }
  const Mat& C() const { return C_; }
  const Mat& D() const { return D_; }
  int split() const { return split_; }

  int n() const { return static_cast<int>(A_.rows()); }
  int m() const { return static_cast<int>(B_.cols()); }
  int p() const { return static_cast<int>(C_.rows()); }
  int control_dim() const { return split_; }
  int disturbance_dim() const { return m() - split_; }

  Mat B_control() const { return B_.leftCols(split_); }
  Mat B_disturbance() const { return B_.rightCols(m() - split_); }
  Mat D_control() const { return D_.leftCols(split_); }
  Mat D_disturbance() const { return D_.rightCols(m() - split_); }

  bool is_static() const { return n() == 0; }

 private:
  friend StateSpace new_state_space(Mat A, Mat B, Mat C, Mat D, int disturbance_split);
  Mat A_, B_, C_, D_;
  int split_ = 0;
};

/// Validates dimensions and finiteness. `disturbance_split` defaults to "all
/// columns are control input" when negative.
StateSpace new_state_space(Mat A, Mat B, Mat C, Mat D, int disturbance_split = -1);

/// True iff every eigenvalue of A has real part below -tol.
bool is_hurwitz(const Mat& A, double tol = 1e-9);

/// Block-diagonal stacking; the result's split index is the sum of the parts'
/// split indices only when every part has an empty disturbance block.
StateSpace block_diag(const std::vector<StateSpace>& systems);

Mat block_diag(const std::vector<Mat>& blocks);

/// Per-entry bounds of a scheduling parameter.
struct LpvParameterBox {
  Vec lower;
  Vec upper;

  static LpvParameterBox make(Vec lower, Vec upper);
  bool contains(const Vec& s, double tol = 0.0) const;
  int dim() const { return static_cast<int>(lower.size()); }
};

struct SignalNorms {
  double l2 = 0.0;
  double linf = 0.0;
};

/// Norms of a uniformly sampled vector signal (one sample per row), using the
/// trapezoidal rule for the L2 part and the pointwise Euclidean norm for the
/// sup part.
SignalNorms signal_norms(const Mat& samples, double dt);

StateSpace state_space_from_json(const nlohmann::json& j);
nlohmann::json to_json(const StateSpace& sys);

Mat matrix_from_json(const nlohmann::json& j);
Vec vector_from_json(const nlohmann::json& j);
nlohmann::json matrix_to_json(const Mat& m);
nlohmann::json vector_to_json(const Vec& v);

}  // namespace keepclose
