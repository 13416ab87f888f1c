#include "keepclose/lmi.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include "keepclose/errors.hpp"

namespace keepclose {

int SymVar::index(int i, int j) const {
  if (i > j) std::swap(i, j);
  // Row-major upper triangle: rows before i contribute n + (n-1) + ... entries.
  return offset + i * n - i * (i - 1) / 2 + (j - i);
}

Mat SymVar::basis(int k) const {
  int i = 0, rem = k;
  while (rem >= n - i) {
    rem -= n - i;
    ++i;
  }
  const int j = i + rem;
  Mat E = Mat::Zero(n, n);
  E(i, j) = 1.0;
  E(j, i) = 1.0;
  return E;
}

Mat SymVar::value(const Vec& x) const {
  Mat P(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) P(i, j) = P(j, i) = x[index(i, j)];
  return P;
}

AffineExpr::AffineExpr(int dim) : constant_(Mat::Zero(dim, dim)) {}

AffineExpr& AffineExpr::add_constant(const Mat& F0) {
  if (F0.rows() != dim() || F0.cols() != dim()) raise(ErrorCode::DimensionMismatch, "constant block size");
  constant_ += 0.5 * (F0 + F0.transpose());
  return *this;
}

AffineExpr& AffineExpr::add_term(int var, const Mat& F) {
  if (F.rows() != dim() || F.cols() != dim()) raise(ErrorCode::DimensionMismatch, "coefficient block size");
  const Mat S = 0.5 * (F + F.transpose());
  auto it = std::lower_bound(terms_.begin(), terms_.end(), var,
                             [](const auto& t, int v) { return t.first < v; });
  if (it != terms_.end() && it->first == var)
    it->second += S;
  else
    terms_.insert(it, {var, S});
  return *this;
}

AffineExpr& AffineExpr::add_congruence(const SymVar& P, const Mat& L, const Mat& R) {
  if (L.rows() != dim() || L.cols() != P.n || R.rows() != P.n || R.cols() != dim())
    raise(ErrorCode::DimensionMismatch, "congruence factor sizes");
  for (int k = 0; k < P.count(); ++k) {
    const Mat T = L * P.basis(k) * R;
    add_term(P.offset + k, T + T.transpose());
  }
  return *this;
}

AffineExpr& AffineExpr::add_sandwich(const SymVar& P, const Mat& L) {
  if (L.rows() != P.n || L.cols() != dim()) raise(ErrorCode::DimensionMismatch, "sandwich factor sizes");
  for (int k = 0; k < P.count(); ++k) add_term(P.offset + k, L.transpose() * P.basis(k) * L);
  return *this;
}

AffineExpr& AffineExpr::add_embedded(const AffineExpr& inner, int at) {
  if (at < 0 || at + inner.dim() > dim()) raise(ErrorCode::DimensionMismatch, "embedded block out of range");
  Mat F0 = Mat::Zero(dim(), dim());
  F0.block(at, at, inner.dim(), inner.dim()) = inner.constant();
  add_constant(F0);
  for (const auto& [var, F] : inner.terms()) {
    Mat big = Mat::Zero(dim(), dim());
    big.block(at, at, inner.dim(), inner.dim()) = F;
    add_term(var, big);
  }
  return *this;
}

Mat AffineExpr::evaluate(const Vec& x) const {
  Mat out = constant_;
  for (const auto& [var, F] : terms_) out += x[var] * F;
  return out;
}

int LmiProblem::add_scalar(const std::string& name) {
  names_.push_back(name);
  return num_vars() - 1;
}

SymVar LmiProblem::add_symmetric(const std::string& name, int n) {
  SymVar v{n, num_vars()};
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) names_.push_back(name + "[" + std::to_string(i) + "," + std::to_string(j) + "]");
  return v;
}

void LmiProblem::add_constraint(std::string label, AffineExpr expr, Sense sense) {
  for (const auto& [var, F] : expr.terms())
    if (var < 0 || var >= num_vars()) raise(ErrorCode::DimensionMismatch, "constraint references unknown variable");
  if (!expr.constant().allFinite()) raise(ErrorCode::NonFiniteEntry, "constraint '" + label + "' is not finite");
  constraints_.push_back({std::move(label), std::move(expr), sense});
}

void LmiProblem::set_objective(int var, double coefficient) {
  if (var < 0 || var >= num_vars()) raise(ErrorCode::DimensionMismatch, "objective references unknown variable");
  objective_.emplace_back(var, coefficient);
}

Vec LmiProblem::objective() const {
  Vec c = Vec::Zero(num_vars());
  for (const auto& [var, v] : objective_) c[var] += v;
  return c;
}

void LmiProblem::dump(std::ostream& out) const {
  const auto old_flags = out.flags();
  const auto old_prec = out.precision();
  out << std::setprecision(17);
  out << "variables " << num_vars() << '\n';
  for (int i = 0; i < num_vars(); ++i) out << "var " << i << ' ' << names_[static_cast<std::size_t>(i)] << '\n';
  const Vec c = objective();
  if (has_objective()) {
    out << "objective";
    for (int i = 0; i < num_vars(); ++i) out << ' ' << c[i];
    out << '\n';
  }
  auto write = [&out](const Mat& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index col = 0; col < m.cols(); ++col) out << (col ? " " : "") << m(r, col);
      out << '\n';
    }
  };
  for (const auto& con : constraints_) {
    out << "constraint " << con.label << " dim " << con.expr.dim() << " sense "
        << (con.sense == Sense::NegativeDefinite ? "lt0" : "gt0") << '\n';
    out << "constant\n";
    write(con.expr.constant());
    for (const auto& [var, F] : con.expr.terms()) {
      out << "coefficient " << var << '\n';
      write(F);
    }
    out << "end\n";
  }
  out.flags(old_flags);
  out.precision(old_prec);
}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Feasible: return "feasible";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::SolverUnknown: return "unknown";
  }
  return "unknown";
}

double constraint_margin(const LmiConstraint& c, const Vec& x) {
  Mat F = c.expr.evaluate(x);
  if (c.sense == Sense::PositiveDefinite) F = -F;
  if (F.size() == 0) return -std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<Mat> es(F, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
  return es.eigenvalues().maxCoeff();
}

double worst_margin(const LmiProblem& prob, const Vec& x) {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& c : prob.constraints()) worst = std::max(worst, constraint_margin(c, x));
  return worst;
}

Mat schur_embed(const Mat& P, const Mat& C2, double s) {
  if (!(s > 0.0)) raise(ErrorCode::NonPositiveS, "Schur block scale must be positive");
  if (P.rows() != P.cols() || C2.cols() != P.rows())
    raise(ErrorCode::DimensionMismatch, "Schur embedding sizes");
  const Eigen::Index n = P.rows(), k = C2.rows();
  Mat out(n + k, n + k);
  out << P, C2.transpose(), C2, s * Mat::Identity(k, k);
  return out;
}

namespace {

// Barrier engine. Every constraint is normalized to G(z) = G0 + sum z_a G_a
// succ 0 over the extended variable z = (x, s); `s_coef` is the coefficient
// of the slack s in that block (identity times s_coef).
struct Block {
  int dim = 0;
  Mat G0;
  std::vector<int> vars;
  std::vector<Mat> coeffs;
};

struct Engine {
  int n = 0;                // number of x variables
  bool with_slack = false;  // z has an extra trailing slack entry
  double bound = 1e7;
  std::vector<Block> blocks;
  Vec cost;  // gradient of the linear objective with respect to z
  int degree = 0;

  int size() const { return n + (with_slack ? 1 : 0); }

  // Returns false if z is outside the barrier domain.
  bool factor(const Vec& z, std::vector<Eigen::LLT<Mat>>& chol) const {
    chol.resize(blocks.size());
    for (std::size_t j = 0; j < blocks.size(); ++j) {
      const Block& b = blocks[j];
      Mat G = b.G0;
      for (std::size_t a = 0; a < b.vars.size(); ++a) G += z[b.vars[a]] * b.coeffs[a];
      chol[j].compute(G);
      if (chol[j].info() != Eigen::Success) return false;
      const auto& L = chol[j].matrixL();
      for (int i = 0; i < b.dim; ++i)
        if (!(L(i, i) > 0.0) || !std::isfinite(L(i, i))) return false;
    }
    for (int i = 0; i < n; ++i)
      if (!(std::abs(z[i]) < bound)) return false;
    return true;
  }

  double value(const Vec& z, double t, const std::vector<Eigen::LLT<Mat>>& chol) const {
    double f = t * cost.dot(z);
    for (std::size_t j = 0; j < blocks.size(); ++j) {
      const auto& L = chol[j].matrixLLT();
      for (int i = 0; i < blocks[j].dim; ++i) f -= 2.0 * std::log(L(i, i));
    }
    for (int i = 0; i < n; ++i) f -= std::log(bound - z[i]) + std::log(bound + z[i]);
    return f;
  }

  void derivatives(const Vec& z, double t, const std::vector<Eigen::LLT<Mat>>& chol, Vec& g, Mat& H) const {
    const int N = size();
    g = t * cost;
    H = Mat::Zero(N, N);
    for (std::size_t j = 0; j < blocks.size(); ++j) {
      const Block& b = blocks[j];
      const auto L = chol[j].matrixL();
      std::vector<Mat> X(b.vars.size());
      for (std::size_t a = 0; a < b.vars.size(); ++a) {
        Mat Y = L.solve(b.coeffs[a]);
        X[a] = L.solve(Y.transpose());
        g[b.vars[a]] -= X[a].trace();
      }
      for (std::size_t a = 0; a < b.vars.size(); ++a)
        for (std::size_t c = a; c < b.vars.size(); ++c) {
          const double h = X[a].cwiseProduct(X[c].transpose()).sum();
          H(b.vars[a], b.vars[c]) += h;
          if (b.vars[a] != b.vars[c]) H(b.vars[c], b.vars[a]) += h;
        }
    }
    for (int i = 0; i < n; ++i) {
      const double up = 1.0 / (bound - z[i]), dn = 1.0 / (bound + z[i]);
      g[i] += up - dn;
      H(i, i) += up * up + dn * dn;
    }
  }

  // Damped Newton centering. Returns the final Newton decrement squared, or
  // a negative value on numerical failure. `stop` may end centering early.
  template <class Stop>
  double center(Vec& z, double t, int max_steps, int& steps, Stop&& stop) const {
    std::vector<Eigen::LLT<Mat>> chol, trial_chol;
    if (!factor(z, chol)) return -1.0;
    double f = value(z, t, chol);
    Vec g;
    Mat H;
    for (int it = 0; it < max_steps; ++it) {
      derivatives(z, t, chol, g, H);
      const double scale = std::max(1.0, H.diagonal().cwiseAbs().maxCoeff());
      Eigen::LDLT<Mat> ldlt(H);
      Vec d = ldlt.solve(-g);
      if (ldlt.info() != Eigen::Success || !d.allFinite()) {
        Mat Hr = H + 1e-12 * scale * Mat::Identity(H.rows(), H.cols());
        d = Hr.ldlt().solve(-g);
        if (!d.allFinite()) return -1.0;
      }
      const double dec2 = -g.dot(d);
      if (!(dec2 >= 0.0)) return -1.0;
      if (dec2 < 1e-10) return dec2;
      double step = 1.0;
      bool moved = false;
      for (int ls = 0; ls < 80; ++ls) {
        const Vec trial = z + step * d;
        if (factor(trial, trial_chol)) {
          const double ft = value(trial, t, trial_chol);
          if (ft <= f - 0.25 * step * dec2 || (ls > 60 && ft <= f)) {
            z = trial;
            chol.swap(trial_chol);
            f = ft;
            moved = true;
            break;
          }
        }
        step *= 0.5;
      }
      ++steps;
      if (!moved) return dec2;
      if (stop(z)) return 0.0;
    }
    return 0.0;
  }
};

void add_blocks(Engine& e, const LmiProblem& prob, double shift, bool slack) {
  for (const auto& con : prob.constraints()) {
    const double sign = con.sense == Sense::NegativeDefinite ? -1.0 : 1.0;
    Block b;
    b.dim = con.expr.dim();
    if (b.dim == 0) continue;
    b.G0 = sign * con.expr.constant() - shift * Mat::Identity(b.dim, b.dim);
    for (const auto& [var, F] : con.expr.terms()) {
      b.vars.push_back(var);
      b.coeffs.push_back(sign * F);
    }
    if (slack) {
      b.vars.push_back(e.n);
      b.coeffs.push_back(Mat::Identity(b.dim, b.dim));
    }
    e.degree += b.dim;
    e.blocks.push_back(std::move(b));
  }
  e.degree += 2 * e.n;
}

// Phase I: minimize s subject to G_j(x) + s I succ 0. Stops as soon as the
// slack certifies margin `target`, or when the duality bound proves that no
// point reaches margin `tol`.
SolveResult phase_one(const LmiProblem& prob, const SolverSettings& st, double target) {
  Engine e;
  e.n = prob.num_vars();
  e.with_slack = true;
  e.bound = st.var_bound;
  add_blocks(e, prob, 0.0, true);
  e.cost = Vec::Zero(e.size());
  e.cost[e.n] = 1.0;

  SolveResult res;
  Vec z = Vec::Zero(e.size());
  double worst = 0.0;
  for (const auto& b : e.blocks) {
    Eigen::SelfAdjointEigenSolver<Mat> es(b.G0, Eigen::EigenvaluesOnly);
    worst = std::max(worst, -es.eigenvalues().minCoeff());
  }
  z[e.n] = worst + 1.0;
  if (e.blocks.empty()) {
    res.status = SolveStatus::Feasible;
    res.witness.x = Vec::Zero(e.n);
    res.witness.margin = -std::numeric_limits<double>::infinity();
    return res;
  }

  double t = 1.0 / std::max(1.0, z[e.n]);
  const double tol = st.tol_feas;
  for (int outer = 0; outer < st.max_outer; ++outer) {
    const double dec2 = e.center(z, t, st.max_newton, res.newton_steps,
                                 [&](const Vec& zz) { return zz[e.n] < -target; });
    const double s = z[e.n];
    if (s < -target || (dec2 >= 0.0 && s < -tol && e.degree / t < 1e-3 * tol)) {
      res.status = SolveStatus::Feasible;
      break;
    }
    if (dec2 < 0.0) {
      res.status = SolveStatus::SolverUnknown;
      break;
    }
    const double gap = (e.degree / t) * (1.0 + std::sqrt(dec2)) + 1e-14 * std::abs(s);
    res.lower_bound = -(s - gap);
    if (dec2 < 1e-6 && s - gap > -tol) {
      res.status = SolveStatus::Infeasible;
      break;
    }
    if (e.degree / t < 1e-13 * std::max(1.0, std::abs(s))) {
      res.status = s < -tol ? SolveStatus::Feasible : SolveStatus::SolverUnknown;
      break;
    }
    t *= st.t_growth;
  }
  res.witness.x = z.head(e.n);
  res.witness.margin = worst_margin(prob, res.witness.x);
  if (res.status == SolveStatus::Feasible && !(res.witness.margin <= -tol)) res.status = SolveStatus::SolverUnknown;
  return res;
}

}  // namespace

SolveResult is_feasible(const LmiProblem& prob, const SolverSettings& settings) {
  return phase_one(prob, settings, 2.0 * settings.tol_feas);
}

SolveResult minimize(const LmiProblem& prob, const SolverSettings& settings) {
  const double tol = settings.tol_feas;
  SolveResult start = phase_one(prob, settings, 4.0 * tol);
  if (start.status != SolveStatus::Feasible) return start;

  Engine e;
  e.n = prob.num_vars();
  e.with_slack = false;
  e.bound = settings.var_bound;
  add_blocks(e, prob, tol, false);
  e.cost = prob.objective();

  Vec x = start.witness.x;
  SolveResult res;
  res.newton_steps = start.newton_steps;
  const double c0 = std::abs(e.cost.dot(x));
  double t = e.degree / std::max(1e-12, c0 > 0 ? c0 : 1.0);
  res.status = SolveStatus::Feasible;
  for (int outer = 0; outer < settings.max_outer; ++outer) {
    Vec trial = x;
    const double dec2 = e.center(trial, t, settings.max_newton, res.newton_steps, [](const Vec&) { return false; });
    if (dec2 < 0.0) break;
    x = trial;
    const double obj = e.cost.dot(x);
    const double gap = e.degree / t;
    res.lower_bound = obj - gap * (1.0 + std::sqrt(dec2));
    if (gap <= settings.objective_tol * std::max(1e-12, std::abs(obj))) break;
    t *= settings.t_growth;
  }
  res.witness.x = x;
  res.witness.margin = worst_margin(prob, x);
  res.objective = e.cost.dot(x);
  if (!(res.witness.margin <= -0.5 * tol)) res.status = SolveStatus::SolverUnknown;
  return res;
}

}  // namespace keepclose
