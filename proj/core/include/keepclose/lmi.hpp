#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "keepclose/sysmodels.hpp"

namespace keepclose {

// Symmetric matrix variable occupying n(n+1)/2 consecutive decision entries
// (upper triangle, row-major).
struct SymVar {
  int n = 0;
  int offset = 0;

  int count() const { return n * (n + 1) / 2; }
  int index(int i, int j) const;
  Mat basis(int k) const;  // k in [0, count())
  Mat value(const Vec& x) const;
};

// F(x) = F0 + sum_i x_i F_i with symmetric coefficients.
class AffineExpr {
 public:
  AffineExpr() = default;
  explicit AffineExpr(int dim);

  int dim() const { return static_cast<int>(constant_.rows()); }
  const Mat& constant() const { return constant_; }
  const std::vector<std::pair<int, Mat>>& terms() const { return terms_; }

  AffineExpr& add_constant(const Mat& F0);
  AffineExpr& add_term(int var, const Mat& F);
  // L P R + (L P R)'; L is dim x n, R is n x dim.
  AffineExpr& add_congruence(const SymVar& P, const Mat& L, const Mat& R);
  // L' P L; L is n x dim.
  AffineExpr& add_sandwich(const SymVar& P, const Mat& L);
  // Places `inner` at rows/cols [at, at + inner.dim()).
  AffineExpr& add_embedded(const AffineExpr& inner, int at);

  Mat evaluate(const Vec& x) const;

 private:
  Mat constant_;
  std::vector<std::pair<int, Mat>> terms_;  // sorted by variable index
};

enum class Sense { NegativeDefinite, PositiveDefinite };

struct LmiConstraint {
  std::string label;
  AffineExpr expr;
  Sense sense = Sense::NegativeDefinite;
};

class LmiProblem {
 public:
  int add_scalar(const std::string& name);
  SymVar add_symmetric(const std::string& name, int n);
  void add_constraint(std::string label, AffineExpr expr, Sense sense);
  void set_objective(int var, double coefficient);

  int num_vars() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<LmiConstraint>& constraints() const { return constraints_; }
  Vec objective() const;
  bool has_objective() const { return !objective_.empty(); }

  // Plain-text listing: every constraint with its constant and per-variable
  // coefficient matrices.
  void dump(std::ostream& out) const;

 private:
  std::vector<std::string> names_;
  std::vector<LmiConstraint> constraints_;
  std::vector<std::pair<int, double>> objective_;
};

enum class SolveStatus { Feasible, Infeasible, SolverUnknown };
const char* to_string(SolveStatus s);

struct Witness {
  Vec x;
  // Largest eigenvalue over all constraints written in "< 0" form.
  double margin = 0.0;
};

struct SolverSettings {
  double tol_feas = 1e-7;
  double var_bound = 1e7;
  double t_growth = 10.0;
  int max_outer = 120;
  int max_newton = 200;
  double objective_tol = 1e-9;  // relative duality gap for minimize()
};

struct SolveResult {
  SolveStatus status = SolveStatus::SolverUnknown;
  Witness witness;
  double lower_bound = 0.0;  // certified lower bound on the best achievable margin
  double objective = 0.0;
  int newton_steps = 0;
};

// Decides whether every constraint holds with eigenvalue margin tol_feas.
SolveResult is_feasible(const LmiProblem& prob, const SolverSettings& settings = {});

// Minimizes the linear objective subject to the constraints with margin
// tol_feas; status is Infeasible when no margin-feasible point exists.
SolveResult minimize(const LmiProblem& prob, const SolverSettings& settings = {});

// Largest eigenvalue of the constraint in "< 0" form at x.
double constraint_margin(const LmiConstraint& c, const Vec& x);
double worst_margin(const LmiProblem& prob, const Vec& x);

// [[P, C2'], [C2, s I]]
Mat schur_embed(const Mat& P, const Mat& C2, double s);

}  // namespace keepclose
