#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "keepclose/sysmodels.hpp"

namespace keepclose {

enum class Activation { Tanh, Sigmoid, Linear };

Activation activation_from_string(const std::string& name);
const char* to_string(Activation act);

struct Layer {
  Mat W;
  Vec b;
  Activation act = Activation::Linear;
};

class MlpController {
 public:
  MlpController() = default;
  explicit MlpController(std::vector<Layer> layers);

  const std::vector<Layer>& layers() const { return layers_; }
  int input_dim() const { return input_dim_; }
  int output_dim() const { return output_dim_; }

 private:
  std::vector<Layer> layers_;
  int input_dim_ = 0;
  int output_dim_ = 0;
};

using VectorMap = std::function<Vec(const Vec&)>;

Vec forward(const MlpController& net, const Vec& y);
Mat jacobian(const MlpController& net, const Vec& y);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

Interval operator+(Interval a, Interval b);
Interval operator*(Interval a, Interval b);

struct IntervalMatrix {
  Mat lo;
  Mat hi;

  static IntervalMatrix make(Mat lo, Mat hi);
  static IntervalMatrix point(const Mat& m);
  bool contains(const Mat& m, double tol = 0.0) const;
  int free_entries() const;
  Eigen::Index rows() const { return lo.rows(); }
  Eigen::Index cols() const { return lo.cols(); }
};

/// Sound entrywise enclosure of the Jacobian of `net` over the box [lo, hi],
/// obtained by forward interval propagation of the layer Jacobian products.
/// `splits` > 1 partitions every input axis into that many cells and unions
/// the per-cell enclosures.
IntervalMatrix jacobian_box(const MlpController& net, const Vec& lo, const Vec& hi, int splits = 1);

/// Corner matrices of an interval matrix in lexicographic order over the
/// row-major list of nondegenerate entries (the first entry varies slowest).
std::vector<Mat> vertices(const IntervalMatrix& iv, std::size_t cap = 4096);

enum class EpsilonKind {
  NormBound,     // ||eps(y)|| <= c
  RelativeNorm,  // ||eps(y)|| <= c ||y||
  Sector,        // alpha_i y_k(i) <= eps_i(y) <= beta_i y_k(i)
};

struct EpsilonOptions {
  EpsilonKind kind = EpsilonKind::NormBound;
  double margin = 0.05;
  /// Sector kind: input index each output's sector is measured against.
  std::vector<int> sector_input;
  /// Upper bound on evaluated samples; denser tensor grids switch to a
  /// deterministic Halton sequence of this size.
  std::size_t max_samples = 2'000'000;
};

struct EpsilonBound {
  EpsilonKind kind = EpsilonKind::NormBound;
  double c = 0.0;
  Vec alpha;
  Vec beta;
  Vec box_lo;
  Vec box_hi;
  int grid_density = 0;
  std::size_t samples = 0;
  double max_sampled = 0.0;
};

EpsilonBound estimate_epsilon(const VectorMap& net, const VectorMap& ideal, const Vec& lo,
                              const Vec& hi, int grid_density, const EpsilonOptions& options = {});
EpsilonBound estimate_epsilon(const MlpController& net, const VectorMap& ideal, const Vec& lo,
                              const Vec& hi, int grid_density, const EpsilonOptions& options = {});

struct Architecture {
  int input_dim = 1;
  std::vector<int> hidden;
  std::vector<Activation> hidden_act;
  int output_dim = 1;
  /// Zero biases, plus tied biases after sigmoid layers, so the net is odd.
  bool odd = false;
  /// Optional 0/1 masks per layer (same shape as W); empty means dense.
  std::vector<Mat> masks;
};

struct FitOptions {
  int grid_per_axis = 101;       // tensor grid for inputs up to two dimensions
  std::size_t samples = 4096;    // Halton samples for higher dimensions
  int epochs = 20000;
  double learning_rate = 1e-2;
  double final_learning_rate = 1e-5;
  int patience = 2000;
  double target_loss = 1e-20;
};

MlpController fit_to_teacher(const VectorMap& ideal, const Vec& lo, const Vec& hi,
                             const Architecture& arch, std::uint64_t seed, const FitOptions& options = {});

MlpController weights_from_json(const nlohmann::json& j);
nlohmann::json weights_to_json(const MlpController& net);
MlpController load_weights(const std::string& path);
void save_weights(const MlpController& net, const std::string& path);

/// Van der Corput radical inverse, used for deterministic space filling.
double radical_inverse(std::uint64_t index, int base);

}  // namespace keepclose
