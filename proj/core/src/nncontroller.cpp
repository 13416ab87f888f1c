#include "keepclose/nncontroller.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "keepclose/errors.hpp"

namespace keepclose {

namespace {

double act_value(Activation a, double z) {
  switch (a) {
    case Activation::Tanh: return std::tanh(z);
    case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-z));
    case Activation::Linear: return z;
  }
  return z;
}

double act_slope(Activation a, double z) {
  switch (a) {
    case Activation::Tanh: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
    case Activation::Sigmoid: {
      const double s = 1.0 / (1.0 + std::exp(-z));
      return s * (1.0 - s);
    }
    case Activation::Linear: return 1.0;
  }
  return 1.0;
}

// Both supported nonlinear slopes are even and decreasing in |z|.
Interval act_slope_range(Activation a, Interval z) {
  if (a == Activation::Linear) return {1.0, 1.0};
  const double far = std::max(std::abs(z.lo), std::abs(z.hi));
  const double near = (z.lo <= 0.0 && z.hi >= 0.0) ? 0.0 : std::min(std::abs(z.lo), std::abs(z.hi));
  return {act_slope(a, far), act_slope(a, near)};
}

void check_input(const MlpController& net, const Vec& y) {
  if (y.size() != net.input_dim())
    raise(ErrorCode::DimensionMismatch, "controller expects input of size " +
                                            std::to_string(net.input_dim()) + ", got " +
                                            std::to_string(y.size()));
}

IntervalMatrix jacobian_cell(const MlpController& net, const Vec& lo, const Vec& hi) {
  const Eigen::Index n = lo.size();
  Vec a_c = 0.5 * (lo + hi);
  Vec a_r = 0.5 * (hi - lo);
  Mat J_lo = Mat::Identity(n, n);
  Mat J_hi = Mat::Identity(n, n);
  for (const auto& layer : net.layers()) {
    const Mat absW = layer.W.cwiseAbs();
    const Vec z_c = layer.W * a_c + layer.b;
    const Vec z_r = absW * a_r;
    const Mat Jc = 0.5 * (J_lo + J_hi);
    const Mat Jr = 0.5 * (J_hi - J_lo);
    const Mat Jz_c = layer.W * Jc;
    const Mat Jz_r = absW * Jr;
    const Eigen::Index m = layer.W.rows();
    Vec next_lo(m), next_hi(m);
    J_lo.resize(m, n);
    J_hi.resize(m, n);
    for (Eigen::Index i = 0; i < m; ++i) {
      const Interval z{z_c[i] - z_r[i], z_c[i] + z_r[i]};
      next_lo[i] = act_value(layer.act, z.lo);
      next_hi[i] = act_value(layer.act, z.hi);
      const Interval d = act_slope_range(layer.act, z);
      for (Eigen::Index j = 0; j < n; ++j) {
        const Interval e = d * Interval{Jz_c(i, j) - Jz_r(i, j), Jz_c(i, j) + Jz_r(i, j)};
        J_lo(i, j) = e.lo;
        J_hi(i, j) = e.hi;
      }
    }
    a_c = 0.5 * (next_lo + next_hi);
    a_r = 0.5 * (next_hi - next_lo);
  }
  return {J_lo, J_hi};
}

double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

constexpr int kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};

// Sample points (one per column) covering [lo, hi]: a tensor grid when it
// fits within max_points, otherwise a Halton sequence that includes the
// box center and corners of each axis.
Mat sample_box(const Vec& lo, const Vec& hi, int grid, std::size_t max_points) {
  const Eigen::Index d = lo.size();
  double total = 1.0;
  for (Eigen::Index i = 0; i < d; ++i) total *= (lo[i] < hi[i]) ? grid : 1;
  if (total <= static_cast<double>(max_points)) {
    const auto N = static_cast<Eigen::Index>(total);
    Mat pts(d, N);
    for (Eigen::Index k = 0; k < N; ++k) {
      Eigen::Index rem = k;
      for (Eigen::Index i = d - 1; i >= 0; --i) {
        if (lo[i] < hi[i]) {
          const Eigen::Index idx = rem % grid;
          rem /= grid;
          pts(i, k) = lo[i] + (hi[i] - lo[i]) * static_cast<double>(idx) / (grid - 1);
        } else {
          pts(i, k) = lo[i];
        }
      }
    }
    return pts;
  }
  if (d > static_cast<Eigen::Index>(std::size(kPrimes)))
    raise(ErrorCode::DimensionMismatch, "sampling supports at most 16 input dimensions");
  const auto N = static_cast<Eigen::Index>(max_points);
  Mat pts(d, N);
  for (Eigen::Index k = 0; k < N; ++k)
    for (Eigen::Index i = 0; i < d; ++i)
      pts(i, k) = lo[i] + (hi[i] - lo[i]) * radical_inverse(static_cast<std::uint64_t>(k), kPrimes[i]);
  return pts;
}

}  // namespace

Activation activation_from_string(const std::string& name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "sigmoid") return Activation::Sigmoid;
  if (name == "linear") return Activation::Linear;
  raise(ErrorCode::InputError, "unsupported activation '" + name + "'");
}

const char* to_string(Activation act) {
  switch (act) {
    case Activation::Tanh: return "tanh";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Linear: return "linear";
  }
  return "linear";
}

MlpController::MlpController(std::vector<Layer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) raise(ErrorCode::EmptyList, "controller needs at least one layer");
  input_dim_ = static_cast<int>(layers_.front().W.cols());
  Eigen::Index width = input_dim_;
  for (const auto& l : layers_) {
    if (l.W.cols() != width || l.b.size() != l.W.rows())
      raise(ErrorCode::DimensionMismatch, "layer dimensions do not chain");
    if (!l.W.allFinite() || !l.b.allFinite()) raise(ErrorCode::NonFiniteEntry, "non-finite weight");
    width = l.W.rows();
  }
  output_dim_ = static_cast<int>(width);
}

Vec forward(const MlpController& net, const Vec& y) {
  check_input(net, y);
  Vec a = y;
  for (const auto& l : net.layers()) {
    Vec z = l.W * a + l.b;
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = act_value(l.act, z[i]);
    a = std::move(z);
  }
  return a;
}

Mat jacobian(const MlpController& net, const Vec& y) {
  check_input(net, y);
  Vec a = y;
  Mat J = Mat::Identity(y.size(), y.size());
  for (const auto& l : net.layers()) {
    Vec z = l.W * a + l.b;
    Mat Jz = l.W * J;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      Jz.row(i) *= act_slope(l.act, z[i]);
      z[i] = act_value(l.act, z[i]);
    }
    a = std::move(z);
    J = std::move(Jz);
  }
  return J;
}

Interval operator+(Interval a, Interval b) { return {a.lo + b.lo, a.hi + b.hi}; }

Interval operator*(Interval a, Interval b) {
  const double p1 = a.lo * b.lo, p2 = a.lo * b.hi, p3 = a.hi * b.lo, p4 = a.hi * b.hi;
  return {std::min({p1, p2, p3, p4}), std::max({p1, p2, p3, p4})};
}

IntervalMatrix IntervalMatrix::make(Mat lo, Mat hi) {
  if (lo.rows() != hi.rows() || lo.cols() != hi.cols())
    raise(ErrorCode::DimensionMismatch, "interval bounds differ in shape");
  if ((lo.array() > hi.array()).any()) raise(ErrorCode::BoundOrder, "interval lower bound exceeds upper");
  return {std::move(lo), std::move(hi)};
}

IntervalMatrix IntervalMatrix::point(const Mat& m) { return {m, m}; }

bool IntervalMatrix::contains(const Mat& m, double tol) const {
  if (m.rows() != lo.rows() || m.cols() != lo.cols()) return false;
  return ((m.array() >= lo.array() - tol) && (m.array() <= hi.array() + tol)).all();
}

int IntervalMatrix::free_entries() const { return static_cast<int>((lo.array() < hi.array()).count()); }

IntervalMatrix jacobian_box(const MlpController& net, const Vec& lo, const Vec& hi, int splits) {
  if (lo.size() != net.input_dim() || hi.size() != net.input_dim())
    raise(ErrorCode::DimensionMismatch, "box dimension differs from controller input");
  if ((lo.array() > hi.array()).any()) raise(ErrorCode::BoundOrder, "box lower bound exceeds upper");
  splits = std::max(1, splits);
  const Eigen::Index d = lo.size();
  Eigen::Index cells = 1;
  for (Eigen::Index i = 0; i < d; ++i) cells *= splits;
  IntervalMatrix out;
  for (Eigen::Index k = 0; k < cells; ++k) {
    Vec clo(d), chi(d);
    Eigen::Index rem = k;
    for (Eigen::Index i = 0; i < d; ++i) {
      const Eigen::Index idx = rem % splits;
      rem /= splits;
      const double w = (hi[i] - lo[i]) / splits;
      clo[i] = lo[i] + w * idx;
      chi[i] = (idx == splits - 1) ? hi[i] : lo[i] + w * (idx + 1);
    }
    IntervalMatrix cell = jacobian_cell(net, clo, chi);
    if (k == 0) {
      out = std::move(cell);
    } else {
      out.lo = out.lo.cwiseMin(cell.lo);
      out.hi = out.hi.cwiseMax(cell.hi);
    }
  }
  return out;
}

std::vector<Mat> vertices(const IntervalMatrix& iv, std::size_t cap) {
  if ((iv.lo.array() > iv.hi.array()).any()) raise(ErrorCode::BoundOrder, "interval lower bound exceeds upper");
  std::vector<std::pair<Eigen::Index, Eigen::Index>> free;
  for (Eigen::Index r = 0; r < iv.lo.rows(); ++r)
    for (Eigen::Index c = 0; c < iv.lo.cols(); ++c)
      if (iv.lo(r, c) < iv.hi(r, c)) free.emplace_back(r, c);
  if (free.size() >= 63 || (std::size_t{1} << free.size()) > cap)
    raise(ErrorCode::VertexExplosion, std::to_string(free.size()) + " free entries exceed vertex cap " +
                                          std::to_string(cap));
  const std::size_t count = std::size_t{1} << free.size();
  std::vector<Mat> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    Mat v = iv.lo;
    for (std::size_t j = 0; j < free.size(); ++j) {
      const bool upper = (k >> (free.size() - 1 - j)) & 1U;
      const auto [r, c] = free[j];
      v(r, c) = upper ? iv.hi(r, c) : iv.lo(r, c);
    }
    out.push_back(std::move(v));
  }
  return out;
}

double radical_inverse(std::uint64_t index, int base) {
  double inv = 1.0 / base, f = inv, x = 0.0;
  while (index > 0) {
    x += f * static_cast<double>(index % base);
    index /= base;
    f *= inv;
  }
  return x;
}

EpsilonBound estimate_epsilon(const VectorMap& net, const VectorMap& ideal, const Vec& lo,
                              const Vec& hi, int grid_density, const EpsilonOptions& options) {
  if (grid_density < 100) raise(ErrorCode::GridTooCoarse, "grid density below 100 points per axis");
  if (lo.size() != hi.size()) raise(ErrorCode::DimensionMismatch, "box bounds differ in length");
  if ((lo.array() > hi.array()).any()) raise(ErrorCode::BoundOrder, "box lower bound exceeds upper");
  const Mat pts = sample_box(lo, hi, grid_density, options.max_samples);
  EpsilonBound out;
  out.kind = options.kind;
  out.box_lo = lo;
  out.box_hi = hi;
  out.grid_density = grid_density;
  out.samples = static_cast<std::size_t>(pts.cols());

  const double scale = std::max(1.0, std::max(lo.cwiseAbs().maxCoeff(), hi.cwiseAbs().maxCoeff()));
  const double tiny = 1e-9 * scale;
  double worst = 0.0;
  Vec amin, amax;
  bool have_ratio = false;
  for (Eigen::Index k = 0; k < pts.cols(); ++k) {
    const Vec y = pts.col(k);
    const Vec e = net(y) - ideal(y);
    if (!e.allFinite()) raise(ErrorCode::NonFiniteEntry, "controller error is not finite on the box");
    switch (options.kind) {
      case EpsilonKind::NormBound:
        worst = std::max(worst, e.norm());
        break;
      case EpsilonKind::RelativeNorm: {
        const double ny = y.norm();
        if (ny > tiny) worst = std::max(worst, e.norm() / ny);
        break;
      }
      case EpsilonKind::Sector: {
        if (options.sector_input.size() != static_cast<std::size_t>(e.size()))
          raise(ErrorCode::DimensionMismatch, "sector fit needs one input index per output");
        if (!have_ratio) {
          amin = Vec::Constant(e.size(), std::numeric_limits<double>::infinity());
          amax = Vec::Constant(e.size(), -std::numeric_limits<double>::infinity());
          have_ratio = true;
        }
        for (Eigen::Index i = 0; i < e.size(); ++i) {
          const double p = y[options.sector_input[static_cast<std::size_t>(i)]];
          if (std::abs(p) <= tiny) continue;
          const double ratio = e[i] / p;
          amin[i] = std::min(amin[i], ratio);
          amax[i] = std::max(amax[i], ratio);
        }
        break;
      }
    }
  }
  const double grow = 1.0 + options.margin;
  if (options.kind == EpsilonKind::Sector) {
    if (!have_ratio || !amin.allFinite() || !amax.allFinite())
      raise(ErrorCode::GridTooCoarse, "no usable samples for the sector fit");
    out.alpha.resize(amin.size());
    out.beta.resize(amin.size());
    for (Eigen::Index i = 0; i < amin.size(); ++i) {
      const double s = std::max(std::abs(amin[i]), std::abs(amax[i]));
      out.alpha[i] = amin[i] - options.margin * s;
      out.beta[i] = amax[i] + options.margin * s;
      worst = std::max(worst, s);
    }
  } else {
    out.c = grow * worst;
  }
  out.max_sampled = worst;
  return out;
}

EpsilonBound estimate_epsilon(const MlpController& net, const VectorMap& ideal, const Vec& lo,
                              const Vec& hi, int grid_density, const EpsilonOptions& options) {
  return estimate_epsilon([&net](const Vec& y) { return forward(net, y); }, ideal, lo, hi, grid_density,
                          options);
}

MlpController fit_to_teacher(const VectorMap& ideal, const Vec& lo, const Vec& hi,
                             const Architecture& arch, std::uint64_t seed, const FitOptions& options) {
  if (lo.size() != arch.input_dim || hi.size() != arch.input_dim)
    raise(ErrorCode::DimensionMismatch, "box dimension differs from architecture input");
  if (arch.hidden.size() != arch.hidden_act.size())
    raise(ErrorCode::DimensionMismatch, "one activation per hidden layer required");
  const std::size_t L = arch.hidden.size() + 1;
  if (!arch.masks.empty() && arch.masks.size() != L)
    raise(ErrorCode::DimensionMismatch, "one mask per layer required");

  // Normalized coordinates: inputs scaled to [-1, 1], outputs to unit peak.
  Vec center = 0.5 * (lo + hi);
  Vec half = 0.5 * (hi - lo);
  if (arch.odd) {
    center.setZero();
    half = lo.cwiseAbs().cwiseMax(hi.cwiseAbs());
  }
  for (Eigen::Index i = 0; i < half.size(); ++i)
    if (half[i] <= 0.0) half[i] = 1.0;

  const Mat X = arch.input_dim <= 2
                    ? sample_box(lo, hi, options.grid_per_axis, std::numeric_limits<std::size_t>::max())
                    : sample_box(lo, hi, 1000, options.samples);
  const Eigen::Index N = X.cols();
  Mat Y(arch.output_dim, N);
  for (Eigen::Index k = 0; k < N; ++k) {
    const Vec t = ideal(X.col(k));
    if (t.size() != arch.output_dim) raise(ErrorCode::DimensionMismatch, "teacher output size mismatch");
    Y.col(k) = t;
  }
  Vec out_scale = Y.cwiseAbs().rowwise().maxCoeff();
  for (Eigen::Index i = 0; i < out_scale.size(); ++i)
    if (out_scale[i] <= 0.0) out_scale[i] = 1.0;
  const Mat Xn = (X.colwise() - center).array().colwise() / half.array();
  const Mat Yn = Y.array().colwise() / out_scale.array();

  std::vector<int> widths{arch.input_dim};
  for (int h : arch.hidden) widths.push_back(h);
  widths.push_back(arch.output_dim);
  std::vector<Activation> acts = arch.hidden_act;
  acts.push_back(Activation::Linear);

  std::mt19937_64 rng(seed);
  std::vector<Mat> W(L), mW(L), vW(L), mask(L);
  std::vector<Vec> b(L), mb(L), vb(L);
  std::vector<bool> tied(L, false);
  for (std::size_t l = 0; l < L; ++l) {
    const int fan_in = widths[l], fan_out = widths[l + 1];
    mask[l] = arch.masks.empty() ? Mat::Ones(fan_out, fan_in) : arch.masks[l];
    if (mask[l].rows() != fan_out || mask[l].cols() != fan_in)
      raise(ErrorCode::DimensionMismatch, "mask shape differs from layer shape");
    const Vec active_in = mask[l].rowwise().sum();
    W[l].resize(fan_out, fan_in);
    for (int r = 0; r < fan_out; ++r) {
      const double limit = std::sqrt(6.0 / (std::max(1.0, active_in[r]) + fan_out));
      for (int c = 0; c < fan_in; ++c) W[l](r, c) = (2.0 * unit_uniform(rng) - 1.0) * limit * mask[l](r, c);
    }
    b[l] = Vec::Zero(fan_out);
    tied[l] = arch.odd && l > 0 && acts[l - 1] == Activation::Sigmoid;
    mW[l] = vW[l] = Mat::Zero(fan_out, fan_in);
    mb[l] = vb[l] = Vec::Zero(fan_out);
  }
  auto bias = [&](std::size_t l) -> Vec {
    if (tied[l]) return -0.5 * W[l].rowwise().sum();
    return b[l];
  };

  std::vector<Mat> Z(L), A(L + 1);
  auto loss_of = [&]() {
    A[0] = Xn;
    for (std::size_t l = 0; l < L; ++l) {
      Z[l] = (W[l] * A[l]).colwise() + bias(l);
      A[l + 1] = Z[l].unaryExpr([a = acts[l]](double z) { return act_value(a, z); });
    }
    return (A[L] - Yn).squaredNorm() / static_cast<double>(N * arch.output_dim);
  };

  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-12;
  double best = std::numeric_limits<double>::infinity();
  const double initial = loss_of();
  if (!std::isfinite(initial)) raise(ErrorCode::Diverged, "initial loss is not finite");
  std::vector<Mat> bestW = W;
  std::vector<Vec> bestb = b;
  int since_best = 0;
  const double decay = std::log(options.final_learning_rate / options.learning_rate) /
                       std::max(1, options.epochs);
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    const double loss = loss_of();
    if (!std::isfinite(loss)) raise(ErrorCode::Diverged, "loss became non-finite");
    if (loss < best * (1.0 - 1e-9)) {
      best = loss;
      bestW = W;
      bestb = b;
      since_best = 0;
    } else if (++since_best > options.patience) {
      break;
    }
    if (best <= options.target_loss) break;

    Mat delta = (A[L] - Yn) * (2.0 / static_cast<double>(N * arch.output_dim));
    const double lr = options.learning_rate * std::exp(decay * epoch);
    const double c1 = 1.0 - std::pow(beta1, epoch + 1), c2 = 1.0 - std::pow(beta2, epoch + 1);
    for (std::size_t li = L; li-- > 0;) {
      const Mat dZ = delta.array() * Z[li].unaryExpr([a = acts[li]](double z) { return act_slope(a, z); }).array();
      Mat gW = (dZ * A[li].transpose()).cwiseProduct(mask[li]);
      Vec gb = dZ.rowwise().sum();
      if (tied[li]) {
        gW -= 0.5 * gb * Eigen::RowVectorXd::Ones(W[li].cols());
        gW = gW.cwiseProduct(mask[li]);
      }
      if (li > 0) delta = W[li].transpose() * dZ;
      mW[li] = beta1 * mW[li] + (1 - beta1) * gW;
      vW[li] = beta2 * vW[li] + (1 - beta2) * gW.cwiseAbs2();
      W[li] -= (lr * (mW[li] / c1).array() / ((vW[li] / c2).array().sqrt() + eps)).matrix();
      W[li] = W[li].cwiseProduct(mask[li]);
      if (!arch.odd) {
        mb[li] = beta1 * mb[li] + (1 - beta1) * gb;
        vb[li] = beta2 * vb[li] + (1 - beta2) * gb.cwiseAbs2();
        b[li] -= (lr * (mb[li] / c1).array() / ((vb[li] / c2).array().sqrt() + eps)).matrix();
      }
    }
  }
  if (!(best < initial)) raise(ErrorCode::Diverged, "loss did not decrease during training");
  W = bestW;
  b = bestb;

  // Fold the normalization into the first and last layers.
  std::vector<Layer> layers(L);
  for (std::size_t l = 0; l < L; ++l) {
    layers[l].W = W[l];
    layers[l].b = bias(l);
    layers[l].act = acts[l];
  }
  const Mat W0 = layers[0].W * half.cwiseInverse().asDiagonal();
  layers[0].b -= W0 * center;
  layers[0].W = W0;
  layers[L - 1].W = out_scale.asDiagonal() * layers[L - 1].W;
  layers[L - 1].b = out_scale.asDiagonal() * layers[L - 1].b;
  return MlpController(std::move(layers));
}

MlpController weights_from_json(const nlohmann::json& j) {
  if (!j.contains("layers") || !j["layers"].is_array())
    raise(ErrorCode::InputError, "weights JSON needs a 'layers' array");
  std::vector<Layer> layers;
  for (const auto& lj : j["layers"]) {
    Layer l;
    l.W = matrix_from_json(lj.at("W"));
    l.b = vector_from_json(lj.at("b"));
    l.act = activation_from_string(lj.value("act", std::string("linear")));
    layers.push_back(std::move(l));
  }
  return MlpController(std::move(layers));
}

nlohmann::json weights_to_json(const MlpController& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : net.layers())
    layers.push_back({{"W", matrix_to_json(l.W)}, {"b", vector_to_json(l.b)}, {"act", to_string(l.act)}});
  return {{"layers", std::move(layers)}};
}

MlpController load_weights(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::InputError, "cannot open weights file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorCode::InputError, "malformed weights file " + path + ": " + e.what());
  }
  return weights_from_json(j);
}

void save_weights(const MlpController& net, const std::string& path) {
  std::ofstream out(path);
  if (!out) raise(ErrorCode::InputError, "cannot write weights file " + path);
  out << weights_to_json(net).dump(1) << '\n';
}

}  // namespace keepclose
