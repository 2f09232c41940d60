#pragma once

// Minimal dense-network kernel: row-major double tensors, a fixed set of layers with exact
// backward passes, an Adam-style optimizer and finite-difference gradient checking.
//
// Batches are rows: a layer maps a (batch x in) tensor to (batch x out).

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "tidealloc/common.hpp"

namespace tidealloc::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class Tensor2 {
 public:
  Tensor2() = default;
  Tensor2(std::size_t rows, std::size_t cols, double fill = 0.0);
  explicit Tensor2(Matrix m) : m_(std::move(m)) {}
  static Tensor2 from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return static_cast<std::size_t>(m_.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(m_.cols()); }
  std::size_t size() const { return static_cast<std::size_t>(m_.size()); }

  double& operator()(std::size_t r, std::size_t c) { return m_(r, c); }
  double operator()(std::size_t r, std::size_t c) const { return m_(r, c); }

  std::span<double> data() { return {m_.data(), size()}; }
  std::span<const double> data() const { return {m_.data(), size()}; }

  Matrix& mat() { return m_; }
  const Matrix& mat() const { return m_; }

  bool same_shape(const Tensor2& other) const {
    return rows() == other.rows() && cols() == other.cols();
  }
  bool all_finite() const { return m_.allFinite(); }
  /// Throws NumericError naming `what` if any entry is NaN or infinite.
  void require_finite(std::string_view what) const;

  bool operator==(const Tensor2& other) const {
    return same_shape(other) && m_ == other.m_;
  }

 private:
  Matrix m_;
};

struct Parameter {
  std::string name;
  Tensor2 value;
  Tensor2 grad;
  Tensor2 moment1;
  Tensor2 moment2;
  bool frozen = false;  // skipped by the optimizer and by grad_check
};

/// Named parameters of one network with paired gradients and optimizer moments.
class ParameterSet {
 public:
  /// Adds a parameter; names must be unique.
  std::size_t add(std::string name, Tensor2 init);

  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  Parameter* find(std::string_view name);
  const Parameter* find(std::string_view name) const;

  void zero_grad();
  void set_frozen(bool frozen);

  /// Same names and shapes, in the same order.
  bool same_layout(const ParameterSet& other) const;

  std::uint64_t optimizer_steps() const { return steps_; }
  void set_optimizer_steps(std::uint64_t steps) { steps_ = steps; }

 private:
  std::vector<Parameter> params_;
  std::uint64_t steps_ = 0;
};

// --- layer primitives --------------------------------------------------------

Tensor2 linear_forward(const Tensor2& x, const Tensor2& weight, const Tensor2& bias);

struct LinearGrads {
  Tensor2 grad_x;
  Tensor2 grad_weight;
  Tensor2 grad_bias;
};
LinearGrads linear_backward(const Tensor2& x, const Tensor2& weight, const Tensor2& grad_y);

Tensor2 relu_forward(const Tensor2& x);
/// Subgradient at exactly 0 is 0.
Tensor2 relu_backward(const Tensor2& x, const Tensor2& grad_y);

Tensor2 sigmoid_forward(const Tensor2& x);
/// Takes the forward *output* y.
Tensor2 sigmoid_backward(const Tensor2& y, const Tensor2& grad_y);

inline constexpr double kLayerNormEpsilon = 1e-5;

struct LayerNormCache {
  Tensor2 normalized;             // (x - mean) / sqrt(var + eps)
  std::vector<double> inv_std;    // per row
};

Tensor2 layer_norm_forward(const Tensor2& x, const Tensor2& gain, const Tensor2& bias,
                           LayerNormCache* cache = nullptr);

struct LayerNormGrads {
  Tensor2 grad_x;
  Tensor2 grad_gain;
  Tensor2 grad_bias;
};
LayerNormGrads layer_norm_backward(const LayerNormCache& cache, const Tensor2& gain,
                                   const Tensor2& grad_y);

// --- layers ------------------------------------------------------------------

enum class LayerKind { linear, relu, sigmoid, layer_norm, residual_block };

std::string_view to_string(LayerKind kind);

struct LayerSpec {
  LayerKind kind = LayerKind::linear;
  std::size_t in = 0;
  std::size_t out = 0;  // equals `in` for everything except linear

  static LayerSpec linear(std::size_t in, std::size_t out) { return {LayerKind::linear, in, out}; }
  static LayerSpec relu(std::size_t n) { return {LayerKind::relu, n, n}; }
  static LayerSpec sigmoid(std::size_t n) { return {LayerKind::sigmoid, n, n}; }
  static LayerSpec layer_norm(std::size_t n) { return {LayerKind::layer_norm, n, n}; }
  static LayerSpec residual_block(std::size_t n) { return {LayerKind::residual_block, n, n}; }
};

enum class InitScheme { he, xavier };

/// Fills a weight matrix with seeded scaled normals.
Tensor2 init_weight(std::size_t in, std::size_t out, InitScheme scheme, std::uint64_t seed);

class LinearLayer {
 public:
  LinearLayer(ParameterSet& params, const std::string& prefix, std::size_t in, std::size_t out,
              InitScheme init, std::uint64_t seed);
  Tensor2 forward(const ParameterSet& params, const Tensor2& x);
  Tensor2 backward(ParameterSet& params, const Tensor2& grad_y);

  std::size_t weight_index() const { return weight_; }
  std::size_t bias_index() const { return bias_; }

 private:
  std::size_t weight_ = 0;
  std::size_t bias_ = 0;
  Tensor2 input_;
};

class ReluLayer {
 public:
  Tensor2 forward(const ParameterSet&, const Tensor2& x);
  Tensor2 backward(ParameterSet&, const Tensor2& grad_y);
  /// Smallest |pre-activation| seen by the last forward pass.
  double min_margin() const { return min_margin_; }

 private:
  Tensor2 input_;
  double min_margin_ = std::numeric_limits<double>::infinity();
};

class SigmoidLayer {
 public:
  Tensor2 forward(const ParameterSet&, const Tensor2& x);
  Tensor2 backward(ParameterSet&, const Tensor2& grad_y);

 private:
  Tensor2 output_;
};

class LayerNormLayer {
 public:
  LayerNormLayer(ParameterSet& params, const std::string& prefix, std::size_t width);
  Tensor2 forward(const ParameterSet& params, const Tensor2& x);
  Tensor2 backward(ParameterSet& params, const Tensor2& grad_y);

 private:
  std::size_t gain_ = 0;
  std::size_t bias_ = 0;
  LayerNormCache cache_;
};

/// y = layer_norm(x + W2 relu(W1 x + b1) + b2), inner width equal to the block width.
class ResidualBlock {
 public:
  ResidualBlock(ParameterSet& params, const std::string& prefix, std::size_t width,
                std::uint64_t seed);
  Tensor2 forward(const ParameterSet& params, const Tensor2& x);
  Tensor2 backward(ParameterSet& params, const Tensor2& grad_y);
  double min_margin() const { return relu_.min_margin(); }

  const LinearLayer& inner_in() const { return inner_in_; }
  const LinearLayer& inner_out() const { return inner_out_; }

 private:
  LinearLayer inner_in_;
  ReluLayer relu_;
  LinearLayer inner_out_;
  LayerNormLayer norm_;
};

using Layer = std::variant<LinearLayer, ReluLayer, SigmoidLayer, LayerNormLayer, ResidualBlock>;

/// A feed-forward stack owning its parameters. Copies are deep (used for target networks).
class Network {
 public:
  Network() = default;

  /// Throws ValidationError if consecutive specs do not chain. Linear layers followed by a
  /// ReLU (or residual block) get He init, others Xavier; biases start at zero.
  static Network build(std::span<const LayerSpec> specs, std::uint64_t seed,
                       const std::string& name_prefix = "");

  /// Caches activations for the next backward().
  Tensor2 forward(const Tensor2& x);
  /// Accumulates parameter gradients and returns d(loss)/d(input).
  Tensor2 backward(const Tensor2& grad_out);

  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  const std::vector<LayerSpec>& specs() const { return specs_; }
  std::size_t input_dim() const { return specs_.empty() ? 0 : specs_.front().in; }
  std::size_t output_dim() const { return specs_.empty() ? 0 : specs_.back().out; }

  /// Smallest |pre-activation| over all ReLUs in the last forward pass.
  double min_relu_margin() const;

  std::vector<Layer>& layers() { return layers_; }

 private:
  ParameterSet params_;
  std::vector<Layer> layers_;
  std::vector<LayerSpec> specs_;
};

// --- optimizer ---------------------------------------------------------------

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected first/second-moment step on every non-frozen parameter, descending
/// the stored gradients.
void optimizer_step(ParameterSet& params, const AdamConfig& config);

// --- gradient verification ---------------------------------------------------

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::size_t checked = 0;  // scalar entries compared
  double min_relu_margin = std::numeric_limits<double>::infinity();
};

/// Gradients with magnitude below this are compared in absolute terms.
inline constexpr double kGradCheckFloor = 1e-6;

/// |a - n| / max(|a|, |n|, kGradCheckFloor)
double relative_error(double analytic, double numeric);

/// Compares the gradients already stored in `params` against central differences of
/// `loss` for every non-frozen entry. `loss` must be a pure function of the parameters.
GradCheckResult finite_difference_check(ParameterSet& params, const std::function<double()>& loss,
                                        double h);

/// Checks `net` on loss = sum(R .* net(input)) with a fixed random R. Callers resample the
/// input when the reported ReLU margin is within the perturbation size.
GradCheckResult grad_check(Network& net, const Tensor2& input, double h,
                           std::uint64_t probe_seed = 7);

// --- serialization -----------------------------------------------------------

void write_params_header(std::ostream& out, std::string_view manifest_hash);
/// Returns the manifest hash; throws VersionError on a missing or unknown header.
std::string read_params_header(std::istream& in);

/// Writes values, gradients are not stored; moments and step count are.
void write_parameters(std::ostream& out, std::string_view set_name, const ParameterSet& params);
/// Reads the next set into `params`, whose names and shapes must match.
void read_parameters(std::istream& in, std::string_view set_name, ParameterSet& params);

}  // namespace tidealloc::nn
