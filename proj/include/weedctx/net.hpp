#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace weedctx {

class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Conv stack in pairs, each pair followed by a 2x2/2 max pool, then dense
/// layers. The last dense layer has one unit and a logistic output; all
/// hidden activations are ReLU.
struct NetworkSpec {
  int height = 300;
  int width = 300;
  int channels = 3;
  std::vector<int> conv_filters{32, 32, 64, 64, 128, 128};
  std::vector<int> dense_units{64, 1};

  /// The standard classifier at a given square input size.
  static NetworkSpec standard(int input_size = 300);
  /// 24x24 input, filters 2,2,4,4,8,8, dense 8: small enough for exhaustive
  /// finite-difference checks.
  static NetworkSpec reduced();

  void validate() const;
  int pooled_height() const;
  int pooled_width() const;
  int flattened_size() const;

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

enum class ParamKind { ConvWeight, ConvBias, DenseWeight, DenseBias };

struct ParamGroup {
  std::string name;  // e.g. "conv3.weight"
  ParamKind kind;
  std::size_t offset = 0;
  std::size_t count = 0;
  int fan_in = 0;
};

/// Groups in storage order: per layer, weights then bias.
std::vector<ParamGroup> param_layout(const NetworkSpec& spec);
std::size_t param_count(const NetworkSpec& spec);

template <typename T>
struct ModelParams {
  NetworkSpec spec;
  std::vector<T> values;

  std::span<T> group(const ParamGroup& g) { return std::span<T>(values).subspan(g.offset, g.count); }
  std::span<const T> group(const ParamGroup& g) const {
    return std::span<const T>(values).subspan(g.offset, g.count);
  }
};

template <typename To, typename From>
ModelParams<To> cast_params(const ModelParams<From>& p) {
  ModelParams<To> out{p.spec, {}};
  out.values.assign(p.values.begin(), p.values.end());
  return out;
}

/// Row-major tensor; batches are N x H x W x C.
template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> values;

  Tensor() = default;
  explicit Tensor(std::vector<int> dims) : shape(std::move(dims)) { values.assign(element_count(shape), T(0)); }

  static std::size_t element_count(const std::vector<int>& dims) {
    std::size_t n = 1;
    for (int d : dims) n *= static_cast<std::size_t>(d);
    return n;
  }
  std::size_t size() const { return values.size(); }
};

/// He-normal weights (variance 2 / fan_in), zero biases.
template <typename T>
ModelParams<T> init_params(const NetworkSpec& spec, std::uint64_t seed);

template <typename T>
ModelParams<T> zero_params(const NetworkSpec& spec);

/// Scores before the logistic, one per sample.
template <typename T>
std::vector<T> forward_logits(const ModelParams<T>& params, const Tensor<T>& batch);

/// Weed probabilities, each strictly inside (0, 1).
template <typename T>
std::vector<T> forward(const ModelParams<T>& params, const Tensor<T>& batch);

template <typename T>
T logistic(T z);

inline constexpr double kLossEpsilon = 1e-7;

/// Mean binary cross-entropy with p clamped to [1e-7, 1 - 1e-7].
template <typename T>
T bce_loss(std::span<const T> probabilities, std::span<const int> labels);

template <typename T>
struct BackwardResult {
  T loss = 0;
  std::vector<T> probabilities;
  ModelParams<T> gradients;
};

/// Loss and exact gradients of the mean loss for one batch.
template <typename T>
BackwardResult<T> backward(const ModelParams<T>& params, const Tensor<T>& batch, std::span<const int> labels);

/// theta <- theta - lr * g
template <typename T>
void sgd_step(ModelParams<T>& params, const ModelParams<T>& grads, double lr);

/// ReLU on/off bits and pool selections for a batch; two inputs produce the
/// same pattern iff the network is in the same linear region for both.
template <typename T>
std::vector<std::uint32_t> activation_pattern(const ModelParams<T>& params, const Tensor<T>& batch);

}  // namespace weedctx
