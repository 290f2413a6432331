#include "weedctx/net.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "weedctx/kernels.hpp"
#include "weedctx/random.hpp"

namespace weedctx {

NetworkSpec NetworkSpec::standard(int input_size) {
  NetworkSpec s;
  s.height = input_size;
  s.width = input_size;
  return s;
}

NetworkSpec NetworkSpec::reduced() {
  NetworkSpec s;
  s.height = 24;
  s.width = 24;
  s.conv_filters = {2, 2, 4, 4, 8, 8};
  s.dense_units = {8, 1};
  return s;
}

void NetworkSpec::validate() const {
  if (channels != 3) {
    throw ShapeError("network input must have 3 channels");
  }
  if (conv_filters.empty() || conv_filters.size() % 2 != 0) {
    throw ShapeError("conv layers come in pairs");
  }
  for (int f : conv_filters) {
    if (f < 1) throw ShapeError("conv filter counts must be positive");
  }
  if (dense_units.empty() || dense_units.back() != 1) {
    throw ShapeError("the final dense layer must have exactly one unit");
  }
  for (int u : dense_units) {
    if (u < 1) throw ShapeError("dense widths must be positive");
  }
  if (pooled_height() < 1 || pooled_width() < 1) {
    throw ShapeError("input too small for the number of pooling stages");
  }
}

int NetworkSpec::pooled_height() const {
  int h = height;
  for (std::size_t p = 0; p < conv_filters.size() / 2; ++p) h /= 2;
  return h;
}

int NetworkSpec::pooled_width() const {
  int w = width;
  for (std::size_t p = 0; p < conv_filters.size() / 2; ++p) w /= 2;
  return w;
}

int NetworkSpec::flattened_size() const { return pooled_height() * pooled_width() * conv_filters.back(); }

std::vector<ParamGroup> param_layout(const NetworkSpec& spec) {
  spec.validate();
  std::vector<ParamGroup> groups;
  std::size_t offset = 0;
  auto add = [&](std::string name, ParamKind kind, std::size_t count, int fan_in) {
    groups.push_back({std::move(name), kind, offset, count, fan_in});
    offset += count;
  };
  int cin = spec.channels;
  for (std::size_t i = 0; i < spec.conv_filters.size(); ++i) {
    const int cout = spec.conv_filters[i];
    const std::string base = "conv" + std::to_string(i + 1);
    add(base + ".weight", ParamKind::ConvWeight, static_cast<std::size_t>(9) * cin * cout, 9 * cin);
    add(base + ".bias", ParamKind::ConvBias, cout, 9 * cin);
    cin = cout;
  }
  int in = spec.flattened_size();
  for (std::size_t i = 0; i < spec.dense_units.size(); ++i) {
    const int out = spec.dense_units[i];
    const std::string base = "dense" + std::to_string(i + 1);
    add(base + ".weight", ParamKind::DenseWeight, static_cast<std::size_t>(in) * out, in);
    add(base + ".bias", ParamKind::DenseBias, out, in);
    in = out;
  }
  return groups;
}

std::size_t param_count(const NetworkSpec& spec) {
  const auto layout = param_layout(spec);
  return layout.back().offset + layout.back().count;
}

template <typename T>
ModelParams<T> zero_params(const NetworkSpec& spec) {
  return ModelParams<T>{spec, std::vector<T>(param_count(spec), T(0))};
}

template <typename T>
ModelParams<T> init_params(const NetworkSpec& spec, std::uint64_t seed) {
  auto params = zero_params<T>(spec);
  const auto layout = param_layout(spec);
  for (std::size_t g = 0; g < layout.size(); ++g) {
    const ParamGroup& group = layout[g];
    if (group.kind == ParamKind::ConvBias || group.kind == ParamKind::DenseBias) {
      continue;
    }
    Rng rng = Rng::derive(seed, {hash_key("init"), g});
    const double scale = std::sqrt(2.0 / group.fan_in);
    for (T& v : params.group(group)) {
      v = static_cast<T>(rng.normal() * scale);
    }
  }
  return params;
}

template <typename T>
T logistic(T z) {
  T p;
  if (z >= T(0)) {
    p = T(1) / (T(1) + std::exp(-z));
  } else {
    const T e = std::exp(z);
    p = e / (T(1) + e);
  }
  // Keep outputs strictly inside (0, 1) even where the float saturates.
  return std::clamp(p, std::numeric_limits<T>::min(), std::nextafter(T(1), T(0)));
}

template <typename T>
T bce_loss(std::span<const T> probabilities, std::span<const int> labels) {
  if (probabilities.size() != labels.size() || probabilities.empty()) {
    throw ShapeError("loss needs one label per probability");
  }
  const T eps = static_cast<T>(kLossEpsilon);
  T total = 0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    const T p = std::clamp(probabilities[i], eps, T(1) - eps);
    total += labels[i] == 1 ? -std::log(p) : -std::log(T(1) - p);
  }
  return total / static_cast<T>(probabilities.size());
}

namespace {

template <typename T>
struct Trace {
  int n = 0;
  std::vector<kernels::ConvShape> conv_shapes;
  std::vector<kernels::PoolShape> pool_shapes;
  std::vector<kernels::DenseShape> dense_shapes;
  std::vector<std::vector<T>> conv_out;  // post-ReLU
  std::vector<std::vector<T>> pool_out;
  std::vector<std::vector<std::int32_t>> pool_argmax;
  std::vector<std::vector<T>> dense_out;  // post-ReLU for hidden layers, logits for the last
};

template <typename T>
void check_batch(const NetworkSpec& spec, const Tensor<T>& batch) {
  if (batch.shape.size() != 4 || batch.shape[1] != spec.height || batch.shape[2] != spec.width ||
      batch.shape[3] != spec.channels || batch.shape[0] < 1) {
    throw ShapeError("batch shape does not match the network input");
  }
  if (batch.values.size() != Tensor<T>::element_count(batch.shape)) {
    throw ShapeError("batch value count does not match its shape");
  }
}

template <typename T>
Trace<T> run_forward(const ModelParams<T>& params, const Tensor<T>& batch) {
  const NetworkSpec& spec = params.spec;
  check_batch(spec, batch);
  const auto layout = param_layout(spec);
  if (params.values.size() != layout.back().offset + layout.back().count) {
    throw ShapeError("parameter count does not match the network spec");
  }
  Trace<T> tr;
  tr.n = batch.shape[0];
  int h = spec.height, w = spec.width, cin = spec.channels;
  std::span<const T> x = batch.values;
  std::size_t g = 0;
  for (std::size_t i = 0; i < spec.conv_filters.size(); ++i) {
    const kernels::ConvShape cs{tr.n, h, w, cin, spec.conv_filters[i]};
    tr.conv_shapes.push_back(cs);
    tr.conv_out.emplace_back(cs.out_size());
    kernels::conv3x3_forward<T>(cs, x, params.group(layout[g]), params.group(layout[g + 1]), tr.conv_out.back());
    kernels::relu_forward<T>(tr.conv_out.back());
    g += 2;
    cin = cs.cout;
    x = tr.conv_out.back();
    if (i % 2 == 1) {
      const kernels::PoolShape ps{tr.n, h, w, cin};
      tr.pool_shapes.push_back(ps);
      tr.pool_out.emplace_back(ps.out_size());
      tr.pool_argmax.emplace_back(ps.out_size());
      kernels::maxpool2_forward<T>(ps, x, tr.pool_out.back(), tr.pool_argmax.back());
      h = ps.out_h();
      w = ps.out_w();
      x = tr.pool_out.back();
    }
  }
  int in = spec.flattened_size();
  for (std::size_t i = 0; i < spec.dense_units.size(); ++i) {
    const kernels::DenseShape ds{tr.n, in, spec.dense_units[i]};
    tr.dense_shapes.push_back(ds);
    tr.dense_out.emplace_back(static_cast<std::size_t>(ds.n) * ds.out);
    kernels::dense_forward<T>(ds, x, params.group(layout[g]), params.group(layout[g + 1]), tr.dense_out.back());
    if (i + 1 < spec.dense_units.size()) {
      kernels::relu_forward<T>(tr.dense_out.back());
    }
    g += 2;
    in = ds.out;
    x = tr.dense_out.back();
  }
  return tr;
}

}  // namespace

template <typename T>
std::vector<T> forward_logits(const ModelParams<T>& params, const Tensor<T>& batch) {
  return run_forward(params, batch).dense_out.back();
}

template <typename T>
std::vector<T> forward(const ModelParams<T>& params, const Tensor<T>& batch) {
  auto z = forward_logits(params, batch);
  for (T& v : z) v = logistic(v);
  return z;
}

template <typename T>
BackwardResult<T> backward(const ModelParams<T>& params, const Tensor<T>& batch, std::span<const int> labels) {
  Trace<T> tr = run_forward(params, batch);
  if (labels.size() != static_cast<std::size_t>(tr.n)) {
    throw ShapeError("one label per sample required");
  }
  const NetworkSpec& spec = params.spec;
  const auto layout = param_layout(spec);

  BackwardResult<T> res;
  res.gradients = zero_params<T>(spec);
  res.probabilities.resize(tr.n);
  std::vector<T> grad(tr.n);
  for (int i = 0; i < tr.n; ++i) {
    res.probabilities[i] = logistic(tr.dense_out.back()[i]);
    grad[i] = (res.probabilities[i] - static_cast<T>(labels[i])) / static_cast<T>(tr.n);
  }
  res.loss = bce_loss<T>(res.probabilities, labels);

  std::size_t g = layout.size();
  for (std::size_t i = spec.dense_units.size(); i-- > 0;) {
    g -= 2;
    const auto& ds = tr.dense_shapes[i];
    std::span<const T> x = i > 0 ? std::span<const T>(tr.dense_out[i - 1]) : std::span<const T>(tr.pool_out.back());
    std::vector<T> dx(static_cast<std::size_t>(ds.n) * ds.in);
    kernels::dense_backward<T>(ds, x, params.group(layout[g]), grad, dx, res.gradients.group(layout[g]),
                               res.gradients.group(layout[g + 1]));
    if (i > 0) {
      kernels::relu_backward<T>(tr.dense_out[i - 1], dx);
    }
    grad = std::move(dx);
  }
  for (std::size_t i = spec.conv_filters.size(); i-- > 0;) {
    g -= 2;
    if (i % 2 == 1) {
      const std::size_t p = i / 2;
      std::vector<T> d(tr.pool_shapes[p].in_size());
      kernels::maxpool2_backward<T>(tr.pool_shapes[p], grad, tr.pool_argmax[p], d);
      grad = std::move(d);
    }
    kernels::relu_backward<T>(tr.conv_out[i], grad);
    const auto& cs = tr.conv_shapes[i];
    std::span<const T> x;
    if (i == 0) {
      x = batch.values;
    } else if (i % 2 == 1) {
      x = tr.conv_out[i - 1];
    } else {
      x = tr.pool_out[i / 2 - 1];
    }
    std::vector<T> dx(i > 0 ? cs.in_size() : 0);
    kernels::conv3x3_backward<T>(cs, x, params.group(layout[g]), grad, dx, res.gradients.group(layout[g]),
                                 res.gradients.group(layout[g + 1]));
    grad = std::move(dx);
  }
  return res;
}

template <typename T>
void sgd_step(ModelParams<T>& params, const ModelParams<T>& grads, double lr) {
  if (params.values.size() != grads.values.size()) {
    throw ShapeError("gradient shape does not match parameters");
  }
  const T step = static_cast<T>(lr);
  for (std::size_t i = 0; i < params.values.size(); ++i) {
    params.values[i] -= step * grads.values[i];
  }
}

template <typename T>
std::vector<std::uint32_t> activation_pattern(const ModelParams<T>& params, const Tensor<T>& batch) {
  const Trace<T> tr = run_forward(params, batch);
  std::vector<std::uint32_t> bits;
  auto pack = [&](const std::vector<T>& v) {
    std::uint32_t word = 0;
    int used = 0;
    for (T x : v) {
      word = (word << 1) | (x > T(0) ? 1u : 0u);
      if (++used == 32) {
        bits.push_back(word);
        word = 0;
        used = 0;
      }
    }
    bits.push_back(word);
  };
  for (const auto& c : tr.conv_out) pack(c);
  for (std::size_t i = 0; i + 1 < tr.dense_out.size(); ++i) pack(tr.dense_out[i]);
  for (const auto& a : tr.pool_argmax) {
    for (auto idx : a) bits.push_back(static_cast<std::uint32_t>(idx));
  }
  return bits;
}

#define WEEDCTX_INSTANTIATE(T)                                                                        \
  template ModelParams<T> zero_params<T>(const NetworkSpec&);                                         \
  template ModelParams<T> init_params<T>(const NetworkSpec&, std::uint64_t);                          \
  template T logistic<T>(T);                                                                          \
  template T bce_loss<T>(std::span<const T>, std::span<const int>);                                   \
  template std::vector<T> forward_logits<T>(const ModelParams<T>&, const Tensor<T>&);                 \
  template std::vector<T> forward<T>(const ModelParams<T>&, const Tensor<T>&);                        \
  template BackwardResult<T> backward<T>(const ModelParams<T>&, const Tensor<T>&, std::span<const int>); \
  template void sgd_step<T>(ModelParams<T>&, const ModelParams<T>&, double);                          \
  template std::vector<std::uint32_t> activation_pattern<T>(const ModelParams<T>&, const Tensor<T>&);

WEEDCTX_INSTANTIATE(float)
WEEDCTX_INSTANTIATE(double)

#undef WEEDCTX_INSTANTIATE

}  // namespace weedctx
