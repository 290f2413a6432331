#include "weedctx/train.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "weedctx/random.hpp"

namespace weedctx {

void TrainingConfig::validate() const {
  if (!(learning_rate > 0)) throw std::invalid_argument("learning rate must be positive");
  if (!(decay >= 0)) throw std::invalid_argument("decay must be nonnegative");
  if (epochs < 1) throw std::invalid_argument("epochs must be at least 1");
  if (batch_size < 1) throw std::invalid_argument("batch size must be at least 1");
}

double History::best_val_acc() const {
  if (best_epoch < 1 || best_epoch > static_cast<int>(epochs.size())) return 0.0;
  return epochs[best_epoch - 1].val_acc;
}

template <typename T>
Tensor<T> to_batch(std::span<const Sample> samples, std::span<const std::size_t> indices) {
  if (indices.empty()) {
    throw ShapeError("empty batch");
  }
  const RasterImage& first = samples[indices[0]].image;
  Tensor<T> t({static_cast<int>(indices.size()), first.height(), first.width(), 3});
  const std::size_t per = static_cast<std::size_t>(first.width()) * first.height() * 3;
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const RasterImage& img = samples[indices[b]].image;
    if (img.width() != first.width() || img.height() != first.height()) {
      throw ShapeError("samples in a batch must share dimensions");
    }
    const auto px = img.data();
    T* dst = t.values.data() + b * per;
    for (std::size_t i = 0; i < per; ++i) {
      dst[i] = static_cast<T>(px[i]) / T(255);
    }
  }
  return t;
}

template <typename T>
Tensor<T> to_batch(std::span<const Sample> samples) {
  std::vector<std::size_t> idx(samples.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return to_batch<T>(samples, idx);
}

template <typename T>
std::vector<T> predict(const ModelParams<T>& params, std::span<const Sample> samples, int batch_size) {
  std::vector<T> out;
  out.reserve(samples.size());
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < samples.size(); start += batch_size) {
    idx.clear();
    for (std::size_t i = start; i < std::min(samples.size(), start + batch_size); ++i) idx.push_back(i);
    const auto p = forward(params, to_batch<T>(samples, idx));
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

namespace {

template <typename T>
void check_finite(const ModelParams<T>& params, double loss, int epoch) {
  bool ok = std::isfinite(loss);
  for (T v : params.values) {
    ok = ok && std::isfinite(v);
  }
  if (!ok) {
    throw std::runtime_error("training diverged: non-finite loss or parameters at epoch " + std::to_string(epoch));
  }
}

}  // namespace

template <typename T>
TrainResult<T> train_from(ModelParams<T> params, std::span<const Sample> train_set,
                          std::span<const Sample> val_set, const TrainingConfig& config,
                          const EpochCallback& on_epoch) {
  config.validate();
  if (train_set.empty() || val_set.empty()) {
    throw std::invalid_argument("training and validation sets must be nonempty");
  }
  for (const auto& s : train_set) {
    if (s.label != 0 && s.label != 1) throw std::invalid_argument("labels must be binary");
  }

  TrainResult<T> result{params, {}};
  double best_acc = -1.0;
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<int> val_labels;
  for (const auto& s : val_set) val_labels.push_back(s.label);

  for (int e = 0; e < config.epochs; ++e) {
    Rng rng = Rng::derive(config.seed, {hash_key("shuffle"), static_cast<std::uint64_t>(e)});
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      std::swap(order[i], order[rng.below(i + 1)]);
    }
    EpochStats stats;
    stats.epoch = e + 1;
    stats.lr = config.lr_at(e);
    double loss_sum = 0;
    std::size_t correct = 0;
    std::vector<int> labels;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::span<const std::size_t> idx(order.data() + start, end - start);
      labels.clear();
      for (auto i : idx) labels.push_back(train_set[i].label);
      const auto res = backward(params, to_batch<T>(train_set, idx), labels);
      loss_sum += static_cast<double>(res.loss) * idx.size();
      for (std::size_t b = 0; b < idx.size(); ++b) {
        correct += (res.probabilities[b] >= T(0.5) ? 1 : 0) == labels[b];
      }
      sgd_step(params, res.gradients, stats.lr);
    }
    stats.train_loss = loss_sum / train_set.size();
    stats.train_acc = static_cast<double>(correct) / train_set.size();

    const auto val_p = predict(params, val_set, config.batch_size);
    stats.val_loss = bce_loss<T>(val_p, val_labels);
    std::size_t val_correct = 0;
    for (std::size_t i = 0; i < val_p.size(); ++i) {
      val_correct += (val_p[i] >= T(0.5) ? 1 : 0) == val_labels[i];
    }
    stats.val_acc = static_cast<double>(val_correct) / val_set.size();
    check_finite(params, stats.train_loss + stats.val_loss, stats.epoch);

    result.history.epochs.push_back(stats);
    if (stats.val_acc > best_acc) {
      best_acc = stats.val_acc;
      result.history.best_epoch = stats.epoch;
      result.best = params;
    }
    if (on_epoch) on_epoch(stats);
  }
  return result;
}

template <typename T>
TrainResult<T> train(const NetworkSpec& spec, std::span<const Sample> train_set, std::span<const Sample> val_set,
                     const TrainingConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  return train_from(init_params<T>(spec, Rng::derive(config.seed, {hash_key("init-seed")}).next()), train_set,
                    val_set, config, on_epoch);
}

#define WEEDCTX_INSTANTIATE(T)                                                                                 \
  template Tensor<T> to_batch<T>(std::span<const Sample>, std::span<const std::size_t>);                       \
  template Tensor<T> to_batch<T>(std::span<const Sample>);                                                     \
  template std::vector<T> predict<T>(const ModelParams<T>&, std::span<const Sample>, int);                     \
  template TrainResult<T> train<T>(const NetworkSpec&, std::span<const Sample>, std::span<const Sample>,        \
                                   const TrainingConfig&, const EpochCallback&);                               \
  template TrainResult<T> train_from<T>(ModelParams<T>, std::span<const Sample>, std::span<const Sample>,      \
                                        const TrainingConfig&, const EpochCallback&);

WEEDCTX_INSTANTIATE(float)
WEEDCTX_INSTANTIATE(double)

#undef WEEDCTX_INSTANTIATE

}  // namespace weedctx
