#include "weedctx/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "weedctx/random.hpp"

namespace weedctx {

namespace {

double loss_at(const ModelParams<double>& p, const Tensor<double>& batch, const std::vector<int>& labels) {
  return bce_loss<double>(forward(p, batch), labels);
}

}  // namespace

GradCheckReport gradient_check(const NetworkSpec& spec, const GradCheckOptions& options) {
  spec.validate();
  Rng rng = Rng::derive(options.seed, {hash_key("gradcheck")});
  ModelParams<double> params = init_params<double>(spec, rng.next());
  const auto layout = param_layout(spec);
  for (const auto& g : layout) {
    if (g.kind == ParamKind::ConvBias || g.kind == ParamKind::DenseBias) {
      for (double& v : params.group(g)) v = rng.uniform(-0.1, 0.1);
    }
  }
  Tensor<double> batch({options.batch, spec.height, spec.width, spec.channels});
  for (double& v : batch.values) v = rng.uniform();
  std::vector<int> labels(options.batch);
  for (int i = 0; i < options.batch; ++i) labels[i] = i % 2;

  const auto analytic = backward(params, batch, labels).gradients;
  const auto base_pattern = activation_pattern(params, batch);

  GradCheckReport report;
  for (const auto& g : layout) {
    GroupCheck gc;
    gc.name = g.name;
    gc.count = g.count;
    for (std::size_t k = g.offset; k < g.offset + g.count; ++k) {
      const double original = params.values[k];
      double h = options.step;
      double numeric = 0;
      bool refined = false;
      for (;;) {
        params.values[k] = original + h;
        const bool plus_same = activation_pattern(params, batch) == base_pattern;
        const double lp = loss_at(params, batch, labels);
        params.values[k] = original - h;
        const bool minus_same = activation_pattern(params, batch) == base_pattern;
        const double lm = loss_at(params, batch, labels);
        params.values[k] = original;
        if ((plus_same && minus_same) || h < 1e-9) {
          numeric = (lp - lm) / (2 * h);
          break;
        }
        h /= 10;
        refined = true;
      }
      gc.refined += refined ? 1 : 0;
      const double a = analytic.values[k];
      const double abs_err = std::abs(a - numeric);
      const double rel = abs_err / std::max(std::abs(a) + std::abs(numeric), options.rel_floor);
      gc.max_abs_error = std::max(gc.max_abs_error, abs_err);
      gc.max_rel_error = std::max(gc.max_rel_error, rel);
      ++report.checked;
    }
    report.max_rel_error = std::max(report.max_rel_error, gc.max_rel_error);
    report.groups.push_back(gc);
  }
  return report;
}

}  // namespace weedctx
