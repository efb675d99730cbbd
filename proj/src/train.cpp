#include "loctomo/train.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "loctomo/forward.hpp"

namespace loctomo {

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, double lr) {
  if (params.size() != grads.size() || state.m.size() != params.size() || state.v.size() != params.size())
    throw InvalidArgument("adam_step: parameter, gradient and state sizes differ");
  const AdamHyper& h = state.hyper;
  const double rate = lr > 0.0 ? lr : h.lr;
  state.t += 1;
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = h.beta1 * state.m[i] + (1.0 - h.beta1) * g;
    state.v[i] = h.beta2 * state.v[i] + (1.0 - h.beta2) * g * g;
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= rate * m_hat / (std::sqrt(v_hat) + h.eps);
  }
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
  if (steps < 0) throw InvalidArgument("steps must be >= 0");
  if (!(lr > 0.0)) throw InvalidArgument("lr must be > 0");
  if (tilt_drop_max < 0) throw InvalidArgument("tilt_drop_max must be >= 0");
  if (!(patch_spacing > 0.0)) throw InvalidArgument("patch_spacing must be > 0");
}

double scheduled_lr(const TrainConfig& config, long step) {
  if (config.schedule == LrSchedule::constant || config.steps <= 1) return config.lr;
  const double frac = static_cast<double>(step) / static_cast<double>(config.steps);
  return config.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

Volume normalize_volume(const Volume& volume) {
  Volume out = volume;
  auto data = out.data();
  const double n = static_cast<double>(data.size());
  const double mean = std::accumulate(data.begin(), data.end(), 0.0) / n;
  double var = 0.0;
  for (double v : data) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);
  for (double& v : data) v = sd > 0.0 ? (v - mean) / sd : 0.0;
  return out;
}

TrainingItem prepare_training_item(const Volume& volume, const TiltSeries& even,
                                   const TiltSeries* odd, const FilterSpec& filter,
                                   const WaveletBank* bank) {
  TrainingItem item;
  item.volume = normalize_volume(volume);
  item.even = filter_tilt_series(normalize_unit_std(even), filter);
  if (odd) {
    if (!(odd->detector == even.detector) || odd->angles != even.angles)
      throw InvalidArgument("even/odd tilt-series geometries differ");
    item.odd = filter_tilt_series(normalize_unit_std(*odd), filter);
  }
  if (bank) item.coefficients = wavelet_targets(item.volume, *bank);
  return item;
}

namespace {

std::vector<std::size_t> drop_tilts(std::size_t n, int max_drop, std::mt19937_64& rng) {
  std::vector<std::size_t> keep(n);
  std::iota(keep.begin(), keep.end(), 0);
  if (max_drop <= 0) return keep;
  std::uniform_int_distribution<int> count(0, max_drop);
  const int drop = count(rng);
  std::shuffle(keep.begin(), keep.end(), rng);
  keep.resize(n - static_cast<std::size_t>(drop));
  std::sort(keep.begin(), keep.end());
  return keep;
}

}  // namespace

std::vector<TrainingSample> sample_training_batch(const TrainingItem& item, const NetConfig& net,
                                                  const TrainConfig& config,
                                                  std::uint64_t batch_seed) {
  const std::size_t n_tilts = item.even.count();
  if (static_cast<std::size_t>(config.tilt_drop_max) >= n_tilts)
    throw InvalidArgument("tilt_drop_max (" + std::to_string(config.tilt_drop_max) +
                          ") must be smaller than the tilt count (" + std::to_string(n_tilts) + ")");
  if (!item.even.filtered || (item.odd && !item.odd->filtered))
    throw InvalidArgument("training tilt-series must be filtered");
  const bool wavelet = config.mode == ReconMode::wavelet;
  if (wavelet && !item.coefficients) throw InvalidArgument("wavelet mode needs coefficient targets");
  if ((wavelet ? 8 : 1) != net.out_dim) throw InvalidArgument("network out_dim does not match mode");

  const Dims3 d = item.volume.dims();
  const PatchSpec patch{net.patch_size, config.patch_spacing};
  std::vector<TrainingSample> batch(static_cast<std::size_t>(config.batch_size));

#pragma omp parallel for schedule(static)
  for (int b = 0; b < config.batch_size; ++b) {
    std::mt19937_64 rng(derive_seed(batch_seed, static_cast<std::uint64_t>(b)));
    std::uniform_real_distribution<double> ux(0.0, d.nx - 1), uy(0.0, d.ny - 1), uz(0.0, d.nz - 1);
    double x = ux(rng), y = uy(rng), z = uz(rng);
    TrainingSample& sample = batch[static_cast<std::size_t>(b)];
    if (wavelet) {
      const Dims3 c = item.coefficients->coarse_dims();
      const int i = std::clamp(static_cast<int>(std::floor(x / 2.0)), 0, c.nx - 1);
      const int j = std::clamp(static_cast<int>(std::floor(y / 2.0)), 0, c.ny - 1);
      const int k = std::clamp(static_cast<int>(std::floor(z / 2.0)), 0, c.nz - 1);
      sample.target.resize(8);
      for (int band = 0; band < 8; ++band) sample.target(band) = item.coefficients->bands[band].at(i, j, k);
      x = 2.0 * i + 0.5;
      y = 2.0 * j + 0.5;
      z = 2.0 * k + 0.5;
    } else {
      sample.target.resize(1);
      sample.target(0) = item.volume.trilinear(x, y, z);
    }

    const TiltSeries* source = &item.even;
    if (config.n2n && item.odd) {
      std::bernoulli_distribution coin(0.5);
      if (coin(rng)) source = &*item.odd;
    }
    const auto keep = drop_tilts(n_tilts, config.tilt_drop_max, rng);
    const Vec3 r = grid_point(d, item.volume.voxel_size(), source->detector, x, y, z);

    PatchStack& stack = sample.input;
    stack.patch_size = patch.size;
    stack.angles.resize(keep.size());
    stack.data.resize(keep.size() * stack.slice_stride());
    for (std::size_t q = 0; q < keep.size(); ++q) {
      stack.angles[q] = source->angles[keep[q]];
      extract_patch_into(source->projection(keep[q]), source->detector, r, stack.angles[q], patch,
                         std::span<double>(stack.data).subspan(q * stack.slice_stride(), stack.slice_stride()));
    }
  }
  return batch;
}

TrainResult train(std::span<const TrainingItem> dataset, const NetConfig& net, const TrainConfig& config,
                  const SliceMlpParams* init) {
  config.validate();
  if (dataset.empty()) throw InvalidArgument("training needs at least one item");
  for (const auto& item : dataset) {
    if (!item.even.filtered || (item.odd && !item.odd->filtered))
      throw InvalidArgument("training tilt-series must be filtered");
    if (static_cast<std::size_t>(config.tilt_drop_max) >= item.even.count())
      throw InvalidArgument("tilt_drop_max must be smaller than every training tilt count");
  }

  TrainResult result;
  if (init) {
    if (!(init->config() == net)) throw InvalidArgument("initial parameters do not match network config");
    result.params = *init;
  } else {
    result.params = SliceMlpParams(net);
    result.params.init_kaiming(config.seed);
  }
  AdamState state(result.params.parameter_count(), AdamHyper{config.lr});
  result.loss_trace.reserve(static_cast<std::size_t>(config.steps));

  for (long step = 0; step < config.steps; ++step) {
    const auto& item = dataset[static_cast<std::size_t>(step) % dataset.size()];
    const auto batch =
        sample_training_batch(item, net, config, derive_seed(config.seed, static_cast<std::uint64_t>(step) + 1));
    LossAndGrad lg;
    try {
      lg = loss_and_grad(result.params, batch);
    } catch (const DivergenceError&) {
      throw DivergenceError("training diverged at step " + std::to_string(step), step);
    }
    if (!std::isfinite(lg.loss))
      throw DivergenceError("non-finite loss at step " + std::to_string(step), step);
    result.loss_trace.push_back(lg.loss);
    adam_step(result.params.values(), lg.grad, state, scheduled_lr(config, step));
  }
  return result;
}

}  // namespace loctomo
