#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "loctomo/fbp.hpp"
#include "loctomo/net.hpp"
#include "loctomo/wavelet.hpp"

namespace loctomo {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long t = 0;
  AdamHyper hyper;

  AdamState() = default;
  AdamState(std::size_t n, AdamHyper h) : m(n, 0.0), v(n, 0.0), hyper(h) {}
};

// Bias-corrected Adam update in place. `lr` overrides hyper.lr when > 0.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double lr = 0.0);

enum class ReconMode { pixel, wavelet };
enum class LrSchedule { constant, cosine };

struct TrainConfig {
  int batch_size = 32;
  long steps = 1000;
  double lr = 1e-3;
  LrSchedule schedule = LrSchedule::cosine;
  int tilt_drop_max = 30;
  bool n2n = true;
  std::uint64_t seed = 0;
  ReconMode mode = ReconMode::pixel;
  double patch_spacing = 1.0;

  void validate() const;
};

// One training volume with its filtered tilt-series (one or two noise
// realisations) and, for wavelet mode, the coefficient targets.
struct TrainingItem {
  Volume volume;
  TiltSeries even;
  std::optional<TiltSeries> odd;
  std::optional<SubbandSet> coefficients;
};

// Rescales the volume to zero mean / unit std and each series to unit std,
// filters the series, and computes wavelet targets when a bank is given.
TrainingItem prepare_training_item(const Volume& volume, const TiltSeries& even,
                                   const TiltSeries* odd, const FilterSpec& filter,
                                   const WaveletBank* bank);

Volume normalize_volume(const Volume& volume);

// Draws config.batch_size samples. Pixel mode: continuous r uniform in the
// volume, target = trilinear V(r). Wavelet mode: r snapped to the nearest
// coarse site, input taken at the site's block centre, target = its 8
// coefficients. Drops U[0, tilt_drop_max] tilts per sample and, with n2n,
// picks even/odd uniformly per sample.
std::vector<TrainingSample> sample_training_batch(const TrainingItem& item,
                                                  const NetConfig& net,
                                                  const TrainConfig& config,
                                                  std::uint64_t batch_seed);

struct TrainResult {
  SliceMlpParams params;
  std::vector<double> loss_trace;  // one entry per step
};

// `init` seeds the optimisation; when empty the network is Kaiming
// initialised from config.seed. Round-robin over items, one item per step.
TrainResult train(std::span<const TrainingItem> dataset, const NetConfig& net,
                  const TrainConfig& config, const SliceMlpParams* init = nullptr);

double scheduled_lr(const TrainConfig& config, long step);

}  // namespace loctomo
