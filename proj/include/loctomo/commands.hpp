#pragma once

// Pipeline subcommands shared by the CLI, the tests and the Python module.
// Each command writes its artifacts plus exactly one JSON report; on error
// every file it created is removed before the exception propagates.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "loctomo/config.hpp"
#include "loctomo/metrics.hpp"

namespace loctomo {

namespace fs = std::filesystem;

// Phantom plus an even/odd noisy tilt-series pair.
struct Simulation {
  Volume phantom;
  TiltSeries even;
  TiltSeries odd;
  std::uint64_t phantom_seed = 0;
  std::uint64_t noise_seed = 0;
};

// Phantom seed = derive_seed(seed, 0), noise seed = derive_seed(seed, 1).
Simulation simulate(const RunConfig& config, std::uint64_t seed);

struct SimulateArgs {
  fs::path out_dir;
};

struct FbpArgs {
  fs::path tilts;
  fs::path angles;
  fs::path output;
  std::optional<fs::path> reference;  // ground truth for metric summaries
  std::optional<fs::path> report;     // default: <output>.report.json
};

struct TrainArgs {
  // Directories written by `simulate`; each must hold phantom.mrc,
  // tilts_even.mrc, angles.tlt and optionally tilts_odd.mrc.
  std::vector<fs::path> data_dirs;
  // When > 0 and no data dirs are given, phantoms are simulated in memory
  // with seeds derived from config.seed.
  int simulate = 0;
  fs::path checkpoint;
  std::optional<fs::path> loss_csv;  // default: <checkpoint>.loss.csv
  std::optional<fs::path> init;
  std::optional<fs::path> report;
};

struct ReconstructArgs {
  fs::path checkpoint;
  fs::path tilts;
  fs::path angles;
  fs::path output;
  // Explicit mode request; must agree with the checkpoint when set.
  std::optional<ReconMode> mode;
  std::optional<fs::path> reference;
  std::optional<fs::path> report;
};

struct FscArgs {
  fs::path a;
  fs::path b;
  fs::path csv;
  bool self = false;  // annotate as a half-set comparison
  std::optional<Box> mask;
  std::optional<fs::path> report;
};

nlohmann::json cmd_simulate(const RunConfig& config, const SimulateArgs& args);
nlohmann::json cmd_fbp(const RunConfig& config, const FbpArgs& args);
nlohmann::json cmd_train(const RunConfig& config, const TrainArgs& args);
nlohmann::json cmd_reconstruct(const RunConfig& config, const ReconstructArgs& args);
nlohmann::json cmd_fsc(const RunConfig& config, const FscArgs& args);

// Caps OpenMP workers when threads > 0.
void apply_thread_limit(int threads);

}  // namespace loctomo
