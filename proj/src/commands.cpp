#include "loctomo/commands.hpp"

#include <omp.h>

#include <chrono>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "loctomo/checkpoint.hpp"
#include "loctomo/errors.hpp"
#include "loctomo/fbp.hpp"
#include "loctomo/forward.hpp"
#include "loctomo/metrics.hpp"
#include "loctomo/mrc.hpp"
#include "loctomo/reconstruct.hpp"
#include "loctomo/train.hpp"
#include "loctomo/wavelet.hpp"

namespace loctomo {

using json = nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

// Tracks files a command creates so a failure can take them back.
class Run {
 public:
  Run(std::string subcommand, const RunConfig& config) {
    report_["subcommand"] = std::move(subcommand);
    json echo = json::object();
    for (const auto& [k, v] : config.entries()) echo[k] = v;
    report_["config"] = echo;
    report_["seeds"] = json::object();
    report_["timings_ms"] = json::object();
    report_["metrics"] = json::object();
    report_["outputs"] = json::array();
  }

  ~Run() {
    if (committed_) return;
    std::error_code ec;
    for (const auto& p : created_) fs::remove(p, ec);
  }

  template <typename F>
  auto timed(const std::string& stage, F&& fn) {
    const auto t0 = Clock::now();
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      record(stage, t0);
    } else {
      auto out = fn();
      record(stage, t0);
      return out;
    }
  }

  void output(const fs::path& p) {
    created_.push_back(p);
    report_["outputs"].push_back(p.string());
  }

  json& report() { return report_; }

  json commit(const fs::path& report_path) {
    output(report_path);
    const std::string text = report_.dump(2) + "\n";
    write_file_atomic(report_path,
                      std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
    committed_ = true;
    return report_;
  }

 private:
  void record(const std::string& stage, Clock::time_point t0) {
    const double ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    report_["timings_ms"][stage] = std::max(0.0, ms);
  }

  json report_;
  std::vector<fs::path> created_;
  bool committed_ = false;
};

fs::path with_suffix(const fs::path& p, const std::string& suffix) {
  fs::path out = p;
  out += suffix;
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  write_file_atomic(path,
                    std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

json optional_number(std::optional<double> v) { return v ? json(*v) : json(nullptr); }

// Summaries against ground truth, both volumes z-scored first so that the
// arbitrary output scale of each method does not enter.
json compare(const Volume& truth, const Volume& estimate, int n_shells) {
  const Volume a = normalize_volume(truth);
  const Volume b = normalize_volume(estimate);
  const FscCurve curve = fsc(a, b, n_shells);
  return {{"mse", mse(a, b)},
          {"psnr", psnr(a, b)},
          {"pearson", pearson(a, b)},
          {"fsc_0.5_angstrom", optional_number(resolution_at(curve, 0.5))},
          {"fsc_0.143_angstrom", optional_number(resolution_at(curve, 0.143))}};
}

TiltSeries load_tilts(const fs::path& stack, const fs::path& angles) {
  return read_mrc(stack).to_tilt_series(read_tlt(angles));
}

Dims3 output_dims(const TiltSeries& ts, const RunConfig& config) {
  return {ts.detector.width, ts.detector.height, config.volume_size};
}

}  // namespace

void apply_thread_limit(int threads) {
  if (threads > 0) omp_set_num_threads(threads);
}

Simulation simulate(const RunConfig& config, std::uint64_t seed) {
  config.validate();
  Simulation sim;
  sim.phantom_seed = derive_seed(seed, 0);
  sim.noise_seed = derive_seed(seed, 1);

  PhantomSpec spec;
  spec.kind = config.phantom;
  spec.size = {config.volume_size, config.volume_size, config.volume_size};
  spec.count = config.phantom_count;
  spec.seed = sim.phantom_seed;
  spec.density_lo = config.density_lo;
  spec.density_hi = config.density_hi;
  spec.voxel_size = config.voxel_size;
  sim.phantom = make_phantom(spec);

  DetectorSpec det;
  det.width = config.volume_size;
  det.height = config.volume_size;
  det.pixel_x = config.voxel_size;
  det.pixel_y = config.voxel_size;
  det.kernel_width = config.kernel_width;
  const auto angles = tilt_range_deg(config.tilt_min, config.tilt_max, config.tilt_step);
  const TiltSeries clean = project(sim.phantom, angles, det, config.projection_step);

  NoiseModel noise;
  noise.kind = config.noise;
  noise.sigma = config.noise_sigma;
  noise.dose = config.noise_dose;
  noise.seed = sim.noise_seed;
  auto [even, odd] = apply_noise_pair(clean, noise);
  sim.even = std::move(even);
  sim.odd = std::move(odd);
  return sim;
}

json cmd_simulate(const RunConfig& config, const SimulateArgs& args) {
  config.validate();
  apply_thread_limit(config.threads);
  Run run("simulate", config);
  fs::create_directories(args.out_dir);
  const Simulation sim = run.timed("simulate", [&] { return simulate(config, config.seed); });
  run.report()["seeds"] = {{"seed", config.seed}, {"phantom", sim.phantom_seed}, {"noise", sim.noise_seed}};

  run.timed("write", [&] {
    const auto phantom = args.out_dir / "phantom.mrc";
    const auto even = args.out_dir / "tilts_even.mrc";
    const auto odd = args.out_dir / "tilts_odd.mrc";
    const auto angles = args.out_dir / "angles.tlt";
    run.output(phantom);
    write_mrc(sim.phantom, phantom);
    run.output(even);
    write_mrc(sim.even, even);
    run.output(odd);
    write_mrc(sim.odd, odd);
    run.output(angles);
    write_tlt(sim.even.angles, angles);
  });
  run.report()["metrics"] = {{"tilts", sim.even.count()},
                             {"volume", {sim.phantom.dims().nx, sim.phantom.dims().ny, sim.phantom.dims().nz}}};
  return run.commit(args.out_dir / "report.json");
}

json cmd_fbp(const RunConfig& config, const FbpArgs& args) {
  config.validate();
  apply_thread_limit(config.threads);
  Run run("fbp", config);
  run.report()["seeds"] = {{"seed", config.seed}};
  const TiltSeries ts = run.timed("read", [&] { return load_tilts(args.tilts, args.angles); });
  const TiltSeries filtered = run.timed("filter", [&] { return filter_tilt_series(ts, config.filter_spec()); });
  const Volume vol = run.timed("backproject", [&] {
    return backproject(filtered, output_dims(ts, config), ts.detector.pixel_x);
  });
  run.output(args.output);
  run.timed("write", [&] { write_mrc(vol, args.output); });
  if (args.reference) {
    const Volume truth = read_mrc(*args.reference).to_volume();
    run.report()["metrics"] = run.timed("metrics", [&] { return compare(truth, vol, config.n_shells); });
  }
  return run.commit(args.report.value_or(with_suffix(args.output, ".report.json")));
}

json cmd_train(const RunConfig& config, const TrainArgs& args) {
  config.validate();
  apply_thread_limit(config.threads);
  Run run("train", config);
  const NetConfig net = config.net_config();
  const TrainConfig tc = config.train_config();
  const bool wavelet = config.mode == ReconMode::wavelet;
  std::optional<WaveletBank> bank;
  if (wavelet) {
    bank = WaveletBank::named(config.wavelet);
    check_support_containment(*bank, config.patch_size, config.patch_spacing, config.voxel_size,
                              config.voxel_size, config.voxel_size);
  }

  std::vector<TrainingItem> items;
  json seeds = {{"seed", config.seed}};
  run.timed("prepare", [&] {
    const WaveletBank* b = bank ? &*bank : nullptr;
    if (!args.data_dirs.empty()) {
      for (const auto& dir : args.data_dirs) {
        const Volume vol = read_mrc(dir / "phantom.mrc").to_volume();
        const auto angles = read_tlt(dir / "angles.tlt");
        const TiltSeries even = read_mrc(dir / "tilts_even.mrc").to_tilt_series(angles);
        std::optional<TiltSeries> odd;
        if (fs::exists(dir / "tilts_odd.mrc")) odd = read_mrc(dir / "tilts_odd.mrc").to_tilt_series(angles);
        items.push_back(prepare_training_item(vol, even, odd ? &*odd : nullptr, config.filter_spec(), b));
      }
    } else if (args.simulate > 0) {
      json sim_seeds = json::array();
      for (int i = 0; i < args.simulate; ++i) {
        const std::uint64_t s = derive_seed(config.seed, 1000 + static_cast<std::uint64_t>(i));
        const Simulation sim = simulate(config, s);
        sim_seeds.push_back(s);
        items.push_back(prepare_training_item(sim.phantom, sim.even, &sim.odd, config.filter_spec(), b));
      }
      seeds["simulated"] = sim_seeds;
    } else {
      throw InvalidArgument("train needs data directories or a simulated dataset size");
    }
  });
  run.report()["seeds"] = seeds;

  std::optional<SliceMlpParams> init;
  if (args.init) {
    Checkpoint c = load_checkpoint(*args.init);
    if (!(c.params.config() == net)) throw InvalidArgument("initial checkpoint does not match the network config");
    init = std::move(c.params);
  }
  const TrainResult result = run.timed("train", [&] { return train(items, net, tc, init ? &*init : nullptr); });

  Checkpoint ckpt;
  ckpt.params = result.params;
  ckpt.mode = config.mode;
  ckpt.wavelet = config.wavelet;
  ckpt.patch_spacing = config.patch_spacing;
  ckpt.filter = config.filter_spec();

  const fs::path csv = args.loss_csv.value_or(with_suffix(args.checkpoint, ".loss.csv"));
  run.timed("write", [&] {
    run.output(args.checkpoint);
    save_checkpoint(ckpt, args.checkpoint);
    std::ostringstream s;
    s << "step,loss\n" << std::setprecision(17);
    for (std::size_t i = 0; i < result.loss_trace.size(); ++i) s << i << ',' << result.loss_trace[i] << '\n';
    run.output(csv);
    write_text(csv, s.str());
  });
  run.report()["metrics"] = {{"parameters", result.params.parameter_count()},
                             {"out_dim", net.out_dim},
                             {"items", items.size()},
                             {"final_loss", result.loss_trace.empty() ? json(nullptr) : json(result.loss_trace.back())}};
  return run.commit(args.report.value_or(with_suffix(args.checkpoint, ".report.json")));
}

json cmd_reconstruct(const RunConfig& config, const ReconstructArgs& args) {
  config.validate();
  apply_thread_limit(config.threads);
  Run run("reconstruct", config);
  run.report()["seeds"] = {{"seed", config.seed}};
  const Checkpoint ckpt = run.timed("load", [&] { return load_checkpoint(args.checkpoint); });
  if (args.mode && *args.mode != ckpt.mode)
    throw InvalidArgument("requested mode '" + to_string(*args.mode) + "' but the checkpoint was trained for '" +
                          to_string(ckpt.mode) + "'");
  const TiltSeries ts = run.timed("read", [&] { return load_tilts(args.tilts, args.angles); });
  const TiltSeries filtered =
      run.timed("filter", [&] { return filter_tilt_series(normalize_unit_std(ts), ckpt.filter); });

  ReconOptions opts;
  opts.patch_spacing = ckpt.patch_spacing;
  opts.chunk_size = config.chunk_size;
  ReconStats stats;
  const Dims3 dims = output_dims(ts, config);
  const Volume vol = run.timed("network", [&] {
    if (ckpt.mode == ReconMode::wavelet)
      return reconstruct_wavelet(ckpt.params, filtered, dims, ts.detector.pixel_x, WaveletBank::named(ckpt.wavelet),
                                 opts, &stats);
    return reconstruct_pixel(ckpt.params, filtered, dims, ts.detector.pixel_x, opts, &stats);
  });
  run.output(args.output);
  run.timed("write", [&] { write_mrc(vol, args.output); });

  json metrics = {{"mode", to_string(ckpt.mode)},
                  {"evaluations", stats.evaluations},
                  {"voxels", dims.count()},
                  {"network_ms", stats.network_ms},
                  {"transform_ms", stats.transform_ms}};
  if (args.reference) {
    const Volume truth = read_mrc(*args.reference).to_volume();
    metrics["comparison"] = compare(truth, vol, config.n_shells);
  }
  run.report()["metrics"] = metrics;
  return run.commit(args.report.value_or(with_suffix(args.output, ".report.json")));
}

json cmd_fsc(const RunConfig& config, const FscArgs& args) {
  config.validate();
  apply_thread_limit(config.threads);
  Run run("fsc", config);
  run.report()["seeds"] = {{"seed", config.seed}};
  const Volume a = read_mrc(args.a).to_volume();
  const Volume b = read_mrc(args.b).to_volume();
  const FscCurve curve = run.timed("fsc", [&] {
    const Box* mask = args.mask ? &*args.mask : nullptr;
    return args.self ? self_fsc(a, b, config.n_shells, mask) : fsc(a, b, config.n_shells, mask);
  });

  std::ostringstream s;
  s << "shell,frequency,fsc,count,empty\n" << std::setprecision(17);
  for (std::size_t k = 0; k < curve.values.size(); ++k)
    s << k << ',' << curve.shell_centers[k] << ',' << curve.values[k] << ',' << curve.counts[k] << ','
      << (curve.empty[k] ? 1 : 0) << '\n';
  run.output(args.csv);
  write_text(args.csv, s.str());

  json metrics = {{"fsc_0.5_angstrom", optional_number(resolution_at(curve, 0.5))},
                  {"fsc_0.143_angstrom", optional_number(resolution_at(curve, 0.143))},
                  {"pixel_size", curve.pixel_size},
                  {"shells", curve.values.size()}};
  if (args.mask) {
    const Box& m = *args.mask;
    metrics["mask"] = {m.x0, m.y0, m.z0, m.x1, m.y1, m.z1};
  }
  if (!curve.note.empty()) metrics["note"] = curve.note;
  run.report()["metrics"] = metrics;
  return run.commit(args.report.value_or(with_suffix(args.csv, ".report.json")));
}

}  // namespace loctomo
