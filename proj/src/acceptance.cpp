#include "loctomo/acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <iomanip>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
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

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string num(double v, int precision = 4) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

DetectorSpec square_detector(int n) {
  DetectorSpec det;
  det.width = n;
  det.height = n;
  return det;
}

PatchStack random_stack(int patch_size, int n_tilts, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> a(-std::numbers::pi / 3, std::numbers::pi / 3);
  PatchStack s;
  s.patch_size = patch_size;
  s.angles.resize(static_cast<std::size_t>(n_tilts));
  for (double& t : s.angles) t = a(rng);
  s.data.resize(static_cast<std::size_t>(n_tilts) * s.slice_stride());
  for (double& v : s.data) v = g(rng);
  return s;
}

CriterionResult titled(int id, std::string title) {
  CriterionResult r;
  r.id = id;
  r.title = std::move(title);
  return r;
}

// Network outputs (component 0) at the given voxels.
std::vector<double> evaluate_at(const SliceMlpParams& params, const TiltSeries& filtered, const Dims3& dims,
                                const std::vector<std::array<int, 3>>& voxels) {
  const PatchSpec spec{params.config().patch_size, 1.0};
  std::vector<double> out;
  out.reserve(voxels.size());
  const std::size_t chunk = 256;
  for (std::size_t b = 0; b < voxels.size(); b += chunk) {
    const std::size_t e = std::min(voxels.size(), b + chunk);
    std::vector<PatchStack> batch(e - b);
#pragma omp parallel for schedule(static)
    for (std::size_t i = b; i < e; ++i) {
      const auto& v = voxels[i];
      batch[i - b] = extract_patch_stack(filtered, grid_point(dims, 1.0, filtered.detector, v[0], v[1], v[2]), spec);
    }
    const Mat y = slice_mlp_forward_batch(params, batch);
    for (Eigen::Index c = 0; c < y.cols(); ++c) out.push_back(y(0, c));
  }
  return out;
}

// Resolution with "not crossed" ranked as finer than any crossing.
double resolution_or_zero(const FscCurve& curve, double threshold) {
  return resolution_at(curve, threshold).value_or(0.0);
}

std::string resolution_text(const FscCurve& curve, double threshold) {
  const auto r = resolution_at(curve, threshold);
  return r ? num(*r) + " A" : std::string("not crossed");
}

class Suite {
 public:
  explicit Suite(const AcceptanceOptions& o) : opt_(o) {}

  void log(const std::string& line) const {
    if (opt_.log) *opt_.log << "  .. " << line << std::endl;
  }

  CriterionResult c1_locality();
  CriterionResult c2_fbp_sanity();
  CriterionResult c3_gradients();
  CriterionResult c4_homogeneity();
  CriterionResult c5_permutation();
  CriterionResult c6_witness();
  CriterionResult c7_learning_gain();
  CriterionResult c8_wavelet();
  CriterionResult c9_variable_tilts();
  CriterionResult c10_fsc();
  CriterionResult c11_io();

 private:
  struct Learned {
    double sigma = 0.0;
    double calib_pearson = 0.0;
    Volume truth;          // z-scored held-out phantom
    TiltSeries filtered;   // held-out, unit std, filtered
    Volume fbp;
    SliceMlpParams pixel;
    SliceMlpParams wavelet;
    Volume pixel_recon;
    Volume wavelet_recon;
    ReconStats pixel_stats;
    ReconStats wavelet_stats;
    double pixel_seconds = 0.0;
    double wavelet_seconds = 0.0;
    double train_seconds = 0.0;
  };

  const Learned& learned();
  std::uint64_t seed(std::uint64_t stream) const { return derive_seed(opt_.seed, stream); }
  TiltSeries simulate_clean(const Volume& phantom, const std::vector<double>& angles) const {
    return project(phantom, angles, square_detector(phantom.dims().nx), 0.5);
  }

  AcceptanceOptions opt_;
  std::optional<Learned> learned_;
};

CriterionResult Suite::c1_locality() {
  CriterionResult r = titled(1, "locality: >=95% of point-source mass within 1 px of the trajectory");
  const auto t0 = Clock::now();
  const auto angles = tilt_range_deg(-60, 60, 3);
  const DetectorSpec det = square_detector(64);

  // The centred point-source phantom plus a few off-centre sources, one per
  // projection run so their footprints never mix.
  std::vector<std::array<int, 3>> sources;
  PhantomSpec spec;
  spec.kind = PhantomKind::point_grid;
  spec.count = 1;
  const Volume centred = make_phantom(spec);
  for (std::size_t i = 0; i < centred.data().size(); ++i)
    if (centred.data()[i] != 0.0) {
      const int n = 64;
      sources.push_back({static_cast<int>(i % n), static_cast<int>((i / n) % n), static_cast<int>(i / (n * n))});
    }
  std::mt19937_64 rng(seed(1));
  std::uniform_int_distribution<int> pos(12, 51);
  for (int i = 0; i < 4; ++i) sources.push_back({pos(rng), pos(rng), pos(rng)});

  double worst = 1.0;
  for (const auto& s : sources) {
    Volume v(Dims3{64, 64, 64}, 1.0);
    v.at(s[0], s[1], s[2]) = 1.0;
    const TiltSeries ts = project(v, angles, det, 0.5);
    const Vec3 r0 = grid_point(v.dims(), 1.0, det, s[0], s[1], s[2]);
    for (std::size_t k = 0; k < ts.count(); ++k) {
      const TrajectoryPoint tp = trajectory(r0, angles[k]);
      const double col = detector_col(det, tp.u), row = detector_row(det, tp.v);
      const ImageView im = ts.projection(k);
      double total = 0.0, near = 0.0;
      for (int j = 0; j < im.height; ++j)
        for (int i = 0; i < im.width; ++i) {
          const double a = std::abs(im.at(i, j));
          total += a;
          if (std::hypot(i - col, j - row) <= 1.0) near += a;
        }
      worst = std::min(worst, total > 0.0 ? near / total : 0.0);
    }
  }
  r.seconds = seconds_since(t0);
  r.pass = worst >= 0.95 && r.seconds < 10.0;
  r.detail = "worst tilt fraction " + num(worst, 6) + " over " + std::to_string(sources.size()) +
             " sources x 41 tilts, " + num(r.seconds, 3) + " s (limit 10 s)";
  return r;
}

CriterionResult Suite::c2_fbp_sanity() {
  CriterionResult r = titled(2, "FBP sanity: full-range Pearson > 0.9, wedge strictly lower");
  const auto t0 = Clock::now();
  PhantomSpec spec;
  spec.seed = seed(2);
  const Volume phantom = make_phantom(spec);
  const auto full = tilt_range_deg(-89, 89, 2);
  const auto wedge = tilt_range_deg(-60, 60, 3);
  const Volume a = fbp(simulate_clean(phantom, full), FilterSpec{}, phantom.dims(), 1.0);
  const Volume b = fbp(simulate_clean(phantom, wedge), FilterSpec{}, phantom.dims(), 1.0);
  const double pf = pearson(phantom, a), pw = pearson(phantom, b);
  r.seconds = seconds_since(t0);
  r.pass = full.size() == 90 && pf > 0.9 && pw < pf && r.seconds < 60.0;
  r.detail = "pearson full(90 tilts)=" + num(pf) + ", wedge(41 tilts)=" + num(pw) + ", " + num(r.seconds, 3) +
             " s (limit 60 s)";
  return r;
}

CriterionResult Suite::c3_gradients() {
  CriterionResult r = titled(3, "gradients: reverse mode vs central differences, rel err < 1e-4 per tensor");
  const auto t0 = Clock::now();
  const Pooling poolings[] = {Pooling::mean, Pooling::sum, Pooling::max, Pooling::mean, Pooling::sum};
  double worst = 0.0;
  std::string worst_name;
  for (int s = 0; s < 5; ++s) {
    NetConfig c;
    c.patch_size = 5;
    c.feature_dim = 4;
    c.hidden = 6;
    c.depth = 2;
    c.pe_dim = 8;
    c.out_dim = s % 2 == 0 ? 1 : 8;
    c.pooling = poolings[s];
    SliceMlpParams params(c);
    params.init_kaiming(seed(300 + s));
    std::mt19937_64 rng(seed(310 + s));
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<TrainingSample> batch;
    for (int b = 0; b < 3; ++b) {
      TrainingSample sample{random_stack(c.patch_size, 5 + 2 * b, rng), Eigen::VectorXd(c.out_dim)};
      for (int o = 0; o < c.out_dim; ++o) sample.target(o) = g(rng);
      batch.push_back(std::move(sample));
    }
    const LossAndGrad lg = loss_and_grad(params, batch);
    const double h = 1e-6;
    auto values = params.values();
    for (const auto& t : params.tensors()) {
      double err = 0.0, scale = 0.0;
      for (std::size_t i = 0; i < t.size(); ++i) {
        const std::size_t idx = t.offset + i;
        const double keep = values[idx];
        values[idx] = keep + h;
        const double lp = loss_and_grad(params, batch).loss;
        values[idx] = keep - h;
        const double lm = loss_and_grad(params, batch).loss;
        values[idx] = keep;
        const double fd = (lp - lm) / (2.0 * h);
        err = std::max(err, std::abs(fd - lg.grad[idx]));
        scale = std::max(scale, std::abs(fd));
      }
      const double rel = scale > 1e-12 ? err / scale : err;
      if (rel > worst) {
        worst = rel;
        worst_name = "seed " + std::to_string(s) + " " + t.name;
      }
    }
  }
  r.seconds = seconds_since(t0);
  r.pass = worst < 1e-4;
  r.detail = "max tensor rel err " + num(worst, 3) + " (" + worst_name + "), 5 seeds, pooling mean/sum/max, " +
             num(r.seconds, 3) + " s";
  return r;
}

CriterionResult Suite::c4_homogeneity() {
  CriterionResult r = titled(4, "1-homogeneity: f(a p) = a f(p), rel err < 1e-5");
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (const int out_dim : {1, 8}) {
    SliceMlpParams params(opt_.scale.net(out_dim));
    params.init_kaiming(seed(400 + out_dim));
    std::mt19937_64 rng(seed(410 + out_dim));
    std::uniform_int_distribution<int> n(5, 41);
    for (int i = 0; i < 100; ++i) {
      const PatchStack p = random_stack(params.config().patch_size, n(rng), rng);
      const Eigen::VectorXd base = slice_mlp_forward(params, p);
      for (const double alpha : {0.5, 2.0, 10.0}) {
        PatchStack q = p;
        for (double& v : q.data) v *= alpha;
        const Eigen::VectorXd scaled = slice_mlp_forward(params, q);
        const double denom = std::max((alpha * base).norm(), 1e-300);
        worst = std::max(worst, (scaled - alpha * base).norm() / denom);
      }
    }
  }
  r.seconds = seconds_since(t0);
  r.pass = worst < 1e-5;
  r.detail = "max rel err " + num(worst, 3) + " over 2 x 100 stacks x 3 scales";
  return r;
}

CriterionResult Suite::c5_permutation() {
  CriterionResult r = titled(5, "joint tilt-permutation invariance, bit-identical");
  const auto t0 = Clock::now();
  SliceMlpParams params(opt_.scale.net(1));
  params.init_kaiming(seed(500));
  std::mt19937_64 rng(seed(501));
  const PatchStack p = random_stack(params.config().patch_size, 41, rng);
  const Eigen::VectorXd base = slice_mlp_forward(params, p);
  int identical = 0;
  std::vector<std::size_t> order(p.count());
  for (int trial = 0; trial < 50; ++trial) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    PatchStack q;
    q.patch_size = p.patch_size;
    for (std::size_t k : order) {
      q.angles.push_back(p.angles[k]);
      q.data.insert(q.data.end(), p.data.begin() + static_cast<std::ptrdiff_t>(k * p.slice_stride()),
                    p.data.begin() + static_cast<std::ptrdiff_t>((k + 1) * p.slice_stride()));
    }
    const Eigen::VectorXd out = slice_mlp_forward(params, q);
    if (out.size() == base.size() && std::equal(out.data(), out.data() + out.size(), base.data())) ++identical;
  }
  r.seconds = seconds_since(t0);
  r.pass = identical == 50;
  r.detail = std::to_string(identical) + "/50 permutations bit-identical";
  return r;
}

CriterionResult Suite::c6_witness() {
  CriterionResult r = titled(6, "FBP witness parameters reproduce backproject() within 1e-5");
  const auto t0 = Clock::now();
  PhantomSpec spec;
  spec.seed = seed(600);
  const Volume phantom = make_phantom(spec);
  const TiltSeries ts = simulate_clean(phantom, tilt_range_deg(-60, 60, 3));
  const TiltSeries filtered = filter_tilt_series(normalize_unit_std(ts), FilterSpec{});
  const Volume bp = backproject(filtered, phantom.dims(), 1.0, AngularWeights::uniform);

  NetConfig c = opt_.scale.net(1);
  c.pooling = Pooling::mean;
  const SliceMlpParams witness = fbp_witness_params(c, std::numbers::pi);

  std::mt19937_64 rng(seed(601));
  std::uniform_int_distribution<int> pos(0, 63);
  std::vector<std::array<int, 3>> voxels(1000);
  for (auto& v : voxels) v = {pos(rng), pos(rng), pos(rng)};
  const auto net = evaluate_at(witness, filtered, phantom.dims(), voxels);
  double worst = 0.0, peak = 0.0;
  for (std::size_t i = 0; i < voxels.size(); ++i) {
    const double ref = bp.at(voxels[i][0], voxels[i][1], voxels[i][2]);
    worst = std::max(worst, std::abs(net[i] - ref));
    peak = std::max(peak, std::abs(ref));
  }
  r.seconds = seconds_since(t0);
  r.pass = worst < 1e-5;
  r.detail = "max abs err " + num(worst, 3) + " at 1000 voxels (backprojection peak |value| " + num(peak, 3) + ")";
  return r;
}

const Suite::Learned& Suite::learned() {
  if (learned_) return *learned_;
  Learned L;
  const auto& sc = opt_.scale;
  const int n = sc.volume;
  const auto angles = tilt_range_deg(-60, 60, 3);
  const FilterSpec filter{};
  const WaveletBank bank = WaveletBank::named("bior2.2");
  check_support_containment(bank, sc.patch_size, 1.0, 1.0, 1.0, 1.0);

  // Noise level where plain FBP of a held-out-like phantom correlates ~0.5
  // with the truth.
  {
    PhantomSpec spec;
    spec.size = {n, n, n};
    spec.seed = seed(700);
    const Volume phantom = make_phantom(spec);
    const TiltSeries clean = simulate_clean(phantom, angles);
    auto corr = [&](double sigma) {
      NoiseModel m{NoiseKind::gaussian, sigma, 1.0, seed(701)};
      return pearson(phantom, fbp(apply_noise(clean, m), filter, phantom.dims(), 1.0));
    };
    double lo = 0.0, hi = 1.0;
    while (corr(hi) > sc.target_fbp_pearson) hi *= 2.0;
    for (int it = 0; it < 30; ++it) {
      const double mid = 0.5 * (lo + hi);
      (corr(mid) > sc.target_fbp_pearson ? lo : hi) = mid;
    }
    L.sigma = 0.5 * (lo + hi);
    L.calib_pearson = corr(L.sigma);
    log("noise sigma " + num(L.sigma) + " gives calibration FBP pearson " + num(L.calib_pearson));
  }

  auto make_item = [&](PhantomKind kind, std::uint64_t s) {
    PhantomSpec spec;
    spec.kind = kind;
    spec.size = {n, n, n};
    spec.seed = derive_seed(s, 0);
    const Volume phantom = make_phantom(spec);
    NoiseModel m{NoiseKind::gaussian, L.sigma, 1.0, derive_seed(s, 1)};
    auto [even, odd] = apply_noise_pair(simulate_clean(phantom, angles), m);
    return prepare_training_item(phantom, even, &odd, filter, &bank);
  };

  std::vector<TrainingItem> items;
  for (int i = 0; i < sc.train_phantoms; ++i)
    items.push_back(make_item(i % 2 == 0 ? PhantomKind::spheres : PhantomKind::shells, seed(710 + i)));
  const TrainingItem held = make_item(PhantomKind::spheres, seed(799));
  L.truth = held.volume;
  L.filtered = held.even;
  L.fbp = backproject(L.filtered, L.truth.dims(), 1.0);

  const auto t_all = Clock::now();
  TrainConfig tc;
  tc.batch_size = sc.batch_size;
  tc.steps = sc.steps;
  tc.lr = sc.lr;
  tc.seed = seed(720);
  auto t0 = Clock::now();
  tc.mode = ReconMode::pixel;
  L.pixel = train(items, sc.net(1), tc).params;
  log("pixel model trained (" + std::to_string(tc.steps) + " steps) in " + num(seconds_since(t0), 3) + " s");
  t0 = Clock::now();
  tc.mode = ReconMode::wavelet;
  L.wavelet = train(items, sc.net(8), tc).params;
  log("wavelet model trained in " + num(seconds_since(t0), 3) + " s");
  L.train_seconds = seconds_since(t_all);

  t0 = Clock::now();
  L.pixel_recon = reconstruct_pixel(L.pixel, L.filtered, L.truth.dims(), 1.0, {}, &L.pixel_stats);
  L.pixel_seconds = seconds_since(t0);
  t0 = Clock::now();
  L.wavelet_recon = reconstruct_wavelet(L.wavelet, L.filtered, L.truth.dims(), 1.0, bank, {}, &L.wavelet_stats);
  L.wavelet_seconds = seconds_since(t0);
  log("reconstruction pixel " + num(L.pixel_seconds, 3) + " s, wavelet " + num(L.wavelet_seconds, 3) + " s");
  learned_ = std::move(L);
  return *learned_;
}

CriterionResult Suite::c7_learning_gain() {
  CriterionResult r = titled(7, "learning gain over FBP: MSE, FSC 0.5 crossing, empty-region std");
  const auto t0 = Clock::now();
  const Learned& L = learned();
  const Volume net = normalize_volume(L.pixel_recon);
  const Volume base = normalize_volume(L.fbp);
  const double mse_net = mse(L.truth, net), mse_fbp = mse(L.truth, base);
  const FscCurve fsc_net = fsc(L.truth, net), fsc_fbp = fsc(L.truth, base);
  const double res_net = resolution_or_zero(fsc_net, 0.5), res_fbp = resolution_or_zero(fsc_fbp, 0.5);
  const bool finer = res_net < res_fbp;

  // Corner column outside the cylinder that holds every phantom object.
  const int n = L.truth.dims().nx;
  const int w = n / 8;
  const Box box{0, w, 0, w, n - w, w};
  bool empty = true;
  for (int z = box.z0; z < box.z1; ++z)
    for (int y = box.y0; y < box.y1; ++y)
      for (int x = box.x0; x < box.x1; ++x) empty = empty && L.truth.at(x, y, z) == L.truth.at(0, box.y0, 0);
  const double std_net = empty_region_histogram(L.pixel_recon, box, 64).region_std;
  const double std_fbp = empty_region_histogram(L.fbp, box, 64).region_std;

  r.seconds = seconds_since(t0) + L.train_seconds;
  r.pass = empty && mse_net < mse_fbp && finer && std_net < std_fbp;
  r.detail = "sigma " + num(L.sigma) + " (FBP pearson " + num(L.calib_pearson) + "); MSE net " + num(mse_net) +
             " vs FBP " + num(mse_fbp) + "; FSC0.5 net " + resolution_text(fsc_net, 0.5) + " vs FBP " +
             resolution_text(fsc_fbp, 0.5) + "; empty std net " + num(std_net) + " vs FBP " + num(std_fbp) +
             (empty ? "" : " (region not empty!)");
  return r;
}

CriterionResult Suite::c8_wavelet() {
  CriterionResult r = titled(8, "wavelet mode: PR < 1e-6, 1/8 evaluations, >= 4x faster, corr(pixel, wavelet) > 0.9");
  const auto t0 = Clock::now();
  const Learned& L = learned();
  const WaveletBank bank = WaveletBank::named("bior2.2");
  std::mt19937_64 rng(seed(800));
  std::normal_distribution<double> g(0.0, 1.0);
  Volume v(Dims3{64, 64, 64}, 1.0);
  for (double& x : v.data()) x = g(rng);
  const Volume back = idwt3(dwt3(v, bank), bank);
  double pr = 0.0;
  for (std::size_t i = 0; i < v.data().size(); ++i) pr = std::max(pr, std::abs(v.data()[i] - back.data()[i]));

  const bool eighth = L.wavelet_stats.evaluations * 8 == L.pixel_stats.evaluations;
  const double speedup = L.pixel_seconds / L.wavelet_seconds;
  const double corr = pearson(L.pixel_recon, L.wavelet_recon);
  r.seconds = seconds_since(t0);
  r.pass = pr < 1e-6 && eighth && speedup >= 4.0 && corr > 0.9;
  r.detail = "PR err " + num(pr, 3) + "; evaluations " + std::to_string(L.wavelet_stats.evaluations) + " vs " +
             std::to_string(L.pixel_stats.evaluations) + "; speedup " + num(speedup, 3) + "x (" +
             num(L.pixel_seconds, 3) + " s vs " + num(L.wavelet_seconds, 3) + " s); corr " + num(corr) +
             "; wavelet-vs-truth pearson " + num(pearson(L.truth, L.wavelet_recon));
  return r;
}

CriterionResult Suite::c9_variable_tilts() {
  CriterionResult r = titled(9, "variable tilt count: finite outputs, fixed parameters, MSE rises with drop fraction");
  const auto t0 = Clock::now();
  const Learned& L = learned();
  const std::size_t params_before = L.pixel.parameter_count();
  const Dims3 d = L.truth.dims();

  std::mt19937_64 rng(seed(900));
  std::uniform_int_distribution<int> pos(0, d.nx - 1);
  std::vector<std::array<int, 3>> voxels(4096);
  for (auto& v : voxels) v = {pos(rng), pos(rng), pos(rng)};

  const double fractions[] = {0.0, 0.1, 0.2, 0.3};
  std::vector<double> mean_mse;
  bool finite = true;
  const std::size_t n = L.filtered.count();
  for (const double f : fractions) {
    double acc = 0.0;
    const int seeds = f == 0.0 ? 1 : 5;
    for (int s = 0; s < seeds; ++s) {
      std::vector<std::size_t> keep(n);
      std::iota(keep.begin(), keep.end(), 0);
      std::mt19937_64 drop(seed(910 + s * 10 + static_cast<std::uint64_t>(f * 100)));
      std::shuffle(keep.begin(), keep.end(), drop);
      keep.resize(n - static_cast<std::size_t>(std::lround(f * static_cast<double>(n))));
      std::sort(keep.begin(), keep.end());
      const auto out = evaluate_at(L.pixel, L.filtered.subset(keep), d, voxels);
      double e = 0.0;
      for (std::size_t i = 0; i < voxels.size(); ++i) {
        finite = finite && std::isfinite(out[i]);
        const double diff = out[i] - L.truth.at(voxels[i][0], voxels[i][1], voxels[i][2]);
        e += diff * diff;
      }
      acc += e / static_cast<double>(voxels.size());
    }
    mean_mse.push_back(acc / seeds);
  }
  bool monotone = true;
  for (std::size_t i = 1; i < mean_mse.size(); ++i) monotone = monotone && mean_mse[i] >= mean_mse[i - 1];
  r.seconds = seconds_since(t0);
  r.pass = finite && monotone && L.pixel.parameter_count() == params_before;
  std::string trend;
  for (std::size_t i = 0; i < mean_mse.size(); ++i)
    trend += (i ? ", " : "") + num(fractions[i] * 100, 2) + "%: " + num(mean_mse[i]);
  r.detail = "mean MSE by drop fraction {" + trend + "}" + (finite ? "" : ", non-finite output");
  return r;
}

CriterionResult Suite::c10_fsc() {
  CriterionResult r = titled(10, "FSC suite: self = 1, noise ~ 0, scale invariance, hand-computed crossing");
  const auto t0 = Clock::now();
  std::mt19937_64 rng(seed(1000));
  std::normal_distribution<double> g(0.0, 1.0);
  auto noise = [&] {
    Volume v(Dims3{64, 64, 64}, 1.0);
    for (double& x : v.data()) x = g(rng);
    return v;
  };
  const Volume a = noise(), b = noise();

  const FscCurve self = fsc(a, a);
  double self_dev = 0.0;
  for (double v : self.values) self_dev = std::max(self_dev, std::abs(v - 1.0));

  const FscCurve indep = fsc(a, b);
  double mean_abs = 0.0;
  for (std::size_t k = 1; k < indep.values.size(); ++k) mean_abs += std::abs(indep.values[k]);
  mean_abs /= static_cast<double>(indep.values.size() - 1);

  Volume a3 = a, b2 = b;
  for (double& x : a3.data()) x *= 3.0;
  for (double& x : b2.data()) x *= 0.25;
  const FscCurve scaled = fsc(a3, b2);
  double scale_dev = 0.0;
  for (std::size_t k = 0; k < indep.values.size(); ++k)
    scale_dev = std::max(scale_dev, std::abs(scaled.values[k] - indep.values[k]));

  FscCurve hand;
  hand.pixel_size = 7.84;
  hand.shell_centers = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
  hand.values = {1.0, 1.0, 1.0, 0.0, 0.0, 0.0};
  hand.empty.assign(6, false);
  const auto crossing = resolution_at(hand, 0.5);
  const bool hand_ok = crossing && std::abs(*crossing - 31.36) < 1e-9;

  r.seconds = seconds_since(t0);
  r.pass = self_dev < 1e-6 && mean_abs < 0.1 && scale_dev < 1e-10 && hand_ok;
  r.detail = "self dev " + num(self_dev, 3) + "; noise mean|FSC| " + num(mean_abs, 3) + "; scale dev " +
             num(scale_dev, 3) + "; hand crossing " + (crossing ? num(*crossing, 10) : "none") + " A (expect 31.36)";
  return r;
}

CriterionResult Suite::c11_io() {
  CriterionResult r = titled(11, "I/O: MRC and checkpoint round-trips bit-exact, fuzzed headers give typed errors");
  const auto t0 = Clock::now();
  std::mt19937_64 rng(seed(1100));
  std::normal_distribution<double> g(0.0, 1.0);
  bool ok = true;
  std::string why;
  auto fail = [&](const std::string& m) {
    ok = false;
    if (why.empty()) why = m;
  };

  // MRC round-trip, including the 1x1x1 degenerate case.
  for (const Dims3 dims : {Dims3{17, 9, 5}, Dims3{1, 1, 1}}) {
    Volume v(dims, 2.5);
    for (double& x : v.data()) x = static_cast<float>(g(rng));
    const auto bytes = encode_mrc(v.dims(), v.data(), 2.5, 2.5, 2.5);
    const MrcData back = parse_mrc(bytes);
    if (!(back.dims() == dims) || back.values != v.storage() || back.header.voxel_size() != 2.5f)
      fail("MRC round-trip mismatch");
    if (bytes.size() != 1024 + 4 * dims.count()) fail("MRC size");
  }

  // Checkpoint round-trip through the file system.
  NetConfig c = opt_.scale.net(8);
  Checkpoint ck;
  ck.params = SliceMlpParams(c);
  ck.params.init_kaiming(seed(1101));
  ck.mode = ReconMode::wavelet;
  for (double& x : ck.params.values()) x = static_cast<float>(x);
  const auto path = std::filesystem::temp_directory_path() /
                    ("loctomo_accept_" + std::to_string(seed(1102)) + ".ckpt");
  save_checkpoint(ck, path);
  const Checkpoint loaded = load_checkpoint(path);
  std::filesystem::remove(path);
  const auto orig = ck.params.values();
  const auto got = loaded.params.values();
  if (!std::equal(orig.begin(), orig.end(), got.begin(), got.end())) fail("checkpoint values differ");
  const PatchStack probe = random_stack(c.patch_size, 23, rng);
  const Eigen::VectorXd y0 = slice_mlp_forward(ck.params, probe), y1 = slice_mlp_forward(loaded.params, probe);
  if (!std::equal(y0.data(), y0.data() + y0.size(), y1.data())) fail("checkpoint forward differs");
  if (encode_checkpoint(loaded) != encode_checkpoint(ck)) fail("checkpoint re-encode differs");

  // Fuzzing: every mutation either parses or throws a loctomo::Error.
  int cases = 0, typed = 0, parsed = 0;
  auto fuzz = [&](const std::vector<std::uint8_t>& seed_bytes, std::size_t header, auto&& parse) {
    std::uniform_int_distribution<std::size_t> where(0, header - 1);
    std::uniform_int_distribution<int> byte(0, 255), kind(0, 3), flips(1, 8);
    for (int i = 0; i < 1500; ++i) {
      std::vector<std::uint8_t> m = seed_bytes;
      switch (kind(rng)) {
        case 0:
          for (int f = flips(rng); f > 0; --f) m[where(rng)] = static_cast<std::uint8_t>(byte(rng));
          break;
        case 1:
          m.resize(std::uniform_int_distribution<std::size_t>(0, m.size() - 1)(rng));
          break;
        case 2: {
          const std::size_t at = where(rng) & ~std::size_t{3};
          const std::int32_t extreme[] = {0, -1, 1, 0x7fffffff, static_cast<std::int32_t>(0x80000000), 3, 6};
          const std::int32_t val = extreme[std::uniform_int_distribution<int>(0, 6)(rng)];
          if (at + 4 <= m.size()) std::memcpy(m.data() + at, &val, 4);
          break;
        }
        default:
          m.push_back(static_cast<std::uint8_t>(byte(rng)));
          m[where(rng)] ^= 0xff;
      }
      ++cases;
      try {
        parse(m);
        ++parsed;
      } catch (const Error&) {
        ++typed;
      } catch (const std::exception& e) {
        fail(std::string("untyped exception: ") + e.what());
      }
    }
  };
  Volume small(Dims3{6, 5, 4}, 1.0);
  for (double& x : small.data()) x = static_cast<float>(g(rng));
  fuzz(encode_mrc(small.dims(), small.data(), 1, 1, 1), 1024, [](const auto& m) { parse_mrc(m); });
  NetConfig tiny;
  tiny.patch_size = 3;
  tiny.feature_dim = 2;
  tiny.hidden = 3;
  tiny.depth = 1;
  tiny.pe_dim = 4;
  Checkpoint tc;
  tc.params = SliceMlpParams(tiny);
  tc.params.init_kaiming(1);
  const auto ck_bytes = encode_checkpoint(tc);
  fuzz(ck_bytes, std::min<std::size_t>(ck_bytes.size(), 400), [](const auto& m) { decode_checkpoint(m); });

  r.seconds = seconds_since(t0);
  r.pass = ok;
  r.detail = "round-trips exact; fuzz " + std::to_string(cases) + " cases: " + std::to_string(typed) +
             " typed errors, " + std::to_string(parsed) + " parsed" + (why.empty() ? "" : "; " + why);
  return r;
}

}  // namespace

NetConfig AcceptanceScale::net(int out_dim) const {
  NetConfig c;
  c.patch_size = patch_size;
  c.feature_dim = feature_dim;
  c.hidden = hidden;
  c.depth = depth;
  c.pe_dim = pe_dim;
  c.out_dim = out_dim;
  return c;
}

std::string format_result(const CriterionResult& r) {
  std::ostringstream s;
  s << (r.pass ? "PASS" : "FAIL") << "  criterion " << std::setw(2) << r.id << "  " << r.title << "  ["
    << r.detail << "]";
  return s.str();
}

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& options,
                                            const std::function<void(const CriterionResult&)>& on_result) {
  Suite suite(options);
  using Fn = CriterionResult (Suite::*)();
  const std::map<int, Fn> table = {
      {1, &Suite::c1_locality},       {2, &Suite::c2_fbp_sanity},     {3, &Suite::c3_gradients},
      {4, &Suite::c4_homogeneity},    {5, &Suite::c5_permutation},    {6, &Suite::c6_witness},
      {7, &Suite::c7_learning_gain},  {8, &Suite::c8_wavelet},        {9, &Suite::c9_variable_tilts},
      {10, &Suite::c10_fsc},          {11, &Suite::c11_io},
  };
  std::vector<int> ids = options.criteria;
  if (ids.empty())
    for (const auto& [id, fn] : table) ids.push_back(id);
  std::vector<CriterionResult> results;
  for (const int id : ids) {
    const auto it = table.find(id);
    if (it == table.end()) throw InvalidArgument("no acceptance criterion " + std::to_string(id));
    CriterionResult r;
    try {
      r = (suite.*(it->second))();
    } catch (const std::exception& e) {
      r.id = id;
      r.title = "criterion raised an error";
      r.pass = false;
      r.detail = e.what();
    }
    if (on_result) on_result(r);
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace loctomo
