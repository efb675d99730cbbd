#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "loctomo/errors.hpp"
#include "loctomo/net.hpp"
#include "loctomo/train.hpp"

using namespace loctomo;

namespace {

NetConfig small(int out_dim = 1, Pooling pooling = Pooling::mean) {
  NetConfig c;
  c.patch_size = 5;
  c.feature_dim = 4;
  c.hidden = 8;
  c.depth = 2;
  c.pe_dim = 8;
  c.out_dim = out_dim;
  c.pooling = pooling;
  return c;
}

SliceMlpParams kaiming(const NetConfig& c, std::uint64_t seed) {
  SliceMlpParams p(c);
  p.init_kaiming(seed);
  return p;
}

PatchStack scaled(PatchStack s, double a) {
  for (double& x : s.data) x *= a;
  return s;
}

// Joint permutation of tilts: data slabs and angles move together.
PatchStack permuted(const PatchStack& s, const std::vector<std::size_t>& order) {
  PatchStack out = s;
  for (std::size_t k = 0; k < order.size(); ++k) {
    out.angles[k] = s.angles[order[k]];
    std::copy_n(s.data.begin() + static_cast<std::ptrdiff_t>(order[k] * s.slice_stride()), s.slice_stride(),
                out.data.begin() + static_cast<std::ptrdiff_t>(k * s.slice_stride()));
  }
  return out;
}

double max_rel(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1e-300, b.cwiseAbs().maxCoeff());
}

}  // namespace

TEST_CASE("positional encoding examples") {
  const std::vector<double> zero{0.0, 0.0};
  const Mat pe = positional_encoding(zero, 8, 8 / std::numbers::pi);
  CHECK(pe.rows() == 2);
  CHECK(pe.cols() == 8);
  for (int j = 0; j < 4; ++j) {
    CHECK(pe(0, j) == 0.0);
    CHECK(pe(0, 4 + j) == 1.0);
  }
  CHECK(pe.row(0) == pe.row(1));
  CHECK_THROWS_AS(positional_encoding(zero, 7, 1.0), InvalidArgument);

  const Mat wide = positional_encoding(std::vector<double>{-1.2, 0.4, 1.5}, 128, 128 / std::numbers::pi);
  CHECK(wide.cwiseAbs().maxCoeff() <= 1.0);
}

TEST_CASE("positional encoding separates nearby angles over the tilt range") {
  const double scale = 128 / std::numbers::pi;
  std::vector<double> angles;
  for (double t = -1.57; t < 1.57; t += 0.01) {
    angles.push_back(t);
    angles.push_back(t + 1e-3);
  }
  const Mat pe = positional_encoding(angles, 128, scale);
  for (Eigen::Index k = 0; k < pe.rows(); k += 2) CHECK((pe.row(k) - pe.row(k + 1)).norm() > 0.0);
}

TEST_CASE("parameter layout") {
  const NetConfig c = small();
  const SliceMlpParams p(c);
  // per slice: embed pe x P, W_in hidden x pe, 2 hidden, W_out F x hidden
  const std::size_t slice = 8 * 5 + 8 * 8 + 2 * 64 + 4 * 8;
  const std::size_t combiner = 8 * 20 + 2 * 64 + 1 * 8;
  CHECK(p.parameter_count() == 5 * slice + combiner);
  CHECK(p.tensors().size() == 5 * 5 + 4);
  std::size_t offset = 0;
  for (const auto& t : p.tensors()) {
    CHECK(t.offset == offset);
    offset += t.size();
  }
  CHECK(p.tensor(p.embed_index(2)).rows() == 8);
  CHECK(p.tensor(p.embed_index(2)).cols() == 5);
  CHECK(p.tensor(p.combiner_index(0)).cols() == 20);
  CHECK(p.tensor(p.combiner_index(3)).rows() == 1);

  NetConfig even = c;
  even.patch_size = 4;
  CHECK_THROWS_AS(SliceMlpParams{even}, InvalidArgument);
  NetConfig bad_out = c;
  bad_out.out_dim = 3;
  CHECK_THROWS_AS(SliceMlpParams{bad_out}, InvalidArgument);
}

TEST_CASE("zero input gives zero output") {
  for (const int out : {1, 8}) {
    const SliceMlpParams p = kaiming(small(out), 1);
    PatchStack s = testing::random_stack(5, 7, 2);
    std::fill(s.data.begin(), s.data.end(), 0.0);
    CHECK(slice_mlp_forward(p, s).cwiseAbs().maxCoeff() == 0.0);
    const Mat slice = Mat::Zero(5, 7);
    CHECK(set_mlp_forward(p, 0, slice, s.angles).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("set block scales exactly by 3") {
  const SliceMlpParams p = kaiming(small(), 3);
  const PatchStack s = testing::random_stack(5, 9, 4);
  Mat slice(5, 9);
  for (int k = 0; k < 9; ++k)
    for (int c = 0; c < 5; ++c) slice(c, k) = s.at(static_cast<std::size_t>(k), 2, c);
  const Eigen::VectorXd a = set_mlp_forward(p, 2, slice, s.angles);
  const Eigen::VectorXd b = set_mlp_forward(p, 2, 3.0 * slice, s.angles);
  CHECK(max_rel(b, 3.0 * a) < 1e-14);
}

TEST_CASE("network is positively 1-homogeneous") {
  for (const auto pool : {Pooling::mean, Pooling::sum, Pooling::max})
    for (const int out : {1, 8}) {
      const SliceMlpParams p = kaiming(small(out, pool), 5);
      for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const PatchStack s = testing::random_stack(5, 11, 100 + seed);
        const Eigen::VectorXd f = slice_mlp_forward(p, s);
        for (const double a : {0.5, 2.0, 10.0}) CHECK(max_rel(slice_mlp_forward(p, scaled(s, a)), a * f) < 1e-5);
      }
    }
}

TEST_CASE("joint tilt permutation leaves the output bit-identical") {
  const SliceMlpParams p = kaiming(small(8), 6);
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const PatchStack s = testing::random_stack(5, 13, 200 + static_cast<std::uint64_t>(trial));
    std::vector<std::size_t> order(13);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const Eigen::VectorXd a = slice_mlp_forward(p, s), b = slice_mlp_forward(p, permuted(s, order));
    CHECK(a == b);

    PatchStack angles_only = s;
    for (std::size_t k = 0; k < order.size(); ++k) angles_only.angles[k] = s.angles[order[k]];
    if (order != std::vector<std::size_t>(angles_only.angles.size()))
      CHECK(slice_mlp_forward(p, angles_only) != a);
  }
}

TEST_CASE("variable tilt counts") {
  const SliceMlpParams p = kaiming(small(), 8);
  for (const int n : {1, 2, 7, 41, 61}) {
    const Eigen::VectorXd f = slice_mlp_forward(p, testing::random_stack(5, n, 300 + static_cast<std::uint64_t>(n)));
    CHECK(f.allFinite());
  }
  std::vector<PatchStack> batch{testing::random_stack(5, 3, 1), testing::random_stack(5, 17, 2)};
  const Mat out = slice_mlp_forward_batch(p, batch);
  CHECK(out.col(0) == slice_mlp_forward(p, batch[0]));
  CHECK(out.col(1) == slice_mlp_forward(p, batch[1]));
}

TEST_CASE("shape mismatches are rejected") {
  const SliceMlpParams p = kaiming(small(), 9);
  CHECK_THROWS_AS(slice_mlp_forward(p, testing::random_stack(7, 3, 1)), InvalidArgument);
  PatchStack empty;
  empty.patch_size = 5;
  CHECK_THROWS_AS(slice_mlp_forward(p, empty), InvalidArgument);
}

TEST_CASE("gradients match central differences on a scaled-down network") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const NetConfig c = small(seed % 2 == 0 ? 1 : 8);
    SliceMlpParams p = kaiming(c, 400 + seed);
    for (double& v : p.values()) v *= 1e-2;
    // Rescale so the tiny network still produces O(1) outputs.
    const double boost = std::pow(1e2, static_cast<double>(2 * p.layers_per_mlp()));
    std::vector<TrainingSample> batch;
    std::mt19937_64 rng(410 + seed);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int b = 0; b < 3; ++b) {
      TrainingSample sample{scaled(testing::random_stack(5, 4 + 3 * b, 420 + seed * 10 + b), boost),
                            Eigen::VectorXd(c.out_dim)};
      for (int o = 0; o < c.out_dim; ++o) sample.target(o) = g(rng);
      batch.push_back(std::move(sample));
    }
    const LossAndGrad lg = loss_and_grad(p, batch);
    const double h = 1e-4 * 1e-2;
    auto values = p.values();
    for (const auto& t : p.tensors()) {
      double err = 0.0, scale = 0.0;
      for (std::size_t i = 0; i < t.size(); ++i) {
        const std::size_t idx = t.offset + i;
        const double keep = values[idx];
        values[idx] = keep + h;
        const double lp = loss_and_grad(p, batch).loss;
        values[idx] = keep - h;
        const double lm = loss_and_grad(p, batch).loss;
        values[idx] = keep;
        const double fd = (lp - lm) / (2 * h);
        err = std::max(err, std::abs(fd - lg.grad[idx]));
        scale = std::max(scale, std::abs(fd));
      }
      INFO("seed ", seed, " tensor ", t.name);
      CHECK(err <= 1e-4 * scale);
    }
  }
}

TEST_CASE("targets equal to outputs give zero loss and gradient") {
  const SliceMlpParams p = kaiming(small(8), 10);
  std::vector<TrainingSample> batch;
  for (std::uint64_t b = 0; b < 4; ++b) {
    PatchStack s = testing::random_stack(5, 6, 500 + b);
    batch.push_back({s, slice_mlp_forward(p, s)});
  }
  const LossAndGrad lg = loss_and_grad(p, batch);
  // The training path sums in a different order from slice_mlp_forward.
  CHECK(lg.loss < 1e-28);
  CHECK(std::all_of(lg.grad.begin(), lg.grad.end(), [](double g) { return std::abs(g) < 1e-13; }));
}

TEST_CASE("duplicating the batch leaves loss and gradients unchanged") {
  const SliceMlpParams p = kaiming(small(), 11);
  std::vector<TrainingSample> batch;
  for (std::uint64_t b = 0; b < 3; ++b) {
    Eigen::VectorXd t(1);
    t(0) = 0.3 * static_cast<double>(b) - 0.2;
    batch.push_back({testing::random_stack(5, 5, 600 + b), t});
  }
  std::vector<TrainingSample> doubled = batch;
  doubled.insert(doubled.end(), batch.begin(), batch.end());
  const LossAndGrad a = loss_and_grad(p, batch), b = loss_and_grad(p, doubled);
  CHECK(b.loss == doctest::Approx(a.loss).epsilon(1e-12));
  for (std::size_t i = 0; i < a.grad.size(); ++i) CHECK(b.grad[i] == doctest::Approx(a.grad[i]).epsilon(1e-10).scale(1e-12));
  CHECK_THROWS_AS(loss_and_grad(p, std::vector<TrainingSample>{}), InvalidArgument);
}

TEST_CASE("adam examples") {
  std::vector<double> params{1.0, -2.0, 0.5};
  const std::vector<double> zero(3, 0.0);
  AdamState state(3, AdamHyper{});
  adam_step(params, zero, state);
  CHECK(params == std::vector<double>{1.0, -2.0, 0.5});
  CHECK(state.t == 1);

  std::vector<double> p2{1.0, -2.0, 0.5};
  const std::vector<double> g{3.0, -0.01, 100.0};
  AdamState s2(3, AdamHyper{});
  adam_step(p2, g, s2);
  CHECK(p2[0] == doctest::Approx(1.0 - 1e-3).epsilon(1e-9));
  CHECK(p2[1] == doctest::Approx(-2.0 + 1e-3).epsilon(1e-9));
  CHECK(p2[2] == doctest::Approx(0.5 - 1e-3).epsilon(1e-9));
  for (double v : s2.v) CHECK(v >= 0.0);

  std::vector<double> p3{1.0, -2.0, 0.5}, p4 = p3;
  AdamState s3(3, AdamHyper{}), s4 = s3;
  for (int i = 0; i < 5; ++i) {
    adam_step(p3, g, s3);
    adam_step(p4, g, s4);
  }
  CHECK(p3 == p4);
  CHECK(s3.m == s4.m);
}

TEST_CASE("FBP witness returns the scaled mean of patch centres") {
  NetConfig c = small();
  const SliceMlpParams w = fbp_witness_params(c, std::numbers::pi);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const PatchStack s = testing::random_stack(5, 3 + static_cast<int>(seed), 700 + seed);
    double mean = 0.0;
    for (std::size_t k = 0; k < s.count(); ++k) mean += s.center(k);
    mean /= static_cast<double>(s.count());
    CHECK(slice_mlp_forward(w, s)(0) == doctest::Approx(std::numbers::pi * mean).epsilon(1e-9).scale(1e-9));
  }
  c.pooling = Pooling::max;
  CHECK_THROWS_AS(fbp_witness_params(c, 1.0), InvalidArgument);
}
