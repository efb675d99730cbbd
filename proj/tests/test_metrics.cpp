#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "loctomo/errors.hpp"
#include "loctomo/metrics.hpp"

using namespace loctomo;

namespace {

FscCurve curve_of(std::vector<double> centers, std::vector<double> values, double pixel) {
  FscCurve c;
  c.shell_centers = std::move(centers);
  c.values = std::move(values);
  c.counts.assign(c.values.size(), 1);
  c.empty.assign(c.values.size(), false);
  c.pixel_size = pixel;
  return c;
}

Volume scaled(const Volume& v, double a) {
  Volume out = v;
  for (double& x : out.data()) x *= a;
  return out;
}

}  // namespace

TEST_CASE("self-correlation is one in every shell") {
  const Volume a = testing::random_volume(Dims3{24, 24, 24}, 1);
  const FscCurve c = fsc(a, a);
  CHECK(c.values.size() == 12);
  for (double v : c.values) CHECK(v == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(c.shell_centers.front() == 0.0);
  CHECK(std::is_sorted(c.shell_centers.begin(), c.shell_centers.end()));
  CHECK(c.shell_centers.back() <= 0.5);
}

TEST_CASE("independent white noise is uncorrelated") {
  const Volume a = testing::random_volume(Dims3{64, 64, 64}, 2), b = testing::random_volume(Dims3{64, 64, 64}, 3);
  const FscCurve c = fsc(a, b);
  double mean_abs = 0.0;
  for (std::size_t k = 1; k < c.values.size(); ++k) mean_abs += std::abs(c.values[k]);
  CHECK(mean_abs / static_cast<double>(c.values.size() - 1) < 0.1);
}

TEST_CASE("fsc symmetry and scale invariance") {
  const Volume a = testing::random_volume(Dims3{16, 20, 18}, 4), b = testing::random_volume(Dims3{16, 20, 18}, 5);
  const FscCurve ab = fsc(a, b), ba = fsc(b, a);
  CHECK(ab.values == ba.values);
  const FscCurve s = fsc(scaled(a, 2.5), scaled(b, 0.3));
  for (std::size_t k = 0; k < ab.values.size(); ++k) CHECK(std::abs(s.values[k] - ab.values[k]) < 1e-10);
  const FscCurve twice = fsc(a, scaled(a, 2.0));
  for (double v : twice.values) CHECK(v == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("fsc errors") {
  CHECK_THROWS_AS(fsc(Volume(Dims3{8, 8, 8}, 1.0), testing::random_volume(Dims3{8, 8, 8}, 1)), InvalidArgument);
  CHECK_THROWS_AS(fsc(testing::random_volume(Dims3{8, 8, 8}, 1), testing::random_volume(Dims3{8, 8, 9}, 1)),
                  InvalidArgument);
  CHECK_THROWS_AS(fsc(testing::random_volume(Dims3{8, 8, 8}, 1), testing::random_volume(Dims3{8, 8, 8}, 2), 1),
                  InvalidArgument);
}

TEST_CASE("box mask restricts the comparison") {
  Volume a = testing::random_volume(Dims3{16, 16, 16}, 6);
  Volume b = a;
  // Agree inside the box, disagree outside.
  const Volume noise = testing::random_volume(a.dims(), 7);
  for (int z = 0; z < 16; ++z)
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x)
        if (x >= 8) b.at(x, y, z) = noise.at(x, y, z);
  const Box box{0, 0, 0, 8, 16, 16};
  const FscCurve masked = fsc(a, b, 0, &box);
  for (double v : masked.values) CHECK(v == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(fsc(a, b).values[4] < 0.9);
  const Box bad{0, 0, 0, 17, 16, 16};
  CHECK_THROWS_AS(fsc(a, b, 0, &bad), InvalidArgument);
  CHECK_FALSE(self_fsc(a, b, 0, &box).note.empty());
}

TEST_CASE("resolution examples") {
  CHECK_FALSE(resolution_at(curve_of({0.0, 0.1, 0.2, 0.3}, {1, 1, 1, 1}, 2.0), 0.5).has_value());
  const auto r = resolution_at(curve_of({0.0, 0.1, 0.2, 0.3, 0.4}, {1, 1, 1, 0, 0}, 7.84), 0.5);
  REQUIRE(r.has_value());
  CHECK(*r == doctest::Approx(7.84 / 0.25));
  const FscCurve mono = curve_of({0.0, 0.1, 0.2, 0.3, 0.4, 0.5}, {1.0, 0.9, 0.6, 0.3, 0.1, 0.0}, 1.0);
  CHECK(*resolution_at(mono, 0.143) < *resolution_at(mono, 0.5));
}

TEST_CASE("empty-region histogram") {
  Volume v = testing::random_volume(Dims3{32, 32, 32}, 8);
  const Box region{4, 4, 4, 28, 28, 28};
  const Histogram h = empty_region_histogram(v, region, 41);
  CHECK(h.edges.size() == 42);
  double total = 0.0;
  for (double m : h.mass) total += m;
  CHECK(std::abs(total - 1.0) < 1e-12);
  CHECK(h.region_std == doctest::Approx(1.0).epsilon(0.05));

  for (int z = 0; z < 8; ++z)
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) v.at(x, y, z) = 3.0;
  const Histogram flat = empty_region_histogram(v, Box{0, 0, 0, 8, 8, 8}, 41);
  CHECK(flat.region_std < 1e-12);
  CHECK(flat.mass[20] == 1.0);
  CHECK_THROWS_AS(empty_region_histogram(v, Box{0, 0, 0, 0, 8, 8}, 41), InvalidArgument);
  CHECK_THROWS_AS(empty_region_histogram(v, Box{0, 0, 0, 33, 8, 8}, 41), InvalidArgument);
}

TEST_CASE("scalar metrics") {
  const Volume a = testing::random_volume(Dims3{10, 10, 10}, 9);
  CHECK(mse(a, a) == 0.0);
  CHECK(pearson(a, a) == doctest::Approx(1.0));
  Volume shifted = a;
  for (double& x : shifted.data()) x += 1.0;
  CHECK(pearson(a, shifted) == doctest::Approx(1.0));
  CHECK(mse(a, shifted) == doctest::Approx(1.0));
  CHECK(pearson(a, scaled(a, -1.0)) == doctest::Approx(-1.0));
  double lo = 1e300, hi = -1e300;
  for (double x : a.data()) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  CHECK(psnr(a, shifted) == doctest::Approx(20.0 * std::log10(hi - lo)));
  CHECK_THROWS_AS(mse(a, testing::random_volume(Dims3{10, 10, 9}, 1)), InvalidArgument);
}
