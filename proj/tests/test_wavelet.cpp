#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "loctomo/errors.hpp"
#include "loctomo/wavelet.hpp"

using namespace loctomo;

namespace {

double max_abs_diff(const Volume& a, const Volume& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

}  // namespace

TEST_CASE("named banks") {
  const WaveletBank a = WaveletBank::named("bior2.2");
  CHECK(a.analysis_low.size() % 2 == 1);
  CHECK(a.support_radius() > 0.0);
  const WaveletBank b = WaveletBank::named("bior4.4");
  CHECK(b.support_radius() > a.support_radius());
  CHECK_THROWS_AS(WaveletBank::named("haar"), InvalidArgument);
  WaveletBank broken = a;
  broken.synthesis_low[0] += 0.1;
  CHECK_THROWS_AS(broken.verify(), InvalidArgument);
}

TEST_CASE("1-D round trip") {
  for (const char* name : {"bior2.2", "bior4.4"}) {
    const WaveletBank bank = WaveletBank::named(name);
    for (const int n : {2, 4, 10, 32}) {
      std::mt19937_64 rng(static_cast<std::uint64_t>(n));
      std::normal_distribution<double> g;
      std::vector<double> x(static_cast<std::size_t>(n)), lo(static_cast<std::size_t>(n / 2)), hi(lo.size()), y(x.size());
      for (double& v : x) v = g(rng);
      dwt1(bank, x.data(), n, 1, lo.data(), hi.data());
      idwt1(bank, lo.data(), hi.data(), n, y.data(), 1);
      for (int i = 0; i < n; ++i) CHECK(y[static_cast<std::size_t>(i)] == doctest::Approx(x[static_cast<std::size_t>(i)]).epsilon(1e-10).scale(1.0));
    }
  }
}

TEST_CASE("3-D perfect reconstruction including odd dims") {
  for (const char* name : {"bior2.2", "bior4.4"}) {
    const WaveletBank bank = WaveletBank::named(name);
    for (std::uint64_t s = 0; s < 20; ++s) {
      const Dims3 d{8 + static_cast<int>(s % 5), 6 + static_cast<int>(s % 3), 7 + static_cast<int>(s % 4)};
      const Volume v = testing::random_volume(d, 900 + s);
      const SubbandSet w = dwt3(v, bank);
      CHECK(w.parent == d);
      CHECK(w.padded.nx % 2 == 0);
      const Volume back = idwt3(w, bank);
      REQUIRE(back.dims() == d);
      CHECK(max_abs_diff(back, v) < 1e-10);
    }
  }
}

TEST_CASE("constant volumes live in the LLL band") {
  const WaveletBank bank = WaveletBank::named("bior2.2");
  Volume v(Dims3{8, 8, 8}, 1.0);
  for (double& x : v.data()) x = 2.0;
  const SubbandSet w = dwt3(v, bank);
  double dc = 0.0;
  for (double x : bank.analysis_low) dc += x;
  for (double x : w.bands[0].data()) CHECK(x == doctest::Approx(2.0 * dc * dc * dc));
  for (int b = 1; b < 8; ++b)
    for (double x : w.bands[static_cast<std::size_t>(b)].data()) CHECK(std::abs(x) < 1e-12);
}

TEST_CASE("the transform is linear") {
  const WaveletBank bank = WaveletBank::named("bior4.4");
  const Volume a = testing::random_volume(Dims3{8, 10, 6}, 1), b = testing::random_volume(Dims3{8, 10, 6}, 2);
  Volume mix(a.dims(), 1.0);
  for (std::size_t i = 0; i < mix.size(); ++i) mix.data()[i] = 2.0 * a.data()[i] + 3.0 * b.data()[i];
  const SubbandSet wa = dwt3(a, bank), wb = dwt3(b, bank), wm = dwt3(mix, bank);
  for (int band = 0; band < 8; ++band)
    for (std::size_t i = 0; i < wm.bands[0].size(); ++i)
      CHECK(wm.bands[static_cast<std::size_t>(band)].data()[i] ==
            doctest::Approx(2.0 * wa.bands[static_cast<std::size_t>(band)].data()[i] +
                            3.0 * wb.bands[static_cast<std::size_t>(band)].data()[i]).scale(1.0));
}

TEST_CASE("wavelet targets need even dims") {
  const WaveletBank bank = WaveletBank::named("bior2.2");
  CHECK_NOTHROW(wavelet_targets(testing::random_volume(Dims3{8, 8, 8}, 3), bank));
  CHECK_THROWS_AS(wavelet_targets(testing::random_volume(Dims3{8, 7, 8}, 3), bank), InvalidArgument);
}

TEST_CASE("support containment") {
  const WaveletBank small = WaveletBank::named("bior2.2"), wide = WaveletBank::named("bior4.4");
  CHECK_NOTHROW(check_support_containment(small, 21, 1.0, 1.0, 1.0, 1.0));
  CHECK_NOTHROW(check_support_containment(wide, 21, 1.0, 1.0, 1.0, 1.0));
  CHECK_THROWS_AS(check_support_containment(wide, 3, 1.0, 1.0, 1.0, 1.0), InvalidArgument);
}
