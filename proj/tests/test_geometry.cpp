#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "loctomo/errors.hpp"
#include "loctomo/geometry.hpp"

using namespace loctomo;

namespace {

double max_abs_diff(const Mat3& a, const Mat3& b) {
  double m = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m = std::max(m, std::abs(a[i][j] - b[i][j]));
  return m;
}

Mat3 multiply(const Mat3& a, const Mat3& b) {
  Mat3 c{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) c[i][j] += a[i][k] * b[k][j];
  return c;
}

// Independent bilinear oracle: explicit sum over the four neighbours with
// zero outside the grid.
double bilinear_oracle(const Image& im, double x, double y) {
  double acc = 0.0;
  const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
  for (int dy = 0; dy <= 1; ++dy)
    for (int dx = 0; dx <= 1; ++dx) {
      const int xi = x0 + dx, yi = y0 + dy;
      if (xi < 0 || yi < 0 || xi >= im.width || yi >= im.height) continue;
      const double wx = 1.0 - std::abs(x - xi), wy = 1.0 - std::abs(y - yi);
      acc += wx * wy * im.data[static_cast<std::size_t>(yi * im.width + xi)];
    }
  return acc;
}

TiltSeries constant_series(const std::vector<double>& values, int w, int h) {
  DetectorSpec det;
  det.width = w;
  det.height = h;
  std::vector<double> angles;
  for (std::size_t k = 0; k < values.size(); ++k) angles.push_back(0.1 * static_cast<double>(k));
  TiltSeries ts(det, angles);
  for (std::size_t k = 0; k < values.size(); ++k)
    for (double& x : ts.projection_data(k)) x = values[k];
  ts.filtered = true;
  return ts;
}

}  // namespace

TEST_CASE("rotation_matrix examples") {
  const Mat3 id = rotation_matrix(0.0);
  CHECK(max_abs_diff(id, Mat3{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}}) == 0.0);
  const Vec3 v = loctomo::apply(rotation_matrix(std::numbers::pi / 2), Vec3{1, 0, 0});
  CHECK(std::abs(v.x) < 1e-15);
  CHECK(v.y == 0.0);
  CHECK(v.z == doctest::Approx(-1.0));
  CHECK(max_abs_diff(multiply(rotation_matrix(0.3), rotation_matrix(0.4)), rotation_matrix(0.7)) < 1e-12);
}

TEST_CASE("rotation_matrix is orthonormal with unit determinant") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> a(-10.0, 10.0);
  for (int i = 0; i < 1000; ++i) {
    const Mat3 r = rotation_matrix(a(rng));
    Mat3 rt{};
    for (int p = 0; p < 3; ++p)
      for (int q = 0; q < 3; ++q) rt[p][q] = r[q][p];
    CHECK(max_abs_diff(multiply(r, rt), rotation_matrix(0.0)) < 1e-12);
    const double det = r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1]) -
                       r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0]) +
                       r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
    CHECK(std::abs(det - 1.0) < 1e-12);
  }
}

TEST_CASE("trajectory examples") {
  for (double t : {-1.0, 0.0, 0.7}) {
    const auto p = trajectory(Vec3{0, 5, 0}, t);
    CHECK(p.u == doctest::Approx(0.0));
    CHECK(p.v == 5.0);
  }
  const auto q = trajectory(Vec3{1, 0, 0}, 0.0);
  CHECK(q.u == 1.0);
  CHECK(q.v == 0.0);
  // Frozen from a direct evaluation: cos(30 deg) - 3 sin(30 deg).
  const auto r = trajectory(Vec3{1, 2, 3}, std::numbers::pi / 6);
  CHECK(r.u == doctest::Approx(-0.6339745962155614).epsilon(1e-14));
  CHECK(r.v == 2.0);
}

TEST_CASE("trajectory is periodic in theta and linear in r0") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> c(-20.0, 20.0), t(-3.0, 3.0);
  for (int i = 0; i < 200; ++i) {
    const Vec3 a{c(rng), c(rng), c(rng)}, b{c(rng), c(rng), c(rng)};
    const double th = t(rng), alpha = c(rng), beta = c(rng);
    const auto p0 = trajectory(a, th), p1 = trajectory(a, th + 2 * std::numbers::pi);
    CHECK(std::abs(p0.u - p1.u) <= 1e-12 * (1.0 + std::abs(p0.u)));
    const Vec3 mix{alpha * a.x + beta * b.x, alpha * a.y + beta * b.y, alpha * a.z + beta * b.z};
    const auto pm = trajectory(mix, th), pa = trajectory(a, th), pb = trajectory(b, th);
    const double expect = alpha * pa.u + beta * pb.u;
    CHECK(std::abs(pm.u - expect) <= 1e-12 * (1.0 + std::abs(expect)));
    CHECK(std::abs(pm.v - (alpha * pa.v + beta * pb.v)) <= 1e-12 * (1.0 + std::abs(pm.v)));
  }
}

TEST_CASE("sample_bilinear examples") {
  Image im(6, 6);
  im.at(3, 4) = 7.0;
  CHECK(sample_bilinear(im.view(), 3.0, 4.0) == 7.0);
  Image sq(2, 2);
  sq.at(0, 0) = 0;
  sq.at(1, 0) = 1;
  sq.at(0, 1) = 2;
  sq.at(1, 1) = 3;
  CHECK(sample_bilinear(sq.view(), 0.5, 0.5) == doctest::Approx(1.5));
  CHECK(sample_bilinear(sq.view(), -5.0, -5.0) == 0.0);
}

TEST_CASE("sample_bilinear matches a brute-force oracle and reproduces affine fields") {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> px(-2.0, 11.0), py(-2.0, 9.0);
  Image im(10, 8);
  for (double& x : im.data) x = g(rng);
  for (int i = 0; i < 2000; ++i) {
    const double x = px(rng), y = py(rng);
    CHECK(sample_bilinear(im.view(), x, y) == doctest::Approx(bilinear_oracle(im, x, y)).epsilon(1e-12));
  }
  Image affine(10, 8);
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 10; ++c) affine.at(c, r) = 0.5 + 2.0 * c - 3.0 * r;
  std::uniform_real_distribution<double> ix(0.0, 9.0), iy(0.0, 7.0);
  for (int i = 0; i < 500; ++i) {
    const double x = ix(rng), y = iy(rng);
    CHECK(sample_bilinear(affine.view(), x, y) == doctest::Approx(0.5 + 2.0 * x - 3.0 * y).epsilon(1e-12));
  }
}

TEST_CASE("extract_patch of a constant projection is constant") {
  DetectorSpec det;
  det.width = 64;
  det.height = 64;
  Image im(64, 64, 2.5);
  const auto patch = extract_patch(im.view(), det, Vec3{3.2, -1.4, 5.0}, 0.4, PatchSpec{21, 1.0});
  REQUIRE(patch.size() == 21u * 21u);
  for (double v : patch) CHECK(v == doctest::Approx(2.5));
}

TEST_CASE("extract_patch centre and layout") {
  DetectorSpec det;
  det.width = 32;
  det.height = 32;
  Image im(32, 32);
  std::mt19937_64 rng(14);
  std::normal_distribution<double> g(0.0, 1.0);
  for (double& x : im.data) x = g(rng);
  const Vec3 r0{2.3, -4.1, 1.7};
  const double th = 0.35;
  const PatchSpec spec{7, 1.5};
  const auto patch = extract_patch(im.view(), det, r0, th, spec);
  const auto tp = trajectory(r0, th);
  CHECK(patch[3 * 7 + 3] == sample_detector(im.view(), tp));
  for (int row = 0; row < 7; ++row)
    for (int col = 0; col < 7; ++col) {
      const double c = detector_col(det, tp.u) - spec.spacing * (col - 3);
      const double r = detector_row(det, tp.v) - spec.spacing * (row - 3);
      CHECK(patch[static_cast<std::size_t>(row * 7 + col)] == doctest::Approx(bilinear_oracle(im, c, r)).epsilon(1e-12));
    }
}

TEST_CASE("extract_patch around a unit impulse") {
  DetectorSpec det;
  det.width = 33;
  det.height = 33;
  const Vec3 r0{1.3, -0.6, 2.0};
  const double th = 0.25;
  const auto tp = trajectory(r0, th);
  const double c = detector_col(det, tp.u), r = detector_row(det, tp.v);
  Image im(33, 33);
  const int nc = static_cast<int>(std::lround(c)), nr = static_cast<int>(std::lround(r));
  im.at(nc, nr) = 1.0;
  const auto patch = extract_patch(im.view(), det, r0, th, PatchSpec{9, 1.0});
  const double expect = (1.0 - std::abs(c - nc)) * (1.0 - std::abs(r - nr));
  CHECK(patch[4 * 9 + 4] == doctest::Approx(expect));
  for (int row = 0; row < 9; ++row)
    for (int col = 0; col < 9; ++col)
      if (std::max(std::abs(row - 4), std::abs(col - 4)) > 1) CHECK(patch[static_cast<std::size_t>(row * 9 + col)] == 0.0);
}

TEST_CASE("extract_patch commutes with integer translations") {
  DetectorSpec det;
  det.width = 40;
  det.height = 40;
  Image im(40, 40), shifted(40, 40);
  std::mt19937_64 rng(15);
  std::normal_distribution<double> g(0.0, 1.0);
  for (double& x : im.data) x = g(rng);
  const int dx = 3, dy = -2;
  for (int r = 0; r < 40; ++r)
    for (int c = 0; c < 40; ++c) {
      const int sc = c - dx, sr = r - dy;
      shifted.at(c, r) = (sc >= 0 && sr >= 0 && sc < 40 && sr < 40) ? im.at(sc, sr) : 0.0;
    }
  const Vec3 r0{0.4, 0.8, 0.0};  // theta = 0 so a shift in x moves u by the same amount
  const auto a = extract_patch(im.view(), det, r0, 0.0, PatchSpec{5, 1.0});
  const auto b = extract_patch(shifted.view(), det, Vec3{r0.x + dx, r0.y + dy, 0.0}, 0.0, PatchSpec{5, 1.0});
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
}

TEST_CASE("P = 21 default patch") {
  CHECK(PatchSpec{}.size == 21);
  DetectorSpec det;
  det.width = 30;
  det.height = 30;
  Image im(30, 30, 1.0);
  CHECK(extract_patch(im.view(), det, Vec3{0, 0, 0}, 0.0, PatchSpec{}).size() == 441u);
}

TEST_CASE("extract_patch_stack of constant projections") {
  const TiltSeries ts = constant_series({1.0, -2.0, 3.5}, 24, 24);
  const PatchStack s = extract_patch_stack(ts, Vec3{0.5, 0.5, 0.5}, PatchSpec{5, 1.0});
  REQUIRE(s.count() == 3);
  CHECK(s.angles == ts.angles);
  for (std::size_t k = 0; k < 3; ++k)
    for (int r = 0; r < 5; ++r)
      for (int c = 0; c < 5; ++c) CHECK(s.at(k, r, c) == doctest::Approx(ts.projection(k).at(0, 0)));
}

TEST_CASE("extract_patch_stack follows the series order") {
  TiltSeries ts = constant_series({1.0, 2.0, 3.0, 4.0}, 16, 16);
  std::mt19937_64 rng(16);
  std::normal_distribution<double> g(0.0, 1.0);
  for (double& x : ts.data) x = g(rng);
  const std::vector<std::size_t> perm{2, 0, 3, 1};
  const TiltSeries permuted = ts.subset(perm);
  const Vec3 r0{1.1, -0.3, 0.7};
  const PatchStack a = extract_patch_stack(ts, r0, PatchSpec{5, 1.0});
  const PatchStack b = extract_patch_stack(permuted, r0, PatchSpec{5, 1.0});
  for (std::size_t k = 0; k < perm.size(); ++k) {
    CHECK(b.angles[k] == a.angles[perm[k]]);
    for (int r = 0; r < 5; ++r)
      for (int c = 0; c < 5; ++c) CHECK(b.at(k, r, c) == a.at(perm[k], r, c));
  }
}

TEST_CASE("extract_patch_stack rejects unfiltered input") {
  TiltSeries ts = constant_series({1.0}, 8, 8);
  ts.filtered = false;
  CHECK_THROWS_AS(extract_patch_stack(ts, Vec3{0, 0, 0}, PatchSpec{3, 1.0}), InvalidArgument);
}

TEST_CASE("geometry validation") {
  DetectorSpec det;
  det.width = 0;
  CHECK_THROWS_AS(det.validate(), InvalidArgument);
  CHECK_THROWS_AS((PatchSpec{4, 1.0}.validate()), InvalidArgument);
  CHECK_THROWS_AS((PatchSpec{5, 0.0}.validate()), InvalidArgument);
  DetectorSpec ok;
  ok.width = 4;
  ok.height = 4;
  TiltSeries bad(ok, {std::numbers::pi / 2});
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}
