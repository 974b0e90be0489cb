#include <doctest.h>

#include <cmath>
#include <random>

#include "fkai/anchors.hpp"
#include "fkai/lattice.hpp"

using namespace fkai;
using Vec = Vector<double>;

namespace {

const double PI = std::acos(-1.0);

Configuration<double> spike(Index N)
{
  Configuration<double> u = Configuration<double>::homomorphism(Window{N, 1}, RotationVector<double>::scalar(0));
  Matrix<double> v = u.values();
  v(0, N) = 1;
  return u.with_values(v);
}

Configuration<double> random_configuration(std::mt19937_64& rng, Index N, Index d, double rho)
{
  std::normal_distribution<double> n(0.0, 1.0);
  auto base = Configuration<double>::homomorphism(Window{N, d}, RotationVector<double>(Vec::Constant(d, rho)));
  Matrix<double> v = base.values();
  for (Index j = 0; j < v.size(); ++j) v.data()[j] += n(rng);
  return base.with_values(v);
}

} // namespace

TEST_CASE("window shape")
{
  Window w{3, 2};
  CHECK(w.size() == 7);
  CHECK(w.first() == -3);
  CHECK(w.last() == 3);
  CHECK(w.column(-3) == 0);
  CHECK(w.contains(3));
  CHECK_FALSE(w.contains(4));
  CHECK_THROWS_AS(Window(0, 1), ShapeError);
  CHECK_THROWS_AS(Window(2, 0), ShapeError);
}

TEST_CASE("configuration is extended by its tail rule")
{
  auto u = Configuration<double>::homomorphism(Window{2, 1}, RotationVector<double>::scalar(PI));
  CHECK(u.at(2)(0) == doctest::Approx(2 * PI));
  CHECK(u.at(7)(0) == doctest::Approx(7 * PI));
  CHECK(u.at(-9)(0) == doctest::Approx(-9 * PI));
}

TEST_CASE("ext_distance examples")
{
  auto zero = Configuration<double>::homomorphism(Window{10, 1}, RotationVector<double>::scalar(0));
  CHECK(ext_distance(zero, zero) == 0);

  Vec c(2);
  c << 2.0 / std::sqrt(2.0), 2.0 / std::sqrt(2.0);
  auto z2 = Configuration<double>::homomorphism(Window{10, 2}, RotationVector<double>(Vec::Zero(2)));
  CHECK(ext_distance(z2, translate(z2, c)) == doctest::Approx(2.0));

  auto id = Configuration<double>::homomorphism(Window{10, 1}, RotationVector<double>::scalar(1));
  Matrix<double> scaled = 1.1 * id.values();
  auto stretched = id.with_values(scaled);
  CHECK(ext_distance(id, stretched) == doctest::Approx(1.0));

  // Different rotation vectors drift apart without bound.
  auto hom11 = Configuration<double>::homomorphism(Window{10, 1}, RotationVector<double>::scalar(1.1));
  CHECK(window_distance(id, hom11) == doctest::Approx(1.0));
  CHECK(std::isinf(ext_distance(id, hom11)));

  CHECK_THROWS_AS(ext_distance(zero, z2), ShapeError);
}

TEST_CASE("ext_distance is an extended metric on random triples")
{
  std::mt19937_64 rng(11);
  for (int k = 0; k < 200; ++k) {
    auto u = random_configuration(rng, 6, 2, 0.3);
    auto v = random_configuration(rng, 6, 2, 0.3);
    auto w = random_configuration(rng, 6, 2, 0.3);
    double uv = ext_distance(u, v), vu = ext_distance(v, u);
    CHECK(uv >= 0);
    CHECK(uv == vu);
    CHECK(ext_distance(u, u) == 0);
    CHECK(ext_distance(u, w) <= uv + ext_distance(v, w) + 1e-12);
  }
}

TEST_CASE("shift examples")
{
  auto id = Configuration<double>::homomorphism(Window{5, 1}, RotationVector<double>::scalar(1));
  auto same = shift(id, 0);
  CHECK(ext_distance(same, id) == 0);

  auto moved = shift(id, 3);
  for (Site i = -5; i <= 5; ++i) CHECK(moved.col(i)(0) == doctest::Approx(double(i + 3)));
  CHECK(moved.at(20)(0) == doctest::Approx(23.0));

  auto s = shift(spike(4), 1);
  for (Site i = -4; i <= 4; ++i) CHECK(s.col(i)(0) == (i == -1 ? 1.0 : 0.0));

  CHECK_THROWS_AS(shift(id, 6), RangeError);
  CHECK_THROWS_AS(shift(id, -6), RangeError);
}

TEST_CASE("translate examples and commutation with shift")
{
  auto zero = Configuration<double>::homomorphism(Window{4, 1}, RotationVector<double>::scalar(0));
  CHECK(ext_distance(translate(zero, Vec::Zero(1)), zero) == 0);
  auto five = translate(zero, Vec::Constant(1, 5.0));
  for (Site i = -4; i <= 4; ++i) CHECK(five.col(i)(0) == 5.0);
  CHECK(five.at(100)(0) == 5.0);
  CHECK_THROWS_AS(translate(zero, Vec::Zero(2)), ShapeError);

  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> pick(-4, 4);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int k = 0; k < 100; ++k) {
    auto u = random_configuration(rng, 8, 2, -0.7);
    Vec c(2);
    c << n(rng), n(rng);
    int s = pick(rng);
    auto a = shift(translate(u, c), s);
    auto b = translate(shift(u, s), c);
    CHECK(window_distance(a, b) <= 1e-14);
    CHECK(ext_distance(a, b) <= 1e-12);
  }
}

TEST_CASE("nearest_anchor on pi Z")
{
  auto O = PeriodicAnchorSet<double>::line({0.0}, PI);
  const double R = PI / 2;
  CHECK(nearest_anchor(RotationVector<double>::scalar(0), 7, *O, R)(0) == doctest::Approx(0.0));
  CHECK(nearest_anchor(RotationVector<double>::scalar(1), 2, *O, R)(0) == doctest::Approx(PI));
  CHECK(nearest_anchor(RotationVector<double>::scalar(PI), 3, *O, R)(0) == doctest::Approx(3 * PI));
  // Equidistant: PI/2 lies between 0 and PI, the smaller point wins.
  CHECK(nearest_anchor(RotationVector<double>::scalar(PI / 2), 1, *O, R)(0) == doctest::Approx(0.0));
  // Nothing within a radius that is too small.
  CHECK_THROWS_AS(nearest_anchor(RotationVector<double>::scalar(1), 1, *O, 0.5), CertificateError);
}

TEST_CASE("anchor configurations stay within R of the rotation line")
{
  auto O = PeriodicAnchorSet<double>::line({0.0}, PI);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> rho(-4.0, 4.0);
  for (int k = 0; k < 200; ++k) {
    RotationVector<double> r = RotationVector<double>::scalar(rho(rng));
    auto a = anchor_configuration(Window{20, 1}, r, O, PI / 2);
    CHECK(distance_to_line(a, r) <= PI / 2 + 1e-12);
    for (Site i = -20; i <= 20; ++i) {
      double z = a.col(i)(0) / PI;
      CHECK(std::abs(z - std::round(z)) < 1e-12);
    }
    // The tail continues with anchors, so the extended distance to the line is finite.
    auto line = Configuration<double>::homomorphism(Window{20, 1}, r);
    CHECK(ext_distance(a, line) <= PI / 2 + 1e-12);
  }
}

TEST_CASE("listed anchor sets refuse queries outside their box")
{
  std::vector<Vec> pts{Vec::Constant(1, -1.0), Vec::Constant(1, 1.0)};
  ListedAnchorSet<double> O(pts, Vec::Constant(1, -2.0), Vec::Constant(1, 2.0));
  CHECK(nearest_point(O, Vec::Constant(1, 0.2), 1.5)(0) == 1.0);
  CHECK(nearest_point(O, Vec::Constant(1, 0.0), 1.0)(0) == -1.0);
  CHECK_THROWS_AS(nearest_point(O, Vec::Constant(1, 1.5), 1.0), CertificateError);
}

TEST_CASE("periodic anchor sets in the plane")
{
  Matrix<double> basis = 2 * PI * Matrix<double>::Identity(2, 2);
  std::vector<Vec> base{Vec::Zero(2)};
  PeriodicAnchorSet<double> O(base, basis);
  Vec x(2);
  x << 5.9, -6.5;
  auto z = nearest_point(O, x, 2.0);
  CHECK(z(0) == doctest::Approx(2 * PI));
  CHECK(z(1) == doctest::Approx(-2 * PI));
  CHECK(O.points_within(Vec::Zero(2), 2 * PI + 1e-9).size() == 5);
}

TEST_CASE("rotation vector estimates")
{
  auto line = Configuration<double>::homomorphism(Window{9, 1}, RotationVector<double>::scalar(PI));
  CHECK(rotation_vector_estimate(line)(0) == doctest::Approx(PI));
  CHECK(rotation_vector_lsq(line)(0) == doctest::Approx(PI));
  auto zero = Configuration<double>::homomorphism(Window{9, 1}, RotationVector<double>::scalar(0));
  CHECK(rotation_vector_estimate(zero)(0) == 0);

  // Bounded perturbations move the endpoint estimate by at most sup / N.
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> bump(-0.5, 0.5);
  for (int k = 0; k < 50; ++k) {
    Matrix<double> v = line.values();
    for (Index j = 0; j < v.cols(); ++j) v(0, j) += bump(rng);
    auto u = line.with_values(v);
    double dev = distance_to_line(u, RotationVector<double>::scalar(PI));
    CHECK(std::abs(rotation_vector_estimate(u)(0) - PI) <= dev / 9 + 1e-15);
  }
}
