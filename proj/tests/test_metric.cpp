#include "doctest.h"

#include <cmath>
#include <numbers>
#include <sstream>

#include "horolab/calibration.hpp"
#include "horolab/metric.hpp"
#include "horolab/random.hpp"
#include "oracles.hpp"

using namespace horolab;

namespace {

constexpr double kSqrt2 = std::numbers::sqrt2;

Mat2 commutator(const Mat2& x, const Mat2& y) { return x * y - y * x; }

AlgebraVector random_vector(Rng& rng, double scale) { return {scale * rng.normal(), scale * rng.normal(), scale * rng.normal()}; }

// ad*_X Y from <ad*_X Y, Z> = <Y, [X, Z]> over the basis, with plain matrix commutators
AlgebraVector ad_star_oracle(const AlgebraVector& x, const AlgebraVector& y) {
  const auto& E = algebra_basis();
  AlgebraVector out;
  for (int k = 0; k < 3; ++k) out[k] = inner(y.to_matrix(), commutator(x.to_matrix(), E[k]));
  return out;
}

}  // namespace

TEST_CASE("basis is orthonormal") {
  const auto& E = algebra_basis();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(inner(E[i], E[j]) == doctest::Approx(i == j ? 1.0 : 0.0));
  CHECK(E[0].tr() == 0);
}

TEST_CASE("structure constants") {
  const auto c = structure_constants();
  const auto& E = algebra_basis();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const auto v = AlgebraVector::from_matrix(commutator(E[i], E[j]));
      for (int k = 0; k < 3; ++k) {
        CHECK(c[i][j][k] == doctest::Approx(v[k]).epsilon(1e-14));
        CHECK(c[i][j][k] == doctest::Approx(-c[j][i][k]).epsilon(1e-14));
      }
    }
  // [E1,E2] = sqrt2 E3, [E1,E3] = sqrt2 E2
  CHECK(c[0][1][2] == doctest::Approx(kSqrt2));
  CHECK(c[0][2][1] == doctest::Approx(kSqrt2));
  CHECK(c[0][0][0] == 0);
}

TEST_CASE("ad* against the defining identity") {
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    const AlgebraVector x = random_vector(rng, 1), y = random_vector(rng, 1);
    const AlgebraVector a = ad_star(x, y), b = ad_star_oracle(x, y);
    for (int k = 0; k < 3; ++k) CHECK(a[k] == doctest::Approx(b[k]).epsilon(1e-12));
  }
  const AlgebraVector H = AlgebraVector::from_matrix(Mat2{0.5, 0, 0, -0.5});
  CHECK(H.norm() == doctest::Approx(1 / kSqrt2));
  CHECK(ad_star(H, H).norm() < 1e-15);
  const AlgebraVector Np = AlgebraVector::from_matrix(Mat2{0, 1, 0, 0});
  CHECK(Np.norm() == doctest::Approx(1.0));
  CHECK(ad_star(Np, Np).norm() > 0.1);  // b_t is not a geodesic
}

TEST_CASE("exp and log") {
  Rng rng(3);
  for (int i = 0; i < 300; ++i) {
    const AlgebraVector v = random_vector(rng, 0.8);
    const Mat2 m = v.to_matrix();
    const auto ref = oracle::expm({m.a11, m.a12, m.a21, m.a22});
    const Mat2 e = exp_traceless(m);
    CHECK(oracle::max_diff({e.a11, e.a12, e.a21, e.a22}, ref) < 1e-12);
    const AlgebraVector back = log_map(exp_map(v));
    // log is the principal branch; small vectors come back unchanged
    if (v.norm() < 2) CHECK((back - v).norm() < 1e-10);
  }
}

TEST_CASE("sign convention is the one making the diagonal a geodesic") {
  const auto s = check_sign_convention();
  CHECK(s.diagonal_is_geodesic);
  CHECK(std::abs(s.first_variation_plus) < 1e-6);
  CHECK(std::abs(s.first_variation_minus) > 1e-3);
  CHECK(s.ok());
}

TEST_CASE("geodesic shooting") {
  const AlgebraVector H = AlgebraVector::from_matrix(Mat2{0.5, 0, 0, -0.5});
  for (double t : {0.5, 1.0, 2.5}) {
    const auto arc = geodesic_shoot(GroupElement(), H, t, 256);
    CHECK(arc.endpoint().approx_equal(geo(t), 1e-10));
    CHECK(arc.length() == doctest::Approx(t / kSqrt2));
  }
  CHECK(geodesic_shoot(GroupElement(), {}, 3.0, 16).endpoint().approx_equal(GroupElement(), 0));

  Rng rng(4);
  for (int i = 0; i < 30; ++i) {
    const AlgebraVector v = random_vector(rng, 0.7);
    const auto arc = geodesic_shoot(GroupElement(), v, 1.0, 512);
    double lo = 1e9, hi = 0;
    for (const auto& w : arc.body_velocity) lo = std::min(lo, w.norm()), hi = std::max(hi, w.norm());
    CHECK(hi - lo < 1e-8);
    // RK4 and the closed form agree
    CHECK(max_abs_diff(arc.endpoint().mat(), geodesic_endpoint(GroupElement(), v, 1.0).mat()) < 1e-9);
  }
  const int n = converged_step_count({0.3, -0.4, 0.5}, 1.0);
  const auto a = geodesic_shoot(GroupElement(), {0.3, -0.4, 0.5}, 1.0, n);
  const auto b = geodesic_shoot(GroupElement(), {0.3, -0.4, 0.5}, 1.0, 2 * n);
  CHECK(max_abs_diff(a.endpoint().mat(), b.endpoint().mat()) < 1e-9);
}

TEST_CASE("distance values") {
  LeftInvariantMetric m;
  for (double t : {0.1, 0.5, 1.0, 2.0, 3.0}) {
    CHECK(m.distance(geo(t), GroupElement()) == doctest::Approx(t / kSqrt2).epsilon(1e-4 / t));
    CHECK(m.distance(GroupElement(), geo(-t)) == doctest::Approx(t / kSqrt2).epsilon(1e-4 / t));
  }
  for (double t : {0.5, 1.0, 2.0}) {
    CHECK(m.distance(horo(t), GroupElement()) <= t);
    CHECK(m.distance(unhoro(t), GroupElement()) < t - 1e-3);
  }
  CHECK(m.distance(GroupElement(), GroupElement()) == 0);
  // the closed-form geodesic endpoint is reached at its own length when short
  Rng rng(5);
  for (int i = 0; i < 10; ++i) {
    const AlgebraVector v = random_vector(rng, 0.3);
    CHECK(m.dist_to_identity(exp_map(v)) <= v.norm() + 1e-9);
  }
}

TEST_CASE("path-energy oracle") {
  LeftInvariantMetric m;
  CHECK(m.path_energy_upper_bound(GroupElement(), 4) == doctest::Approx(0).epsilon(1e-12));
  CHECK(m.path_energy_upper_bound(geo(1), 4) <= 1 / kSqrt2 + 1e-3);
  const double ub = m.path_energy_upper_bound(horo(1), 4);
  CHECK(ub > 0);
  CHECK(ub <= 1 + 1e-12);
  CHECK(m.distance(GroupElement(), horo(1)) <= ub + m.options().xcheck_tol);
  Rng rng(6);
  for (int i = 0; i < 10; ++i) {
    const GroupElement g = exp_map(random_vector(rng, 0.8));
    const auto rep = m.dist_to_identity_report(g);
    CHECK(rep.value <= rep.oracle_bound + m.options().xcheck_tol);
  }
}

TEST_CASE("metric properties on random elements") {
  LeftInvariantMetric m;
  Rng rng(7);
  for (int i = 0; i < 20; ++i) {
    const GroupElement x = exp_map(random_vector(rng, 0.5)), y = exp_map(random_vector(rng, 0.5)),
                       z = exp_map(random_vector(rng, 0.5)), k = exp_map(random_vector(rng, 1.0));
    const double dxy = m.distance(x, y), dyx = m.distance(y, x);
    CHECK(std::abs(dxy - dyx) < 1e-6);
    CHECK(m.distance(x, z) <= dxy + m.distance(y, z) + 1e-5);
    // left invariance up to the roundoff of forming k x and k y
    CHECK(std::abs(m.distance(k * x, k * y) - dxy) < 1e-8);
  }
}

TEST_CASE("calibration tables") {
  LeftInvariantMetric m;
  const GapCalibration cal(m, 1);
  double prev_rho = 0, prev_delta = 0;
  for (double r : {1e-3, 0.01, 0.05, 0.1, 0.3, 0.6}) {
    const double rho = cal.gap_to_distance(r), delta = cal.distance_to_gap(r);
    CHECK(rho > 0);
    CHECK(delta > 0);
    CHECK(rho >= prev_rho);
    CHECK(delta >= prev_delta);
    prev_rho = rho, prev_delta = delta;
  }

  SUBCASE("gap below rho(0.1) gives distance below 0.1") {
    const double rho = cal.gap_to_distance(0.1);
    Rng rng(8);
    int checked = 0;
    while (checked < 1000) {
      const AlgebraVector v{rng.normal(), rng.normal(), rng.normal()};
      const GroupElement g = exp_map((rng.uniform() * rho / v.norm()) * v);
      if (frobenius_gap(g) >= rho) continue;
      CHECK(m.dist_to_identity(g) < 0.1);
      ++checked;
    }
  }

  SUBCASE("distance below delta(0.05) gives gap below 0.05") {
    const double delta = cal.distance_to_gap(0.05);
    Rng rng(9);
    for (int i = 0; i < 1000; ++i) {
      AlgebraVector v{rng.normal(), rng.normal(), rng.normal()};
      v = (rng.uniform() * delta / v.norm()) * v;
      const GroupElement g = geodesic_endpoint(GroupElement(), v, 1.0);
      CHECK(frobenius_gap(g) < 0.05);
    }
  }

  SUBCASE("save and load round trip") {
    std::stringstream ss;
    cal.save(ss);
    const GapCalibration back = GapCalibration::load(ss);
    CHECK(back.seed() == 1);
    CHECK(back.gap_to_distance(0.1) == cal.gap_to_distance(0.1));
    CHECK(back.distance_to_gap(0.2) == cal.distance_to_gap(0.2));
    std::string text = ss.str();
    std::stringstream bad(text.substr(0, text.size() / 2));
    CHECK_THROWS(GapCalibration::load(bad));
    std::stringstream wrong("horolab-calibration 99\n");
    CHECK_THROWS(GapCalibration::load(wrong));
  }
}
