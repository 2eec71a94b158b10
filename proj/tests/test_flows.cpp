#include "doctest.h"

#include <cmath>
#include <sstream>

#include "horolab/flows.hpp"
#include "oracles.hpp"

using namespace horolab;

namespace {

std::shared_ptr<const QuotientSpace> space() {
  static auto q = std::make_shared<const QuotientSpace>(std::make_shared<const FuchsianGroup>(preset_bolza()),
                                                        std::make_shared<const LeftInvariantMetric>());
  return q;
}

double scaled(const Mat2& x, const Mat2& y) { return max_abs_diff(x, y) / std::max(1.0, std::sqrt(x.frobenius2())); }

}  // namespace

TEST_CASE("flow names") {
  CHECK(parse_flow_kind("geodesic") == FlowKind::geodesic);
  CHECK(parse_flow_kind("horocycle") == FlowKind::stable_horocycle);
  CHECK(parse_flow_kind("stable") == FlowKind::stable_horocycle);
  CHECK(parse_flow_kind("unstable_horocycle") == FlowKind::unstable_horocycle);
  CHECK_THROWS(parse_flow_kind("teleport"));
  for (FlowKind k : {FlowKind::geodesic, FlowKind::stable_horocycle, FlowKind::unstable_horocycle})
    CHECK(parse_flow_kind(to_string(k)) == k);
}

TEST_CASE("flow matrices are the one-parameter subgroups") {
  for (double t : {-2.0, 0.0, 0.7}) {
    const auto a = flow_matrix(FlowKind::geodesic, t);
    CHECK(oracle::max_diff({a.a11, a.a12, a.a21, a.a22}, oracle::A(t)) < 1e-15);
    const auto b = flow_matrix(FlowKind::stable_horocycle, t);
    CHECK(oracle::max_diff({b.a11, b.a12, b.a21, b.a22}, oracle::B(t)) == 0);
    const auto c = flow_matrix(FlowKind::unstable_horocycle, t);
    CHECK(oracle::max_diff({c.a11, c.a12, c.a21, c.a22}, oracle::C(t)) == 0);
  }
}

TEST_CASE("flow property and equivariance") {
  Rng rng(3);
  const auto& g = space()->group();
  for (FlowKind k : {FlowKind::geodesic, FlowKind::stable_horocycle, FlowKind::unstable_horocycle})
    for (int i = 0; i < 200; ++i) {
      const QuotientPoint x{random_element(rng, 1.5)};
      const double s = rng.uniform(-3, 3), t = rng.uniform(-3, 3);
      CHECK(scaled(step(k, step(k, x, s), t).rep.mat(), step(k, x, s + t).rep.mat()) < 1e-12);
      CHECK(step(k, x, 0).rep.approx_equal(x.rep, 0));
      const GroupElement gamma = g.letters()[i % 8];
      CHECK(scaled(step(k, {gamma * x.rep}, t).rep.mat(), (gamma * step(k, x, t).rep).mat()) < 1e-12);
    }
}

TEST_CASE("geodesic flow contracts stable horocycles") {
  Rng rng(4);
  const auto& q = *space();
  for (int i = 0; i < 30; ++i) {
    const QuotientPoint x{random_element(rng, 1.5)};
    const double s = rng.uniform(-0.5, 0.5), t = rng.uniform(0, 6);
    const auto lhs = step(FlowKind::geodesic, step(FlowKind::stable_horocycle, x, s), t);
    const auto rhs = step(FlowKind::geodesic, x, t);
    CHECK(q.quotient_distance(lhs, rhs).value <= std::abs(s) * std::exp(-t) + 1e-7);
  }
}

TEST_CASE("time change bounds") {
  CHECK_THROWS_AS(TimeChange(FlowKind::geodesic, [](const GroupElement&) { return 3.0; }, 1, 2, "bad"),
                  std::invalid_argument);
  const auto tc = TimeChange::bump(FlowKind::stable_horocycle, space(), 1.0, 1.2);
  CHECK(tc.rho_min() == 1);
  CHECK(tc.rho_max() == 2);
  Rng rng(5);
  double hi = 0;
  for (int i = 0; i < 500; ++i) {
    const GroupElement g = random_element(rng, 1.5);
    const double v = tc.speed(g);
    CHECK(v >= 1);
    CHECK(v <= 2);
    hi = std::max(hi, v);
    const GroupElement gamma = space()->group().letters()[i % 8];
    CHECK(tc.speed(gamma * g) == doctest::Approx(v).epsilon(1e-9));
  }
  CHECK(hi > 1.1);  // the bump is actually felt
  CHECK(tc.speed(GroupElement()) == doctest::Approx(2));
  CHECK(TimeChange::constant(FlowKind::geodesic, 2).is_constant());
  CHECK_FALSE(tc.is_constant());
}

TEST_CASE("time change integration") {
  Rng rng(6);
  const QuotientPoint x{random_element(rng, 1.0)};
  const auto id = TimeChange::identity(FlowKind::geodesic);
  CHECK(time_change_step(id, x, 2.5).elapsed_base_time == doctest::Approx(2.5).epsilon(1e-12));
  const auto two = TimeChange::constant(FlowKind::stable_horocycle, 2);
  CHECK(time_change_step(two, x, -1.5).elapsed_base_time == doctest::Approx(-3).epsilon(1e-12));
  CHECK(time_change_alpha(two, x, 3) == doctest::Approx(1.5).epsilon(1e-9));

  const auto bump = TimeChange::bump(FlowKind::geodesic, space());
  for (int i = 0; i < 8; ++i) {
    const QuotientPoint p{random_element(rng, 1.0)};
    const double t = rng.uniform(-4, 4);
    const auto st = time_change_step(bump, p, t);
    // beta(t) lies between t * rho_min and t * rho_max
    CHECK(std::abs(st.elapsed_base_time) >= std::abs(t) - 1e-9);
    CHECK(std::abs(st.elapsed_base_time) <= 2 * std::abs(t) + 1e-9);
    CHECK(time_change_alpha(bump, p, st.elapsed_base_time) == doctest::Approx(t).epsilon(1e-6));
    // orbits coincide with the base flow
    CHECK(scaled(st.point.rep.mat(), step(FlowKind::geodesic, p, st.elapsed_base_time).rep.mat()) < 1e-12);
    // beta against an independent Simpson integral of 1/speed along the base orbit
    const double b = st.elapsed_base_time;
    const double back = oracle::simpson(
        [&](double u) { return 1 / bump.speed(step(FlowKind::geodesic, p, u).rep); }, 0, b, 2000);
    CHECK(back == doctest::Approx(t).epsilon(1e-6));
  }

  TimeChangeIntegrator it(bump, x);
  double prev = 0;
  for (double t = 0.5; t <= 3; t += 0.5) {
    const double b = it.advance_to(t);
    CHECK(b > prev);
    prev = b;
  }
  CHECK(it.beta() == doctest::Approx(time_change_step(bump, x, 3).elapsed_base_time).epsilon(1e-9));
  CHECK(it.advance_to(0) == doctest::Approx(0).epsilon(1e-9));
  CHECK(it.advance_to(-1) == doctest::Approx(time_change_step(bump, x, -1).elapsed_base_time).epsilon(1e-9));
}

TEST_CASE("trajectories and csv") {
  const auto tr = sample_trajectory(FlowKind::geodesic, {GroupElement()}, 0, 1, 11);
  REQUIRE(tr.points.size() == 11);
  for (std::size_t k = 0; k < 11; ++k) {
    CHECK(tr.times[k] == doctest::Approx(0.1 * k));
    CHECK(tr.points[k].rep.mat().a11 == doctest::Approx(std::exp(0.05 * k)).epsilon(1e-14));
  }
  std::ostringstream os;
  write_csv(os, tr);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "t,a11,a12,a21,a22");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == 11);

  const auto h = sample_trajectory(FlowKind::stable_horocycle, {GroupElement()}, -1, 1, 3);
  CHECK(h.points[0].rep.mat().a12 == -1);
  CHECK(h.points[2].rep.mat().a12 == 1);
  const auto tc = sample_trajectory(TimeChange::constant(FlowKind::unstable_horocycle, 2), {GroupElement()}, 0, 1, 2);
  CHECK(tc.points[1].rep.mat().a21 == doctest::Approx(2).epsilon(1e-12));
}

TEST_CASE("horocycle flows have no periodic points") {
  for (FlowKind k : {FlowKind::stable_horocycle, FlowKind::unstable_horocycle}) {
    const auto c = periodic_certificate(*space(), k, 3, 300, 30, 10);
    CHECK(c.holds);
    CHECK(c.flow_trace == 2);
    CHECK(c.conjugation_max_error < 1e-8);
    CHECK(c.min_return_distance > 0);
    CHECK(c.eps_star == doctest::Approx(2 * std::sqrt(2.0)).epsilon(1e-9));
    CHECK_FALSE(c.argument.empty());
  }
}
