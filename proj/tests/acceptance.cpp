// End-to-end acceptance run: one line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>

#include "horolab/lab.hpp"
#include "oracles.hpp"

using namespace horolab;

namespace {

struct Line {
  bool ok = true;
  std::ostringstream detail;
  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      detail << " [violated: " << what << "]";
    }
  }
};

int failures = 0;

void criterion(int id, const char* name, double limit_seconds, const std::function<void(Line&)>& body) {
  Line l;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(l);
  } catch (const std::exception& e) {
    l.ok = false;
    l.detail << " [exception: " << e.what() << "]";
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (secs > limit_seconds) {
    l.ok = false;
    l.detail << " [over time limit " << limit_seconds << " s]";
  }
  if (!l.ok) ++failures;
  std::printf("AC-%-2d %s  %s:%s (%.1f s)\n", id, l.ok ? "PASS" : "FAIL", name, l.detail.str().c_str(), secs);
  std::fflush(stdout);
}

oracle::M arr(const Mat2& m) { return {m.a11, m.a12, m.a21, m.a22}; }

double rel_diff(const oracle::M& x, const oracle::M& y) {
  double m = 1;
  for (int i = 0; i < 4; ++i) m = std::max({m, std::abs(x[i]), std::abs(y[i])});
  return oracle::max_diff(x, y) / m;
}

std::string strip_timing(const std::string& json) { return json.substr(0, json.rfind("\"timings\"")); }

// the runs repeated for the determinism check
struct Runs {
  std::string bw, kin[6], kh, cex_a, cex_b;
};

}  // namespace

int main() {
  const LabContext ctx = LabContext::create(preset_bolza());
  const QuotientSpace& q = *ctx.space;
  const LeftInvariantMetric& metric = *ctx.metric;
  const double sqrt2 = std::sqrt(2.0);
  Runs first;

  criterion(1, "metric identity", 60, [&](Line& l) {
    double worst_a = 0, worst_c = 1e9;
    for (double t : {0.1, 0.5, 1.0, 2.0, 3.0}) worst_a = std::max(worst_a, std::abs(metric.distance(geo(t), {}) - t / sqrt2));
    for (double t : {0.5, 1.0, 2.0}) {
      l.require(metric.distance(horo(t), {}) <= t, "d(b_t, e) <= |t|");
      worst_c = std::min(worst_c, t - metric.distance(unhoro(t), {}));
    }
    l.require(worst_a < 1e-4, "d(a_t, e) = |t|/sqrt2");
    l.require(worst_c > 1e-3, "d(c_t, e) < |t| - 1e-3");
    l.detail << " max |d(a_t,e) - |t|/sqrt2| = " << worst_a << ", min |t| - d(c_t,e) = " << worst_c;
  });

  criterion(2, "pruning identity", 30, [&](Line& l) {
    Rng rng(2);
    double worst = 0;
    for (int i = 0; i < 10000; ++i) {
      const GroupElement g = random_element(rng, 2.0);
      const double f = g.mat().frobenius2();
      const double h = 2 * std::cosh(oracle::hyperbolic_displacement(arr(g.mat())));
      worst = std::max(worst, std::abs(f - h) / std::max(1.0, h));
    }
    l.require(worst < 1e-10, "|G|_F^2 = 2 cosh d_H");
    l.detail << " 10^4 samples, max relative error " << worst;
  });

  criterion(3, "Bolza constants", 300, [&](Line& l) {
    const auto& s = q.systole();
    l.require(std::abs(s.eps_star - 2 * sqrt2) < 1e-9, "eps* = 2 sqrt2");
    l.require(std::abs(s.sigma0 - oracle::bolza_sigma0()) < 1e-3, "sigma0 closed form");
    // every gamma with d_G(gamma g, g) < sigma0 moves g.i by at most kappa sigma0
    const double reach = q.kappa() * s.sigma0 * 1.05 + 2 * q.covering_radius();
    const auto ball = q.group().ball(reach);
    Rng rng(3);
    double sampled_min = 1e9;
    long evaluated = 0;
    for (int i = 0; i < 1000; ++i) {
      const GroupElement g = q.reduce(random_element(rng, 1.5)).rep;
      for (const auto& e : ball->entries()) {
        if (e.word.empty()) continue;
        const GroupElement k = inverse(g) * e.element * g;
        if (displacement(k) / q.kappa() >= std::min(sampled_min, s.sigma0 * 1.05)) continue;
        sampled_min = std::min(sampled_min, metric.dist_to_identity(k));
        ++evaluated;
      }
    }
    l.require(sampled_min >= s.sigma0 - 1e-6, "d_G(gamma g, g) >= sigma0");
    l.detail << " eps*=" << s.eps_star << " sigma0=" << s.sigma0 << " sampled min d_G(gamma g,g)=" << sampled_min
             << " (" << evaluated << " distance evaluations, ball radius " << reach << ")";
  });

  criterion(4, "matrix identities", 30, [&](Line& l) {
    Rng rng(4);
    double worst = 0;
    for (int i = 0; i < 10000; ++i) {
      const GroupElement K = random_element(rng, 1.0);
      const double t = rng.uniform(-3, 3), s = rng.uniform(-3, 3);
      const auto lit_g = oracle::mul(oracle::mul(oracle::A(-t), arr(K.mat())), oracle::A(s));
      const auto lit_h = oracle::mul(oracle::mul(oracle::B(-t), arr(K.mat())), oracle::B(s));
      const auto lhs = oracle::mul(oracle::mul(oracle::A(-t), oracle::B(s)), oracle::A(t));
      worst = std::max({worst, rel_diff(arr(conj_by_geodesic(K.mat(), t, s)), lit_g),
                        rel_diff(arr(conj_by_horocycle(K.mat(), s, t)), lit_h),
                        rel_diff(arr(stable_matrix(s * std::exp(-t))), lhs)});
    }
    l.require(worst < 1e-12, "closed forms = literal products");
    l.detail << " 3 x 10^4 comparisons, max relative difference " << worst;
  });

  criterion(5, "BW-expansive geodesic flow", 600, [&](Line& l) {
    BwOptions o;
    o.eps = 0.5;
    o.window = 20;
    o.n_pairs = 50;
    o.n_reparams = 10;
    o.seed = 5;
    const auto v = bw_test_geodesic(ctx, o);
    first.bw = v.to_json();
    l.require(v.outcome != Outcome::fail, "no failures");
    l.require(v.summary["on_orbit_recovered"] == 50, "all on-orbit pairs recovered");
    l.require(v.summary["max_tau_error"].get<double>() < 1e-3, "|tau_rec - tau| < 1e-3");
    l.require(v.summary["false_same_orbit"] == 0, "no false same-orbit");
    const int exited = v.summary["off_orbit_exited"], inconclusive = v.summary["off_orbit_inconclusive"];
    l.require(exited + inconclusive == 50, "off-orbit pairs exit or are flagged");
    l.detail << " outcome=" << to_string(v.outcome) << " delta=" << bw_delta_for_epsilon(o.eps, ctx)
             << " recovered 50/50, max tau error " << v.summary["max_tau_error"].get<double>() << ", off-orbit exited "
             << exited << ", inconclusive " << inconclusive;
  });

  criterion(6, "horocycle kinematic expansive under time changes", 600, [&](Line& l) {
    const TimeChange tcs[] = {TimeChange::identity(FlowKind::stable_horocycle),
                              TimeChange::constant(FlowKind::stable_horocycle, 2),
                              TimeChange::bump(FlowKind::stable_horocycle, ctx.space)};
    int k = 0;
    for (const auto& tc : tcs)
      for (Direction d : {Direction::positive, Direction::negative}) {
        KinematicOptions o;
        o.eps = 0.25;
        o.direction = d;
        o.window = 30;
        o.n_pairs = 50;
        o.seed = 6;
        const auto v = kinematic_test_time_change(ctx, tc, o);
        first.kin[k++] = v.to_json();
        const std::string tag = tc.name() + "/" + to_string(d);
        const double rho = v.params["rho"];
        l.require(v.outcome == Outcome::pass, tag + " pass");
        l.require(v.summary["false_same_orbit"] == 0, tag + " no false same-orbit");
        l.require(v.summary["on_orbit_recovered"] == 50, tag + " all close pairs same-orbit");
        l.require(v.summary["max_abs_shift"].get<double>() < rho, tag + " |s| < rho");
        l.require(v.summary["max_abs_k21"].get<double>() < 1e-6, tag + " |k21| < 1e-6");
        l.require(v.summary["max_trace"].get<double>() < 2 + q.trace_gap(), tag + " tr K < 2 + eps*");
        l.detail << " " << tag << ": " << to_string(v.outcome) << " rho=" << rho
                 << " max|s|=" << v.summary["max_abs_shift"].get<double>();
      }
  });

  criterion(7, "KH-expansive horocycle flow", 300, [&](Line& l) {
    KhOptions o;
    o.n_triples = 50;
    o.seed = 7;
    const auto v = kh_test_horocycle(ctx, o);
    first.kh = v.to_json();
    const double M = v.summary["M"];
    l.require(v.outcome == Outcome::pass, "same orbit on every qualifying triple");
    l.require(v.summary["qualifying"].get<int>() > 0, "some triple qualifies");
    l.require(std::isfinite(M), "M finite");
    l.detail << " qualifying " << v.summary["qualifying"].get<int>() << "/50, M = max|s(t)-t| = " << M;
  });

  criterion(8, "horocycle flow is not BW-expansive", 60, [&](Line& l) {
    const auto c = counterexample_horocycle_not_bw(ctx, 0.1);
    first.cex_a = c.verdict.to_json();
    l.require(c.max_residual_formula < 1e-12 && c.max_residual_product < 1e-12, "residual < 1e-12");
    l.require(c.distance_to_identity < 0.1, "d_G(h^-1 g, e) < delta");
    l.require(c.trace < 2 + c.eps_star, "a + 1/a < 2 + eps*");
    l.require(c.holds, "witness holds");
    l.detail << " a=" << c.a << " residual " << std::max(c.max_residual_formula, c.max_residual_product)
             << " over |t| <= 1000, d_G=" << c.distance_to_identity << ", trace " << c.trace;
  });

  criterion(9, "geodesic flow is not separating", 120, [&](Line& l) {
    const auto c = counterexample_geodesic_not_separating(ctx, 0.1);
    first.cex_b = c.verdict.to_json();
    double worst = -1e9;
    for (const auto& [t, d] : c.decay_table) worst = std::max(worst, d - std::abs(c.s) * std::exp(-t));
    l.require(c.decay_table.size() == 11, "t = 0..10 measured");
    l.require(worst <= 1e-6, "d <= |s| e^-t + 1e-6");
    l.require(c.non_orbit_certified, "ball-certified non-orbit");
    l.detail << " s=" << c.s << " max(d - |s|e^-t)=" << worst << ", certified at radius " << c.certified_radius
             << " for |tau| <= " << c.certified_tau;
  });

  criterion(10, "horocycle flows have no periodic points", 300, [&](Line& l) {
    for (FlowKind k : {FlowKind::stable_horocycle, FlowKind::unstable_horocycle}) {
      const auto c = periodic_certificate(q, k, 10, 1000, 100, 20);
      l.require(c.holds && c.eps_star > 0 && c.min_return_distance > 0.01, to_string(k));
      l.detail << " " << to_string(k) << ": min return distance " << c.min_return_distance << " over "
               << c.return_samples << " samples";
    }
  });

  criterion(11, "determinism", 1200, [&](Line& l) {
    BwOptions bo;
    bo.seed = 5;
    l.require(strip_timing(bw_test_geodesic(ctx, bo).to_json()) == strip_timing(first.bw), "BW");
    const TimeChange tcs[] = {TimeChange::identity(FlowKind::stable_horocycle),
                              TimeChange::constant(FlowKind::stable_horocycle, 2),
                              TimeChange::bump(FlowKind::stable_horocycle, ctx.space)};
    int k = 0;
    for (const auto& tc : tcs)
      for (Direction d : {Direction::positive, Direction::negative}) {
        KinematicOptions o;
        o.direction = d;
        o.seed = 6;
        l.require(strip_timing(kinematic_test_time_change(ctx, tc, o).to_json()) == strip_timing(first.kin[k++]),
                  "kinematic " + tc.name());
      }
    KhOptions ko;
    ko.seed = 7;
    l.require(strip_timing(kh_test_horocycle(ctx, ko).to_json()) == strip_timing(first.kh), "KH");
    l.require(strip_timing(counterexample_horocycle_not_bw(ctx, 0.1).verdict.to_json()) == strip_timing(first.cex_a),
              "counterexample a");
    l.require(strip_timing(counterexample_geodesic_not_separating(ctx, 0.1).verdict.to_json()) ==
                  strip_timing(first.cex_b),
              "counterexample b");
    l.detail << " criteria 5-9 rerun with the same seeds, verdicts identical up to the timing line";
  });

  std::printf("%s: %d criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
