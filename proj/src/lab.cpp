#include "horolab/lab.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace horolab {

namespace {

constexpr double kRecoverTol = 1e-6;
constexpr double kSqrt2 = std::numbers::sqrt2;

std::string iso_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

Mat2 inv(const Mat2& m) { return {m.a22, -m.a12, -m.a21, m.a11}; }

// Reduced representative of x * f_p, advanced incrementally so that long flows do not lose
// precision in one large product.
class OrbitTracker {
 public:
  OrbitTracker(const QuotientSpace& q, FlowKind k, const Mat2& x) : q_(q), k_(k), rep_(q.reduce_matrix(x)) {}
  const Mat2& at(double p) {
    if (p != p_) {
      rep_ = q_.reduce_matrix(rep_ * flow_matrix(k_, p - p_));
      p_ = p;
    }
    return rep_;
  }

 private:
  const QuotientSpace& q_;
  FlowKind k_;
  Mat2 rep_;
  double p_ = 0;
};

// Pair (x f_t, x K f_s) seen from the reduced rep r_t of x f_t: the partner is r_t (f_-t K f_s).
// Tracking x K separately would let roundoff in K grow along the unstable direction.
class PairSweep {
 public:
  PairSweep(const QuotientSpace& q, FlowKind k, const Mat2& x, const Mat2& K) : X_(q, k, x), k_(k), K_(K) {}
  std::pair<Mat2, Mat2> at(double t, double s) {
    const Mat2 r = X_.at(t);
    return {r, r * (flow_matrix(k_, -t) * K_ * flow_matrix(k_, s))};
  }
  Mat2 base(double t) { return X_.at(t); }

 private:
  OrbitTracker X_;
  FlowKind k_;
  Mat2 K_;
};

std::vector<double> half_grid(double window, double dt, Direction dir) {
  std::vector<double> g;
  const int n = static_cast<int>(std::floor(window / dt + 1e-9));
  for (int k = 0; k <= n; ++k) g.push_back((dir == Direction::positive ? 1 : -1) * k * dt);
  return g;
}

struct Recovery {
  bool recovered = false;
  GroupElement K;
  Word gamma;
  double param = 0;       // tau for the geodesic flow, shift s for horocycles
  double distance = 0;    // quotient distance at t = 0
  CosetVerdict coset = CosetVerdict::different;
};

// Proof pipeline at t = 0: gamma from the quotient minimum, K = g^-1 gamma h, read the flow
// parameter if K lies on the flow's subgroup, then confirm with same_coset independently.
Recovery recover(const LabContext& ctx, FlowKind flow, const GroupElement& x, const GroupElement& y) {
  Recovery r;
  const auto q = ctx.space->quotient_distance({x}, {y});
  r.distance = q.value;
  r.gamma = q.gamma_word;
  r.K = inverse(x) * q.gamma * y;
  const Mat2& k = r.K.mat();
  switch (flow) {
    case FlowKind::geodesic:
      r.recovered = std::abs(k.a12) <= kRecoverTol && std::abs(k.a21) <= kRecoverTol && k.a11 > 0 && k.a22 > 0;
      if (r.recovered) r.param = std::log(k.a11 / k.a22);
      break;
    case FlowKind::stable_horocycle:
      r.recovered = std::abs(k.a21) <= kRecoverTol && std::abs(k.a11 - 1) <= kRecoverTol &&
                    std::abs(k.a22 - 1) <= kRecoverTol;
      if (r.recovered) r.param = k.a12 / k.a22;
      break;
    case FlowKind::unstable_horocycle:
      r.recovered = std::abs(k.a12) <= kRecoverTol && std::abs(k.a11 - 1) <= kRecoverTol &&
                    std::abs(k.a22 - 1) <= kRecoverTol;
      if (r.recovered) r.param = k.a21 / k.a11;
      break;
  }
  if (r.recovered) {
    const GroupElement moved(Matrix2(x.mat() * flow_matrix(flow, r.param)));
    r.coset = ctx.space->same_coset(moved, y).verdict;
  }
  return r;
}

struct NonOrbitSearch {
  bool certified = false;
  double radius = 0;
  double tau_bound = 0;
  std::size_t triangular = 0;
  Json transcript = Json::array();
};

// Bounded certificate that y is not on the geodesic orbit of x: no gamma in the ball makes
// x^-1 gamma y diagonal. Covers every tau with |tau| <= radius - |x'| - |y'| (reduced reps).
NonOrbitSearch certify_off_geodesic_orbit(const LabContext& ctx, const GroupElement& x, const GroupElement& y,
                                          double radius, std::size_t transcript_cap = 32) {
  NonOrbitSearch out;
  const Reduction rx = ctx.space->reduce(x), ry = ctx.space->reduce(y);
  const Mat2 xi = inv(rx.rep.mat());
  auto ball = ctx.group->ball(radius);
  out.radius = ball->radius();
  out.tau_bound = out.radius - displacement(rx.rep) - displacement(ry.rep);
  out.certified = true;
  for (const auto& e : ball->entries()) {
    const Mat2 m = xi * e.element.mat() * ry.rep.mat();
    const double scale = std::max(1.0, std::sqrt(m.frobenius2()));
    const bool low = std::abs(m.a21) <= 1e-9 * scale, high = std::abs(m.a12) <= 1e-9 * scale;
    if (low || high) {
      ++out.triangular;
      if (out.transcript.size() < transcript_cap)
        out.transcript.push_back({{"gamma", format_word(e.word)},
                                  {"M", matrix_json(m)},
                                  {"on_orbit", low && high}});
    }
    if (low && high) out.certified = false;
  }
  return out;
}

Json recovery_json(const Recovery& r) {
  return {{"recovered", r.recovered},
          {"K", element_json(r.K)},
          {"gamma", format_word(r.gamma)},
          {"param", r.param},
          {"distance_t0", r.distance},
          {"coset", to_string(r.coset)}};
}

void finish(TestVerdict& v, const LabContext& ctx, const Stopwatch& sw, std::size_t ball_mark) {
  v.ball_radii_used = ctx.space->ball_radii_used(ball_mark);
  v.timestamp = iso_now();
  v.wall_seconds = sw.seconds();
}

GroupElement random_unit_perturbation(Rng& rng, double u) {
  const double w1 = rng.normal(), w2 = rng.normal(), w3 = rng.normal();
  const double n = std::sqrt(w1 * w1 + w2 * w2 + w3 * w3);
  return exp_map({u * w1 / n, u * w2 / n, u * w3 / n});
}

double uniform_signed(Rng& rng, double lo, double hi) {
  const double m = rng.uniform(lo, hi);
  return rng.coin() ? m : -m;
}

}  // namespace

// ---- reparametrizations ----------------------------------------------------------------------

Reparametrization::Reparametrization(std::vector<std::pair<double, double>> knots, std::string label)
    : knots_(std::move(knots)), label_(std::move(label)) {
  if (knots_.size() < 2) throw std::invalid_argument("reparametrization needs at least two knots");
  bool has_origin = false;
  for (std::size_t i = 0; i < knots_.size(); ++i) {
    if (i && !(knots_[i].first > knots_[i - 1].first))
      throw std::invalid_argument("reparametrization knots must be strictly increasing in t");
    if (knots_[i].first == 0) {
      if (knots_[i].second != 0) throw std::invalid_argument("reparametrization must satisfy s(0) = 0");
      has_origin = true;
    }
  }
  if (!has_origin) throw std::invalid_argument("reparametrization needs a knot at t = 0");
}

Reparametrization Reparametrization::identity() { return Reparametrization({{-1, -1}, {0, 0}, {1, 1}}, "identity"); }

Reparametrization Reparametrization::linear(double slope) {
  std::ostringstream os;
  os.precision(17);
  os << "linear:" << slope;
  return Reparametrization({{-1, -slope}, {0, 0}, {1, slope}}, os.str());
}

double Reparametrization::operator()(double t) const {
  if (t == 0) return 0;
  auto it = std::upper_bound(knots_.begin(), knots_.end(), t,
                             [](double v, const std::pair<double, double>& k) { return v < k.first; });
  std::size_t i;
  if (it == knots_.begin()) i = 0;
  else if (it == knots_.end()) i = knots_.size() - 2;
  else i = static_cast<std::size_t>(it - knots_.begin()) - 1;
  const auto& [t0, s0] = knots_[i];
  const auto& [t1, s1] = knots_[i + 1];
  return s0 + (s1 - s0) * (t - t0) / (t1 - t0);
}

double Reparametrization::min_slope() const {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < knots_.size(); ++i)
    m = std::min(m, (knots_[i].second - knots_[i - 1].second) / (knots_[i].first - knots_[i - 1].first));
  return m;
}

double Reparametrization::max_slope() const {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < knots_.size(); ++i)
    m = std::max(m, (knots_[i].second - knots_[i - 1].second) / (knots_[i].first - knots_[i - 1].first));
  return m;
}

Json Reparametrization::to_json() const {
  Json k = Json::array();
  for (const auto& [t, s] : knots_) k.push_back({t, s});
  return {{"label", label_}, {"knots", k}};
}

std::vector<Reparametrization> reparametrization_family(Rng& rng, int n, const ReparamFamily& f) {
  std::vector<Reparametrization> out;
  const int m = static_cast<int>(std::ceil(f.window / f.knot_spacing)) + 1;
  const double lmin = std::log(f.slope_min), lmax = std::log(f.slope_max);
  for (int i = 0; i < n; ++i) {
    if (i == 0) {
      out.push_back(Reparametrization::identity());
      continue;
    }
    std::vector<std::pair<double, double>> knots;
    switch (i % 3) {
      case 1: {  // t + w(t), |w| <= wiggle
        for (int k = -m; k <= m; ++k) {
          const double t = k * f.knot_spacing;
          knots.emplace_back(t, k == 0 ? 0.0 : t + rng.uniform(-f.wiggle, f.wiggle));
        }
        out.emplace_back(std::move(knots), "wiggle");
        break;
      }
      case 2:
        out.push_back(Reparametrization::linear(std::exp(rng.uniform(lmin, lmax))));
        break;
      default: {  // random bounded slopes on both sides of 0
        std::vector<double> pos{0}, neg{0};
        for (int k = 1; k <= m; ++k) {
          pos.push_back(pos.back() + f.knot_spacing * std::exp(rng.uniform(lmin, lmax)));
          neg.push_back(neg.back() - f.knot_spacing * std::exp(rng.uniform(lmin, lmax)));
        }
        for (int k = m; k >= 1; --k) knots.emplace_back(-k * f.knot_spacing, neg[k]);
        for (int k = 0; k <= m; ++k) knots.emplace_back(k * f.knot_spacing, pos[k]);
        out.emplace_back(std::move(knots), "slopes");
        break;
      }
    }
  }
  return out;
}

// ---- verdicts --------------------------------------------------------------------------------

std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::pass: return "pass";
    case Outcome::fail: return "fail";
    case Outcome::inconclusive: return "inconclusive";
  }
  return "?";
}

int exit_code(Outcome o) {
  switch (o) {
    case Outcome::pass: return 0;
    case Outcome::fail: return 1;
    case Outcome::inconclusive: return 2;
  }
  return 2;
}

std::string TestVerdict::to_json() const {
  std::ostringstream os;
  auto line = [&](const char* key, const Json& v, bool comma = true) {
    os << "  " << Json(key).dump() << ": " << v.dump() << (comma ? ",\n" : "\n");
  };
  os << "{\n";
  line("test", test);
  line("outcome", to_string(outcome));
  line("seed", seed);
  line("params", params);
  line("summary", summary);
  os << "  \"witnesses\": [";
  for (std::size_t i = 0; i < witnesses.size(); ++i) os << (i ? ",\n    " : "\n    ") << witnesses[i].dump();
  os << (witnesses.empty() ? "],\n" : "\n  ],\n");
  line("ball_radii_used", ball_radii_used);
  line("notes", notes);
  line("timings", Json{{"timestamp", timestamp}, {"wall_seconds", wall_seconds}}, false);
  os << "}\n";
  return os.str();
}

Json matrix_json(const Mat2& m) { return Json::array({m.a11, m.a12, m.a21, m.a22}); }
Json element_json(const GroupElement& g) { return matrix_json(g.mat()); }

std::string to_string(Direction d) { return d == Direction::positive ? "positive" : "negative"; }

Direction parse_direction(const std::string& s) {
  if (s == "positive" || s == "pos" || s == "+") return Direction::positive;
  if (s == "negative" || s == "neg" || s == "-") return Direction::negative;
  throw std::invalid_argument("unknown direction '" + s + "'");
}

LabContext LabContext::create(const FuchsianGroup& group, const MetricOptions& metric_options,
                              std::uint64_t calibration_seed) {
  LabContext c;
  c.group = std::make_shared<const FuchsianGroup>(group);
  c.metric = std::make_shared<const LeftInvariantMetric>(metric_options);
  c.space = std::make_shared<const QuotientSpace>(c.group, c.metric, calibration_seed);
  c.calibration = std::make_shared<const GapCalibration>(*c.metric, calibration_seed);
  c.calibration_seed = calibration_seed;
  c.space->systole();  // built up front so every run sees the same cache
  return c;
}

// ---- BW --------------------------------------------------------------------------------------

double bw_epsilon0(double eps) { return std::exp(eps / 2) - std::exp(-eps / 2); }

double bw_delta_for_epsilon(double eps, const LabContext& ctx) {
  if (!(eps > 0)) throw std::invalid_argument("eps must be > 0");
  const double cap = ctx.space->injectivity_radius() / 4 * (1 - 1e-3);
  return std::min(ctx.calibration->distance_to_gap(bw_epsilon0(eps)), cap);
}

double separating_delta_cap(const LabContext& ctx) {
  return std::min(ctx.space->trace_gap(), ctx.space->injectivity_radius() / 4);
}

TestVerdict bw_test_geodesic(const LabContext& ctx, const BwOptions& o) {
  if (!(o.eps > 0) || !(o.window > 0) || !(o.dt > 0)) throw std::invalid_argument("bw test needs eps, window, dt > 0");
  Stopwatch sw;
  const std::size_t mark = ctx.space->ball_mark();
  TestVerdict v;
  v.test = "bw_geodesic";
  v.seed = o.seed;
  const double delta = bw_delta_for_epsilon(o.eps, ctx);
  v.params = {{"eps", o.eps},
              {"eps0", bw_epsilon0(o.eps)},
              {"delta", delta},
              {"window", o.window},
              {"dt", o.dt},
              {"pairs", o.n_pairs},
              {"reparams", o.n_reparams},
              {"sigma0", ctx.space->injectivity_radius()},
              {"calibration_seed", ctx.calibration_seed}};
  Rng rng(o.seed);
  ReparamFamily fam;
  fam.window = o.window + 1;

  int on_recovered = 0, off_exited = 0, off_inconclusive = 0, false_same = 0, failures = 0, close_runs = 0;
  double max_tau_err = 0, min_margin = std::numeric_limits<double>::infinity();

  const auto fwd = half_grid(o.window, o.dt, Direction::positive);
  const auto bwd = half_grid(o.window, o.dt, Direction::negative);

  for (int p = 0; p < 2 * o.n_pairs; ++p) {
    const bool on_orbit = p < o.n_pairs;
    const GroupElement x = random_element(rng, 2.0);
    GroupElement K;
    double tau = 0, u = 0;
    std::string pert;
    if (on_orbit) {
      tau = uniform_signed(rng, 0.05, 0.9) * std::min(o.eps, kSqrt2 * delta);
      K = geo(tau);
      pert = "a";
    } else {
      u = uniform_signed(rng, 0.25, 0.9) * delta;
      switch (p % 3) {
        case 0: K = horo(u); pert = "b"; break;
        case 1: K = unhoro(u); pert = "c"; break;
        default: K = random_unit_perturbation(rng, u); pert = "random";
      }
    }
    const GroupElement y = x * K;
    const auto family = reparametrization_family(rng, o.n_reparams, fam);

    Json exits = Json::array();
    std::vector<std::string> close_labels;
    double max_close = 0;
    for (const auto& s : family) {
      bool stayed = true;
      double exit_t = 0, run_max = 0;
      for (const auto* grid : {&fwd, &bwd}) {
        PairSweep P(*ctx.space, FlowKind::geodesic, x.mat(), K.mat());
        for (double t : *grid) {
          const auto [gx, gy] = P.at(t, s(t));
          const auto c = ctx.space->closer_than(gx, gy, delta);
          if (!c.close) {
            stayed = false;
            exit_t = t;
            break;
          }
          run_max = std::max(run_max, c.value);
        }
        if (!stayed) break;
      }
      if (stayed) {
        close_labels.push_back(s.label());
        max_close = std::max(max_close, run_max);
        ++close_runs;
        exits.push_back(nullptr);
      } else {
        exits.push_back(exit_t);
      }
    }

    Json w = {{"kind", on_orbit ? "on_orbit" : "off_orbit"},
              {"perturbation", pert},
              {"x", element_json(x)},
              {"y", element_json(y)}};
    if (on_orbit) w["tau"] = tau;
    else w["u"] = u;
    w["exit_times"] = exits;
    w["close_reparams"] = close_labels;

    if (on_orbit && (close_labels.empty() || close_labels.front() != "identity")) {
      ++failures;
      w["error"] = "on-orbit pair left the delta-tube under s(t) = t";
    }
    if (!close_labels.empty()) {
      const Recovery r = recover(ctx, FlowKind::geodesic, x, y);
      w["recovery"] = recovery_json(r);
      w["max_distance"] = max_close;
      if (r.recovered) {
        const bool ok = std::abs(r.param) < o.eps && r.coset == CosetVerdict::same;
        if (!ok) {
          ++failures;
          w["error"] = "recovered orbit shift violates |tau| < eps or same_coset disagrees";
        }
        if (on_orbit) {
          const double err = std::abs(r.param - tau);
          max_tau_err = std::max(max_tau_err, err);
          if (err >= 1e-3) {
            ++failures;
            w["error"] = "recovered tau differs from the constructed shift";
          } else if (ok) {
            ++on_recovered;
          }
        } else {
          ++false_same;
          ++failures;
          w["error"] = "off-orbit pair concluded same-orbit";
        }
      } else {
        if (on_orbit) {
          ++failures;
          w["error"] = "on-orbit pair not recovered";
        } else {
          ++off_inconclusive;
          min_margin = std::min(min_margin, delta - max_close);
          w["separation_margin"] = delta - max_close;
        }
      }
    } else if (!on_orbit) {
      ++off_exited;
    }
    v.witnesses.push_back(std::move(w));
  }

  v.summary = {{"on_orbit_pairs", o.n_pairs},
               {"on_orbit_recovered", on_recovered},
               {"max_tau_error", max_tau_err},
               {"off_orbit_pairs", o.n_pairs},
               {"off_orbit_exited", off_exited},
               {"off_orbit_inconclusive", off_inconclusive},
               {"false_same_orbit", false_same},
               {"close_runs", close_runs},
               {"failures", failures}};
  if (off_inconclusive) v.summary["min_separation_margin"] = min_margin;
  v.outcome = failures ? Outcome::fail : (off_inconclusive ? Outcome::inconclusive : Outcome::pass);
  v.notes = "closeness sampled on a grid of step dt over [-window, window]; recovery reads tau = 2 ln k11 from K";
  finish(v, ctx, sw, mark);
  return v;
}

// ---- separating / kinematic ------------------------------------------------------------------

namespace {

struct SepSetup {
  std::string test;
  FlowKind flow;
  const TimeChange* tc = nullptr;  // null: the flow itself
  double delta;
  Direction direction;
  double window, dt;
  int n_pairs;
  std::uint64_t seed;
  double rho = 0;  // > 0: kinematic shift bound
  double eps = 0;
  Json params;
};

// Off-orbit perturbations transverse to the flow.
std::pair<GroupElement, std::string> off_orbit_partner(FlowKind flow, Direction dir, int p, double u, Rng& rng) {
  const bool pos = dir == Direction::positive;
  switch (flow) {
    case FlowKind::geodesic:
      if (p % 3 == 0)  // stays close in the chosen direction
        return pos ? std::pair{horo(u), std::string("b")} : std::pair{unhoro(u), std::string("c")};
      if (p % 3 == 1)
        return pos ? std::pair{unhoro(u), std::string("c")} : std::pair{horo(u), std::string("b")};
      break;
    case FlowKind::stable_horocycle:
      if (p % 3 == 0) return {geo(u), "a"};
      if (p % 3 == 1) return {unhoro(u), "c"};
      break;
    case FlowKind::unstable_horocycle:
      if (p % 3 == 0) return {geo(u), "a"};
      if (p % 3 == 1) return {horo(u), "b"};
      break;
  }
  return {random_unit_perturbation(rng, u), "random"};
}

TestVerdict run_separating(const LabContext& ctx, const SepSetup& S) {
  Stopwatch sw;
  const std::size_t mark = ctx.space->ball_mark();
  TestVerdict v;
  v.test = S.test;
  v.seed = S.seed;
  v.params = S.params;
  const double eps_star = ctx.space->trace_gap();
  const double speed_max = S.tc ? S.tc->rho_max() : 1.0;
  Rng rng(S.seed);
  const auto grid = half_grid(S.window, S.dt, S.direction);

  int on_recovered = 0, off_exited = 0, inconclusive = 0, failures = 0, false_same = 0, non_orbit = 0;
  double max_k21 = 0, max_trace = 0, max_shift = 0, max_r = 0, max_s12 = 0;
  double min_margin = std::numeric_limits<double>::infinity();

  for (int p = 0; p < 2 * S.n_pairs; ++p) {
    const bool on_orbit = p < S.n_pairs;
    const GroupElement x = random_element(rng, 2.0);
    GroupElement K;
    std::string pert;
    double shift = 0;  // constructed: psi-time r for on-orbit pairs, u for off-orbit
    if (on_orbit) {
      if (S.flow == FlowKind::geodesic) {
        shift = uniform_signed(rng, 0.05, 0.9) * kSqrt2 * S.delta;
        K = geo(shift);
      } else {
        shift = uniform_signed(rng, 0.05, 0.9) * S.delta / speed_max;
        const double beta = S.tc ? time_change_step(*S.tc, {x}, shift).elapsed_base_time : shift;
        K = GroupElement(Matrix2(flow_matrix(S.flow, beta)));
      }
      pert = "flow";
    } else {
      shift = uniform_signed(rng, 0.25, 0.9) * S.delta;
      std::tie(K, pert) = off_orbit_partner(S.flow, S.direction, p, shift, rng);
    }
    const GroupElement y = x * K;

    // Sweep psi_t x, psi_t y over the half window.
    std::optional<TimeChangeIntegrator> ix, iy;
    if (S.tc) ix.emplace(*S.tc, QuotientPoint{x}), iy.emplace(*S.tc, QuotientPoint{y});
    PairSweep P(*ctx.space, S.flow, x.mat(), K.mat());
    bool stayed = true;
    double exit_t = 0, run_max = 0;
    std::vector<std::pair<double, double>> base_times;
    for (double t : grid) {
      const double bx = ix ? ix->advance_to(t) : t;
      const double by = iy ? iy->advance_to(t) : t;
      base_times.emplace_back(bx, by);
      const auto [gx, gy] = P.at(bx, by);
      const auto c = ctx.space->closer_than(gx, gy, S.delta);
      if (!c.close) {
        stayed = false;
        exit_t = t;
        break;
      }
      run_max = std::max(run_max, c.value);
    }

    Json w = {{"kind", on_orbit ? "on_orbit" : "off_orbit"},
              {"perturbation", pert},
              {"shift", shift},
              {"x", element_json(x)},
              {"y", element_json(y)}};
    if (!stayed) {
      w["exit_time"] = exit_t;
      if (on_orbit) {
        ++failures;
        w["error"] = "on-orbit pair left the delta-tube";
      } else {
        ++off_exited;
      }
      v.witnesses.push_back(std::move(w));
      continue;
    }
    w["max_distance"] = run_max;
    const Recovery r = recover(ctx, S.flow, x, y);
    w["recovery"] = recovery_json(r);
    const Mat2& k = r.K.mat();
    if (r.recovered) {
      const double k21 = S.flow == FlowKind::unstable_horocycle ? std::abs(k.a12) : std::abs(k.a21);
      const double trace = std::abs(k.a11 + k.a22);
      max_k21 = std::max(max_k21, k21);
      max_trace = std::max(max_trace, trace);
      max_shift = std::max(max_shift, std::abs(r.param));
      bool ok = r.coset == CosetVerdict::same;
      if (S.flow != FlowKind::geodesic) ok = ok && k21 < kRecoverTol && trace < 2 + eps_star;
      if (S.rho > 0) {
        // psi-time shift r = alpha(s, x), and the base-time offsets of the two orbits
        const double rr = time_change_alpha(*S.tc, {x}, r.param);
        double s12 = 0;
        for (const auto& [bx, by] : base_times) s12 = std::max(s12, std::abs(bx - (r.param + by)));
        max_r = std::max(max_r, std::abs(rr));
        max_s12 = std::max(max_s12, s12);
        w["r"] = rr;
        w["max_s1_minus_s2"] = s12;
        ok = ok && std::abs(r.param) < S.rho && std::abs(rr) < S.eps && s12 < S.rho;
      }
      if (!ok) {
        ++failures;
        w["error"] = "recovered pair violates the shift bounds or same_coset disagrees";
      } else if (!on_orbit) {
        ++false_same;
        ++failures;
        w["error"] = "off-orbit pair concluded same-orbit";
      } else {
        ++on_recovered;
      }
    } else if (on_orbit) {
      ++failures;
      w["error"] = "on-orbit pair not recovered";
    } else {
      // Close on the whole half window but off the orbit.
      bool persistent = false;
      if (S.flow == FlowKind::geodesic) {
        // K unipotent of the contracted type: d(phi_t x, phi_t y) <= |s| e^{-|t|} for the whole half line.
        const bool upper = std::abs(k.a21) <= kRecoverTol && std::abs(k.a11 - 1) <= kRecoverTol &&
                           std::abs(k.a22 - 1) <= kRecoverTol;
        const bool lower = std::abs(k.a12) <= kRecoverTol && std::abs(k.a11 - 1) <= kRecoverTol &&
                           std::abs(k.a22 - 1) <= kRecoverTol;
        const double s = upper ? k.a12 : k.a21;
        persistent = ((S.direction == Direction::positive && upper) || (S.direction == Direction::negative && lower)) &&
                     std::abs(s) < S.delta;
        if (persistent) w["decay_bound"] = "d(phi_t x, phi_t y) <= |s| e^{-|t|} < delta on the half line";
      }
      if (persistent) {
        const auto cert = certify_off_geodesic_orbit(ctx, x, y, 10.0);
        w["non_orbit"] = {{"certified", cert.certified},
                          {"ball_radius", cert.radius},
                          {"tau_bound", cert.tau_bound},
                          {"triangular_candidates", cert.triangular}};
        if (cert.certified) {
          ++non_orbit;
          ++failures;
          w["error"] = "delta-close on the half line but not on one orbit";
        } else {
          ++inconclusive;
        }
      } else {
        ++inconclusive;
        min_margin = std::min(min_margin, S.delta - run_max);
        w["separation_margin"] = S.delta - run_max;
      }
    }
    v.witnesses.push_back(std::move(w));
  }

  v.summary = {{"on_orbit_pairs", S.n_pairs},
               {"on_orbit_recovered", on_recovered},
               {"off_orbit_pairs", S.n_pairs},
               {"off_orbit_exited", off_exited},
               {"inconclusive", inconclusive},
               {"false_same_orbit", false_same},
               {"non_orbit_witnesses", non_orbit},
               {"failures", failures},
               {"max_abs_k21", max_k21},
               {"max_trace", max_trace},
               {"max_abs_shift", max_shift}};
  if (S.rho > 0) {
    v.summary["max_abs_r"] = max_r;
    v.summary["max_s1_minus_s2"] = max_s12;
  }
  if (inconclusive) v.summary["min_separation_margin"] = min_margin;
  v.outcome = failures ? Outcome::fail : (inconclusive ? Outcome::inconclusive : Outcome::pass);
  v.notes = "closeness sampled on a grid of step dt over the half window; recovery reads the shift from K = g^-1 gamma h";
  finish(v, ctx, sw, mark);
  return v;
}

}  // namespace

TestVerdict separating_test(const LabContext& ctx, const SeparatingOptions& o) {
  const double cap = separating_delta_cap(ctx);
  if (!(o.delta > 0) || !(o.delta < cap))
    throw std::invalid_argument("delta must lie in (0, " + std::to_string(cap) + ")");
  if (!(o.window > 0) || !(o.dt > 0)) throw std::invalid_argument("window and dt must be > 0");
  SepSetup S{o.flow == FlowKind::geodesic ? "separating_geodesic" : "separating_horocycle",
             o.flow, nullptr, o.delta, o.direction, o.window, o.dt, o.n_pairs, o.seed, 0, 0, Json::object()};
  S.params = {{"flow", to_string(o.flow)},
              {"delta", o.delta},
              {"direction", to_string(o.direction)},
              {"window", o.window},
              {"dt", o.dt},
              {"pairs", o.n_pairs},
              {"eps_star", ctx.space->trace_gap()},
              {"delta_cap", cap},
              {"calibration_seed", ctx.calibration_seed}};
  return run_separating(ctx, S);
}

double rho_for_epsilon(const TimeChange& tc, double eps, std::uint64_t seed, int points) {
  if (!(eps > 0)) throw std::invalid_argument("eps must be > 0");
  if (tc.is_constant()) return eps * tc.constant_speed() / 2;
  // |alpha(t,x)| is increasing in |t|; find where it reaches eps along each sampled orbit.
  Rng rng(seed);
  double raw = std::numeric_limits<double>::infinity();
  const double h = tc.step_size() * tc.rho_max();
  for (int i = 0; i < points; ++i) {
    const GroupElement x = random_element(rng, 2.0);
    for (double dir : {1.0, -1.0}) {
      double s = 0, a = 0;
      auto f = [&](double u) {
        return 1 / tc.speed(GroupElement(Matrix2(x.mat() * flow_matrix(tc.base(), dir * u))));
      };
      double fs = f(0);
      while (a < eps) {
        const double fm = f(s + h / 2), fe = f(s + h);
        const double da = h / 6 * (fs + 4 * fm + fe);
        if (a + da >= eps) {
          s += h * (eps - a) / da;
          a = eps;
          break;
        }
        a += da;
        s += h;
        fs = fe;
      }
      raw = std::min(raw, s);
    }
  }
  return raw / 2;
}

TestVerdict kinematic_test_time_change(const LabContext& ctx, const TimeChange& tc, const KinematicOptions& o) {
  if (!(o.eps > 0) || !(o.window > 0) || !(o.dt > 0)) throw std::invalid_argument("kinematic test needs eps, window, dt > 0");
  if (tc.base() == FlowKind::geodesic) throw std::invalid_argument("kinematic test runs on horocycle time changes");
  const double rho = rho_for_epsilon(tc, o.eps, o.seed ^ 0xA1FAULL);
  const double cap = separating_delta_cap(ctx) * (1 - 1e-3);
  const double delta = std::min(ctx.calibration->distance_to_gap(rho), cap);
  SepSetup S{"kinematic_" + tc.name(), tc.base(), &tc, delta, o.direction, o.window, o.dt, o.n_pairs, o.seed,
             rho, o.eps, Json::object()};
  S.params = {{"time_change", tc.name()},
              {"flow", to_string(tc.base())},
              {"eps", o.eps},
              {"rho", rho},
              {"delta", delta},
              {"direction", to_string(o.direction)},
              {"window", o.window},
              {"dt", o.dt},
              {"pairs", o.n_pairs},
              {"speed_bounds", {tc.rho_min(), tc.rho_max()}},
              {"step", tc.step_size()},
              {"eps_star", ctx.space->trace_gap()},
              {"calibration_seed", ctx.calibration_seed}};
  return run_separating(ctx, S);
}

// ---- KH --------------------------------------------------------------------------------------

TestVerdict kh_test_horocycle(const LabContext& ctx, const KhOptions& o) {
  const double cap = separating_delta_cap(ctx);
  if (!(o.delta > 0) || !(2 * o.delta < cap))
    throw std::invalid_argument("kh test needs 0 < 2 delta < " + std::to_string(cap));
  Stopwatch sw;
  const std::size_t mark = ctx.space->ball_mark();
  TestVerdict v;
  v.test = "kh_horocycle";
  v.seed = o.seed;
  v.params = {{"delta", o.delta},
              {"window", o.window},
              {"dt", o.dt},
              {"triples", o.n_triples},
              {"eps_star", ctx.space->trace_gap()},
              {"calibration_seed", ctx.calibration_seed}};
  Rng rng(o.seed);
  ReparamFamily fam;
  fam.window = o.window + 1;
  fam.wiggle = 0.3 * o.delta;
  const auto fwd = half_grid(o.window, o.dt, Direction::positive);
  const auto bwd = half_grid(o.window, o.dt, Direction::negative);
  const FlowKind F = FlowKind::stable_horocycle;

  int qualifying = 0, same = 0, inconclusive = 0, failures = 0;
  double M_all = 0, combined_all = 0;
  for (int p = 0; p < o.n_triples; ++p) {
    const GroupElement x = random_element(rng, 2.0);
    GroupElement K;
    std::string pert;
    double u;
    if (p % 4 < 2) {
      u = uniform_signed(rng, 0.05, 0.4) * o.delta;
      K = horo(u);
      pert = "b";
    } else {
      u = uniform_signed(rng, 0.25, 0.9) * o.delta;
      K = p % 4 == 2 ? geo(u) : unhoro(u);
      pert = p % 4 == 2 ? "a" : "c";
    }
    const GroupElement y = x * K;
    // s: identity, near-identity wiggle or a constant slope
    auto fam_members = reparametrization_family(rng, 3, fam);
    const Reparametrization& s = fam_members[static_cast<std::size_t>(p % 3)];

    bool qual = true;
    std::string broke;
    double broke_t = 0, M = 0, combined = 0;
    for (const auto* grid : {&fwd, &bwd}) {
      OrbitTracker Xt(*ctx.space, F, x.mat());
      for (double t : *grid) {
        // all three points from the reduced rep of theta_t x
        const double st = s(t);
        const Mat2 xt = Xt.at(t);
        const Mat2 xs = xt * flow_matrix(F, st - t);
        const Mat2 ys = xt * (flow_matrix(F, -t) * K.mat() * flow_matrix(F, st));
        if (!ctx.space->closer_than(xt, xs, o.delta).close) {
          qual = false, broke = "d(theta_t x, theta_s(t) x)", broke_t = t;
          break;
        }
        if (!ctx.space->closer_than(xt, ys, o.delta).close) {
          qual = false, broke = "d(theta_t x, theta_s(t) y)", broke_t = t;
          break;
        }
        M = std::max(M, std::abs(st - t));
        const auto cb = ctx.space->closer_than(xs, ys, 2 * o.delta);
        combined = std::max(combined, cb.value);
        if (!cb.close) {
          qual = false, broke = "combined bound 2 delta", broke_t = t;
          ++failures;
          break;
        }
      }
      if (!qual) break;
    }
    Json w = {{"perturbation", pert},
              {"u", u},
              {"s", s.to_json()},
              {"x", element_json(x)},
              {"y", element_json(y)}};
    if (!qual) {
      w["qualifying"] = false;
      w["broken_condition"] = broke;
      w["at_t"] = broke_t;
      v.witnesses.push_back(std::move(w));
      continue;
    }
    ++qualifying;
    M_all = std::max(M_all, M);
    combined_all = std::max(combined_all, combined);
    w["qualifying"] = true;
    w["M"] = M;
    w["max_combined_distance"] = combined;
    const Recovery r = recover(ctx, F, x, y);
    w["recovery"] = recovery_json(r);
    if (r.recovered && r.coset == CosetVerdict::same && std::abs(r.K.mat().a21) < kRecoverTol &&
        std::abs(r.K.mat().a11 + r.K.mat().a22) < 2 + ctx.space->trace_gap()) {
      ++same;
    } else if (r.recovered) {
      ++failures;
      w["error"] = "recovered shift not confirmed by same_coset";
    } else {
      ++inconclusive;
      w["separation_margin"] = 2 * o.delta - combined;
    }
    v.witnesses.push_back(std::move(w));
  }
  v.summary = {{"triples", o.n_triples},
               {"qualifying", qualifying},
               {"same_orbit", same},
               {"inconclusive", inconclusive},
               {"failures", failures},
               {"M", M_all},
               {"max_combined_distance", combined_all},
               {"two_delta", 2 * o.delta}};
  v.outcome = failures ? Outcome::fail : (inconclusive ? Outcome::inconclusive : Outcome::pass);
  v.notes = "conditions sampled on a grid of step dt over [-window, window]; M = max |s(t) - t| on qualifying triples";
  finish(v, ctx, sw, mark);
  return v;
}

// ---- counterexamples -------------------------------------------------------------------------

HorocycleBwCounterexample counterexample_horocycle_not_bw(const LabContext& ctx, double delta) {
  if (!(delta > 0)) throw std::invalid_argument("delta must be > 0");
  Stopwatch sw;
  const std::size_t mark = ctx.space->ball_mark();
  HorocycleBwCounterexample c;
  c.delta = delta;
  c.rho = ctx.calibration->gap_to_distance(delta);
  c.a = 1 + std::min(0.01, c.rho / 4);
  const double a = c.a;
  const Mat2 K{a, 0, 0, 1 / a};
  c.x_rep = GroupElement();
  c.y_rep = GroupElement(Matrix2(Mat2{1 / a, 0, 0, a}));  // h with h^-1 g = K for g = e
  c.s = Reparametrization::linear(1 / (a * a));
  c.gap = frobenius_gap(K);
  c.distance_to_identity = ctx.metric->dist_to_identity(GroupElement(Matrix2(K)));
  c.trace = a + 1 / a;
  c.eps_star = ctx.space->trace_gap();

  auto fro = [](const Mat2& m) { return std::sqrt(m.frobenius2()); };
  Json table = Json::array();
  for (double mag : {1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1000.0})
    for (double t : {mag, -mag}) {
      const double st = c.s(t);
      const double r_formula = fro(conj_by_horocycle(K, st, t) - K);
      const double r_product = fro(stable_matrix(-t) * K * stable_matrix(st) - K);
      c.max_residual_formula = std::max(c.max_residual_formula, r_formula);
      c.max_residual_product = std::max(c.max_residual_product, r_product);
      c.residual_table.emplace_back(t, r_product);
      table.push_back({{"t", t}, {"s", st}, {"residual_formula", r_formula}, {"residual_product", r_product}});
    }
  // measured closeness of theta_{s(t)} x and theta_t y in X
  Json measured = Json::array();
  double max_measured = 0;
  for (double t : {0.0, 1.0, -1.0, 10.0, -10.0, 100.0, -100.0}) {
    const GroupElement xs(Matrix2(c.x_rep.mat() * stable_matrix(c.s(t))));
    const GroupElement yt(Matrix2(c.y_rep.mat() * stable_matrix(t)));
    const double d = ctx.space->quotient_distance({xs}, {yt}).value;
    max_measured = std::max(max_measured, d);
    measured.push_back({{"t", t}, {"quotient_distance", d}});
  }
  c.holds = c.max_residual_formula < 1e-12 && c.max_residual_product < 1e-12 && c.distance_to_identity < delta &&
            c.gap < c.rho && c.trace < 2 + c.eps_star && a != 1 && max_measured < delta;

  TestVerdict& v = c.verdict;
  v.test = "cex_horocycle_bw";
  v.seed = ctx.calibration_seed;
  v.params = {{"delta", delta}, {"rho", c.rho}, {"calibration_seed", ctx.calibration_seed}};
  v.summary = {{"a", a},
               {"s_slope", 1 / (a * a)},
               {"distance_to_identity", c.distance_to_identity},
               {"frobenius_gap", c.gap},
               {"trace", c.trace},
               {"two_plus_eps_star", 2 + c.eps_star},
               {"max_residual_formula", c.max_residual_formula},
               {"max_residual_product", c.max_residual_product},
               {"max_measured_distance", max_measured},
               {"holds", c.holds}};
  v.witnesses.push_back({{"x", element_json(c.x_rep)},
                         {"y", element_json(c.y_rep)},
                         {"K", matrix_json(K)},
                         {"s", c.s.to_json()}});
  v.witnesses.push_back({{"residual_table", table}});
  v.witnesses.push_back({{"measured", measured}});
  v.witnesses.push_back(
      {{"non_orbit_certificate",
        "a gamma with gamma h = g b_tau has tr(gamma) = tr(b_tau h^-1 g) = tr(b_tau K) = a + 1/a < 2 + eps_star, "
        "so gamma = e and K = b_-tau, impossible for diagonal K != e"},
       {"trace", c.trace},
       {"bound", 2 + c.eps_star}});
  v.outcome = c.holds ? Outcome::pass : Outcome::fail;
  v.notes = "B_{-t} K B_{s(t)} = K exactly for s(t) = t / a^2, so the reparametrized orbits stay at distance d_G(K, e)";
  finish(v, ctx, sw, mark);
  return c;
}

GeodesicSepCounterexample counterexample_geodesic_not_separating(const LabContext& ctx, double delta,
                                                                 Direction direction, double cert_radius) {
  if (!(delta > 0)) throw std::invalid_argument("delta must be > 0");
  Stopwatch sw;
  const std::size_t mark = ctx.space->ball_mark();
  GeodesicSepCounterexample c;
  c.delta = delta;
  c.direction = direction;
  TestVerdict& v = c.verdict;
  v.test = "cex_geodesic_sep";
  v.seed = ctx.calibration_seed;
  v.params = {{"delta", delta},
              {"direction", to_string(direction)},
              {"cert_radius", cert_radius},
              {"calibration_seed", ctx.calibration_seed}};
  Json attempts = Json::array();
  for (double frac : {0.5, 1.0 / 3, 0.2, 0.7}) {
    const double s = frac * delta;
    const GroupElement x;
    const GroupElement y = direction == Direction::positive ? horo(s) : unhoro(s);
    Json decay = Json::array();
    c.decay_table.clear();
    bool ok = true, mono = true;
    double prev = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= 10; ++k) {
      const double t = direction == Direction::positive ? k : -k;
      const GroupElement xt = geo(t);
      const GroupElement yt(Matrix2(y.mat() * geodesic_matrix(t)));
      const double d = ctx.space->quotient_distance({xt}, {yt}).value;
      const double bound = s * std::exp(-static_cast<double>(k));
      ok = ok && d <= bound + 1e-6 && d < delta;
      mono = mono && d <= prev + 1e-9;
      prev = d;
      c.decay_table.emplace_back(t, d);
      decay.push_back({{"t", t}, {"quotient_distance", d}, {"bound", bound}});
    }
    const auto cert = certify_off_geodesic_orbit(ctx, x, y, cert_radius, 64);
    attempts.push_back({{"s", s}, {"certified", cert.certified}, {"triangular", cert.triangular}});
    c.s = s;
    c.x_rep = x;
    c.y_rep = y;
    c.decay_ok = ok;
    c.monotone = mono;
    c.certified_radius = cert.radius;
    c.certified_tau = cert.tau_bound;
    c.triangular_count = cert.triangular;
    c.transcript = cert.transcript;
    c.non_orbit_certified = cert.certified;
    v.witnesses = Json::array();
    v.witnesses.push_back({{"x", element_json(x)}, {"y", element_json(y)}, {"s", s}});
    v.witnesses.push_back({{"decay_table", decay}});
    v.witnesses.push_back({{"non_orbit_transcript", cert.transcript},
                           {"ball_radius", cert.radius},
                           {"ball_size", ctx.group->ball(cert.radius)->size()},
                           {"tau_certified_up_to", cert.tau_bound},
                           {"triangular_candidates", cert.triangular}});
    if (cert.certified) break;
  }
  v.witnesses.push_back(
      {{"trace_argument",
        "y = phi_tau(x) would need gamma = b_s a_-tau (or c_s a_-tau) in the group; such gamma is triangular "
        "and none of the enumerated elements is, up to the certified radius"},
       {"eps_star", ctx.space->trace_gap()}});
  v.summary = {{"s", c.s},
               {"decay_ok", c.decay_ok},
               {"monotone", c.monotone},
               {"non_orbit_certified", c.non_orbit_certified},
               {"certified_radius", c.certified_radius},
               {"tau_certified_up_to", c.certified_tau},
               {"triangular_candidates", c.triangular_count},
               {"attempts", attempts}};
  v.outcome = (c.decay_ok && c.monotone && c.non_orbit_certified) ? Outcome::pass : Outcome::inconclusive;
  v.notes = "a_{-t} b_s a_t = b_{s e^{-t}}: the orbits approach each other while y stays off the orbit of x";
  finish(v, ctx, sw, mark);
  return c;
}

TestVerdict paired_verdicts(const LabContext& ctx, std::uint64_t seed, int n_pairs) {
  Stopwatch sw;
  const std::size_t mark = ctx.space->ball_mark();
  TestVerdict v;
  v.test = "paired_verdicts";
  v.seed = seed;
  BwOptions bw;
  bw.eps = 0.5;
  bw.window = 10;
  bw.n_pairs = n_pairs;
  bw.n_reparams = 4;
  bw.seed = seed;
  const TestVerdict bwv = bw_test_geodesic(ctx, bw);
  SeparatingOptions sep;
  sep.flow = FlowKind::geodesic;
  sep.delta = bw_delta_for_epsilon(bw.eps, ctx);
  sep.window = 10;
  sep.n_pairs = n_pairs;
  sep.seed = seed;
  const TestVerdict gsep = separating_test(ctx, sep);
  sep.flow = FlowKind::stable_horocycle;
  sep.delta = 0.1;
  const TestVerdict hsep = separating_test(ctx, sep);
  const auto cex = counterexample_horocycle_not_bw(ctx, 0.1);

  const bool geodesic_pair = bwv.outcome == Outcome::pass && gsep.outcome == Outcome::fail;
  const bool horocycle_pair = hsep.outcome == Outcome::pass && cex.holds;
  v.params = {{"pairs", n_pairs}, {"bw_eps", bw.eps}, {"geodesic_delta", sep.delta}, {"horocycle_delta", 0.1}};
  v.summary = {{"geodesic", {{"bw", to_string(bwv.outcome)}, {"separating", to_string(gsep.outcome)},
                             {"asymmetry_observed", geodesic_pair}}},
               {"horocycle", {{"separating", to_string(hsep.outcome)}, {"bw_counterexample_holds", cex.holds},
                              {"asymmetry_observed", horocycle_pair}}}};
  for (const auto& w : gsep.witnesses)
    if (w.contains("non_orbit")) {
      v.witnesses.push_back({{"geodesic_separating_witness", w}});
      break;
    }
  v.witnesses.push_back({{"horocycle_bw_witness", cex.verdict.witnesses.front()}});
  v.outcome = geodesic_pair && horocycle_pair ? Outcome::pass : Outcome::fail;
  v.notes = "BW and separating expansiveness are independent: each flow satisfies one and violates the other";
  finish(v, ctx, sw, mark);
  return v;
}

}  // namespace horolab
