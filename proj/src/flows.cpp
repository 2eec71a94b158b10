#include "horolab/flows.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace horolab {

std::string to_string(FlowKind k) {
  switch (k) {
    case FlowKind::geodesic: return "geodesic";
    case FlowKind::stable_horocycle: return "stable_horocycle";
    case FlowKind::unstable_horocycle: return "unstable_horocycle";
  }
  return "?";
}

FlowKind parse_flow_kind(const std::string& s) {
  if (s == "geodesic") return FlowKind::geodesic;
  if (s == "stable_horocycle" || s == "horocycle" || s == "stable") return FlowKind::stable_horocycle;
  if (s == "unstable_horocycle" || s == "unstable") return FlowKind::unstable_horocycle;
  throw std::invalid_argument("unknown flow kind '" + s + "'");
}

OneParam one_param_of(FlowKind k) {
  switch (k) {
    case FlowKind::geodesic: return OneParam::geodesic;
    case FlowKind::stable_horocycle: return OneParam::stable;
    case FlowKind::unstable_horocycle: return OneParam::unstable;
  }
  return OneParam::geodesic;
}

Mat2 flow_matrix(FlowKind k, double t) {
  switch (k) {
    case FlowKind::geodesic: return geodesic_matrix(t);
    case FlowKind::stable_horocycle: return stable_matrix(t);
    case FlowKind::unstable_horocycle: return unstable_matrix(t);
  }
  return Mat2::identity();
}

namespace {

GroupElement on_orbit(FlowKind k, const GroupElement& x, double t) {
  return GroupElement(Matrix2(x.mat() * flow_matrix(k, t)));
}

}  // namespace

QuotientPoint step(FlowKind kind, const QuotientPoint& x, double t) { return {on_orbit(kind, x.rep, t)}; }

GroupElement random_element(Rng& rng, double scale) {
  const double a = rng.normal(), b = rng.normal(), c = rng.normal();
  return exp_map({scale * a, scale * b, scale * c});
}

// ---- time changes ----------------------------------------------------------------------------

TimeChange::TimeChange(FlowKind base, SpeedField speed, double rho_min, double rho_max, std::string name,
                       std::uint64_t seed, int checks)
    : base_(base), speed_(std::move(speed)), rho_min_(rho_min), rho_max_(rho_max), name_(std::move(name)) {
  if (!(rho_min > 0) || !(rho_max >= rho_min)) throw std::invalid_argument("time change needs 0 < rho_min <= rho_max");
  if (!speed_) throw std::invalid_argument("time change needs a speed field");
  h_ = 1e-3 * rho_min / rho_max;
  Rng rng(seed);
  for (int i = 0; i < checks; ++i) {
    const GroupElement g = random_element(rng, 2.0);
    const double v = speed_(g);
    if (!(v >= rho_min * (1 - 1e-12) && v <= rho_max * (1 + 1e-12)))
      throw std::invalid_argument("time change '" + name_ + "': speed " + std::to_string(v) + " outside [" +
                                  std::to_string(rho_min) + ", " + std::to_string(rho_max) + "]");
  }
}

void TimeChange::set_step_size(double h) {
  if (!(h > 0)) throw std::invalid_argument("time change step must be > 0");
  h_ = h;
}

TimeChange TimeChange::identity(FlowKind base) { return constant(base, 1.0); }

TimeChange TimeChange::constant(FlowKind base, double c) {
  if (!(c > 0)) throw std::invalid_argument("constant speed must be > 0");
  TimeChange tc(base, [c](const GroupElement&) { return c; }, c, c, c == 1.0 ? "identity" : "constant", 1, 1);
  tc.constant_ = c;
  return tc;
}

TimeChange TimeChange::bump(FlowKind base, std::shared_ptr<const QuotientSpace> space, double amplitude,
                            double radius) {
  if (!(amplitude >= 0) || !(radius > 0)) throw std::invalid_argument("bump needs amplitude >= 0, radius > 0");
  if (2 * radius >= space->group().max_letter_displacement() * 0.999)
    throw std::invalid_argument("bump radius too large for disjoint supports");
  auto field = [space, amplitude, radius](const GroupElement& g) {
    const Mat2 r = space->reduce_matrix(g.mat());
    const double r0 = displacement(r);
    const auto ball = space->group().ball(r0 + radius);
    const Mat2 ri{r.a22, -r.a12, -r.a21, r.a11};
    double sum = 0;
    for (std::size_t idx : ball->by_displacement()) {
      const auto& e = ball->entries()[idx];
      if (e.displacement > r0 + radius) break;
      const double u = displacement(ri * e.element.mat()) / radius;
      if (u < 1) sum += std::exp(1 - 1 / (1 - u * u));
    }
    return 1 + amplitude * sum;
  };
  return TimeChange(base, field, 1.0, 1.0 + amplitude, "bump", 1, 1000);
}

TimeChangeIntegrator::TimeChangeIntegrator(const TimeChange& tc, const QuotientPoint& x) : tc_(tc), x_(x.rep) {}

double TimeChangeIntegrator::rhs(double beta) const {
  return tc_.speed(GroupElement(Matrix2(x_.mat() * flow_matrix(tc_.base(), beta))));
}

double TimeChangeIntegrator::advance_to(double t) {
  if (tc_.is_constant()) {
    t_ = t;
    beta_ = tc_.constant_speed() * t;
    return beta_;
  }
  const double h0 = tc_.step_size();
  while (t_ != t) {
    const double dir = t > t_ ? 1.0 : -1.0;
    double h = dir * h0;
    if (std::abs(t - t_) <= h0 * (1 + 1e-9)) h = t - t_;
    const double k1 = rhs(beta_);
    const double k2 = rhs(beta_ + h / 2 * k1);
    const double k3 = rhs(beta_ + h / 2 * k2);
    const double k4 = rhs(beta_ + h * k3);
    beta_ += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    t_ = (std::abs(t - t_) <= h0 * (1 + 1e-9)) ? t : t_ + h;
  }
  return beta_;
}

TimeChangeStep time_change_step(const TimeChange& tc, const QuotientPoint& x, double t) {
  TimeChangeIntegrator it(tc, x);
  const double beta = it.advance_to(t);
  return {step(tc.base(), x, beta), beta};
}

double time_change_alpha(const TimeChange& tc, const QuotientPoint& x, double s) {
  if (tc.is_constant()) return s / tc.constant_speed();
  // Composite Simpson on 1/speed along the base orbit.
  const double h0 = tc.step_size();
  const int n = std::max(2, 2 * static_cast<int>(std::ceil(std::abs(s) / (2 * h0))));
  const double h = s / n;
  auto f = [&](double u) { return 1 / tc.speed(on_orbit(tc.base(), x.rep, u)); };
  double acc = f(0) + f(s);
  for (int i = 1; i < n; ++i) acc += (i % 2 ? 4 : 2) * f(i * h);
  return acc * h / 3;
}

// ---- trajectories ----------------------------------------------------------------------------

namespace {
void check_range(double t0, double t1, int n) {
  if (!(t0 < t1)) throw std::invalid_argument("trajectory needs t0 < t1");
  if (n < 2) throw std::invalid_argument("trajectory needs n >= 2");
}
double grid_time(double t0, double t1, int n, int k) { return k == n - 1 ? t1 : t0 + (t1 - t0) * k / (n - 1); }
}  // namespace

Trajectory sample_trajectory(FlowKind kind, const QuotientPoint& x, double t0, double t1, int n) {
  check_range(t0, t1, n);
  Trajectory tr;
  tr.kind = to_string(kind);
  for (int k = 0; k < n; ++k) {
    const double t = grid_time(t0, t1, n, k);
    tr.times.push_back(t);
    tr.points.push_back(step(kind, x, t));
  }
  return tr;
}

Trajectory sample_trajectory(const TimeChange& tc, const QuotientPoint& x, double t0, double t1, int n) {
  check_range(t0, t1, n);
  Trajectory tr;
  tr.kind = "time_change:" + tc.name() + ":" + to_string(tc.base());
  TimeChangeIntegrator it(tc, x);
  for (int k = 0; k < n; ++k) {
    const double t = grid_time(t0, t1, n, k);
    tr.times.push_back(t);
    tr.points.push_back(step(tc.base(), x, it.advance_to(t)));
  }
  return tr;
}

void write_csv(std::ostream& os, const Trajectory& tr) {
  const auto old = os.precision(17);
  os << "t,a11,a12,a21,a22\n";
  for (std::size_t k = 0; k < tr.times.size(); ++k) {
    const Mat2& m = tr.points[k].rep.mat();
    os << tr.times[k] << ',' << m.a11 << ',' << m.a12 << ',' << m.a21 << ',' << m.a22 << '\n';
  }
  os.precision(old);
}

// ---- periodic points -------------------------------------------------------------------------

PeriodicCertificate periodic_certificate(const QuotientSpace& space, FlowKind kind, std::uint64_t seed,
                                         int conjugation_samples, int points, int max_period) {
  if (kind == FlowKind::geodesic) throw std::invalid_argument("periodic_certificate is for horocycle flows");
  PeriodicCertificate c;
  c.kind = kind;
  c.eps_star = space.trace_gap();
  Rng rng(seed);

  c.flow_trace = 2;
  for (int T = 1; T <= max_period; ++T) c.flow_trace = std::max(c.flow_trace, flow_matrix(kind, T).tr());

  const auto ball = space.group().ball(6.0);
  for (int i = 0; i < conjugation_samples; ++i) {
    const auto& e = ball->entries()[1 + rng.next() % (ball->size() - 1)];
    const GroupElement g = random_element(rng, 1.5);
    const double t1 = (inverse(g) * e.element * g).trace();
    const double t0 = e.element.trace();
    c.conjugation_max_error = std::max(c.conjugation_max_error, std::abs(t1 - t0) / t0);
  }
  c.conjugation_samples = conjugation_samples;

  c.min_return_distance = std::numeric_limits<double>::infinity();
  for (int i = 0; i < points; ++i) {
    const QuotientPoint x{random_element(rng, 2.0)};
    for (int T = 1; T <= max_period; ++T) {
      const double d = space.quotient_distance(step(kind, x, T), x).value;
      c.min_return_distance = std::min(c.min_return_distance, d);
      ++c.return_samples;
    }
  }
  c.holds = c.eps_star > 0 && c.flow_trace == 2 && c.conjugation_max_error < 1e-9 && c.min_return_distance > 0.01;
  c.argument =
      "if x = Gamma g satisfies flow_T(x) = x then gamma g = g u_T for some gamma, so "
      "tr(gamma) = tr(g u_T g^-1) = tr(u_T) = 2 < 2 + eps_star; every gamma != e has tr >= 2 + eps_star, "
      "hence gamma = e, u_T = e and T = 0";
  return c;
}

}  // namespace horolab
