#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "horolab/fuchsian.hpp"
#include "horolab/random.hpp"

namespace horolab {

enum class FlowKind { geodesic, stable_horocycle, unstable_horocycle };

std::string to_string(FlowKind k);
/// Accepts "geodesic", "stable_horocycle" (or "horocycle", "stable"), "unstable_horocycle" (or "unstable").
FlowKind parse_flow_kind(const std::string& s);
OneParam one_param_of(FlowKind k);

/// Matrix of the one-parameter subgroup behind the flow.
Mat2 flow_matrix(FlowKind k, double t);

/// x.rep * one_param(kind, t); exact group law.
QuotientPoint step(FlowKind kind, const QuotientPoint& x, double t);

/// Speed field on X, evaluated on representatives; must be invariant under left Gamma-translation.
using SpeedField = std::function<double(const GroupElement&)>;

/// Time change psi of a base flow: d/dt beta(t,x) = speed(base_{beta}(x)), psi_t(x) = base_{beta(t,x)}(x).
class TimeChange {
 public:
  /// Checks rho_min <= speed <= rho_max on `checks` random points (std::invalid_argument otherwise).
  TimeChange(FlowKind base, SpeedField speed, double rho_min, double rho_max, std::string name,
             std::uint64_t seed = 1, int checks = 1000);

  static TimeChange identity(FlowKind base);
  static TimeChange constant(FlowKind base, double c);
  /// 1 + amplitude * sum over the orbit Gamma.i of a smooth bump of hyperbolic radius `radius`
  /// around the base point of g. Needs 2*radius below the shortest generator displacement
  /// for the bounds [1, 1 + amplitude] to hold.
  static TimeChange bump(FlowKind base, std::shared_ptr<const QuotientSpace> space, double amplitude = 1.0,
                         double radius = 1.2);

  FlowKind base() const { return base_; }
  const std::string& name() const { return name_; }
  double rho_min() const { return rho_min_; }
  double rho_max() const { return rho_max_; }
  double speed(const GroupElement& g) const { return speed_(g); }
  /// Integration step, 1e-3 * rho_min / rho_max unless overridden.
  double step_size() const { return h_; }
  void set_step_size(double h);
  bool is_constant() const { return constant_ > 0; }
  double constant_speed() const { return constant_; }

 private:
  FlowKind base_;
  SpeedField speed_;
  double rho_min_, rho_max_;
  std::string name_;
  double h_;
  double constant_ = 0;
};

struct TimeChangeStep {
  QuotientPoint point;
  double elapsed_base_time = 0;  // beta(t, x)
};

/// psi_t(x) together with beta(t, x); fixed-step RK4.
TimeChangeStep time_change_step(const TimeChange& tc, const QuotientPoint& x, double t);
/// alpha(s, x): psi-time needed to cover base time s (inverse of beta in t).
double time_change_alpha(const TimeChange& tc, const QuotientPoint& x, double s);

/// Incremental beta along a growing or shrinking time, for sweeping a grid.
class TimeChangeIntegrator {
 public:
  TimeChangeIntegrator(const TimeChange& tc, const QuotientPoint& x);
  /// Advance psi-time to t (either direction) and return beta(t, x).
  double advance_to(double t);
  double time() const { return t_; }
  double beta() const { return beta_; }

 private:
  double rhs(double beta) const;
  const TimeChange& tc_;
  GroupElement x_;
  double t_ = 0, beta_ = 0;
};

struct Trajectory {
  std::string kind;
  std::vector<double> times;
  std::vector<QuotientPoint> points;
};

/// n evenly spaced exact steps on [t0, t1].
Trajectory sample_trajectory(FlowKind kind, const QuotientPoint& x, double t0, double t1, int n);
/// Same on a time change (points psi_t(x)).
Trajectory sample_trajectory(const TimeChange& tc, const QuotientPoint& x, double t0, double t1, int n);
/// Header t,a11,a12,a21,a22 then one row per sample, full precision.
void write_csv(std::ostream& os, const Trajectory& tr);

struct PeriodicCertificate {
  FlowKind kind = FlowKind::stable_horocycle;
  double eps_star = 0;
  double flow_trace = 2;               // trace of every b_T / c_T
  double conjugation_max_error = 0;    // max |tr(g^-1 gamma g) - tr(gamma)| over samples
  int conjugation_samples = 0;
  double min_return_distance = 0;      // min quotient_distance(flow_T x, x)
  int return_samples = 0;
  bool holds = false;
  std::string argument;
};

/// No periodic points: g^-1 gamma g = b_T forces tr(gamma) = 2 < 2 + eps_star, so gamma = e and T = 0.
PeriodicCertificate periodic_certificate(const QuotientSpace& space, FlowKind kind, std::uint64_t seed = 1,
                                         int conjugation_samples = 1000, int points = 100, int max_period = 20);

/// A random representative: exp of a Gaussian algebra vector of the given scale.
GroupElement random_element(Rng& rng, double scale = 2.0);

}  // namespace horolab
