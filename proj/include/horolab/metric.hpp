#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "horolab/sl2.hpp"

namespace horolab {

/// Tangent vector at the identity, in the orthonormal basis
///   E1 = diag(1,-1)/sqrt2,  E2 = [[0,1],[1,0]]/sqrt2,  E3 = [[0,1],[-1,0]]/sqrt2
/// of sl(2,R) with inner product <X,Y> = tr(X^T Y).
struct AlgebraVector {
  double w1 = 0, w2 = 0, w3 = 0;

  double norm2() const { return w1 * w1 + w2 * w2 + w3 * w3; }
  double norm() const;
  double operator[](int i) const { return i == 0 ? w1 : (i == 1 ? w2 : w3); }
  double& operator[](int i) { return i == 0 ? w1 : (i == 1 ? w2 : w3); }

  Mat2 to_matrix() const;
  /// Coordinates of the traceless part of m.
  static AlgebraVector from_matrix(const Mat2& m);

  friend AlgebraVector operator+(const AlgebraVector& a, const AlgebraVector& b) {
    return {a.w1 + b.w1, a.w2 + b.w2, a.w3 + b.w3};
  }
  friend AlgebraVector operator-(const AlgebraVector& a, const AlgebraVector& b) {
    return {a.w1 - b.w1, a.w2 - b.w2, a.w3 - b.w3};
  }
  friend AlgebraVector operator*(double s, const AlgebraVector& a) { return {s * a.w1, s * a.w2, s * a.w3}; }
};

const std::array<Mat2, 3>& algebra_basis();
/// <X,Y> = tr(X^T Y)
double inner(const Mat2& x, const Mat2& y);

/// c[i][j][k] = c^k_{ij} with [Ei,Ej] = sum_k c^k_{ij} Ek.
using StructureConstants = std::array<std::array<std::array<double, 3>, 3>, 3>;
StructureConstants structure_constants();

AlgebraVector bracket(const AlgebraVector& x, const AlgebraVector& y);
/// Metric adjoint of ad_X: <ad*_X Y, Z> = <Y, [X,Z]>, from the structure constants.
AlgebraVector ad_star(const AlgebraVector& x, const AlgebraVector& y);

/// Matrix exponential of a traceless 2x2 matrix (closed form).
Mat2 exp_traceless(const Mat2& x);
GroupElement exp_map(const AlgebraVector& v);
/// Principal matrix logarithm of the canonical (trace >= 0) representative.
AlgebraVector log_map(const GroupElement& g);
AlgebraVector log_map(const Mat2& unimodular_trace_nonneg);

class SolverDivergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonConvergence : public std::runtime_error {
 public:
  NonConvergence(const std::string& what, double best_upper_bound)
      : std::runtime_error(what), best_upper_bound_(best_upper_bound) {}
  double best_upper_bound() const { return best_upper_bound_; }

 private:
  double best_upper_bound_;
};

struct GeodesicArc {
  GroupElement start;
  AlgebraVector initial_body_velocity;
  double duration = 0;
  std::vector<std::pair<double, GroupElement>> sampled_points;
  std::vector<AlgebraVector> body_velocity;  // one per sampled point

  double length() const { return duration * initial_body_velocity.norm(); }
  const GroupElement& endpoint() const { return sampled_points.back().second; }
};

/// Fixed-step RK4 integration of  g' = g W,  W' = sign * ad*_W W  (body form of the
/// geodesic equation of the left-invariant metric). sign = +1 is the geodesic equation;
/// -1 exists only so the convention can be tested against its opposite.
GeodesicArc geodesic_shoot(const GroupElement& g0, const AlgebraVector& v0, double duration, int steps,
                           int sign = +1);

/// Closed-form solution of the same equation: with W0 = P + K (symmetric + antisymmetric
/// parts), g(t) = g0 exp(t(P - K)) exp(2tK).
GroupElement geodesic_endpoint(const GroupElement& g0, const AlgebraVector& v0, double duration);
Mat2 geodesic_endpoint_matrix(const AlgebraVector& v0);

/// Halve-the-step convergence study: smallest power-of-two step count (>= min_steps) for
/// which halving the step moves the endpoint by less than `tol`.
int converged_step_count(const AlgebraVector& v0, double duration, double tol = 1e-9, int min_steps = 16);

struct SignConventionCheck {
  bool diagonal_is_geodesic = false;      // ad*_H H = 0 and the shot curve is a(t)
  double first_variation_plus = 0;        // dL/d(eps) of the "+" curve under a bump variation
  double first_variation_minus = 0;       // same for the opposite sign
  bool ok() const;
};

/// Fixes the Euler-Arnold sign empirically: the diagonal subgroup must be a geodesic and
/// the chosen curve must be a critical point of length (first variation ~ 0) while the
/// opposite convention is not.
SignConventionCheck check_sign_convention();

struct MetricOptions {
  int ode_steps = 256;
  int shoot_restarts = 8;
  int oracle_waypoints = 4;
  double xcheck_tol = 1e-9;
  double newton_tol = 1e-11;
  std::uint64_t seed = 1;
};

struct DistanceReport {
  double value = 0;           // length of the best geodesic found by shooting
  double oracle_bound = 0;    // path-energy upper bound
  int converged_starts = 0;
  AlgebraVector velocity;     // initial body velocity of the returned geodesic (duration 1)
};

/// The left-invariant Riemannian distance d_G on PSL(2,R) generated by <X,Y> = tr(X^T Y).
class LeftInvariantMetric {
 public:
  explicit LeftInvariantMetric(MetricOptions options = {});

  const MetricOptions& options() const { return options_; }

  /// d_G(x, y) = dist_to_identity(x^-1 y).
  double distance(const GroupElement& x, const GroupElement& y) const;
  double dist_to_identity(const GroupElement& k) const { return dist_to_identity_report(k).value; }
  DistanceReport dist_to_identity_report(const GroupElement& k) const;

  /// Length of the best piecewise one-parameter curve e -> target through `waypoints`
  /// points (endpoints included), optimized by coordinate descent. Always an upper bound.
  double path_energy_upper_bound(const GroupElement& target, int waypoints) const;

 private:
  MetricOptions options_;
};

}  // namespace horolab
