#include "horolab/metric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>
#include <sstream>

#include "horolab/random.hpp"

namespace horolab {

namespace {

constexpr double kSqrt2 = std::numbers::sqrt2;

Mat2 inv(const Mat2& m) { return {m.a22, -m.a12, -m.a21, m.a11}; }

Mat2 sign_canonical(const Mat2& m) { return m.tr() >= 0 ? m : -m; }

Mat2 euler_arnold_rhs(const Mat2& w) { return w.transpose() * w - w * w.transpose(); }

double norm3(const std::array<double, 3>& r) { return std::sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2]); }

bool solve3(std::array<std::array<double, 3>, 3> a, std::array<double, 3> b, std::array<double, 3>& x) {
  for (int c = 0; c < 3; ++c) {
    int p = c;
    for (int r = c + 1; r < 3; ++r)
      if (std::abs(a[r][c]) > std::abs(a[p][c])) p = r;
    if (std::abs(a[p][c]) < 1e-300) return false;
    std::swap(a[p], a[c]);
    std::swap(b[p], b[c]);
    for (int r = c + 1; r < 3; ++r) {
      const double f = a[r][c] / a[c][c];
      for (int k = c; k < 3; ++k) a[r][k] -= f * a[c][k];
      b[r] -= f * b[c];
    }
  }
  for (int c = 2; c >= 0; --c) {
    double s = b[c];
    for (int k = c + 1; k < 3; ++k) s -= a[c][k] * x[k];
    x[c] = s / a[c][c];
  }
  return true;
}

// Mismatch between the closed-form endpoint of v and the target, as a log in the algebra.
std::array<double, 3> shoot_residual(const AlgebraVector& v, const Mat2& target) {
  const Mat2 d = sign_canonical(inv(geodesic_endpoint_matrix(v)) * target);
  const AlgebraVector r = log_map(d);
  return {r.w1, r.w2, r.w3};
}

bool newton_shoot(const Mat2& target, AlgebraVector& v, double tol) {
  auto r = shoot_residual(v, target);
  double rn = norm3(r);
  for (int it = 0; it < 80; ++it) {
    if (rn <= tol) return true;
    std::array<std::array<double, 3>, 3> jac{};
    const double h = 1e-6 * std::max(1.0, v.norm());
    for (int j = 0; j < 3; ++j) {
      AlgebraVector vp = v, vm = v;
      vp[j] += h;
      vm[j] -= h;
      const auto rp = shoot_residual(vp, target), rm = shoot_residual(vm, target);
      for (int i = 0; i < 3; ++i) jac[i][j] = (rp[i] - rm[i]) / (2 * h);
    }
    std::array<double, 3> dv{};
    if (!solve3(jac, {-r[0], -r[1], -r[2]}, dv)) return false;
    double lambda = 1;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      const AlgebraVector trial{v.w1 + lambda * dv[0], v.w2 + lambda * dv[1], v.w3 + lambda * dv[2]};
      const auto rt = shoot_residual(trial, target);
      const double tn = norm3(rt);
      if (tn < rn) {
        v = trial;
        r = rt;
        rn = tn;
        accepted = true;
        break;
      }
      lambda /= 2;
    }
    if (!accepted) return rn <= 100 * tol;
  }
  return rn <= 100 * tol;
}

struct OptimizedPath {
  double length = 0;
  std::vector<Mat2> points;
};

double segment_length(const Mat2& a, const Mat2& b) { return log_map(sign_canonical(inv(a) * b)).norm(); }

OptimizedPath optimize_path(const Mat2& target, int waypoints) {
  OptimizedPath out;
  const AlgebraVector l = log_map(target);
  const int n = waypoints;
  out.points.resize(n);
  for (int k = 0; k < n; ++k) out.points[k] = exp_traceless((static_cast<double>(k) / (n - 1)) * l.to_matrix());
  out.points.back() = target;
  auto& p = out.points;
  auto total = [&] {
    double s = 0;
    for (int k = 0; k + 1 < n; ++k) s += segment_length(p[k], p[k + 1]);
    return s;
  };
  if (n > 2) {
    double h = 0.1 * l.norm() + 1e-3;
    const auto& basis = algebra_basis();
    for (int sweep = 0; sweep < 400 && h > 1e-7; ++sweep) {
      bool improved = false;
      for (int k = 1; k + 1 < n; ++k) {
        for (int j = 0; j < 3; ++j) {
          for (double sgn : {1.0, -1.0}) {
            const double before = segment_length(p[k - 1], p[k]) + segment_length(p[k], p[k + 1]);
            const Mat2 moved = p[k] * exp_traceless((sgn * h) * basis[j]);
            const double after = segment_length(p[k - 1], moved) + segment_length(moved, p[k + 1]);
            if (after < before - 1e-15) {
              p[k] = moved;
              improved = true;
              break;
            }
          }
        }
      }
      if (!improved) h /= 2;
    }
  }
  out.length = total();
  return out;
}

GeodesicArc integrate(const GroupElement& g0, const AlgebraVector& v0, double duration, int steps, int sign) {
  if (duration < 0) throw std::invalid_argument("geodesic_shoot: duration must be >= 0");
  if (steps < 1) throw std::invalid_argument("geodesic_shoot: steps must be >= 1");
  GeodesicArc arc;
  arc.start = g0;
  arc.initial_body_velocity = v0;
  arc.duration = duration;
  arc.sampled_points.reserve(steps + 1);
  arc.body_velocity.reserve(steps + 1);
  Mat2 g = g0.mat();
  Mat2 w = v0.to_matrix();
  const double h = duration / steps;
  const double s = sign;
  arc.sampled_points.emplace_back(0.0, g0);
  arc.body_velocity.push_back(v0);
  for (int i = 0; i < steps; ++i) {
    const Mat2 kg1 = g * w, kw1 = s * euler_arnold_rhs(w);
    const Mat2 g2 = g + (h / 2) * kg1, w2 = w + (h / 2) * kw1;
    const Mat2 kg2 = g2 * w2, kw2 = s * euler_arnold_rhs(w2);
    const Mat2 g3 = g + (h / 2) * kg2, w3 = w + (h / 2) * kw2;
    const Mat2 kg3 = g3 * w3, kw3 = s * euler_arnold_rhs(w3);
    const Mat2 g4 = g + h * kg3, w4 = w + h * kw3;
    const Mat2 kg4 = g4 * w4, kw4 = s * euler_arnold_rhs(w4);
    g = g + (h / 6) * (kg1 + 2.0 * kg2 + 2.0 * kg3 + kg4);
    w = w + (h / 6) * (kw1 + 2.0 * kw2 + 2.0 * kw3 + kw4);
    const double det = g.det();
    const double scale = std::max(1.0, std::abs(g.a11 * g.a22) + std::abs(g.a12 * g.a21));
    if (!std::isfinite(det) || std::abs(det - 1) / scale > 1e-6) {
      std::ostringstream os;
      os << "geodesic_shoot diverged at step " << i + 1 << ": det = " << det;
      throw SolverDivergence(os.str());
    }
    g = (1 / std::sqrt(det)) * g;
    arc.sampled_points.emplace_back((i + 1) * h, GroupElement(Matrix2(g)));
    arc.body_velocity.push_back(AlgebraVector::from_matrix(w));
  }
  return arc;
}

}  // namespace

double AlgebraVector::norm() const { return std::sqrt(norm2()); }

Mat2 AlgebraVector::to_matrix() const {
  return {w1 / kSqrt2, (w2 + w3) / kSqrt2, (w2 - w3) / kSqrt2, -w1 / kSqrt2};
}

AlgebraVector AlgebraVector::from_matrix(const Mat2& m) {
  return {(m.a11 - m.a22) / kSqrt2, (m.a12 + m.a21) / kSqrt2, (m.a12 - m.a21) / kSqrt2};
}

const std::array<Mat2, 3>& algebra_basis() {
  static const std::array<Mat2, 3> basis{Mat2{1 / kSqrt2, 0, 0, -1 / kSqrt2}, Mat2{0, 1 / kSqrt2, 1 / kSqrt2, 0},
                                         Mat2{0, 1 / kSqrt2, -1 / kSqrt2, 0}};
  return basis;
}

double inner(const Mat2& x, const Mat2& y) { return (x.transpose() * y).tr(); }

StructureConstants structure_constants() {
  StructureConstants c{};
  const auto& e = algebra_basis();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const Mat2 br = e[i] * e[j] - e[j] * e[i];
      for (int k = 0; k < 3; ++k) c[i][j][k] = inner(br, e[k]);
    }
  return c;
}

AlgebraVector bracket(const AlgebraVector& x, const AlgebraVector& y) {
  static const StructureConstants c = structure_constants();
  AlgebraVector r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) r[k] += x[i] * y[j] * c[i][j][k];
  return r;
}

AlgebraVector ad_star(const AlgebraVector& x, const AlgebraVector& y) {
  static const StructureConstants c = structure_constants();
  // <ad*_X Y, E_k> = <Y, [X, E_k]> = sum_{i,j} x_i c^j_{ik} y_j
  AlgebraVector r;
  for (int k = 0; k < 3; ++k)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r[k] += x[i] * c[i][k][j] * y[j];
  return r;
}

Mat2 exp_traceless(const Mat2& x) {
  const double q = x.a11 * x.a11 + x.a12 * x.a21;  // X^2 = q I
  double c, s;
  if (q > 1e-12) {
    const double r = std::sqrt(q);
    c = std::cosh(r);
    s = std::sinh(r) / r;
  } else if (q < -1e-12) {
    const double r = std::sqrt(-q);
    c = std::cos(r);
    s = std::sin(r) / r;
  } else {
    c = 1 + q / 2 + q * q / 24;
    s = 1 + q / 6 + q * q / 120;
  }
  return {c + s * x.a11, s * x.a12, s * x.a21, c + s * x.a22};
}

GroupElement exp_map(const AlgebraVector& v) { return GroupElement(Matrix2(exp_traceless(v.to_matrix()))); }

AlgebraVector log_map(const Mat2& m) {
  const double x = (m.a11 + m.a22 - 2) / 2;  // tr/2 - 1
  double f;
  if (x > 1e-12) {
    const double sh = std::sqrt(x * (2 + x));
    f = std::log1p(x + sh) / sh;
  } else if (x < -1e-12) {
    const double sn = std::sqrt(-x * (2 + x));
    f = 2 * std::asin(std::sqrt(-x / 2)) / sn;
  } else {
    f = 1 - x / 3;
  }
  const double c = (m.a11 + m.a22) / 2;
  return AlgebraVector::from_matrix(f * Mat2{m.a11 - c, m.a12, m.a21, m.a22 - c});
}

AlgebraVector log_map(const GroupElement& g) { return log_map(g.mat()); }

Mat2 geodesic_endpoint_matrix(const AlgebraVector& v0) {
  const Mat2 w = v0.to_matrix();
  const Mat2 sym{w.a11, (w.a12 + w.a21) / 2, (w.a12 + w.a21) / 2, w.a22};
  const Mat2 anti{0, (w.a12 - w.a21) / 2, (w.a21 - w.a12) / 2, 0};
  return exp_traceless(sym - anti) * exp_traceless(2.0 * anti);
}

GroupElement geodesic_endpoint(const GroupElement& g0, const AlgebraVector& v0, double duration) {
  return GroupElement(g0.rep() * Matrix2(geodesic_endpoint_matrix(duration * v0)));
}

GeodesicArc geodesic_shoot(const GroupElement& g0, const AlgebraVector& v0, double duration, int steps, int sign) {
  return integrate(g0, v0, duration, steps, sign >= 0 ? 1 : -1);
}

int converged_step_count(const AlgebraVector& v0, double duration, double tol, int min_steps) {
  int steps = std::max(1, min_steps);
  Mat2 prev = geodesic_shoot(GroupElement::identity(), v0, duration, steps).endpoint().mat();
  for (int iter = 0; iter < 20; ++iter) {
    const Mat2 next = geodesic_shoot(GroupElement::identity(), v0, duration, 2 * steps).endpoint().mat();
    if (max_abs_diff(prev, next) < tol) return steps;
    steps *= 2;
    prev = next;
  }
  throw SolverDivergence("converged_step_count: no convergence");
}

bool SignConventionCheck::ok() const {
  return diagonal_is_geodesic && std::abs(first_variation_plus) < 1e-3 &&
         std::abs(first_variation_minus) > 10 * std::abs(first_variation_plus);
}

SignConventionCheck check_sign_convention() {
  SignConventionCheck out;
  const AlgebraVector h = AlgebraVector::from_matrix(Mat2{0.5, 0, 0, -0.5});
  const double t = 1.3;
  const auto arc = geodesic_shoot(GroupElement::identity(), h, t, 256);
  out.diagonal_is_geodesic =
      ad_star(h, h).norm() < 1e-14 && max_abs_diff(arc.endpoint().mat(), geodesic_matrix(t)) < 1e-10;

  const AlgebraVector v{0.4, -0.3, 0.5};
  constexpr int kSegments = 64, kSub = 8;
  auto first_variation = [&](int sign) {
    const auto curve = geodesic_shoot(GroupElement::identity(), v, 1.0, kSegments * kSub, sign);
    std::vector<Mat2> pts;
    for (int k = 0; k <= kSegments; ++k) pts.push_back(curve.sampled_points[k * kSub].second.mat());
    double worst = 0;
    for (const Mat2& z : algebra_basis()) {
      auto length = [&](double eps) {
        double s = 0;
        Mat2 prev = pts[0];
        for (int k = 1; k <= kSegments; ++k) {
          const double bump = std::sin(std::numbers::pi * k / kSegments);
          const Mat2 cur = pts[k] * exp_traceless((eps * bump) * z);
          s += segment_length(prev, cur);
          prev = cur;
        }
        return s;
      };
      const double eps = 1e-4;
      const double fv = (length(eps) - length(-eps)) / (2 * eps);
      if (std::abs(fv) > std::abs(worst)) worst = fv;
    }
    return worst;
  };
  out.first_variation_plus = first_variation(+1);
  out.first_variation_minus = first_variation(-1);
  return out;
}

LeftInvariantMetric::LeftInvariantMetric(MetricOptions options) : options_(options) {
  static std::once_flag once;
  std::call_once(once, [] {
    const auto check = check_sign_convention();
    if (!check.ok()) throw std::logic_error("Euler-Arnold sign convention check failed");
  });
  if (options_.shoot_restarts < 0) throw std::invalid_argument("shoot_restarts must be >= 0");
  if (options_.oracle_waypoints < 2) throw std::invalid_argument("oracle_waypoints must be >= 2");
}

double LeftInvariantMetric::distance(const GroupElement& x, const GroupElement& y) const {
  return dist_to_identity(mul(inverse(x), y));
}

DistanceReport LeftInvariantMetric::dist_to_identity_report(const GroupElement& k) const {
  const Mat2 target = k.mat();
  DistanceReport rep;
  rep.value = std::numeric_limits<double>::infinity();

  auto try_start = [&](AlgebraVector v) {
    if (newton_shoot(target, v, options_.newton_tol)) {
      ++rep.converged_starts;
      if (v.norm() < rep.value) {
        rep.value = v.norm();
        rep.velocity = v;
      }
    }
  };

  const AlgebraVector guess = log_map(target);
  try_start(guess);
  Rng rng(options_.seed);
  const double r0 = guess.norm();
  for (int i = 0; i < options_.shoot_restarts; ++i) {
    AlgebraVector dir{rng.normal(), rng.normal(), rng.normal()};
    const double radius = std::max(0.05, r0 * (0.5 + 1.5 * rng.uniform()));
    try_start((radius / std::max(dir.norm(), 1e-300)) * dir);
  }

  const OptimizedPath path = optimize_path(target, options_.oracle_waypoints);
  rep.oracle_bound = path.length;
  if (rep.value > rep.oracle_bound + options_.xcheck_tol) {
    // Seed from the oracle's polygon: its first leg points along the short way.
    const AlgebraVector first = log_map(sign_canonical(path.points[1]));
    if (first.norm() > 0) try_start((path.length / first.norm()) * first);
  }
  if (rep.converged_starts == 0) {
    throw NonConvergence("dist_to_identity: no shooting start converged", rep.oracle_bound);
  }
  if (rep.value > rep.oracle_bound + options_.xcheck_tol) {
    std::ostringstream os;
    os.precision(17);
    os << "dist_to_identity: shooting value " << rep.value << " exceeds path-energy bound " << rep.oracle_bound;
    throw NonConvergence(os.str(), rep.oracle_bound);
  }
  return rep;
}

double LeftInvariantMetric::path_energy_upper_bound(const GroupElement& target, int waypoints) const {
  if (waypoints < 2) throw std::invalid_argument("path_energy_upper_bound: waypoints must be >= 2");
  return optimize_path(target.mat(), waypoints).length;
}

}  // namespace horolab
