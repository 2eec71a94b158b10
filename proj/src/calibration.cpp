#include "horolab/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "horolab/random.hpp"

namespace horolab {

namespace {

constexpr const char* kMetricName = "left-invariant tr(X^T Y)";

// Scale lambda so that frobenius_gap(exp(lambda X)) = target (bisection; gap grows along rays
// near the identity).
double scale_to_gap(const Mat2& x, double target) {
  double lo = 0, hi = target;
  while (frobenius_gap(exp_traceless(hi * x)) < target && hi < 1e3) hi *= 2;
  for (int i = 0; i < 60; ++i) {
    const double mid = (lo + hi) / 2;
    (frobenius_gap(exp_traceless(mid * x)) < target ? lo : hi) = mid;
  }
  return lo;
}

// Directions X normalized to 2|x11| + |x12| + |x21| = 1, the first-order gap.
Mat2 gap_direction(Rng& rng, int index) {
  static const Mat2 vertices[6] = {{0.5, 0, 0, -0.5}, {-0.5, 0, 0, 0.5}, {0, 1, 0, 0},
                                   {0, -1, 0, 0},     {0, 0, 1, 0},      {0, 0, -1, 0}};
  if (index < 6) return vertices[index];
  double w[3] = {-std::log(1 - rng.uniform()), -std::log(1 - rng.uniform()), -std::log(1 - rng.uniform())};
  const double s = w[0] + w[1] + w[2];
  const double x11 = (rng.coin() ? 0.5 : -0.5) * w[0] / s;
  const double x12 = (rng.coin() ? 1.0 : -1.0) * w[1] / s;
  const double x21 = (rng.coin() ? 1.0 : -1.0) * w[2] / s;
  return {x11, x12, x21, -x11};
}

double running_max_fill(CalibrationTable& t) {
  double m = 0;
  for (auto& row : t.rows) {
    m = std::max(m, row.second);
    row.second = m;
  }
  return m;
}

// Largest input r with kSafety * output(r) < bound; below the grid, linear extrapolation
// through the first row.
double invert(const CalibrationTable& t, double bound) {
  double best = 0;
  for (const auto& [r, out] : t.rows) {
    if (GapCalibration::kSafety * out < bound) best = r;
    else break;
  }
  if (best > 0) return best;
  const auto& [r0, out0] = t.rows.front();
  if (out0 <= 0) return r0;
  return r0 * bound / (GapCalibration::kSafety * out0) * (1 - 1e-12);
}

}  // namespace

std::vector<double> calibration_radii() {
  std::vector<double> r;
  for (double x = 1e-4; x <= 2.0 * (1 + 1e-12); x *= 1.1) r.push_back(x);
  return r;
}

GapCalibration::GapCalibration(const LeftInvariantMetric& metric, std::uint64_t seed, int gap_samples,
                               int distance_samples)
    : seed_(seed) {
  gap_ball_.kind = "gap_to_distance";
  distance_ball_.kind = "distance_to_gap";
  Rng rng(seed);
  for (double rho : calibration_radii()) {
    double worst = 0;
    for (int i = 0; i < gap_samples; ++i) {
      const Mat2 dir = gap_direction(rng, i);
      const double level = (i < gap_samples / 2) ? rho : rho * rng.uniform(0.5, 1.0);
      const Mat2 g = exp_traceless(scale_to_gap(dir, level) * dir);
      double d;
      try {
        d = metric.dist_to_identity(GroupElement(Matrix2(g)));
      } catch (const NonConvergence& e) {
        d = e.best_upper_bound();
      }
      worst = std::max(worst, d);
    }
    gap_ball_.rows.emplace_back(rho, worst);

    double worst_gap = 0;
    for (int i = 0; i < distance_samples; ++i) {
      AlgebraVector v{rng.normal(), rng.normal(), rng.normal()};
      if (i < 2) v = {1, (i == 0 ? 1.0 : -1.0), 0};
      const double len = (i < distance_samples / 2) ? rho : rho * std::cbrt(rng.uniform());
      v = (len / v.norm()) * v;
      worst_gap = std::max(worst_gap, frobenius_gap(geodesic_endpoint_matrix(v)));
    }
    distance_ball_.rows.emplace_back(rho, worst_gap);
  }
  running_max_fill(gap_ball_);
  running_max_fill(distance_ball_);
}

double GapCalibration::gap_to_distance(double delta) const {
  if (!(delta > 0)) throw std::invalid_argument("gap_to_distance: delta must be > 0");
  return invert(gap_ball_, delta);
}

double GapCalibration::distance_to_gap(double eps) const {
  if (!(eps > 0)) throw std::invalid_argument("distance_to_gap: eps must be > 0");
  return invert(distance_ball_, eps);
}

void GapCalibration::save(std::ostream& os) const {
  os.precision(17);
  os << "horolab-calibration " << kFormatVersion << '\n';
  os << "metric " << kMetricName << '\n';
  os << "seed " << seed_ << '\n';
  for (const CalibrationTable* t : {&gap_ball_, &distance_ball_}) {
    os << "table " << t->kind << ' ' << t->rows.size() << '\n';
    for (const auto& [in, out] : t->rows) os << in << ' ' << out << '\n';
  }
}

GapCalibration GapCalibration::load(std::istream& is) {
  auto fail = [](const std::string& msg) -> GapCalibration { throw std::runtime_error("calibration file: " + msg); };
  std::string line, word;
  GapCalibration c;
  int version = 0;
  if (!std::getline(is, line)) return fail("empty");
  {
    std::istringstream ls(line);
    ls >> word >> version;
    if (word != "horolab-calibration") return fail("bad magic '" + word + "'");
    if (version != kFormatVersion) return fail("unsupported version " + std::to_string(version));
  }
  if (!std::getline(is, line) || line.rfind("metric ", 0) != 0) return fail("missing metric line");
  if (line.substr(7) != kMetricName) return fail("metric mismatch: " + line.substr(7));
  if (!std::getline(is, line) || line.rfind("seed ", 0) != 0) return fail("missing seed line");
  c.seed_ = std::stoull(line.substr(5));
  for (int k = 0; k < 2; ++k) {
    if (!std::getline(is, line)) return fail("missing table");
    std::istringstream ls(line);
    std::size_t n = 0;
    std::string kind;
    ls >> word >> kind >> n;
    if (word != "table") return fail("expected table header");
    CalibrationTable* t = kind == "gap_to_distance" ? &c.gap_ball_ : kind == "distance_to_gap" ? &c.distance_ball_ : nullptr;
    if (!t) return fail("unknown table " + kind);
    t->kind = kind;
    for (std::size_t i = 0; i < n; ++i) {
      double in, out;
      if (!(is >> in >> out)) return fail("truncated table " + kind);
      t->rows.emplace_back(in, out);
    }
    std::getline(is, line);
  }
  if (c.gap_ball_.rows.empty() || c.distance_ball_.rows.empty()) return fail("empty table");
  return c;
}

}  // namespace horolab
