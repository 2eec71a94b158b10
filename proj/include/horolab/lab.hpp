#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "horolab/calibration.hpp"
#include "horolab/flows.hpp"

namespace horolab {

using Json = nlohmann::ordered_json;

/// Continuous piecewise-linear s with s(0) = 0; constant slope beyond the outer knots.
class Reparametrization {
 public:
  Reparametrization(std::vector<std::pair<double, double>> knots, std::string label);

  static Reparametrization identity();
  static Reparametrization linear(double slope);

  double operator()(double t) const;
  const std::vector<std::pair<double, double>>& knots() const { return knots_; }
  const std::string& label() const { return label_; }
  double min_slope() const;
  double max_slope() const;
  Json to_json() const;

 private:
  std::vector<std::pair<double, double>> knots_;
  std::string label_;
};

struct ReparamFamily {
  double window = 20;
  double knot_spacing = 1.0;
  double slope_min = 0.25;
  double slope_max = 4.0;
  double wiggle = 0.02;  // amplitude of the near-identity members
};

/// n members: the identity, then alternating near-identity wiggles, constant slopes and random
/// bounded-slope paths, all with slopes in [slope_min, slope_max].
std::vector<Reparametrization> reparametrization_family(Rng& rng, int n, const ReparamFamily& f);

enum class Outcome { pass, fail, inconclusive };
std::string to_string(Outcome o);
/// 0 pass, 1 fail, 2 inconclusive.
int exit_code(Outcome o);

struct TestVerdict {
  std::string test;
  Outcome outcome = Outcome::inconclusive;
  Json params = Json::object();
  std::uint64_t seed = 0;
  Json summary = Json::object();
  Json witnesses = Json::array();
  std::vector<double> ball_radii_used;
  std::string notes;
  std::string timestamp;
  double wall_seconds = 0;

  /// One top-level key per line; the timing fields share a single line of their own.
  std::string to_json() const;
};

/// Everything a campaign needs, built once per run.
struct LabContext {
  std::shared_ptr<const FuchsianGroup> group;
  std::shared_ptr<const LeftInvariantMetric> metric;
  std::shared_ptr<const QuotientSpace> space;
  std::shared_ptr<const GapCalibration> calibration;
  std::uint64_t calibration_seed = 1;

  static LabContext create(const FuchsianGroup& group, const MetricOptions& metric_options = {},
                           std::uint64_t calibration_seed = 1);
};

Json matrix_json(const Mat2& m);
Json element_json(const GroupElement& g);

enum class Direction { positive, negative };
std::string to_string(Direction d);
Direction parse_direction(const std::string& s);

/// e^{eps/2} - e^{-eps/2}
double bw_epsilon0(double eps);
/// min(distance_to_gap(eps0), sigma0/4 - margin).
double bw_delta_for_epsilon(double eps, const LabContext& ctx);
/// Upper end of admissible delta for the separating testers: min(eps_star, sigma0/4).
double separating_delta_cap(const LabContext& ctx);

struct BwOptions {
  double eps = 0.5;
  double window = 20;
  double dt = 0.25;
  int n_pairs = 50;     // on-orbit pairs; the same number of off-orbit pairs is drawn
  int n_reparams = 10;
  std::uint64_t seed = 1;
};
TestVerdict bw_test_geodesic(const LabContext& ctx, const BwOptions& o);

struct SeparatingOptions {
  FlowKind flow = FlowKind::stable_horocycle;
  double delta = 0.1;
  Direction direction = Direction::positive;
  double window = 30;
  double dt = 0.25;
  int n_pairs = 50;  // on-orbit pairs; the same number of off-orbit pairs is drawn
  std::uint64_t seed = 1;
};
TestVerdict separating_test(const LabContext& ctx, const SeparatingOptions& o);
inline TestVerdict separating_test_horocycle(const LabContext& ctx, SeparatingOptions o) {
  o.flow = FlowKind::stable_horocycle;
  return separating_test(ctx, o);
}

/// rho with |alpha(t,x)| < eps for |t| < rho on sampled x, divided by the safety factor 2.
double rho_for_epsilon(const TimeChange& tc, double eps, std::uint64_t seed, int points = 200);

struct KinematicOptions {
  double eps = 0.25;
  Direction direction = Direction::positive;
  double window = 30;
  double dt = 0.25;
  int n_pairs = 50;
  std::uint64_t seed = 1;
};
TestVerdict kinematic_test_time_change(const LabContext& ctx, const TimeChange& tc, const KinematicOptions& o);

struct KhOptions {
  double delta = 0.05;
  double window = 20;
  double dt = 0.25;
  int n_triples = 50;
  std::uint64_t seed = 1;
};
TestVerdict kh_test_horocycle(const LabContext& ctx, const KhOptions& o);

struct HorocycleBwCounterexample {
  GroupElement x_rep, y_rep;  // g and h with h^-1 g = K = diag(a, 1/a)
  double a = 1;
  Reparametrization s = Reparametrization::identity();
  double delta = 0, rho = 0;
  double distance_to_identity = 0;   // d_G(h^-1 g, e)
  double gap = 0;                    // frobenius_gap(K)
  double trace = 0;                  // a + 1/a
  double eps_star = 0;
  double max_residual_formula = 0;   // max ||B_{-t} K B_{s(t)} - K|| (closed form)
  double max_residual_product = 0;   // same by literal products
  std::vector<std::pair<double, double>> residual_table;  // t, product residual
  bool holds = false;
  TestVerdict verdict;
};
HorocycleBwCounterexample counterexample_horocycle_not_bw(const LabContext& ctx, double delta);

struct GeodesicSepCounterexample {
  GroupElement x_rep, y_rep;
  Direction direction = Direction::positive;
  double s = 0, delta = 0;
  std::vector<std::pair<double, double>> decay_table;  // t, measured quotient distance
  bool decay_ok = false;
  bool monotone = false;
  double certified_radius = 0;    // ball radius searched
  double certified_tau = 0;       // non-orbit holds for |tau| up to this
  std::size_t triangular_count = 0;
  Json transcript = Json::array();
  bool non_orbit_certified = false;
  TestVerdict verdict;
};
GeodesicSepCounterexample counterexample_geodesic_not_separating(const LabContext& ctx, double delta,
                                                                 Direction direction = Direction::positive,
                                                                 double cert_radius = 10.0);

/// The two asymmetries side by side: BW passes where geodesic separating fails; horocycle
/// separating passes where the BW-style test is defeated by the counterexample.
TestVerdict paired_verdicts(const LabContext& ctx, std::uint64_t seed, int n_pairs = 10);

}  // namespace horolab
