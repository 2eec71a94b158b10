#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "horolab/metric.hpp"

namespace horolab {

/// Monotone table radius -> sampled supremum, as stored on disk.
struct CalibrationTable {
  std::string kind;
  std::vector<std::pair<double, double>> rows;  // strictly increasing input, non-decreasing output
};

/// Sampled, monotone realizations of the two comparisons between the Frobenius gap
/// and d_G(., e), each with safety factor 2.
///
///  gap_to_distance(delta) = rho  with  frobenius_gap(g) < rho  =>  d_G(g,e) < delta
///  distance_to_gap(eps)   = delta with d_G(g,e) < delta         =>  frobenius_gap(g) < eps
class GapCalibration {
 public:
  static constexpr double kSafety = 2.0;
  static constexpr int kFormatVersion = 1;

  GapCalibration(const LeftInvariantMetric& metric, std::uint64_t seed, int gap_samples = 48,
                 int distance_samples = 400);

  double gap_to_distance(double delta) const;
  double distance_to_gap(double eps) const;

  const CalibrationTable& gap_ball() const { return gap_ball_; }            // gap radius -> max d_G
  const CalibrationTable& distance_ball() const { return distance_ball_; }  // d_G radius -> max gap
  std::uint64_t seed() const { return seed_; }

  void save(std::ostream& os) const;
  static GapCalibration load(std::istream& is);

 private:
  GapCalibration() = default;

  std::uint64_t seed_ = 0;
  CalibrationTable gap_ball_;
  CalibrationTable distance_ball_;
};

/// Radii on which the tables are sampled (geometric grid).
std::vector<double> calibration_radii();

}  // namespace horolab
