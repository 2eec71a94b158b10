#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "horolab/metric.hpp"
#include "horolab/sl2.hpp"

namespace horolab {

/// Word in the generators: letter 2k is g_k, 2k+1 is g_k^-1.
using Word = std::vector<std::uint8_t>;

inline std::uint8_t inverse_letter(std::uint8_t l) { return l ^ 1u; }
Word inverse_word(const Word& w);
Word concat(const Word& a, const Word& b);
/// Free reduction (cancels adjacent l, l^-1).
Word freely_reduce(const Word& w);
/// "e" or e.g. "g0 g1⁻¹ g3".
std::string format_word(const Word& w);
/// Compact token used in cache files: "e" or letters joined by '.'.
std::string word_token(const Word& w);
Word parse_word_token(const std::string& s);

class BudgetExceeded : public std::runtime_error {
 public:
  BudgetExceeded(const std::string& what, double radius) : std::runtime_error(what), radius_(radius) {}
  /// Displacement radius whose ball could not be completed.
  double radius() const { return radius_; }

 private:
  double radius_;
};

struct BallEntry {
  Word word;
  GroupElement element;
  double displacement = 0;  // d_H(i, gamma i)
};

/// All elements with displacement <= radius, BFS order (shortest word first, then letter order).
class Ball {
 public:
  Ball(double radius, std::vector<BallEntry> entries, double tol_eq);

  double radius() const { return radius_; }
  const std::vector<BallEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  /// Indices into entries() sorted by displacement (stable).
  const std::vector<std::size_t>& by_displacement() const { return sorted_; }
  /// Entry equal to m within tol_eq (entrywise), if present.
  const BallEntry* find(const Mat2& m) const;

 private:
  double radius_;
  double tol_;
  std::vector<BallEntry> entries_;
  std::vector<std::size_t> sorted_;
  std::unordered_multimap<std::uint64_t, std::size_t> index_;
};

struct FuchsianOptions {
  std::size_t max_ball_size = 1000000;
  double tol_eq = 1e-9;
};

class FuchsianGroup {
 public:
  /// `generators` without inverses; inverses are added as odd letters.
  FuchsianGroup(std::string name, const std::vector<GroupElement>& generators, FuchsianOptions options = {});
  /// Copies share the (immutable) cached balls.
  FuchsianGroup(const FuchsianGroup& other);
  FuchsianGroup& operator=(const FuchsianGroup&) = delete;

  const std::string& name() const { return name_; }
  /// Letters 0..2n-1.
  const std::vector<GroupElement>& letters() const { return letters_; }
  std::size_t generator_count() const { return letters_.size() / 2; }
  const FuchsianOptions& options() const { return options_; }
  double max_letter_displacement() const { return max_letter_disp_; }

  GroupElement evaluate(const Word& w) const;

  /// Some cached ball of displacement radius >= r_h (enumerated on demand).
  std::shared_ptr<const Ball> ball(double r_h) const;
  /// Radii of balls built so far.
  std::vector<double> cached_radii() const;
  /// Number of ball() calls so far; a mark for requested_radii.
  std::size_t request_count() const;
  /// Sorted distinct radii (rounded up to 0.25) asked of ball() since the given mark.
  std::vector<double> requested_radii(std::size_t since = 0) const;

  void save_ball(std::ostream& os, double r_h) const;
  /// Loads a cache written by save_ball; elements are re-evaluated from the words and checked.
  void load_ball(std::istream& is);

 private:
  std::shared_ptr<const Ball> enumerate(double r_h) const;

  std::string name_;
  std::vector<GroupElement> letters_;
  FuchsianOptions options_;
  double max_letter_disp_ = 0;
  mutable std::mutex mu_;
  mutable std::map<double, std::shared_ptr<const Ball>> cache_;
  mutable std::vector<double> requests_;
};

/// Genus-2 regular-octagon group: g_k = R(k pi/4) g0 R(-k pi/4), k = 0..3.
FuchsianGroup preset_bolza(FuchsianOptions options = {});
/// Named preset ("bolza").
FuchsianGroup preset(const std::string& name, FuchsianOptions options = {});

/// Group file: "name <n>" then one generator per line as four reals a11 a12 a21 a22.
FuchsianGroup load_group(std::istream& is, FuchsianOptions options = {});
void save_group(std::ostream& os, const FuchsianGroup& g);

/// Elements of the ball of displacement radius r_h, BFS order.
std::vector<GroupElement> enumerate_ball(const FuchsianGroup& g, double r_h);

struct QuotientPoint {
  GroupElement rep;
};

struct Reduction {
  GroupElement rep;  // rho * g
  Word rho;
  GroupElement rho_element;
};

struct QuotientDistance {
  double value = 0;
  Word gamma_word;        // argmin gamma in d_G(x.rep, gamma y.rep)
  GroupElement gamma;
  double ball_radius = 0; // displacement radius that certified the minimum
  int evaluations = 0;    // d_G evaluations performed
};

struct Closeness {
  bool close = false;
  /// Exact minimum when close; otherwise a lower bound on the quotient distance (>= bound).
  double value = 0;
};

enum class CosetVerdict { same, different, ball_exhausted };
std::string to_string(CosetVerdict v);

struct CosetResult {
  CosetVerdict verdict = CosetVerdict::different;
  Word gamma_word;  // gamma * g = h
  GroupElement gamma;
  double ball_radius = 0;
};

struct SystoleReport {
  double sigma0 = 0;         // injectivity radius
  double eps_star = 0;       // trace gap
  double min_trace = 0;
  Word min_trace_word;
  double translation_length = 0;
  double certification_radius = 0;
  std::size_t ball_size = 0;
};

/// Gamma \ PSL(2,R) with the quotient of the left-invariant metric.
class QuotientSpace {
 public:
  /// Lipschitz constant of g -> g.i from d_G to d_H (exact for this metric).
  static double projection_lipschitz();

  QuotientSpace(std::shared_ptr<const FuchsianGroup> group, std::shared_ptr<const LeftInvariantMetric> metric,
                std::uint64_t seed = 1);

  const FuchsianGroup& group() const { return *group_; }
  const LeftInvariantMetric& metric() const { return *metric_; }
  double kappa() const { return kappa_; }
  /// Sampled covering radius of the orbit Gamma.i (max displacement of reduced points) plus margin.
  double covering_radius() const { return covering_radius_; }

  /// Greedy descent: left-multiply by the letter that most decreases ||s g||_F until none does.
  Reduction reduce(const GroupElement& g) const;
  /// Same descent without tracking the word.
  Mat2 reduce_matrix(const Mat2& g) const;

  QuotientDistance quotient_distance(const QuotientPoint& x, const QuotientPoint& y) const;
  CosetResult same_coset(const GroupElement& g, const GroupElement& h) const;
  /// Decides quotient_distance(x, y) < bound, evaluating d_G only where the projection bound allows.
  Closeness closer_than(const Mat2& x, const Mat2& y, double bound) const;

  const SystoleReport& systole() const;
  double injectivity_radius() const { return systole().sigma0; }
  double trace_gap() const { return systole().eps_star; }

  /// Displacement radii of all balls used so far.
  std::size_t ball_mark() const { return group_->request_count(); }
  std::vector<double> ball_radii_used(std::size_t since = 0) const { return group_->requested_radii(since); }

 private:
  std::shared_ptr<const FuchsianGroup> group_;
  std::shared_ptr<const LeftInvariantMetric> metric_;
  double kappa_;
  double covering_radius_ = 0;
  mutable std::once_flag systole_once_;
  mutable SystoleReport systole_;
};

/// Closed forms for the regular-octagon group.
namespace bolza {
double min_trace();           // 2 + 2 sqrt2
double eps_star();            // 2 sqrt2
double translation_length();  // 2 arccosh(1 + sqrt2)
double sigma0();              // translation_length / sqrt2
double covering_radius();     // arccosh((1 + sqrt2)^2)
}  // namespace bolza

}  // namespace horolab
