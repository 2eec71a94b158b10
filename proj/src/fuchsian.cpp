#include "horolab/fuchsian.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include "horolab/random.hpp"

namespace horolab {

namespace {

constexpr double kSqrt2 = std::numbers::sqrt2;

std::int64_t cell(double x, double grid) { return static_cast<std::int64_t>(std::floor(x / grid)); }

std::uint64_t cell_key(std::int64_t c11, std::int64_t c12) {
  std::uint64_t h = static_cast<std::uint64_t>(c11) * 0x9E3779B97F4A7C15ULL;
  h ^= static_cast<std::uint64_t>(c12) + 0x7F4A7C159E3779B9ULL + (h << 6) + (h >> 2);
  return h;
}

bool entrywise_close(const Mat2& x, const Mat2& y, double tol) {
  return std::abs(x.a11 - y.a11) <= tol && std::abs(x.a12 - y.a12) <= tol && std::abs(x.a21 - y.a21) <= tol &&
         std::abs(x.a22 - y.a22) <= tol;
}

// Canonical product of two canonical matrices; skips the determinant round trip when the
// product is already unimodular to roundoff.
Mat2 canonical_product(const Mat2& x, const Mat2& y) {
  Mat2 m = x * y;
  if (m.tr() < 0) m = -m;
  return m;
}

// Hash over the 1e-9 grid cells of (a11, a12); lookups probe every cell within tol.
class ElementIndex {
 public:
  explicit ElementIndex(double tol) : tol_(tol), grid_(tol) {}

  template <class Get>
  std::optional<std::size_t> find(const Mat2& m, Get&& get) const {
    for (std::int64_t i = cell(m.a11 - tol_, grid_); i <= cell(m.a11 + tol_, grid_); ++i)
      for (std::int64_t j = cell(m.a12 - tol_, grid_); j <= cell(m.a12 + tol_, grid_); ++j) {
        auto [lo, hi] = map_.equal_range(cell_key(i, j));
        for (auto it = lo; it != hi; ++it)
          if (entrywise_close(get(it->second), m, tol_)) return it->second;
      }
    return std::nullopt;
  }
  void insert(const Mat2& m, std::size_t idx) { map_.emplace(cell_key(cell(m.a11, grid_), cell(m.a12, grid_)), idx); }
  const std::unordered_multimap<std::uint64_t, std::size_t>& map() const { return map_; }

 private:
  double tol_, grid_;
  std::unordered_multimap<std::uint64_t, std::size_t> map_;
};

}  // namespace

// ---- words -------------------------------------------------------------------------------

Word inverse_word(const Word& w) {
  Word r(w.rbegin(), w.rend());
  for (auto& l : r) l = inverse_letter(l);
  return r;
}

Word concat(const Word& a, const Word& b) {
  Word r = a;
  r.insert(r.end(), b.begin(), b.end());
  return freely_reduce(r);
}

Word freely_reduce(const Word& w) {
  Word r;
  for (auto l : w) {
    if (!r.empty() && r.back() == inverse_letter(l)) r.pop_back();
    else r.push_back(l);
  }
  return r;
}

std::string format_word(const Word& w) {
  if (w.empty()) return "e";
  std::string s;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (i) s += ' ';
    s += "g" + std::to_string(w[i] / 2);
    if (w[i] & 1) s += "⁻¹";
  }
  return s;
}

std::string word_token(const Word& w) {
  if (w.empty()) return "e";
  std::string s;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (i) s += '.';
    s += std::to_string(w[i]);
  }
  return s;
}

Word parse_word_token(const std::string& s) {
  Word w;
  if (s == "e") return w;
  std::istringstream is(s);
  std::string part;
  while (std::getline(is, part, '.')) {
    std::size_t pos = 0;
    int v = -1;
    try {
      v = std::stoi(part, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != part.size() || v < 0 || v > 255) throw std::invalid_argument("bad word token '" + s + "'");
    w.push_back(static_cast<std::uint8_t>(v));
  }
  return w;
}

// ---- ball ------------------------------------------------------------------------------------

Ball::Ball(double radius, std::vector<BallEntry> entries, double tol_eq)
    : radius_(radius), tol_(tol_eq), entries_(std::move(entries)) {
  sorted_.resize(entries_.size());
  for (std::size_t i = 0; i < sorted_.size(); ++i) sorted_[i] = i;
  std::stable_sort(sorted_.begin(), sorted_.end(),
                   [&](std::size_t a, std::size_t b) { return entries_[a].displacement < entries_[b].displacement; });
  ElementIndex idx(tol_);
  for (std::size_t i = 0; i < entries_.size(); ++i) idx.insert(entries_[i].element.mat(), i);
  index_ = idx.map();
}

const BallEntry* Ball::find(const Mat2& m0) const {
  Mat2 m = m0;
  if (m.tr() < 0) m = -m;
  for (std::int64_t i = cell(m.a11 - tol_, tol_); i <= cell(m.a11 + tol_, tol_); ++i)
    for (std::int64_t j = cell(m.a12 - tol_, tol_); j <= cell(m.a12 + tol_, tol_); ++j) {
      auto [lo, hi] = index_.equal_range(cell_key(i, j));
      for (auto it = lo; it != hi; ++it)
        if (entrywise_close(entries_[it->second].element.mat(), m, tol_)) return &entries_[it->second];
    }
  return nullptr;
}

// ---- group -----------------------------------------------------------------------------------

FuchsianGroup::FuchsianGroup(std::string name, const std::vector<GroupElement>& generators, FuchsianOptions options)
    : name_(std::move(name)), options_(options) {
  if (generators.empty()) throw std::invalid_argument("group needs at least one generator");
  if (generators.size() > 127) throw std::invalid_argument("too many generators");
  for (const auto& g : generators) {
    if (classify(g) != Conjugacy::hyperbolic)
      throw std::invalid_argument("generator is not hyperbolic (trace " + std::to_string(g.trace()) + ")");
    letters_.push_back(g);
    letters_.push_back(inverse(g));
  }
  for (const auto& l : letters_) max_letter_disp_ = std::max(max_letter_disp_, displacement(l));
}

FuchsianGroup::FuchsianGroup(const FuchsianGroup& other)
    : name_(other.name_), letters_(other.letters_), options_(other.options_), max_letter_disp_(other.max_letter_disp_) {
  std::lock_guard lock(other.mu_);
  cache_ = other.cache_;
}

GroupElement FuchsianGroup::evaluate(const Word& w) const {
  GroupElement g;
  for (auto l : w) {
    if (l >= letters_.size()) throw std::invalid_argument("letter out of range");
    g = g * letters_[l];
  }
  return g;
}

std::shared_ptr<const Ball> FuchsianGroup::ball(double r_h) const {
  if (!(r_h >= 0)) throw std::invalid_argument("ball radius must be >= 0");
  // Round up so that slowly growing requests do not re-enumerate every time.
  const double r = std::ceil(r_h * 4) / 4;
  {
    std::lock_guard lock(mu_);
    requests_.push_back(r);
    auto it = cache_.lower_bound(r_h);
    if (it != cache_.end()) return it->second;
  }
  auto b = enumerate(r);
  std::lock_guard lock(mu_);
  return cache_.emplace(r, b).first->second;
}

std::size_t FuchsianGroup::request_count() const {
  std::lock_guard lock(mu_);
  return requests_.size();
}

std::vector<double> FuchsianGroup::requested_radii(std::size_t since) const {
  std::lock_guard lock(mu_);
  std::vector<double> r(requests_.begin() + std::min(since, requests_.size()), requests_.end());
  std::sort(r.begin(), r.end());
  r.erase(std::unique(r.begin(), r.end()), r.end());
  return r;
}

std::vector<double> FuchsianGroup::cached_radii() const {
  std::lock_guard lock(mu_);
  std::vector<double> r;
  for (const auto& [k, v] : cache_) r.push_back(k);
  return r;
}

// Breadth-first over freely reduced words. A prefix is dropped once its displacement exceeds
// r_h + c with c the largest generator displacement: along the hyperbolic segment from i to
// gamma i the tiles of a Dirichlet domain whose side pairings are the generators stay within
// the covering radius (< c) of the segment.
std::shared_ptr<const Ball> FuchsianGroup::enumerate(double r_h) const {
  const double bound = r_h + max_letter_disp_;
  std::vector<BallEntry> all;
  all.push_back({{}, GroupElement(), 0.0});
  ElementIndex index(options_.tol_eq);
  index.insert(all[0].element.mat(), 0);
  std::vector<std::size_t> frontier{0}, next;
  auto get = [&](std::size_t i) -> const Mat2& { return all[i].element.mat(); };
  while (!frontier.empty()) {
    next.clear();
    for (std::size_t idx : frontier) {
      for (std::size_t l = 0; l < letters_.size(); ++l) {
        if (!all[idx].word.empty() && all[idx].word.back() == inverse_letter(static_cast<std::uint8_t>(l))) continue;
        const Mat2 m = canonical_product(all[idx].element.mat(), letters_[l].mat());
        const double d = displacement(m);
        if (d > bound) continue;
        if (index.find(m, get)) continue;
        if (all.size() >= options_.max_ball_size)
          throw BudgetExceeded("ball of displacement radius " + std::to_string(r_h) + " exceeds max_ball_size " +
                                   std::to_string(options_.max_ball_size),
                               r_h);
        Word w = all[idx].word;
        w.push_back(static_cast<std::uint8_t>(l));
        all.push_back({std::move(w), GroupElement(Matrix2(m)), d});
        index.insert(m, all.size() - 1);
        next.push_back(all.size() - 1);
      }
    }
    std::swap(frontier, next);
  }
  std::vector<BallEntry> kept;
  for (auto& e : all)
    if (e.displacement <= r_h) kept.push_back(std::move(e));
  return std::make_shared<const Ball>(r_h, std::move(kept), options_.tol_eq);
}

void FuchsianGroup::save_ball(std::ostream& os, double r_h) const {
  auto b = ball(r_h);
  os.precision(17);
  os << "ball " << name_ << ' ' << r_h << ' ' << b->size() << '\n';
  for (const auto& e : b->entries()) {
    const Mat2& m = e.element.mat();
    os << word_token(e.word) << ' ' << m.a11 << ' ' << m.a12 << ' ' << m.a21 << ' ' << m.a22 << '\n';
  }
}

void FuchsianGroup::load_ball(std::istream& is) {
  std::string head, name;
  double r = 0;
  std::size_t n = 0;
  if (!(is >> head >> name >> r >> n) || head != "ball") throw std::runtime_error("ball cache: bad header");
  if (name != name_) throw std::runtime_error("ball cache: group '" + name + "' does not match '" + name_ + "'");
  std::vector<BallEntry> entries;
  for (std::size_t i = 0; i < n; ++i) {
    std::string tok;
    double a11, a12, a21, a22;
    if (!(is >> tok >> a11 >> a12 >> a21 >> a22)) throw std::runtime_error("ball cache: truncated");
    Word w = parse_word_token(tok);
    GroupElement g = evaluate(w);
    if (max_abs_diff(g.mat(), Mat2{a11, a12, a21, a22}) > 1e-6 * std::max(1.0, std::sqrt(g.mat().frobenius2())))
      throw std::runtime_error("ball cache: entry " + tok + " does not match its word");
    entries.push_back({std::move(w), g, displacement(g)});
  }
  std::lock_guard lock(mu_);
  cache_.emplace(r, std::make_shared<const Ball>(r, std::move(entries), options_.tol_eq));
}

FuchsianGroup preset_bolza(FuchsianOptions options) {
  const double p = 1 + kSqrt2;
  const double q = std::sqrt(2 + 2 * kSqrt2);
  const GroupElement g0(p, q, q, p);
  std::vector<GroupElement> gens;
  for (int k = 0; k < 4; ++k) {
    const double th = k * std::numbers::pi / 4;
    gens.push_back(rotation(th) * g0 * rotation(-th));
  }
  return FuchsianGroup("bolza", gens, options);
}

FuchsianGroup preset(const std::string& name, FuchsianOptions options) {
  if (name == "bolza") return preset_bolza(options);
  throw std::invalid_argument("unknown group preset '" + name + "'");
}

FuchsianGroup load_group(std::istream& is, FuchsianOptions options) {
  std::string line, name;
  std::vector<GroupElement> gens;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    std::istringstream ls(line);
    std::string first;
    if (!(ls >> first)) continue;
    if (first == "name") {
      if (!(ls >> name)) throw std::runtime_error("group file line " + std::to_string(lineno) + ": missing name");
      continue;
    }
    double v[4];
    std::istringstream row(line);
    for (double& x : v)
      if (!(row >> x)) throw std::runtime_error("group file line " + std::to_string(lineno) + ": expected 4 reals");
    std::string extra;
    if (row >> extra) throw std::runtime_error("group file line " + std::to_string(lineno) + ": trailing '" + extra + "'");
    gens.emplace_back(v[0], v[1], v[2], v[3]);
  }
  if (name.empty()) throw std::runtime_error("group file: missing 'name' header");
  return FuchsianGroup(name, gens, options);
}

void save_group(std::ostream& os, const FuchsianGroup& g) {
  os.precision(17);
  os << "name " << g.name() << '\n';
  for (std::size_t k = 0; k < g.letters().size(); k += 2) {
    const Mat2& m = g.letters()[k].mat();
    os << m.a11 << ' ' << m.a12 << ' ' << m.a21 << ' ' << m.a22 << '\n';
  }
}

std::vector<GroupElement> enumerate_ball(const FuchsianGroup& g, double r_h) {
  if (!(r_h > 0)) throw std::invalid_argument("enumerate_ball: radius must be > 0");
  std::vector<GroupElement> out;
  for (const auto& e : g.ball(r_h)->entries())
    if (e.displacement <= r_h) out.push_back(e.element);
  return out;
}

std::string to_string(CosetVerdict v) {
  switch (v) {
    case CosetVerdict::same: return "same";
    case CosetVerdict::different: return "different";
    case CosetVerdict::ball_exhausted: return "ball_exhausted";
  }
  return "?";
}

// ---- quotient --------------------------------------------------------------------------------

double QuotientSpace::projection_lipschitz() { return kSqrt2; }

QuotientSpace::QuotientSpace(std::shared_ptr<const FuchsianGroup> group,
                             std::shared_ptr<const LeftInvariantMetric> metric, std::uint64_t seed)
    : group_(std::move(group)), metric_(std::move(metric)), kappa_(projection_lipschitz()) {
  Rng rng(seed ^ 0xC0FFEEULL);
  double worst = 0;
  for (int i = 0; i < 2000; ++i) {
    const AlgebraVector v{2 * rng.normal(), 2 * rng.normal(), 2 * rng.normal()};
    worst = std::max(worst, displacement(reduce(exp_map(v)).rep));
  }
  covering_radius_ = worst + 0.25;
}

Reduction QuotientSpace::reduce(const GroupElement& g) const {
  Mat2 cur = g.mat();
  Word rho;  // applied on the left, so rho_element = letters[rho.back()] ... letters[rho.front()]
  double cur_n = cur.frobenius2();
  const auto& L = group_->letters();
  for (int iter = 0; iter < 10000; ++iter) {
    int best = -1;
    double best_n = cur_n;
    Mat2 best_m;
    for (std::size_t l = 0; l < L.size(); ++l) {
      const Mat2 m = L[l].mat() * cur;
      const double n = m.frobenius2();
      if (n < best_n * (1 - 1e-14)) {
        best_n = n;
        best = static_cast<int>(l);
        best_m = m;
      }
    }
    if (best < 0) break;
    cur = best_m;
    cur_n = best_n;
    rho.insert(rho.begin(), static_cast<std::uint8_t>(best));
  }
  rho = freely_reduce(rho);
  Reduction r;
  r.rep = GroupElement(Matrix2(cur));
  r.rho = rho;
  r.rho_element = group_->evaluate(rho);
  return r;
}

Mat2 QuotientSpace::reduce_matrix(const Mat2& g) const {
  Mat2 cur = g;
  double cur_n = cur.frobenius2();
  const auto& L = group_->letters();
  for (int iter = 0; iter < 10000; ++iter) {
    int best = -1;
    double best_n = cur_n;
    Mat2 best_m;
    for (std::size_t l = 0; l < L.size(); ++l) {
      const Mat2 m = L[l].mat() * cur;
      const double n = m.frobenius2();
      if (n < best_n * (1 - 1e-14)) {
        best_n = n;
        best = static_cast<int>(l);
        best_m = m;
      }
    }
    if (best < 0) break;
    cur = best_m;
    cur_n = best_n;
  }
  if (cur.tr() < 0) cur = -cur;
  return cur;
}

QuotientDistance QuotientSpace::quotient_distance(const QuotientPoint& x, const QuotientPoint& y) const {
  const Reduction rx = reduce(x.rep), ry = reduce(y.rep);
  const GroupElement gi = inverse(rx.rep);
  const double dx = displacement(rx.rep), dy = displacement(ry.rep);

  QuotientDistance out;
  out.value = metric_->distance(rx.rep, ry.rep);
  out.evaluations = 1;
  Word best_word;  // gamma'' in d(g', gamma'' h')

  double need = dx + kappa_ * out.value + dy + 1e-9;
  auto ball = group_->ball(need);
  out.ball_radius = ball->radius();

  struct Cand {
    double lb;
    std::size_t idx;
  };
  std::vector<Cand> cands;
  for (std::size_t idx : ball->by_displacement()) {
    const auto& e = ball->entries()[idx];
    if ((e.displacement - dx - dy) / kappa_ >= out.value) break;
    if (e.word.empty()) continue;
    const Mat2 k = gi.mat() * e.element.mat() * ry.rep.mat();
    const double lb = displacement(k) / kappa_;
    if (lb < out.value) cands.push_back({lb, idx});
  }
  std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) { return a.lb < b.lb; });
  for (const auto& c : cands) {
    if (c.lb >= out.value) break;
    const auto& e = ball->entries()[c.idx];
    const double d = metric_->distance(rx.rep, e.element * ry.rep);
    ++out.evaluations;
    if (d < out.value) {
      out.value = d;
      best_word = e.word;
    }
  }
  // gamma = rho_x^-1 gamma'' rho_y
  out.gamma_word = freely_reduce(concat(concat(inverse_word(rx.rho), best_word), ry.rho));
  out.gamma = group_->evaluate(out.gamma_word);
  return out;
}

Closeness QuotientSpace::closer_than(const Mat2& x, const Mat2& y, double bound) const {
  const Mat2 gx = reduce_matrix(x), gy = reduce_matrix(y);
  const Mat2 gxi{gx.a22, -gx.a12, -gx.a21, gx.a11};
  const double dx = displacement(gx), dy = displacement(gy);
  auto ball = group_->ball(dx + kappa_ * bound + dy + 1e-9);
  struct Cand {
    double lb;
    Mat2 k;
  };
  std::vector<Cand> cands;
  double floor_lb = std::numeric_limits<double>::infinity();
  for (std::size_t idx : ball->by_displacement()) {
    const auto& e = ball->entries()[idx];
    if ((e.displacement - dx - dy) / kappa_ >= bound) break;
    const Mat2 k = gxi * e.element.mat() * gy;
    const double lb = displacement(k) / kappa_;
    if (lb < bound) cands.push_back({lb, k});
    else floor_lb = std::min(floor_lb, lb);
  }
  std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) { return a.lb < b.lb; });
  Closeness out;
  out.value = std::max(bound, std::min(floor_lb, std::numeric_limits<double>::max()));
  double best = std::numeric_limits<double>::infinity();
  for (const auto& c : cands) {
    if (c.lb >= best) break;
    double d;
    try {
      d = metric_->dist_to_identity(GroupElement(Matrix2(c.k)));
    } catch (const NonConvergence& e) {
      d = e.best_upper_bound();
    }
    best = std::min(best, d);
  }
  if (best < bound) {
    out.close = true;
    out.value = best;
  }
  return out;
}

CosetResult QuotientSpace::same_coset(const GroupElement& g, const GroupElement& h) const {
  const Reduction rg = reduce(g), rh = reduce(h);
  const GroupElement m = rh.rep * inverse(rg.rep);
  const double need = displacement(rg.rep) + displacement(rh.rep) + 1e-6;
  CosetResult out;
  std::shared_ptr<const Ball> ball;
  try {
    ball = group_->ball(need);
  } catch (const BudgetExceeded& e) {
    out.verdict = CosetVerdict::ball_exhausted;
    out.ball_radius = e.radius();
    return out;
  }
  out.ball_radius = ball->radius();
  const BallEntry* hit = ball->find(m.mat());
  if (!hit) {
    out.verdict = CosetVerdict::different;
    return out;
  }
  // gamma = rho_h^-1 m rho_g
  out.verdict = CosetVerdict::same;
  out.gamma_word = freely_reduce(concat(concat(inverse_word(rh.rho), hit->word), rg.rho));
  out.gamma = group_->evaluate(out.gamma_word);
  return out;
}

const SystoleReport& QuotientSpace::systole() const {
  std::call_once(systole_once_, [this] {
    double tr_c = std::numeric_limits<double>::infinity();
    for (const auto& l : group_->letters()) tr_c = std::min(tr_c, l.trace());
    const double ell_c = 2 * std::acosh(tr_c / 2);
    SystoleReport r;
    r.certification_radius = ell_c + 2 * covering_radius_ + 0.5;
    auto ball = group_->ball(r.certification_radius);
    r.ball_size = ball->size();
    r.min_trace = std::numeric_limits<double>::infinity();
    for (const auto& e : ball->entries()) {
      if (e.word.empty()) continue;
      const double t = e.element.trace();
      // BFS order: among traces equal to roundoff the shortest word wins.
      if (t < r.min_trace * (1 - 1e-9)) {
        r.min_trace = t;
        r.min_trace_word = e.word;
      }
    }
    if (!(r.min_trace > 2 + kDefaultTol.classify))
      throw std::runtime_error("group has a non-hyperbolic element " + format_word(r.min_trace_word) +
                               " (trace " + std::to_string(r.min_trace) + "); not cocompact torsion-free");
    r.eps_star = r.min_trace - 2;
    r.translation_length = 2 * std::acosh(r.min_trace / 2);
    r.sigma0 = r.translation_length / kSqrt2;
    systole_ = r;
  });
  return systole_;
}

namespace bolza {
double min_trace() { return 2 + 2 * kSqrt2; }
double eps_star() { return 2 * kSqrt2; }
double translation_length() { return 2 * std::acosh(1 + kSqrt2); }
double sigma0() { return translation_length() / kSqrt2; }
double covering_radius() { return std::acosh((1 + kSqrt2) * (1 + kSqrt2)); }
}  // namespace bolza

}  // namespace horolab
