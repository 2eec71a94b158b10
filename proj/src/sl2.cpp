#include "horolab/sl2.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace horolab {

namespace {

Mat2 checked_unimodular(const Mat2& m, const Tolerances& tol) {
  const double scale = std::max(1.0, std::abs(m.a11 * m.a22) + std::abs(m.a12 * m.a21));
  const double det = m.det();
  if (!std::isfinite(det)) throw InvalidMatrix("matrix has non-finite entries");
  const double dev = std::abs(det - 1.0) / scale;
  if (dev <= tol.det) return m;
  if (dev <= tol.det_renorm && det > 0) return (1.0 / std::sqrt(det)) * m;
  std::ostringstream os;
  os << std::setprecision(17) << "determinant " << det << " is not 1 (relative deviation " << dev << ")";
  throw InvalidMatrix(os.str());
}

}  // namespace

double max_abs_diff(const Mat2& x, const Mat2& y) {
  return std::max({std::abs(x.a11 - y.a11), std::abs(x.a12 - y.a12), std::abs(x.a21 - y.a21),
                   std::abs(x.a22 - y.a22)});
}

Matrix2::Matrix2(double a11, double a12, double a21, double a22, const Tolerances& tol)
    : Matrix2(Mat2{a11, a12, a21, a22}, tol) {}

Matrix2::Matrix2(const Mat2& m, const Tolerances& tol) : m_(checked_unimodular(m, tol)) {}

Matrix2 Matrix2::inverse() const {
  Matrix2 r;
  r.m_ = {m_.a22, -m_.a12, -m_.a21, m_.a11};
  return r;
}

Matrix2 Matrix2::operator-() const {
  Matrix2 r;
  r.m_ = -m_;
  return r;
}

std::string to_string(OneParam k) {
  switch (k) {
    case OneParam::geodesic: return "geodesic";
    case OneParam::stable: return "stable";
    case OneParam::unstable: return "unstable";
  }
  return "?";
}

std::string to_string(Conjugacy c) {
  switch (c) {
    case Conjugacy::elliptic: return "elliptic";
    case Conjugacy::parabolic: return "parabolic";
    case Conjugacy::hyperbolic: return "hyperbolic";
  }
  return "?";
}

Matrix2 canonicalize(const Matrix2& m, const Tolerances& tol) {
  const double t = m.tr();
  bool flip = false;
  if (t > tol.eq) {
    flip = false;
  } else if (t < -tol.eq) {
    flip = true;
  } else {
    for (double v : {m.a11(), m.a12(), m.a21()}) {
      if (std::abs(v) > tol.eq) {
        flip = v < 0;
        break;
      }
    }
  }
  return flip ? -m : m;
}

GroupElement::GroupElement(const Matrix2& m, const Tolerances& tol) : rep_(canonicalize(m, tol)) {}

double GroupElement::trace() const { return std::abs(rep_.tr()); }

bool GroupElement::approx_equal(const GroupElement& other, double tol) const {
  return max_abs_diff(mat(), other.mat()) <= tol;
}

GroupElement mul(const GroupElement& x, const GroupElement& y) { return GroupElement(x.rep() * y.rep()); }

GroupElement inverse(const GroupElement& x) { return GroupElement(x.rep().inverse()); }

Mat2 geodesic_matrix(double t) { return {std::exp(t / 2), 0, 0, std::exp(-t / 2)}; }
Mat2 stable_matrix(double t) { return {1, t, 0, 1}; }
Mat2 unstable_matrix(double t) { return {1, 0, t, 1}; }

GroupElement one_param(OneParam kind, double t) {
  switch (kind) {
    case OneParam::geodesic: return GroupElement(Matrix2(geodesic_matrix(t)));
    case OneParam::stable: return GroupElement(Matrix2(stable_matrix(t)));
    case OneParam::unstable: return GroupElement(Matrix2(unstable_matrix(t)));
  }
  return {};
}

GroupElement rotation(double angle) {
  const double c = std::cos(angle / 2), s = std::sin(angle / 2);
  return GroupElement(Matrix2(c, s, -s, c));
}

double trace(const GroupElement& x) { return x.trace(); }

Conjugacy classify(const GroupElement& x, double tol) {
  const double t = x.trace();
  if (t < 2 - tol) return Conjugacy::elliptic;
  if (t > 2 + tol) return Conjugacy::hyperbolic;
  return Conjugacy::parabolic;
}

double frobenius_gap(const Mat2& m) {
  const double plus = std::abs(m.a11 - 1) + std::abs(m.a12) + std::abs(m.a21) + std::abs(m.a22 - 1);
  const double minus = std::abs(m.a11 + 1) + std::abs(m.a12) + std::abs(m.a21) + std::abs(m.a22 + 1);
  return std::min(plus, minus);
}

double frobenius_gap(const GroupElement& x) { return frobenius_gap(x.mat()); }

Mat2 conj_by_geodesic(const Mat2& k, double t, double s) {
  return {k.a11 * std::exp((s - t) / 2), k.a12 * std::exp(-(s + t) / 2), k.a21 * std::exp((s + t) / 2),
          k.a22 * std::exp((t - s) / 2)};
}

Mat2 conj_by_horocycle(const Mat2& k, double s1, double s2) {
  const double top = k.a11 - k.a21 * s2;
  return {top, top * s1 - k.a22 * s2 + k.a12, k.a21, k.a21 * s1 + k.a22};
}

double hyperbolic_distance(double x1, double y1, double x2, double y2) {
  // cosh d = 1 + |z-w|^2 / (2 Im z Im w)
  const double u = ((x1 - x2) * (x1 - x2) + (y1 - y2) * (y1 - y2)) / (2 * y1 * y2);
  return std::log1p(u + std::sqrt(u * (2 + u)));
}

double displacement(const Mat2& g) {
  // ||G||_F^2 - 2 = (a11-a22)^2 + (a12+a21)^2 when det G = 1.
  const double d = g.a11 - g.a22, o = g.a12 + g.a21;
  const double u = (d * d + o * o) / 2;
  return std::log1p(u + std::sqrt(u * (2 + u)));
}

double displacement(const GroupElement& g) { return displacement(g.mat()); }

std::ostream& operator<<(std::ostream& os, const Mat2& m) {
  return os << "[[" << m.a11 << ", " << m.a12 << "], [" << m.a21 << ", " << m.a22 << "]]";
}

std::ostream& operator<<(std::ostream& os, const GroupElement& g) { return os << g.mat(); }

}  // namespace horolab
