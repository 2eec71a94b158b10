#pragma once

#include <array>
#include <iosfwd>
#include <stdexcept>
#include <string>

namespace horolab {

/// Numerical slack used by the SL(2,R) layer. Every comparison goes through one of these.
struct Tolerances {
  double det = 1e-12;          // |det-1| accepted as is
  double det_renorm = 1e-6;    // |det-1| renormalized up to this, rejected beyond
  double eq = 1e-9;            // entrywise equality of canonical representatives
  double classify = 1e-9;      // |tr-2| band for parabolic
};

inline constexpr Tolerances kDefaultTol{};

class InvalidMatrix : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Plain 2x2 real matrix with no constraint; used for Lie algebra elements and raw products.
struct Mat2 {
  double a11 = 0, a12 = 0, a21 = 0, a22 = 0;

  static constexpr Mat2 identity() { return {1, 0, 0, 1}; }

  double det() const { return a11 * a22 - a12 * a21; }
  double tr() const { return a11 + a22; }
  Mat2 transpose() const { return {a11, a21, a12, a22}; }
  double frobenius2() const { return a11 * a11 + a12 * a12 + a21 * a21 + a22 * a22; }
  std::array<double, 4> entries() const { return {a11, a12, a21, a22}; }

  friend Mat2 operator*(const Mat2& x, const Mat2& y) {
    return {x.a11 * y.a11 + x.a12 * y.a21, x.a11 * y.a12 + x.a12 * y.a22,
            x.a21 * y.a11 + x.a22 * y.a21, x.a21 * y.a12 + x.a22 * y.a22};
  }
  friend Mat2 operator+(const Mat2& x, const Mat2& y) {
    return {x.a11 + y.a11, x.a12 + y.a12, x.a21 + y.a21, x.a22 + y.a22};
  }
  friend Mat2 operator-(const Mat2& x, const Mat2& y) {
    return {x.a11 - y.a11, x.a12 - y.a12, x.a21 - y.a21, x.a22 - y.a22};
  }
  friend Mat2 operator*(double s, const Mat2& x) { return {s * x.a11, s * x.a12, s * x.a21, s * x.a22}; }
  Mat2 operator-() const { return {-a11, -a12, -a21, -a22}; }
  bool operator==(const Mat2&) const = default;
};

/// max |x_ij - y_ij|
double max_abs_diff(const Mat2& x, const Mat2& y);

/// A unit-determinant 2x2 matrix (an element of SL(2,R)).
///
/// Construction checks the determinant: within `tol.det` of 1 the entries are kept,
/// within `tol.det_renorm` they are rescaled by 1/sqrt(det), beyond that the input is
/// rejected. Both thresholds are relative to |a11 a22| + |a12 a21| so that products of
/// large matrices are judged by their roundoff, not by their size.
class Matrix2 {
 public:
  Matrix2() : m_(Mat2::identity()) {}
  Matrix2(double a11, double a12, double a21, double a22, const Tolerances& tol = kDefaultTol);
  explicit Matrix2(const Mat2& m, const Tolerances& tol = kDefaultTol);

  const Mat2& mat() const { return m_; }
  double a11() const { return m_.a11; }
  double a12() const { return m_.a12; }
  double a21() const { return m_.a21; }
  double a22() const { return m_.a22; }
  double det() const { return m_.det(); }
  double tr() const { return m_.tr(); }

  Matrix2 inverse() const;
  friend Matrix2 operator*(const Matrix2& x, const Matrix2& y) { return Matrix2(x.m_ * y.m_); }
  Matrix2 operator-() const;

 private:
  Mat2 m_;
};

enum class OneParam { geodesic, stable, unstable };
enum class Conjugacy { elliptic, parabolic, hyperbolic };

std::string to_string(OneParam k);
std::string to_string(Conjugacy c);

/// An element of PSL(2,R): the canonical representative of +-G.
///
/// Canonical sign: trace > 0, or for |trace| <= tol.eq the first entry (a11, a12, a21)
/// exceeding tol.eq in magnitude is positive.
class GroupElement {
 public:
  GroupElement() = default;
  explicit GroupElement(const Matrix2& m, const Tolerances& tol = kDefaultTol);
  GroupElement(double a11, double a12, double a21, double a22, const Tolerances& tol = kDefaultTol)
      : GroupElement(Matrix2(a11, a12, a21, a22, tol), tol) {}

  static GroupElement identity() { return {}; }

  const Matrix2& rep() const { return rep_; }
  const Mat2& mat() const { return rep_.mat(); }

  /// |a11 + a22|, independent of the sign representative.
  double trace() const;

  bool approx_equal(const GroupElement& other, double tol = kDefaultTol.eq) const;

 private:
  Matrix2 rep_;
};

/// Canonical sign representative of m (idempotent).
Matrix2 canonicalize(const Matrix2& m, const Tolerances& tol = kDefaultTol);

GroupElement mul(const GroupElement& x, const GroupElement& y);
GroupElement inverse(const GroupElement& x);
inline GroupElement operator*(const GroupElement& x, const GroupElement& y) { return mul(x, y); }

/// pi(A_t), pi(B_t) or pi(C_t).
GroupElement one_param(OneParam kind, double t);
inline GroupElement geo(double t) { return one_param(OneParam::geodesic, t); }
inline GroupElement horo(double t) { return one_param(OneParam::stable, t); }
inline GroupElement unhoro(double t) { return one_param(OneParam::unstable, t); }

/// Rotation of the upper half-plane about i by `angle` (matrix entries use angle/2).
GroupElement rotation(double angle);

double trace(const GroupElement& x);
Conjugacy classify(const GroupElement& x, double tol = kDefaultTol.classify);

/// min over +-G of |g11-1| + |g12| + |g21| + |g22-1|.
double frobenius_gap(const GroupElement& x);
double frobenius_gap(const Mat2& m);

/// A_{-t} K A_s, evaluated entrywise from the closed form.
Mat2 conj_by_geodesic(const Mat2& k, double t, double s);
/// B_{-s2} K B_{s1}, evaluated entrywise from the closed form.
Mat2 conj_by_horocycle(const Mat2& k, double s1, double s2);

Mat2 geodesic_matrix(double t);
Mat2 stable_matrix(double t);
Mat2 unstable_matrix(double t);

/// Hyperbolic distance in the upper half-plane model.
double hyperbolic_distance(double x1, double y1, double x2, double y2);
/// d_H(i, G i) from the Frobenius norm: ||G||_F^2 = 2 cosh d_H(i, G i).
double displacement(const Mat2& g);
double displacement(const GroupElement& g);

std::ostream& operator<<(std::ostream& os, const Mat2& m);
std::ostream& operator<<(std::ostream& os, const GroupElement& g);

}  // namespace horolab
