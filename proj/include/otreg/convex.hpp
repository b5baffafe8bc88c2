#pragma once

#include <Eigen/Dense>
#include <array>
#include <vector>

#include "otreg/errors.hpp"

namespace otreg {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct AffineMap {
  MatrixXd linear;
  VectorXd translation;
  double det = 0.0;

  AffineMap() = default;
  AffineMap(MatrixXd lin, VectorXd t)
      : linear(std::move(lin)), translation(std::move(t)) {
    det = linear.determinant();
    if (std::abs(det) < 1e-300) throw Error("degenerate affine map");
  }

  static AffineMap identity(int n) {
    return AffineMap(MatrixXd::Identity(n, n), VectorXd::Zero(n));
  }

  VectorXd operator()(const VectorXd& q) const {
    return linear * q + translation;
  }
  VectorXd apply_inverse(const VectorXd& x) const {
    return linear.partialPivLu().solve(x - translation);
  }
  AffineMap inverse() const {
    MatrixXd inv = linear.inverse();
    return AffineMap(inv, -inv * translation);
  }
  // (this o other)(q) = this(other(q))
  AffineMap compose(const AffineMap& other) const {
    return AffineMap(linear * other.linear,
                     linear * other.translation + translation);
  }
};

// Compact convex polytope in dimension 2 or 3 with both vertex and
// halfspace descriptions, volume and barycenter cached.
class ConvexBody {
 public:
  static ConvexBody from_points(const std::vector<VectorXd>& pts);
  static ConvexBody from_halfspaces(const MatrixXd& A, const VectorXd& b);

  int dimension() const { return dim_; }
  const std::vector<VectorXd>& vertices() const { return vertices_; }
  const MatrixXd& normals() const { return normals_; }
  const VectorXd& offsets() const { return offsets_; }
  double volume() const { return volume_; }
  const VectorXd& barycenter() const { return barycenter_; }

  bool contains(const VectorXd& p, double tol = 1e-9) const {
    return ((normals_ * p - offsets_).array() <= tol).all();
  }
  // Positive inside: min halfspace margin.
  double margin(const VectorXd& p) const {
    return (offsets_ - normals_ * p).minCoeff();
  }
  double support(const VectorXd& dir) const {
    double s = -std::numeric_limits<double>::infinity();
    for (const auto& v : vertices_) s = std::max(s, dir.dot(v));
    return s;
  }
  double diameter() const;

  ConvexBody map(const AffineMap& L) const;  // image L(body)

 private:
  int dim_ = 0;
  std::vector<VectorXd> vertices_;  // 2D: ccw order
  MatrixXd normals_;                // unit outward normals
  VectorXd offsets_;
  double volume_ = 0.0;
  VectorXd barycenter_;
  mutable double diameter_ = -1.0;  // lazily computed; vertices are frozen
};

// Convex hull of 2D points, counterclockwise (Andrew monotone chain).
std::vector<VectorXd> convex_hull_2d(std::vector<VectorXd> pts);

// John normalization: affine L with B_1 subset L^-1(S) subset B_n, built
// from the minimum-volume enclosing ellipsoid of the vertices shrunk about
// its center by the dimension. Containment is certified by exact
// point-in-body tests; cert_tol is the allowed violation.
AffineMap john_ellipsoid(const ConvexBody& S, double cert_tol = 1e-9);

// Volume of the convex hull of a point set (any count >= dim+1), dims 1-3.
double hull_measure(const std::vector<VectorXd>& pts, int dim);

// vol_n(Z) / (H^{n'}(slice) * H^{n''}(projection)) for the split
// R^n = R^{n'} x R^{n''}, slice through anchor (only the last n'' anchor
// coordinates are used).
double slice_projection_ratio(const ConvexBody& Z, int n_prime,
                              const VectorXd& anchor);

}  // namespace otreg
