#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <vector>

#include "otreg/errors.hpp"
#include "otreg/rng.hpp"

namespace otreg {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// One convex piece of a domain: a ball or a convex polytope given by
// normalized halfspaces  a_i . x <= b_i,  |a_i| = 1.
struct ConvexPiece {
  enum class Kind { Ball, Polytope };
  Kind kind;
  // ball
  VectorXd center;
  double radius = 0.0;
  // polytope
  MatrixXd normals;  // rows a_i
  VectorXd offsets;  // b_i
  VectorXd box_lo, box_hi;
  VectorXd interior_point;

  bool contains(const VectorXd& x, double tol) const {
    if (kind == Kind::Ball) return (x - center).norm() <= radius + tol;
    return ((normals * x - offsets).array() <= tol).all();
  }

  // Positive inside, negative outside; for a convex piece this is the exact
  // signed distance for balls and the halfspace margin for polytopes.
  double interior_distance(const VectorXd& x) const {
    if (kind == Kind::Ball) return radius - (x - center).norm();
    return (offsets - normals * x).minCoeff();
  }

  // Ray-cast from an interior anchor: returns t > 0 with anchor + t*dir on
  // the boundary.
  double boundary_ray(const VectorXd& anchor, const VectorXd& dir) const {
    if (kind == Kind::Ball) {
      VectorXd w = anchor - center;
      double b = w.dot(dir), c = w.squaredNorm() - radius * radius;
      return -b + std::sqrt(std::max(0.0, b * b - c));
    }
    double t = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < offsets.size(); ++i) {
      double denom = normals.row(i).dot(dir);
      if (denom > 1e-14) {
        double ti = (offsets[i] - normals.row(i).dot(anchor)) / denom;
        t = std::min(t, std::max(ti, 0.0));
      }
    }
    if (!std::isfinite(t)) throw DomainError("unbounded polytope ray");
    return t;
  }
};

// Bounded domain: a single convex piece or a finite union of pieces.
// Membership tolerance follows the closed-set convention: boundary samples
// must pass contains().
class DomainSpec {
 public:
  static DomainSpec ball(VectorXd center, double radius) {
    ConvexPiece p;
    p.kind = ConvexPiece::Kind::Ball;
    p.center = std::move(center);
    p.radius = radius;
    p.box_lo = p.center.array() - radius;
    p.box_hi = p.center.array() + radius;
    p.interior_point = p.center;
    DomainSpec d;
    d.pieces_.push_back(std::move(p));
    d.finalize();
    return d;
  }

  // Halfspaces a_i . x <= b_i (rows of A). Requires a bounded polytope;
  // vertices are enumerated (n <= 3) to get a bounding box.
  static DomainSpec polytope(MatrixXd A, VectorXd b);

  static DomainSpec box(const VectorXd& lo, const VectorXd& hi) {
    const int n = static_cast<int>(lo.size());
    MatrixXd A = MatrixXd::Zero(2 * n, n);
    VectorXd c(2 * n);
    for (int i = 0; i < n; ++i) {
      A(2 * i, i) = 1.0;
      c[2 * i] = hi[i];
      A(2 * i + 1, i) = -1.0;
      c[2 * i + 1] = -lo[i];
    }
    return polytope(A, c);
  }

  static DomainSpec unite(std::vector<DomainSpec> parts) {
    DomainSpec d;
    for (auto& part : parts)
      for (auto& p : part.pieces_) d.pieces_.push_back(std::move(p));
    if (d.pieces_.empty()) throw DomainError("empty union");
    d.finalize();
    return d;
  }

  int dimension() const { return static_cast<int>(box_lo_.size()); }
  double diameter() const { return (box_hi_ - box_lo_).norm(); }
  const VectorXd& box_lo() const { return box_lo_; }
  const VectorXd& box_hi() const { return box_hi_; }
  double membership_tol() const { return 1e-9 * diameter(); }
  const std::vector<ConvexPiece>& pieces() const { return pieces_; }
  bool convex() const { return pieces_.size() == 1; }

  bool contains(const VectorXd& x) const {
    const double tol = membership_tol();
    for (const auto& p : pieces_)
      if (p.contains(x, tol)) return true;
    return false;
  }

  // Positive inside. For a union this is the best per-piece clearance, a
  // lower bound on the true clearance when pieces overlap.
  double interior_distance(const VectorXd& x) const {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& p : pieces_) best = std::max(best, p.interior_distance(x));
    return best;
  }

  std::vector<VectorXd> boundary_sample(int count, Rng& rng) const {
    std::vector<VectorXd> out;
    out.reserve(count);
    const double tol = membership_tol();
    int guard = 0;
    while (static_cast<int>(out.size()) < count && guard < 200 * count) {
      ++guard;
      const auto& p = pieces_[rng.next_u64() % pieces_.size()];
      VectorXd dir = rng.on_sphere(dimension());
      double t = p.boundary_ray(p.interior_point, dir);
      VectorXd x = p.interior_point + t * dir;
      // Skip points swallowed by another piece of the union.
      bool interior_elsewhere = false;
      for (const auto& q : pieces_)
        if (&q != &p && q.interior_distance(x) > tol) interior_elsewhere = true;
      if (!interior_elsewhere) out.push_back(std::move(x));
    }
    if (static_cast<int>(out.size()) < count)
      throw DomainError("boundary sampling failed to reach requested count");
    return out;
  }

  // Deterministic boundary samples for one convex piece (for hull builds).
  std::vector<VectorXd> boundary_grid(int count) const {
    if (!convex()) throw DomainError("boundary_grid needs a convex domain");
    const auto& p = pieces_[0];
    const int n = dimension();
    std::vector<VectorXd> out;
    out.reserve(count);
    if (n == 2) {
      for (int i = 0; i < count; ++i) {
        double th = 2.0 * M_PI * i / count;
        VectorXd dir(2);
        dir << std::cos(th), std::sin(th);
        out.push_back(p.interior_point + p.boundary_ray(p.interior_point, dir) * dir);
      }
    } else if (n == 3) {
      // Fibonacci sphere directions.
      const double ga = M_PI * (3.0 - std::sqrt(5.0));
      for (int i = 0; i < count; ++i) {
        double z = 1.0 - 2.0 * (i + 0.5) / count;
        double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        double th = ga * i;
        VectorXd dir(3);
        dir << r * std::cos(th), r * std::sin(th), z;
        out.push_back(p.interior_point + p.boundary_ray(p.interior_point, dir) * dir);
      }
    } else {
      throw DomainError("boundary_grid supports n = 2 or 3");
    }
    return out;
  }

  VectorXd sample_interior(Rng& rng) const {
    for (int k = 0; k < 100000; ++k) {
      VectorXd x = rng.in_box(box_lo_, box_hi_);
      if (contains(x)) return x;
    }
    throw DomainError("interior rejection sampling failed");
  }

  // Deterministic low-discrepancy interior samples; index-stable so that sup
  // estimates are monotone in the sample count.
  VectorXd halton_interior(std::uint64_t index, int base_offset = 0) const {
    std::uint64_t i = index;
    for (int k = 0; k < 100000; ++k, i += 7919) {
      VectorXd u = halton_point(i, dimension(), base_offset);
      VectorXd x = box_lo_ + u.cwiseProduct(box_hi_ - box_lo_);
      if (contains(x)) return x;
    }
    throw DomainError("halton interior sampling failed");
  }

  VectorXd an_interior_point() const { return pieces_[0].interior_point; }

 private:
  void finalize() {
    box_lo_ = pieces_[0].box_lo;
    box_hi_ = pieces_[0].box_hi;
    for (const auto& p : pieces_) {
      box_lo_ = box_lo_.cwiseMin(p.box_lo);
      box_hi_ = box_hi_.cwiseMax(p.box_hi);
    }
  }

  std::vector<ConvexPiece> pieces_;
  VectorXd box_lo_, box_hi_;
};

// Enumerate vertices of {A x <= b} for n <= 3 by intersecting n-subsets of
// hyperplanes; returns only feasible intersection points.
std::vector<VectorXd> polytope_vertices(const MatrixXd& A, const VectorXd& b,
                                        double tol = 1e-9);

}  // namespace otreg
