#include "otreg/curvature.hpp"

#include <array>
#include <cmath>

#include "otreg/chart.hpp"

namespace otreg {

namespace {

// Evaluates c(x(s), y(t)) on the doubled c-segment through (x, y) with
// velocities (xi, eta): both factors are affine in their dual coordinates.
struct SegmentPair {
  const CostOracle* c;
  VectorXd x0, y0;
  VectorXd qx0, qdotx;  // x-side dual coordinates: q(s) = qx0 + s qdotx
  VectorXd qy0, qdoty;  // y-side
  CostOracle ct;
  mutable VectorXd last_x, last_y;  // Newton warm starts

  SegmentPair(const CostOracle& cost, const VectorXd& x, const VectorXd& y,
              const VectorXd& xi, const VectorXd& eta)
      : c(&cost), x0(x), y0(y), ct(transpose(cost)), last_x(x), last_y(y) {
    MatrixXd A = cross_hessian_checked(cost, x, y);
    // x-side: q = -D_y c(x, y0), dq/ds = -A^T xi.
    qx0 = -grad_y(cost, x, y);
    qdotx = -A.transpose() * xi;
    // y-side: p = -D_x c(x0, y), dp/dt = -A eta.
    qy0 = -grad_x(cost, x, y);
    qdoty = -A * eta;
  }

  VectorXd x_at(double s) const {
    last_x = invert_dual(*c, y0, qx0 + s * qdotx, last_x);
    return last_x;
  }
  VectorXd y_at(double t) const {
    last_y = invert_dual(ct, x0, qy0 + t * qdoty, last_y);
    return last_y;
  }
};

// 5-point second-derivative stencil, O(h^4).
double second_diff(const std::array<double, 5>& f, double h) {
  return (-f[0] + 16 * f[1] - 30 * f[2] + 16 * f[3] - f[4]) / (12 * h * h);
}

double mixed_fourth(const SegmentPair& seg, double hs, double ht) {
  std::array<VectorXd, 5> xs, ys;
  for (int i = 0; i < 5; ++i) {
    xs[i] = seg.x_at((i - 2) * hs);
    ys[i] = seg.y_at((i - 2) * ht);
  }
  std::array<double, 5> g;
  for (int i = 0; i < 5; ++i) {
    std::array<double, 5> f;
    for (int j = 0; j < 5; ++j) f[j] = (*seg.c)(xs[i], ys[j]);
    g[i] = second_diff(f, ht);
  }
  return second_diff(g, hs);
}

}  // namespace

double cross_curvature(const CostOracle& c, const VectorXd& x,
                       const VectorXd& y, const VectorXd& xi,
                       const VectorXd& eta, double half_len_s,
                       double half_len_t) {
  if (xi.norm() < 1e-14 || eta.norm() < 1e-14)
    throw DomainError("zero direction for curvature sample");
  double hl = std::min(half_len_s, half_len_t);
  if (hl < 1e-8)
    throw DomainError("domain too small for the curvature stencil");
  SegmentPair seg(c, x, y, xi, eta);
  // Stencil spans 40% of the admissible half-length: the fourth mixed
  // difference amplifies roundoff like eps/h^4, so steps much below 1e-2
  // drown the signal for order-one costs.
  const double hs = 0.2 * half_len_s, ht = 0.2 * half_len_t;
  double coarse = mixed_fourth(seg, hs, ht);
  double fine = mixed_fourth(seg, hs / 2, ht / 2);
  return -(16.0 * fine - coarse) / 15.0;
}

double null_defect(const CostOracle& c, const VectorXd& x, const VectorXd& y,
                   const VectorXd& xi, const VectorXd& eta) {
  return std::abs(xi.dot(cross_hessian(c, x, y) * eta));
}

VectorXd null_project(const CostOracle& c, const VectorXd& x,
                      const VectorXd& y, const VectorXd& xi,
                      const VectorXd& eta) {
  MatrixXd A = cross_hessian(c, x, y);
  VectorXd w = A.transpose() * xi;  // eta must be orthogonal to w
  double wn2 = w.squaredNorm();
  if (wn2 < 1e-28) return VectorXd::Zero(eta.size());
  VectorXd e = eta - w * (w.dot(eta) / wn2);
  double n = e.norm();
  if (n < 1e-10) return VectorXd::Zero(eta.size());
  return e / n;
}

CurvatureReport classify(const CostOracle& c, const DomainSpec& U,
                         const DomainSpec& V, int samples, double tol,
                         std::uint64_t seed) {
  if (samples < 1) throw DomainError("empty sampling plan");
  CurvatureReport rep;
  rep.tol = tol;
  Rng rng(seed);
  const int n = U.dimension();
  auto consider = [&](CrossCurvatureSample s, bool is_null) {
    if (s.value < rep.min_value) {
      rep.min_value = s.value;
      rep.argmin = s;
    }
    if (is_null) {
      ++rep.null_count;
      if (s.value < rep.min_over_null_pairs) {
        rep.min_over_null_pairs = s.value;
        rep.argmin_null = s;
      }
    }
  };
  for (int i = 0; i < samples; ++i) {
    VectorXd x = U.halton_interior(static_cast<std::uint64_t>(i));
    VectorXd y = V.halton_interior(static_cast<std::uint64_t>(i), 3);
    // Keep room for the segment stencil.
    double dx = U.interior_distance(x), dy = V.interior_distance(y);
    if (dx < 0.1 * U.diameter() || dy < 0.1 * V.diameter()) continue;
    VectorXd xi = rng.on_sphere(n), eta = rng.on_sphere(n);
    CrossCurvatureSample s;
    s.x = x;
    s.y = y;
    s.xi = xi;
    s.eta = eta;
    double hls = 0.5 * dx, hlt = 0.5 * dy;
    try {
      s.value = cross_curvature(c, x, y, xi, eta, hls, hlt);
    } catch (const Error&) {
      continue;
    }
    MatrixXd A = cross_hessian(c, x, y);
    double scale = A.norm();
    s.null_defect = std::abs(xi.dot(A * eta));
    bool is_null = s.null_defect <= 1e-6 * scale;
    consider(s, is_null);
    ++rep.sample_count;
    // Constructed null pair from the same draw.
    VectorXd eta0 = null_project(c, x, y, xi, eta);
    if (eta0.norm() > 0.5) {
      CrossCurvatureSample sn = s;
      sn.eta = eta0;
      sn.null_defect = std::abs(xi.dot(A * eta0));
      try {
        sn.value = cross_curvature(c, x, y, xi, eta0, hls, hlt);
      } catch (const Error&) {
        continue;
      }
      consider(sn, true);
      ++rep.sample_count;
    }
  }
  rep.b3_nonneg = rep.min_value >= -tol;
  rep.a3w_vacuous = rep.null_count == 0;
  rep.a3w_nonneg =
      rep.b3_nonneg || (!rep.a3w_vacuous && rep.min_over_null_pairs >= -tol);
  rep.a3s_margin =
      (!rep.a3w_vacuous && rep.min_over_null_pairs > 0.0)
          ? rep.min_over_null_pairs
          : 0.0;
  return rep;
}

}  // namespace otreg
