#include "otreg/chart.hpp"

#include <cmath>

namespace otreg {

namespace {

VectorXd dual_coord(const CostOracle& c, const VectorXd& x,
                    const VectorXd& ytilde) {
  return -grad_y(c, x, ytilde);
}

// Jacobian of x -> -D_y c(x, ytilde): entry (k, j) = -c_{y_k x_j}.
MatrixXd dual_jacobian(const CostOracle& c, const VectorXd& x,
                       const VectorXd& ytilde) {
  return -cross_hessian_checked(c, x, ytilde).transpose();
}

VectorXd newton_invert_impl(const CostOracle& c, const VectorXd& ytilde,
                            const VectorXd& q, VectorXd x, double tol) {
  for (int it = 0; it < 30; ++it) {
    VectorXd r = dual_coord(c, x, ytilde) - q;
    if (r.norm() <= tol) return x;
    MatrixXd J = dual_jacobian(c, x, ytilde);
    VectorXd step = J.partialPivLu().solve(r);
    // Damping guard: halve on residual increase.
    double r0 = r.norm();
    for (int half = 0; half < 12; ++half) {
      VectorXd xn = x - step;
      if ((dual_coord(c, xn, ytilde) - q).norm() < r0) {
        x = xn;
        break;
      }
      step *= 0.5;
      if (half == 11) x = xn;
    }
  }
  if ((dual_coord(c, x, ytilde) - q).norm() <= tol) return x;
  throw ChartInversionError("dual-coordinate inversion did not converge", q);
}

VectorXd newton_invert(const CostOracle& c, const VectorXd& ytilde,
                       const VectorXd& q, VectorXd x, double tol) {
  try {
    return newton_invert_impl(c, ytilde, q, std::move(x), tol);
  } catch (const BiTwistError&) {
    // Wandering into a degenerate cross-Hessian is a divergence symptom.
    throw ChartInversionError("dual-coordinate inversion hit a singular point",
                              q);
  }
}

}  // namespace

CoordinateChart::CoordinateChart(CostOracle cost, DomainSpec source,
                                 VectorXd ytilde, int grid_points)
    : cost_(std::move(cost)),
      source_(std::move(source)),
      ytilde_(std::move(ytilde)),
      boundary_resolution_(source_.dimension() == 2 ? 1024 : 10000) {
  seed_x_.reserve(grid_points);
  seed_q_.reserve(grid_points);
  for (int i = 0; i < grid_points; ++i) {
    VectorXd x = source_.halton_interior(static_cast<std::uint64_t>(i));
    seed_x_.push_back(x);
    seed_q_.push_back(dual_coord(cost_, x, ytilde_));
  }
}

VectorXd CoordinateChart::forward(const VectorXd& x) const {
  return dual_coord(cost_, x, ytilde_);
}

VectorXd CoordinateChart::inverse(const VectorXd& q) const {
  size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < seed_q_.size(); ++i) {
    double d = (seed_q_[i] - q).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  const double tol = 1e-12 * (1.0 + q.norm() + source_.diameter());
  return newton_invert(cost_, ytilde_, q, seed_x_[best], tol);
}

const ConvexBody& CoordinateChart::image_hull() const {
  if (!hull_) {
    std::vector<VectorXd> images;
    if (source_.convex()) {
      for (const auto& x : source_.boundary_grid(boundary_resolution_))
        images.push_back(forward(x));
    } else {
      Rng rng(0x00c0ffee);
      DomainSpec s = source_;
      for (const auto& x : s.boundary_sample(boundary_resolution_, rng))
        images.push_back(forward(x));
    }
    hull_ = std::make_unique<ConvexBody>(ConvexBody::from_points(images));
  }
  return *hull_;
}

double CoordinateChart::modified_cost(const VectorXd& q,
                                      const VectorXd& y) const {
  VectorXd x = inverse(q);
  return cost_(x, y) - cost_(x, ytilde_);
}

VectorXd CoordinateChart::modified_cost_grad_q(const VectorXd& q,
                                               const VectorXd& y) const {
  // D_q c~ = (Dx/Dq)^T (D_x c(x,y) - D_x c(x,ytilde)); Dq/Dx is the dual
  // Jacobian.
  VectorXd x = inverse(q);
  MatrixXd J = dual_jacobian(cost_, x, ytilde_);
  VectorXd g = grad_x(cost_, x, y) - grad_x(cost_, x, ytilde_);
  return J.transpose().partialPivLu().solve(g);
}

double CoordinateChart::modify(
    const std::function<double(const VectorXd&)>& u, const VectorXd& q) const {
  VectorXd x = inverse(q);
  return u(x) + cost_(x, ytilde_);
}

CoordinateChart make_chart(const CostOracle& c, const DomainSpec& U,
                           const VectorXd& ytilde) {
  return CoordinateChart(c, U, ytilde);
}

VectorXd invert_dual(const CostOracle& c, const VectorXd& ytilde,
                     const VectorXd& q, const VectorXd& guess) {
  const double tol = 1e-12 * (1.0 + q.norm() + guess.norm());
  return newton_invert(c, ytilde, q, guess, tol);
}

VectorXd c_segment(const CostOracle& c, const VectorXd& anchor,
                   const VectorXd& endpoint0, const VectorXd& endpoint1,
                   double t, SegmentSide side) {
  if (t < 0.0 || t > 1.0) throw DomainError("segment parameter outside [0,1]");
  const CostOracle cc = (side == SegmentSide::X) ? c : transpose(c);
  if (t == 0.0) return endpoint0;
  if (t == 1.0) return endpoint1;
  VectorXd q0 = -grad_y(cc, endpoint0, anchor);
  VectorXd q1 = -grad_y(cc, endpoint1, anchor);
  // Continuation from the nearest endpoint keeps Newton in its basin.
  int steps = 4;
  VectorXd x = (t < 0.5) ? endpoint0 : endpoint1;
  double s0 = (t < 0.5) ? 0.0 : 1.0;
  for (int k = 1; k <= steps; ++k) {
    double s = s0 + (t - s0) * k / steps;
    x = invert_dual(cc, anchor, (1.0 - s) * q0 + s * q1, x);
  }
  return x;
}

CConvexityReport check_c_convexity(const CostOracle& c, const DomainSpec& U,
                                   const DomainSpec& V, bool strong,
                                   int samples) {
  if (samples < U.dimension() + 1)
    throw DomainError("too few samples for a convexity verdict");
  CConvexityReport rep;
  const int probes = 8;
  const int interior_count = 256;
  const double tol = 1e-7 * U.diameter();
  Rng rng(0x5eed);
  for (int p = 0; p < probes; ++p) {
    VectorXd yt = V.halton_interior(static_cast<std::uint64_t>(p), 3);
    std::vector<VectorXd> boundary_images;
    if (U.convex()) {
      DomainSpec s = U;
      for (const auto& x : s.boundary_grid(samples))
        boundary_images.push_back(-grad_y(c, x, yt));
    } else {
      DomainSpec s = U;
      for (const auto& x : s.boundary_sample(samples, rng))
        boundary_images.push_back(-grad_y(c, x, yt));
    }
    ConvexBody hull = ConvexBody::from_points(boundary_images);
    // Convexity of the image means the hull adds nothing: any point well
    // inside the hull must pull back into the source. Hull membership of
    // forward images is automatic, so we probe the converse direction.
    std::vector<std::pair<VectorXd, VectorXd>> seeds;  // (q image, x)
    if (U.convex()) {
      for (const auto& x : U.boundary_grid(64))
        seeds.push_back({-grad_y(c, x, yt), x});
    } else {
      for (const auto& x : U.boundary_sample(64, rng))
        seeds.push_back({-grad_y(c, x, yt), x});
    }
    VectorXd lo = hull.vertices().front(), hi = lo;
    for (const auto& v : hull.vertices()) {
      lo = lo.cwiseMin(v);
      hi = hi.cwiseMax(v);
    }
    const double depth_tol = 1e-3 * hull.diameter();
    for (int i = 0; i < interior_count; ++i) {
      VectorXd u01 = halton_point(static_cast<std::uint64_t>(i),
                                  U.dimension(), 6);
      VectorXd q = lo + u01.cwiseProduct(hi - lo);
      double depth = hull.margin(q);
      if (depth <= depth_tol) continue;
      size_t best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (size_t s = 0; s < seeds.size(); ++s) {
        double d = (seeds[s].first - q).squaredNorm();
        if (d < bd) {
          bd = d;
          best = s;
        }
      }
      bool in_source = false;
      VectorXd x_wit;
      try {
        x_wit = invert_dual(c, yt, q, seeds[best].second);
        in_source = U.contains(x_wit) ||
                    U.interior_distance(x_wit) > -1e-6 * U.diameter();
      } catch (const Error&) {
        in_source = false;
      }
      if (!in_source && depth > rep.worst_violation) {
        rep.worst_violation = depth;
        rep.witness_x = x_wit.size() ? x_wit : q;
        rep.witness_ytilde = yt;
      }
    }
    if (strong) {
      if (U.dimension() != 2)
        throw DomainError("boundary-curvature fit supports n = 2 only");
      rep.strong_checked = true;
      // Circle fit (algebraic) over k nearest boundary images per point.
      const int k = 12;
      double min_curv = std::numeric_limits<double>::infinity();
      for (size_t i = 0; i < boundary_images.size();
           i += std::max<size_t>(1, boundary_images.size() / 64)) {
        const VectorXd& p0 = boundary_images[i];
        std::vector<std::pair<double, size_t>> order;
        for (size_t j = 0; j < boundary_images.size(); ++j)
          if (j != i) order.push_back({(boundary_images[j] - p0).norm(), j});
        std::partial_sort(order.begin(), order.begin() + k, order.end());
        MatrixXd A(k + 1, 3);
        VectorXd b(k + 1);
        for (int r = 0; r <= k; ++r) {
          VectorXd pr = (r == 0) ? p0 : boundary_images[order[r - 1].second];
          VectorXd d = pr - p0;
          A(r, 0) = d[0];
          A(r, 1) = d[1];
          A(r, 2) = 1.0;
          b[r] = d.squaredNorm();
        }
        VectorXd sol = A.colPivHouseholderQr().solve(b);
        Eigen::Vector2d center0(sol[0] / 2, sol[1] / 2);  // relative to p0
        double R = std::sqrt(std::max(0.0, sol[2] + center0.squaredNorm()));
        if (R > 1e-12) min_curv = std::min(min_curv, 1.0 / R);
      }
      if (p == 0 || min_curv < rep.min_curvature) rep.min_curvature = min_curv;
    }
    ++rep.ytilde_probes;
  }
  rep.convex = rep.worst_violation <= tol;
  return rep;
}

Renormalized renormalize(std::function<double(const VectorXd&)> u_tilde,
                         std::function<double(const VectorXd&, const VectorXd&)>
                             c_tilde,
                         const AffineMap& L, int n, const VectorXd& anchor) {
  Renormalized r;
  r.L = L;
  r.scale = std::pow(std::abs(L.det), -2.0 / n);
  // det(scale * L^T) = scale^n |det L| = |det L|^{-1}: the target map
  // contracts exactly so measures pick up the |det L| factor.
  r.Lstar = AffineMap(r.scale * L.linear.transpose(),
                      anchor - r.scale * L.linear.transpose() * anchor);
  double scale = r.scale;
  AffineMap Lc = L, Lstar = r.Lstar;
  r.u_star = [u_tilde, Lc, scale](const VectorXd& q) {
    return scale * u_tilde(Lc(q));
  };
  r.c_star = [c_tilde, Lc, Lstar, scale](const VectorXd& q,
                                         const VectorXd& ystar) {
    return scale * c_tilde(Lc(q), Lstar.apply_inverse(ystar));
  };
  return r;
}

}  // namespace otreg
