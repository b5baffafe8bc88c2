#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "otreg/convex.hpp"
#include "otreg/cost.hpp"
#include "otreg/domain.hpp"

namespace otreg {

// Dual coordinates anchored at a target ytilde: q = -D_y c(x, ytilde).
// Curves that are affine in q are exactly the c-segments with respect to
// ytilde, and the modified cost below vanishes identically at ytilde.
class CoordinateChart {
 public:
  CoordinateChart(CostOracle cost, DomainSpec source, VectorXd ytilde,
                  int grid_points = 256);

  const CostOracle& cost() const { return cost_; }
  const DomainSpec& source() const { return source_; }
  const VectorXd& base_target() const { return ytilde_; }

  VectorXd forward(const VectorXd& x) const;
  // Newton inversion seeded from the nearest forward-image grid point;
  // throws ChartInversionError after 30 iterations without convergence.
  VectorXd inverse(const VectorXd& q) const;

  // Convex hull of forward boundary images (the chart's image domain
  // surrogate); built lazily at the chart's boundary resolution.
  const ConvexBody& image_hull() const;

  // Modified cost: c~(q, y) = c(x(q), y) - c(x(q), ytilde).
  double modified_cost(const VectorXd& q, const VectorXd& y) const;
  VectorXd modified_cost_grad_q(const VectorXd& q, const VectorXd& y) const;

  // Modified potential: u~(q) = u(x(q)) + c(x(q), ytilde).
  double modify(const std::function<double(const VectorXd&)>& u,
                const VectorXd& q) const;

 private:
  CostOracle cost_;
  DomainSpec source_;
  VectorXd ytilde_;
  std::vector<VectorXd> seed_x_, seed_q_;  // Newton initial-guess table
  mutable std::unique_ptr<ConvexBody> hull_;
  int boundary_resolution_;
};

CoordinateChart make_chart(const CostOracle& c, const DomainSpec& U,
                           const VectorXd& ytilde);

// Point at parameter t of the segment through endpoint0, endpoint1 that is
// affine in the dual coordinates anchored at `anchor`. side x-side treats
// the anchor as a target (c-segment in x); y-side swaps the roles
// (c*-segment in y).
enum class SegmentSide { X, Y };
VectorXd c_segment(const CostOracle& c, const VectorXd& anchor,
                   const VectorXd& endpoint0, const VectorXd& endpoint1,
                   double t, SegmentSide side);

// Standalone Newton inversion of x -> -D_y c(x, ytilde) with a caller
// initial guess (used by segment evaluation, no grid table needed).
VectorXd invert_dual(const CostOracle& c, const VectorXd& ytilde,
                     const VectorXd& q, const VectorXd& guess);

struct CConvexityReport {
  bool convex = true;
  double worst_violation = 0.0;  // hull-margin excess of interior images
  VectorXd witness_x, witness_ytilde;
  // strong mode (n = 2): exterior-sphere fit over boundary images
  bool strong_checked = false;
  double min_curvature = 0.0;  // 1/R for the largest fitted sphere radius
  int ytilde_probes = 0;
};

// Samples targets ytilde in V and tests convexity of the forward image of
// U: interior images must lie in the hull of boundary images. strong adds
// a boundary-curvature estimate via local circle fits (n = 2 only).
CConvexityReport check_c_convexity(const CostOracle& c, const DomainSpec& U,
                                   const DomainSpec& V, bool strong,
                                   int samples);

// Affine renormalization of a modified potential and its paired cost:
// u*(q) = |det L|^(-2/n) u(Lq), c*(q, y*) = |det L|^(-2/n) c~(Lq, y) with
// targets moved by y* = anchor + |det L|^(-2/n) L^T (y - anchor), so that
// subdifferential measures transform with the factor |det L|.
struct Renormalized {
  AffineMap L;
  AffineMap Lstar;  // target-space map
  double scale = 1.0;
  std::function<double(const VectorXd&)> u_star;
  std::function<double(const VectorXd&, const VectorXd&)> c_star;
};

Renormalized renormalize(std::function<double(const VectorXd&)> u_tilde,
                         std::function<double(const VectorXd&, const VectorXd&)>
                             c_tilde,
                         const AffineMap& L, int n, const VectorXd& anchor);

}  // namespace otreg
