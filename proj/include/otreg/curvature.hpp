#pragma once

#include <Eigen/Dense>

#include "otreg/cost.hpp"
#include "otreg/domain.hpp"

namespace otreg {

struct CrossCurvatureSample {
  VectorXd x, y, xi, eta;
  double value = 0.0;        // -d^4/ds^2 dt^2 c(x(s), y(t)) at (0,0)
  double null_defect = 0.0;  // |d^2/ds dt c| at (0,0) = |xi^T D2_xy c eta|
};

struct CurvatureReport {
  double min_value = std::numeric_limits<double>::infinity();
  CrossCurvatureSample argmin;
  double min_over_null_pairs = std::numeric_limits<double>::infinity();
  CrossCurvatureSample argmin_null;
  int sample_count = 0;
  int null_count = 0;
  double tol = 1e-5;
  bool b3_nonneg = false;
  bool a3w_nonneg = false;
  bool a3w_vacuous = false;   // no null pairs found
  double a3s_margin = 0.0;    // min over null pairs when positive
};

// Cross-curvature along genuine c-segments: x(s) follows the segment with
// respect to y through x with velocity xi, y(t) the segment with respect
// to x with velocity eta; the value is the fourth mixed derivative of the
// cost along (s,t), negated. half_len_* bound the admissible parameter
// range; the stencil uses steps of 1e-2 of the shorter half-length with
// one Richardson level.
double cross_curvature(const CostOracle& c, const VectorXd& x,
                       const VectorXd& y, const VectorXd& xi,
                       const VectorXd& eta, double half_len_s = 0.1,
                       double half_len_t = 0.1);

// |d^2/ds dt c| at the base point: zero identifies the null pairs on which
// the weak curvature condition quantifies.
double null_defect(const CostOracle& c, const VectorXd& x, const VectorXd& y,
                   const VectorXd& xi, const VectorXd& eta);

// Projects eta to the null space of the mixed Hessian form against xi
// (xi^T D2_xy c eta_null = 0); returns a unit vector, or zero when the
// projection degenerates.
VectorXd null_project(const CostOracle& c, const VectorXd& x,
                      const VectorXd& y, const VectorXd& xi,
                      const VectorXd& eta);

// Samples (x, y, xi, eta), evaluates the curvature on each sample and on a
// constructed null pair, and aggregates verdicts: nonnegative everywhere
// (strong), nonnegative on null pairs (weak), strictly positive margin.
CurvatureReport classify(const CostOracle& c, const DomainSpec& U,
                         const DomainSpec& V, int samples, double tol = 1e-5,
                         std::uint64_t seed = 0x0c2c2024);

}  // namespace otreg
