#pragma once

#include <Eigen/Dense>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "otreg/domain.hpp"
#include "otreg/errors.hpp"

namespace otreg {

enum class Var { X, Y };

struct DerivSlot {
  Var var;
  int index;
};

// A cost function c on U x V with derivative queries up to mixed fourth
// order. Built-ins carry an analytic partial-derivative evaluator; anything
// else falls back to centered finite differences with one Richardson level.
struct CostOracle {
  int dim = 0;
  std::string name;
  std::function<double(const VectorXd&, const VectorXd&)> eval;
  // Optional: one entry of an arbitrary mixed partial derivative.
  std::function<double(const VectorXd&, const VectorXd&,
                       const std::vector<DerivSlot>&)>
      analytic_partial;
  double fd_step = 1e-3;

  double operator()(const VectorXd& x, const VectorXd& y) const {
    return eval(x, y);
  }
};

// Global constants of a cost on a product of domains.
struct CostConstants {
  double beta_plus = 0.0;    // sup ||D2_xy c||     (spectral norm)
  double beta_minus = 0.0;   // sup ||(D2_xy c)^-1||
  double gamma_plus = 0.0;   // sup |det D2_xy c|
  double gamma_minus = 0.0;  // sup |det (D2_xy c)^-1|
  double epsilon_c = std::numeric_limits<double>::infinity();
  double third_norm = 0.0;  // sup ||D3_xxy c||_F
};

// --- derivative queries -----------------------------------------------

// Validates the derivative order against the (B0) smoothness budget:
// total order <= 4, and at total order 4 at least one derivative on each
// variable (equivalently no more than three on one variable).
void validate_slots(const std::vector<DerivSlot>& slots, int dim);

double eval_partial(const CostOracle& c, const VectorXd& x, const VectorXd& y,
                    const std::vector<DerivSlot>& slots);

VectorXd grad_x(const CostOracle& c, const VectorXd& x, const VectorXd& y);
VectorXd grad_y(const CostOracle& c, const VectorXd& x, const VectorXd& y);
// (i,j) entry = d^2 c / dx_i dy_j
MatrixXd cross_hessian(const CostOracle& c, const VectorXd& x,
                       const VectorXd& y);
MatrixXd hess_xx(const CostOracle& c, const VectorXd& x, const VectorXd& y);
MatrixXd hess_yy(const CostOracle& c, const VectorXd& x, const VectorXd& y);
// [k](i,j) = d^3 c / dx_i dx_j dy_k
std::vector<MatrixXd> third_xxy(const CostOracle& c, const VectorXd& x,
                                const VectorXd& y);
// [i](k,l) = d^3 c / dx_i dy_k dy_l
std::vector<MatrixXd> third_xyy(const CostOracle& c, const VectorXd& x,
                                const VectorXd& y);

// Cross-Hessian with a (B1) singularity check; throws BiTwistError.
MatrixXd cross_hessian_checked(const CostOracle& c, const VectorXd& x,
                               const VectorXd& y, double det_tol = 1e-12);

// --- constants ---------------------------------------------------------

// Sup estimates over a low-discrepancy sample of U x V. Monotone
// nondecreasing in the sample count (the sample sequence is a prefix
// ordering). epsilon_c^.-1 = 2 (beta+)^4 (beta-)^6 ||D3_xxy c||; the
// +infinity sentinel means "no diameter constraint".
CostConstants compute_constants(const CostOracle& c, const DomainSpec& U,
                                const DomainSpec& V, int samples);

// --- built-ins ---------------------------------------------------------

// bilinear:      c(x,y) = -<x,y>
// quadratic:     c(x,y) = |x-y|^2 / 2
// log_distance:  c(x,y) = -log |x-y|
// perturbed:     c(x,y) = -<x,y> + epsilon <x,y>^3
CostOracle builtin_cost(const std::string& name, int dim,
                        double epsilon = 0.0);

// Same cost with the roles of x and y swapped (used for c*-side charts).
CostOracle transpose(const CostOracle& c);

}  // namespace otreg
