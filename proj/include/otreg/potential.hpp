#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "otreg/cost.hpp"
#include "otreg/domain.hpp"
#include "otreg/errors.hpp"
#include "otreg/rng.hpp"

namespace otreg {

// Target atom: location, prescribed mass, dual weight.
struct Atom {
  VectorXd y;
  double mass = 0.0;
  double weight = 0.0;
};

// The potential hit a tie between supporting mountains where a single
// contact target was required; the witness x is a nondifferentiability point.
struct TieError : Error {
  TieError(std::string msg, VectorXd x) : Error(std::move(msg)), x(std::move(x)) {}
  VectorXd x;
};

// u(x) = max_i { -c(x, y_i) - v_i }.  c-convex by construction: u is the
// c-transform of the weight vector supported on the atoms.
struct SemidiscretePotential {
  const CostOracle* cost = nullptr;
  std::vector<Atom> atoms;

  double mountain(int i, const VectorXd& x) const {
    return -(*cost)(x, atoms[i].y) - atoms[i].weight;
  }
  double u(const VectorXd& x) const;
  int argmax(const VectorXd& x) const;

  // Tolerance separating a genuine tie from float noise, relative to the
  // local size of the supporting mountains.
  double default_gap_tol(const VectorXd& x) const;
};

enum class TransformDirection { ToSource, ToTarget };

// Pointwise sup over a finite support (atoms or grid); exact for the
// semidiscrete case.  ToSource: f(x) = max_i { -c(x, s_i) - values_i };
// ToTarget swaps the cost slots.
std::function<double(const VectorXd&)> c_transform(
    const CostOracle& c, const std::vector<VectorXd>& support,
    const std::vector<double>& values, TransformDirection dir);

// Atoms within gap_tol of the achieved max (indices into u.atoms).
// gap_tol < 0 requests the default tolerance.
std::vector<int> c_subdifferential(const SemidiscretePotential& u,
                                   const VectorXd& x, double gap_tol = -1.0);

// The unique contact target at a differentiability point; throws TieError
// when the subdifferential is not a singleton.
VectorXd map_G(const SemidiscretePotential& u, const VectorXd& x,
               double gap_tol = -1.0);

struct MeasureEstimate {
  double value = 0.0;
  double std_error = 0.0;
  enum class Method { MonteCarloPushforward, ExactCell } method =
      Method::MonteCarloPushforward;
};

// Mass that the contact correspondence of u pushes into X from targets in V:
// sample y uniformly in V, locate the contact point argmin_z u(z) + c(z, y)
// over source, count hits in X.  Estimate = Leb(V) * hit fraction.
MeasureEstimate ma_measure(const SemidiscretePotential& u, const DomainSpec& X,
                           const DomainSpec& source, const DomainSpec& V,
                           int mc_samples, Rng& rng);

struct SolveTrace {
  std::vector<double> max_rel_error;  // per accepted iteration
  int iterations = 0;
  bool exact_cells = false;
};

// Dual ascent on the Kantorovich functional: adjust weights until each
// atom's cell mass matches its prescribed mass within tol (relative).
// Uniform source density; exact polygon-clipped cell areas for bilinear and
// quadratic costs on convex 2-d sources, deterministic low-discrepancy
// quadrature otherwise.  Zero-mass atoms are dropped, coincident atoms
// merged.
SemidiscretePotential solve_semidiscrete(const CostOracle& c,
                                         const DomainSpec& source,
                                         std::vector<Atom> atoms,
                                         double tol = 1e-3,
                                         SolveTrace* trace = nullptr);

// Cell masses of a uniform source under the current weights (same engine
// the solver iterates on).
std::vector<double> cell_masses(const SemidiscretePotential& u,
                                const DomainSpec& source, bool* exact = nullptr);

struct BoundsSpec {
  double lambda = 1.0;    // in (0, 1]
  double Lambda = 1.0;    // >= 1
  DomainSpec U_lambda;    // where the two-sided bound is claimed
};

struct BallViolation {
  VectorXd center;
  double estimate = 0.0;
  double lower = 0.0, upper = 0.0;  // violated bracket
};

struct MaBoundsReport {
  bool passed = true;
  int balls_checked = 0;
  double worst_lower_ratio = std::numeric_limits<double>::infinity();
  double worst_upper_ratio = 0.0;  // estimate / Leb(B)
  std::vector<BallViolation> violations;
};

// Probe balls B inside U_lambda: lambda Leb(B) <= mass(B) <= Leb(B)/lambda,
// and mass(B) <= Lambda Leb(B) for balls in the full source; each bound is
// relaxed by 3 sigma of the Monte-Carlo estimate.
MaBoundsReport check_ma_bounds(const SemidiscretePotential& u,
                               const DomainSpec& source, const DomainSpec& V,
                               const BoundsSpec& bounds, double probe_radius,
                               int balls, int mc_samples, Rng& rng);

// CSV atom I/O; columns y_1,...,y_n,mass,weight with a header line.
std::vector<Atom> read_atoms_csv(const std::string& path, int dim);
void write_atoms_csv(const std::string& path, const std::vector<Atom>& atoms);

double ball_volume(int n, double r);

}  // namespace otreg
