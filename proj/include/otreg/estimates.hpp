#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "otreg/chart.hpp"
#include "otreg/convex.hpp"
#include "otreg/cost.hpp"
#include "otreg/domain.hpp"
#include "otreg/potential.hpp"
#include "otreg/rng.hpp"

namespace otreg {

// A modified cost in chart coordinates, bundled with its q-gradient so the
// estimators below stay agnostic of where the chart came from.
struct ModifiedCost {
  int dim = 0;
  std::function<double(const VectorXd&, const VectorXd&)> value;
  std::function<VectorXd(const VectorXd&, const VectorXd&)> grad_q;
};

// c~(q, y) = -<q, y>: what the bilinear cost (and the quadratic cost, up to
// a y-independent shift) becomes in dual coordinates at ytilde = 0.
ModifiedCost linear_modified_cost(int dim);
ModifiedCost chart_modified_cost(const CoordinateChart& chart);

// Sublevel set {u~ <= level} of a modified potential, localized in chart
// coordinates, with a pair of parallel supporting hyperplanes.
struct Section {
  std::function<double(const VectorXd&)> u_tilde;
  double level = 0.0;
  ConvexBody Z;
  VectorXd axis;                       // unit normal of the planes
  double pi_plus = 0.0, pi_minus = 0.0;  // axis . q at the two planes
  double ell_plus = 0.0;               // longest chord of Z along axis
  VectorXd vertex;                     // interior base point q~

  double plane_distance() const { return pi_plus - pi_minus; }
  double vertex_plane_dist() const;    // min distance from vertex to a plane
};

// Builds Z by radial bisection from the anchor at `resolution` directions;
// throws DomainError when the sublevel set is not compactly inside
// q_domain.  axis == nullptr selects the longest axis of Z's enclosing
// ellipsoid.
Section extract_section(const std::function<double(const VectorXd&)>& u_tilde,
                        const DomainSpec& q_domain, const VectorXd& anchor,
                        double level, int resolution = 1024,
                        const VectorXd* axis = nullptr);

// Sup of all supporting mountains -c~(q,y) + c~(q~,y) + u~(q~) that stay
// nonpositive on the boundary of Z.  The flat mountain (y = ytilde) is
// always included, so h >= height everywhere and h(q~) = height exactly.
struct CCone {
  VectorXd vertex;
  double height = 0.0;
  bool degenerate = false;                // only the flat mountain survived
  std::vector<VectorXd> targets;          // kept candidates
  std::vector<VectorXd> gradients;        // -D_q c~(q~, y) per kept target
  std::function<double(const VectorXd&)> h;
  double boundary_tol = 0.0;
};

CCone build_c_cone(const Section& sec, const ModifiedCost& ct,
                   const DomainSpec& targets, int resolution = 4096);

struct AlexandrovReport {
  double inf_u = 0.0;      // inf of u~ over Z (negative)
  double leb_z = 0.0;
  double lhs = 0.0;        // subgradient-ball bound on |du|(tZ)
  double rhs = 0.0;        // |inf|^n / ((1-t)^n Leb(Z))
  double cn = 0.0;         // smallest dimensional constant: lhs / rhs
  double max_slope = 0.0;  // measured difference quotients on tZ
  double slope_bound = 0.0;  // |inf| / (1-t)
  bool slope_ok = false;
};

// Upper bound on the subgradient mass of a renormalized section: requires
// B_1 subset Z subset B_n (throws Error otherwise).
AlexandrovReport alexandrov_upper(const Section& sec, double t,
                                  int samples = 2000);

struct DominationReport {
  double gamma_minus = 1.0;
  double worst_ratio = 0.0;       // max over balls of c~-mass / plain mass
  double pointwise_gap = 0.0;     // density identity, max relative gap
  int balls = 0;
  bool holds = false;             // worst_ratio <= gamma_minus * 1.03
};

// Compares the c~-contact measure of a smooth convex u~ with its ordinary
// gradient measure on sampled balls: the c~ side integrates the Jacobian
// of the contact-target map (solved pointwise by Newton), the plain side
// integrates det D^2 u~.
DominationReport ma_dominates_cma(
    const std::function<double(const VectorXd&)>& u_tilde,
    const ModifiedCost& ct, const DomainSpec& region, const VectorXd& y_guess,
    double gamma_minus, int balls, int samples_per_ball, Rng& rng);

struct ConeLowerReport {
  bool skipped = false;
  std::string reason;
  double subgrad_mass = 0.0;  // volume of the kept-gradient hull at the vertex
  double dist_ratio = 0.0;    // min dist(vertex, planes) / ell_plus
  double lhs = 0.0;           // |height|^n
  double cn = 0.0;            // smallest constant closing the inequality
};

// |height|^n <= C * (dist/ell) * |dh|({vertex}) * Leb(Z); the diameter
// precondition diam(Z) <= eps_c / c_guard gates the check.
ConeLowerReport c_cone_ma_lower(const CCone& cone, const Section& sec,
                                double eps_c, double c_guard = 10.0);

struct SectionEstimateReport {
  double inf_u = 0.0;
  double leb_z = 0.0;
  double ratio = 0.0;       // |inf|^n / Leb(Z)^2
  double c1 = 0.0;          // largest C1 with C1 lambda / gamma- <= ratio
  double c2 = 0.0;          // smallest C2 with ratio <= C2 gamma+ / lambda
  double c_vardist = 0.0;   // sup over sampled q of the variable-dist bound
  bool conditional = false; // preconditions not verified by the caller
};

SectionEstimateReport section_estimate(const Section& sec, double lambda,
                                       const CostConstants& constants,
                                       bool preconditions_verified,
                                       int samples = 2000);

// Longest chord of a convex body through sampled points along dir.
double chord_length(const ConvexBody& Z, const VectorXd& point,
                    const VectorXd& dir);

}  // namespace otreg
