#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "otreg/chart.hpp"
#include "otreg/config.hpp"
#include "otreg/cost.hpp"
#include "otreg/domain.hpp"
#include "otreg/potential.hpp"

namespace otreg {

using ordered_json = nlohmann::ordered_json;

// One sliding-mountain comparison f(t) = -c(x, y(t)) + c(xt, y(t)) along the
// dual segment y(t) anchored at xt with endpoints y0, y1.
struct DasmProfile {
  VectorXd x, xtilde, y0, y1;
  std::vector<std::pair<double, double>> samples;  // (t, f(t)), t increasing
};

DasmProfile dasm_profile(const CostOracle& c, const VectorXd& x,
                         const VectorXd& xtilde, const VectorXd& y0,
                         const VectorXd& y1, int t_grid);

// max over interior t of f(t) - max{f(0), f(1)}, clipped at zero
double dasm_defect(const DasmProfile& p);
// smallest second difference of f over the grid (negative = concavity found)
double min_second_difference(const DasmProfile& p);

enum class ProbeKind {
  Dasm,
  TimeConvexDasm,
  LocalGlobal,
  BoundaryMixing,
  ContactSet,
  ContinuityModulus,
};
std::string probe_kind_name(ProbeKind kind);

struct ProbeReport {
  ProbeKind kind = ProbeKind::Dasm;
  double worst_violation = 0.0;  // magnitude; 0 means pass
  ordered_json witness;
  ordered_json config_echo;
};

// Loeper maximum principle probe: the sliding mountain must attain its max
// at a segment endpoint. Configurations with segments leaving the closed
// target domain are resampled (count echoed).
ProbeReport dasm_check(const CostOracle& c, const DomainSpec& U,
                       const DomainSpec& V, int configs, int t_grid,
                       std::uint64_t seed);

// Strengthened probe: f must be convex along the segment (second
// differences bounded below by -tol at reporting time; raw min echoed).
ProbeReport time_convex_dasm_check(const CostOracle& c, const DomainSpec& U,
                                   const DomainSpec& V, int configs,
                                   int t_grid, std::uint64_t seed);

// Local-implies-global probe: (i) contact sets look convex (an atom whose
// mountain gradient falls inside the hull of the contact gradients must
// itself be in contact); (ii) multistart descent on x -> u(x) + c(x, yt)
// finds local minima agreeing in value with the global one.
ProbeReport local_global_check(const SemidiscretePotential& u,
                               const DomainSpec& U, bool chart_free,
                               int configs, std::uint64_t seed);

// Sources with interior clearance >= 0.1 * inradius must contact targets
// with clearance >= 1e-3 * inradius in V.
ProbeReport boundary_mixing_check(const SemidiscretePotential& u,
                                  const DomainSpec& U, const DomainSpec& V,
                                  const BoundsSpec& bounds, int probes,
                                  std::uint64_t seed);

// Searches for tie points (non-singleton contact sets), reports the widest
// target span and whether the traced tie locus reaches the source boundary;
// also probes cell convexity through shared-target midpoints.
ProbeReport contact_set_probe(const SemidiscretePotential& u,
                              const DomainSpec& U, double gap_tol,
                              int pair_samples, std::uint64_t seed);

// Empirical modulus of the semidiscrete map: bins of |x - x'| against the
// largest observed |G(x) - G(x')|; the finest bin's jump is the
// adjacent-cell statistic the refinement ladder tracks.
ProbeReport continuity_modulus(const SemidiscretePotential& u,
                               const DomainSpec& U, int probes,
                               std::uint64_t seed);

// Solves the same transport problem on a ladder of atom counts (atoms
// Halton-placed in V, equal masses) and tracks the finest-bin jump next to
// the atom spacing at each level. Fewer than 3 levels is inconclusive.
struct ModulusLadder {
  std::vector<int> atom_counts;
  std::vector<double> max_jumps;
  std::vector<double> spacings;  // max nearest-neighbor atom distance
  std::vector<double> tie_spans;  // widest contact-set target span per level
  bool inconclusive = false;
};
ModulusLadder refinement_ladder(const CostOracle& c, const DomainSpec& U,
                                const DomainSpec& V,
                                const std::vector<int>& atom_counts,
                                int probes, double solver_tol,
                                std::uint64_t seed);

ordered_json report_to_json(const ProbeReport& rep);

struct CampaignResult {
  int exit_code = 0;
  std::vector<std::string> report_paths;
  std::string summary_path;
  ordered_json summary;
};

// Runs the checks listed in the config, writes one JSON report per check
// plus a summary. OTC_SEED overrides the config seed. Exit code 0 iff every
// check matches its expectation (expect_fail entries must find violations).
CampaignResult run_campaign(const std::string& config_path,
                            const std::string& out_dir);

}  // namespace otreg
