#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "otreg/harness.hpp"
#include "otreg/rng.hpp"

using namespace otreg;
namespace fs = std::filesystem;

namespace {

VectorXd v2(double a, double b) {
  VectorXd v(2);
  v << a, b;
  return v;
}

fs::path repo_root() {
  return fs::path(__FILE__).parent_path().parent_path();
}

std::vector<Atom> halton_atoms(const DomainSpec& V, int k) {
  std::vector<Atom> atoms;
  for (int i = 0; i < k; ++i) {
    Atom a;
    a.y = V.halton_interior(3 + 11 * std::uint64_t(i), 0);
    a.mass = 1.0 / k;
    atoms.push_back(std::move(a));
  }
  return atoms;
}

// two clusters of atoms around +/- (cx, 0), equal masses
std::vector<Atom> cluster_atoms(double cx, double r, int per_cluster) {
  std::vector<Atom> atoms;
  for (int s : {-1, 1}) {
    auto ball = DomainSpec::ball(v2(s * cx, 0), r);
    for (int i = 0; i < per_cluster; ++i) {
      Atom a;
      a.y = ball.halton_interior(3 + 11 * std::uint64_t(i), 0);
      a.mass = 0.5 / per_cluster;
      atoms.push_back(std::move(a));
    }
  }
  return atoms;
}

}  // namespace

TEST_CASE("config parser: values, vectors, domains, diagnostics") {
  auto cfg = Config::parse_string(
      "# comment\n"
      "seed = 9\n"
      "cost.name = quadratic\n"
      "source.shape = polytope\n"
      "source.halfspace = 1, 0, 1\n"
      "source.halfspace = -1, 0, 1\n"
      "source.halfspace = 0, 1, 1\n"
      "source.halfspace = 0, -1, 1\n"
      "target.center = 0.5, -0.25\n");
  CHECK(cfg.get_int("seed") == 9);
  CHECK(cfg.get_string("cost.name") == "quadratic");
  VectorXd c = cfg.get_vector("target.center");
  CHECK(c[0] == 0.5);
  CHECK(c[1] == -0.25);
  CHECK(cfg.halfspaces("source").size() == 4);

  // the polytope rows describe the unit box
  auto dom = domain_from_config(cfg, "source");
  auto box = DomainSpec::box(v2(-1, -1), v2(1, 1));
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    VectorXd x = rng.in_box(v2(-1.5, -1.5), v2(1.5, 1.5));
    CHECK(dom.contains(x) == box.contains(x));
  }

  // diagnostics carry line numbers and the offending key
  try {
    Config::parse_string("a = 1\nb == oops\n");
    CHECK(false);
  } catch (const ConfigError& e) {
    CHECK(e.line == 2);
  }
  try {
    cfg.get_double("cost.name");
    CHECK(false);
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("cost.name") != std::string::npos);
    CHECK(e.line == 3);
  }
  CHECK_THROWS_AS(Config::parse_string("a = 1\na = 2\n"), ConfigError);
  CHECK_THROWS_AS(cfg.get_string("missing.key"), ConfigError);
}

TEST_CASE("dasm: bilinear profiles are affine, quadratic reduces to them") {
  auto U = DomainSpec::box(v2(-1, -1), v2(1, 1));
  auto V = DomainSpec::box(v2(-1, -1), v2(1, 1));

  auto bil = builtin_cost("bilinear", 2);
  auto rep = dasm_check(bil, U, V, 500, 17, 11);
  CHECK(rep.worst_violation <= 1e-12);
  auto rep2 = time_convex_dasm_check(bil, U, V, 500, 17, 12);
  CHECK(rep2.worst_violation <= 1e-12);

  auto quad = builtin_cost("quadratic", 2);
  auto q1 = dasm_check(quad, U, V, 2000, 17, 13);
  CHECK(q1.worst_violation <= 1e-8);
  auto q2 = time_convex_dasm_check(quad, U, V, 2000, 17, 14);
  CHECK(q2.worst_violation <= 1e-8);
}

TEST_CASE("dasm: log cost on separated supports reports its second difference") {
  auto U = DomainSpec::box(v2(1.7, -0.3), v2(2.3, 0.3));
  auto V = DomainSpec::ball(v2(0, 0), 0.25);
  auto c = builtin_cost("log_distance", 2);
  auto rep = time_convex_dasm_check(c, U, V, 400, 17, 15);
  double m2 = rep.config_echo["min_second_difference"].get<double>();
  CHECK(std::isfinite(m2));
  // measured, no claim assumed: convexity along dual segments is a strictly
  // stronger property and the log cost misses it by ~1e-5 here
  CHECK(rep.worst_violation < 1e-3);
  auto rep2 = dasm_check(c, U, V, 400, 17, 16);
  CHECK(rep2.worst_violation <= 1e-8);
}

TEST_CASE("dasm: perturbed cost produces a re-verified convexity violation") {
  auto U = DomainSpec::box(v2(-0.6, -0.6), v2(0.6, 0.6));
  auto V = DomainSpec::box(v2(-0.6, -0.6), v2(0.6, 0.6));
  auto c = builtin_cost("perturbed", 2, 0.2);
  auto rep = time_convex_dasm_check(c, U, V, 2000, 33, 17);
  REQUIRE(rep.worst_violation > 1e-8);

  // witness re-verified at 10x the t-resolution
  auto vec = [](const ordered_json& a) {
    VectorXd v(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) v[i] = a[i].get<double>();
    return v;
  };
  auto p = dasm_profile(c, vec(rep.witness["x"]), vec(rep.witness["xtilde"]),
                        vec(rep.witness["y0"]), vec(rep.witness["y1"]), 321);
  CHECK(min_second_difference(p) < 0.0);
}

TEST_CASE("local-global: single atom, two-atom tie, solver potential") {
  auto quad = builtin_cost("quadratic", 2);
  auto U = DomainSpec::ball(v2(0, 0), 1.0);

  SemidiscretePotential single;
  single.cost = &quad;
  single.atoms = {{v2(0.2, 0.1), 1.0, 0.0}};
  auto rep = local_global_check(single, U, true, 10, 21);
  CHECK(rep.worst_violation <= 1e-6);

  // two atoms, explicit tie locus x1 = 0
  SemidiscretePotential pair;
  pair.cost = &quad;
  pair.atoms = {{v2(-0.5, 0), 0.5, 0.0}, {v2(0.5, 0), 0.5, 0.0}};
  auto tie = c_subdifferential(pair, v2(0, 0.3));
  CHECK(tie.size() == 2);
  CHECK_THROWS_AS(map_G(pair, v2(0, 0.3)), TieError);
  CHECK((map_G(pair, v2(0.05, 0.3)) - v2(0.5, 0)).norm() == 0.0);
  auto rep2 = local_global_check(pair, U, true, 20, 22);
  CHECK(rep2.worst_violation <= 1e-6);

  // solved potential: descent endpoints all reach the global value
  auto V = DomainSpec::ball(v2(0, 0), 0.8);
  auto u = solve_semidiscrete(quad, U, halton_atoms(V, 12), 1e-3);
  auto rep3 = local_global_check(u, U, true, 30, 23);
  CHECK(rep3.worst_violation <= 1e-6);
}

TEST_CASE("boundary mixing: matched balls pass, edge-hugging atoms fail") {
  auto quad = builtin_cost("quadratic", 2);
  auto U = DomainSpec::ball(v2(0, 0), 1.0);
  auto V = DomainSpec::ball(v2(0, 0), 1.0);
  BoundsSpec bounds;
  bounds.U_lambda = U;

  // near-identity map: atoms spread over V with identity weights
  SemidiscretePotential ident;
  ident.cost = &quad;
  for (int i = 0; i < 200; ++i) {
    Atom a;
    a.y = V.halton_interior(3 + 11 * std::uint64_t(i), 0);
    a.mass = 1.0 / 200;
    a.weight = 0.5 * a.y.squaredNorm();
    ident.atoms.push_back(std::move(a));
  }
  auto rep = boundary_mixing_check(ident, U, V, bounds, 150, 31);
  CHECK(rep.worst_violation == 0.0);
  CHECK(rep.witness["min_target_clearance"].get<double>() > 1e-3);

  // nonconvex union of two cluster balls with atoms hugging the facing
  // edges: interior sources contact near-boundary targets
  auto Vu = DomainSpec::unite({DomainSpec::ball(v2(-0.7, 0), 0.3),
                               DomainSpec::ball(v2(0.7, 0), 0.3)});
  std::vector<Atom> atoms = {{v2(-0.7, 0), 0.25, 0.0},
                             {v2(0.7, 0), 0.25, 0.0},
                             {v2(-0.4005, 0), 0.25, 0.0},
                             {v2(0.4005, 0), 0.25, 0.0}};
  auto u2 = solve_semidiscrete(quad, U, atoms, 1e-3);
  auto rep2 = boundary_mixing_check(u2, U, Vu, bounds, 150, 32);
  CHECK(rep2.worst_violation > 0.0);
}

TEST_CASE("contact set: convex cells pass, two clusters span the gap") {
  auto quad = builtin_cost("quadratic", 2);
  auto U = DomainSpec::ball(v2(0, 0), 1.0);

  // good densities: no midpoint violation, modest spans
  auto V = DomainSpec::ball(v2(0, 0), 0.8);
  auto u = solve_semidiscrete(quad, U, halton_atoms(V, 20), 1e-3);
  auto rep = contact_set_probe(u, U, -1.0, 300, 41);
  CHECK(rep.worst_violation == 0.0);
  CHECK(rep.witness["midpoint_pairs_checked"].get<int>() > 10);

  // two clusters: a tie witness spans the inter-cluster gap and its tie
  // locus crosses the source domain
  auto u2 = solve_semidiscrete(quad, U, cluster_atoms(0.7, 0.25, 6), 1e-3);
  auto rep2 = contact_set_probe(u2, U, -1.0, 400, 42);
  const double gap = 2 * 0.7 - 2 * 0.25;  // between the cluster balls
  CHECK(rep2.witness["max_target_span"].get<double>() >= 0.9 * gap);
  CHECK(rep2.witness["meets_boundary"].get<bool>());
  CHECK(rep2.witness["tie_locus_extent"].get<double>() > 0.5 * U.diameter() * 0.5);

  // single atom: every point contacts it, no pairs to span
  SemidiscretePotential single;
  single.cost = &quad;
  single.atoms = {{v2(0.1, 0), 1.0, 0.0}};
  auto rep3 = contact_set_probe(single, U, -1.0, 100, 43);
  CHECK(rep3.worst_violation == 0.0);
  CHECK(rep3.witness["max_target_span"].get<double>() == 0.0);
}

TEST_CASE("continuity modulus: refinement ladder behavior") {
  auto quad = builtin_cost("quadratic", 2);
  auto U = DomainSpec::ball(v2(0, 0), 1.0);

  // single atom: the map is constant
  SemidiscretePotential single;
  single.cost = &quad;
  single.atoms = {{v2(0.1, 0), 1.0, 0.0}};
  auto rep = continuity_modulus(single, U, 100, 51);
  CHECK(rep.witness["adjacent_jump"].get<double>() == 0.0);

  // ball target: jumps track atom spacing and shrink under refinement
  auto V = DomainSpec::ball(v2(0, 0), 0.8);
  auto lad = refinement_ladder(quad, U, V, {16, 32, 64}, 250, 1e-3, 52);
  CHECK(!lad.inconclusive);
  for (std::size_t i = 0; i < lad.atom_counts.size(); ++i) {
    CHECK(lad.max_jumps[i] > 0.0);
    CHECK(lad.max_jumps[i] <= 3.0 * lad.spacings[i]);
  }
  CHECK(lad.max_jumps.back() < lad.max_jumps.front());

  // two clusters: the interface jump never shrinks below the gap
  auto Vu = DomainSpec::unite({DomainSpec::ball(v2(-0.7, 0), 0.25),
                               DomainSpec::ball(v2(0.7, 0), 0.25)});
  auto lad2 = refinement_ladder(quad, U, Vu, {16, 32, 64}, 250, 1e-3, 53);
  const double gap = 2 * 0.7 - 2 * 0.25;
  for (double j : lad2.max_jumps) CHECK(j >= gap);

  CHECK(refinement_ladder(quad, U, V, {16, 32}, 50, 1e-3, 54).inconclusive);
}

TEST_CASE("campaign: smoke config runs clean and deterministically") {
  const auto cfgs = repo_root() / "configs";
  const auto tmp = fs::temp_directory_path();
  auto d1 = (tmp / "otreg_campaign_a").string();
  auto d2 = (tmp / "otreg_campaign_b").string();
  fs::remove_all(d1);
  fs::remove_all(d2);

  auto r1 = run_campaign((cfgs / "quadratic-smoke.cfg").string(), d1);
  CHECK(r1.exit_code == 0);
  CHECK(r1.report_paths.size() == 6);
  for (const auto& p : r1.report_paths) CHECK(fs::exists(p));
  CHECK(fs::exists(r1.summary_path));

  // reports carry the schema version and a separate timestamp field
  std::ifstream in(r1.report_paths.front());
  auto j = ordered_json::parse(in);
  CHECK(j["schema_version"] == "1.0.0");
  CHECK(j.contains("timestamp"));
  CHECK(j["config_echo"]["campaign_seed"].get<std::uint64_t>() == 42);

  // byte-identical modulo the timestamp field
  auto r2 = run_campaign((cfgs / "quadratic-smoke.cfg").string(), d2);
  for (std::size_t i = 0; i < r1.report_paths.size(); ++i) {
    std::ifstream a(r1.report_paths[i]), b(r2.report_paths[i]);
    auto ja = ordered_json::parse(a), jb = ordered_json::parse(b);
    ja.erase("timestamp");
    jb.erase("timestamp");
    CHECK(ja.dump() == jb.dump());
  }

  // OTC_SEED overrides the config seed
  setenv("OTC_SEED", "99", 1);
  auto d3 = (tmp / "otreg_campaign_c").string();
  fs::remove_all(d3);
  auto r3 = run_campaign((cfgs / "quadratic-smoke.cfg").string(), d3);
  unsetenv("OTC_SEED");
  CHECK(r3.summary["seed"].get<std::uint64_t>() == 99);

  // malformed config: diagnostic names the offending key
  try {
    run_campaign((cfgs / "malformed.cfg").string(), (tmp / "otreg_x").string());
    CHECK(false);
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("cost.dim") != std::string::npos);
  }
}
