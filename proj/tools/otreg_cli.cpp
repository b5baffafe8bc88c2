#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>

#include "otreg/chart.hpp"
#include "otreg/config.hpp"
#include "otreg/convex.hpp"
#include "otreg/curvature.hpp"
#include "otreg/estimates.hpp"
#include "otreg/harness.hpp"
#include "otreg/potential.hpp"
#include "otreg/rng.hpp"

using namespace otreg;
using ojson = nlohmann::ordered_json;

namespace {

ojson vec_json(const VectorXd& v) {
  ojson a = ojson::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

std::string utc_now() {
  std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

void write_report(const std::string& path, ojson body) {
  ojson out;
  out["schema_version"] = "1.0.0";
  out["timestamp"] = utc_now();
  out.update(body);
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path);
  f << out.dump(2) << "\n";
}

std::uint64_t seed_with_env(std::uint64_t seed) {
  if (const char* env = std::getenv("OTC_SEED"))
    seed = std::strtoull(env, nullptr, 10);
  return seed;
}

struct Problem {
  Config cfg;
  CostOracle cost;
  DomainSpec source;
  DomainSpec target;
};

Problem load_problem(const std::string& path, double fd_step) {
  Problem p{Config::parse_file(path), {}, DomainSpec::ball(VectorXd::Zero(1), 1),
            DomainSpec::ball(VectorXd::Zero(1), 1)};
  p.cost = cost_from_config(p.cfg);
  if (fd_step > 0) p.cost.fd_step = fd_step;
  p.source = domain_from_config(p.cfg, "source");
  p.target = domain_from_config(p.cfg, "target");
  return p;
}

VectorXd parse_point(const std::string& s) {
  VectorXd v = parse_vector(s);
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semidiscrete optimal-transport regularity toolbox"};
  app.require_subcommand(1);
  app.fallthrough();
  double fd_step = -1.0;
  app.add_option("--fd-step", fd_step,
                 "finite-difference step override for derivative queries");

  // check-curvature
  std::string cc_cost, cc_json;
  int cc_samples = 1000;
  double cc_tol = 1e-5;
  std::uint64_t cc_seed = 0x0c2c2024;
  auto* cc = app.add_subcommand("check-curvature",
                                "sample the cross-curvature and classify");
  cc->add_option("--cost", cc_cost, "problem config")->required();
  cc->add_option("--samples", cc_samples, "sample count");
  cc->add_option("--tol", cc_tol, "nonnegativity slack");
  cc->add_option("--json", cc_json, "report path");
  cc->add_option("--seed", cc_seed, "rng seed");

  // check-dasm
  std::string cd_cost, cd_json;
  int cd_configs = 10000, cd_tgrid = 17;
  double cd_tol = 1e-6;
  std::uint64_t cd_seed = 1;
  bool cd_time_convex = false;
  auto* cd = app.add_subcommand("check-dasm",
                                "max principle along target segments");
  cd->add_option("--cost", cd_cost, "problem config")->required();
  cd->add_option("--configs", cd_configs, "four-point configurations");
  cd->add_option("--t-grid", cd_tgrid, "samples per segment");
  cd->add_option("--tol", cd_tol, "violation tolerance");
  cd->add_option("--json", cd_json, "report path");
  cd->add_option("--seed", cd_seed, "rng seed");
  cd->add_flag("--time-convex", cd_time_convex,
               "require convexity in t, not just the endpoint max");

  // chart
  std::string ch_cost, ch_ytilde = "0,0", ch_json, ch_csv;
  bool ch_hull = false;
  auto* ch = app.add_subcommand("chart", "cost-exponential coordinates");
  ch->add_option("--cost", ch_cost, "problem config")->required();
  ch->add_option("--ytilde", ch_ytilde, "base target, comma separated");
  ch->add_flag("--emit-image-hull", ch_hull, "include hull vertices");
  ch->add_option("--json", ch_json, "report path");
  ch->add_option("--csv", ch_csv, "hull vertices as CSV");

  // solve
  std::string so_cost, so_atoms, so_out, so_json;
  double so_tol = 1e-3;
  auto* so = app.add_subcommand("solve", "semidiscrete dual ascent");
  so->add_option("--cost", so_cost, "problem config")->required();
  so->add_option("--atoms", so_atoms, "atoms CSV (y..., mass, weight)")
      ->required();
  so->add_option("--tol", so_tol, "max relative cell-mass error");
  so->add_option("--out", so_out, "write solved atoms CSV");
  so->add_option("--json", so_json, "convergence trace path");

  // alexandrov
  std::string al_cost, al_pot, al_ytilde = "0,0", al_json;
  double al_level = 0.0, al_t = 0.5;
  int al_resolution = 1024;
  auto* al = app.add_subcommand(
      "alexandrov", "section of a solved potential and its upper bound");
  al->add_option("--cost", al_cost, "problem config")->required();
  al->add_option("--potential", al_pot, "solved atoms CSV")->required();
  al->add_option("--ytilde", al_ytilde, "chart base target");
  al->add_option("--level", al_level, "section level above the minimum")
      ->required();
  al->add_option("--t", al_t, "inner dilation factor");
  al->add_option("--resolution", al_resolution, "section boundary samples");
  al->add_option("--json", al_json, "report path");

  // probe-contact
  std::string pc_cost, pc_pot, pc_json;
  int pc_samples = 400;
  double pc_gap_tol = -1.0;
  std::uint64_t pc_seed = 1;
  auto* pc = app.add_subcommand("probe-contact",
                                "tie loci and contact-set spans");
  pc->add_option("--cost", pc_cost, "problem config")->required();
  pc->add_option("--potential", pc_pot, "solved atoms CSV")->required();
  pc->add_option("--samples", pc_samples, "tie-search sample pairs");
  pc->add_option("--gap-tol", pc_gap_tol, "contact gap tolerance");
  pc->add_option("--json", pc_json, "report path");
  pc->add_option("--seed", pc_seed, "rng seed");

  // run-campaign
  std::string rc_config, rc_out = "reports";
  auto* rc = app.add_subcommand("run-campaign", "configured check suite");
  rc->add_option("--config", rc_config, "campaign config")->required();
  rc->add_option("--out", rc_out, "report directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cc->parsed()) {
      auto p = load_problem(cc_cost, fd_step);
      auto rep = classify(p.cost, p.source, p.target, cc_samples, cc_tol,
                          seed_with_env(cc_seed));
      ojson j;
      j["min_value"] = rep.min_value;
      j["argmin"] = {{"x", vec_json(rep.argmin.x)},
                     {"y", vec_json(rep.argmin.y)},
                     {"xi", vec_json(rep.argmin.xi)},
                     {"eta", vec_json(rep.argmin.eta)}};
      j["null_min"] = rep.min_over_null_pairs;
      j["argmin_null"] = {{"x", vec_json(rep.argmin_null.x)},
                          {"y", vec_json(rep.argmin_null.y)},
                          {"xi", vec_json(rep.argmin_null.xi)},
                          {"eta", vec_json(rep.argmin_null.eta)}};
      j["verdicts"] = {{"nonneg_everywhere", rep.b3_nonneg},
                       {"nonneg_on_null_pairs", rep.a3w_nonneg},
                       {"null_pairs_vacuous", rep.a3w_vacuous},
                       {"strict_margin", rep.a3s_margin}};
      j["samples"] = rep.sample_count;
      j["null_samples"] = rep.null_count;
      j["tol"] = rep.tol;
      if (!cc_json.empty()) write_report(cc_json, j);
      std::cout << p.cost.name << ": min " << rep.min_value << ", null min "
                << rep.min_over_null_pairs
                << (rep.b3_nonneg ? "  (nonnegative)" : "") << "\n";
      return rep.a3w_nonneg ? 0 : 1;
    }

    if (cd->parsed()) {
      auto p = load_problem(cd_cost, fd_step);
      std::uint64_t seed = seed_with_env(cd_seed);
      auto rep = cd_time_convex
                     ? time_convex_dasm_check(p.cost, p.source, p.target,
                                              cd_configs, cd_tgrid, seed)
                     : dasm_check(p.cost, p.source, p.target, cd_configs,
                                  cd_tgrid, seed);
      bool passed = rep.worst_violation <= cd_tol;
      ojson j = report_to_json(rep);
      j.erase("schema_version");
      j["tolerance"] = cd_tol;
      j["passed"] = passed;
      if (!cd_json.empty()) write_report(cd_json, j);
      std::cout << probe_kind_name(rep.kind) << ": worst violation "
                << rep.worst_violation << (passed ? "  ok" : "  FAIL")
                << "\n";
      return passed ? 0 : 1;
    }

    if (ch->parsed()) {
      auto p = load_problem(ch_cost, fd_step);
      VectorXd yt = parse_point(ch_ytilde);
      auto chart = make_chart(p.cost, p.source, yt);
      ojson j;
      j["cost"] = p.cost.name;
      j["ytilde"] = vec_json(yt);
      const auto& hull = chart.image_hull();
      j["image_hull_vertices"] = hull.vertices().size();
      j["image_hull_volume"] = hull.volume();
      if (ch_hull) {
        ojson vs = ojson::array();
        for (const auto& v : hull.vertices()) vs.push_back(vec_json(v));
        j["image_hull"] = vs;
      }
      if (!ch_csv.empty()) {
        std::ofstream f(ch_csv);
        if (!f) throw Error("cannot write " + ch_csv);
        for (Eigen::Index k = 0; k < yt.size(); ++k)
          f << "q_" << k + 1 << (k + 1 < yt.size() ? "," : "\n");
        for (const auto& v : hull.vertices()) {
          for (Eigen::Index k = 0; k < v.size(); ++k)
            f << v[k] << (k + 1 < v.size() ? "," : "\n");
        }
      }
      if (!ch_json.empty()) write_report(ch_json, j);
      std::cout << "chart image hull: " << hull.vertices().size()
                << " vertices, volume " << hull.volume() << "\n";
      return 0;
    }

    if (so->parsed()) {
      auto p = load_problem(so_cost, fd_step);
      auto atoms = read_atoms_csv(so_atoms, p.cost.dim);
      SolveTrace trace;
      auto u = solve_semidiscrete(p.cost, p.source, std::move(atoms), so_tol,
                                  &trace);
      if (!so_out.empty()) write_atoms_csv(so_out, u.atoms);
      if (!so_json.empty()) {
        ojson j;
        j["cost"] = p.cost.name;
        j["atoms"] = u.atoms.size();
        j["tol"] = so_tol;
        j["iterations"] = trace.iterations;
        j["exact_cells"] = trace.exact_cells;
        j["max_rel_error"] = trace.max_rel_error;
        write_report(so_json, j);
      }
      std::cout << "solved " << u.atoms.size() << " atoms in "
                << trace.iterations << " iterations ("
                << (trace.exact_cells ? "exact cells" : "quadrature cells")
                << ")\n";
      return 0;
    }

    if (al->parsed()) {
      auto p = load_problem(al_cost, fd_step);
      SemidiscretePotential u;
      u.cost = &p.cost;
      u.atoms = read_atoms_csv(al_pot, p.cost.dim);
      VectorXd yt = parse_point(al_ytilde);
      auto chart = make_chart(p.cost, p.source, yt);
      auto ct = chart_modified_cost(chart);
      const int n = p.cost.dim;

      // modified potential in chart coordinates, pinned to zero at its
      // minimum over the source
      auto u_tilde_raw = [&](const VectorXd& q) {
        VectorXd x = chart.inverse(q);
        return u.u(x) + p.cost(x, yt);
      };
      VectorXd lo = chart.image_hull().vertices().front(), hi = lo;
      for (const auto& v : chart.image_hull().vertices())
        lo = lo.cwiseMin(v), hi = hi.cwiseMax(v);
      VectorXd qmin = chart.forward(p.source.halton_interior(1, 0));
      double vmin = u_tilde_raw(qmin);
      for (int i = 0; i < 4096; ++i) {
        VectorXd q = chart.forward(p.source.halton_interior(2 + i, 0));
        double v = u_tilde_raw(q);
        if (v < vmin) vmin = v, qmin = q;
      }
      const double qdiam = (hi - lo).norm();
      for (double h = 0.1 * qdiam; h > 1e-12 * (1.0 + qdiam); h *= 0.5) {
        bool moved = true;
        while (moved) {
          moved = false;
          for (int k = 0; k < n; ++k)
            for (double s : {1.0, -1.0}) {
              VectorXd q = qmin;
              q[k] += s * h;
              if (!p.source.contains(chart.inverse(q))) continue;
              double v = u_tilde_raw(q);
              if (v < vmin) vmin = v, qmin = q, moved = true;
            }
        }
      }
      auto u_tilde = [&](const VectorXd& q) { return u_tilde_raw(q) - vmin; };

      auto qdom = DomainSpec::box(lo, hi);
      auto sec = extract_section(u_tilde, qdom, qmin, al_level, al_resolution);

      // John normalization so the upper bound's containment gate applies.
      // The hull is mapped directly: re-extracting the sublevel set in
      // starred coordinates recovers the true body, which exceeds the
      // sampled hull the normalization saw by the hull error.
      AffineMap L = john_ellipsoid(sec.Z, 1e-6);
      auto r = renormalize(u_tilde, ct.value, L, n, sec.vertex);
      AffineMap Linv(L.linear.inverse(),
                     -(L.linear.inverse() * L.translation).eval());
      Section sec_star = sec;
      sec_star.u_tilde = r.u_star;
      sec_star.level = r.scale * al_level;
      sec_star.Z = sec.Z.map(Linv);
      sec_star.vertex = L.apply_inverse(qmin);
      sec_star.axis = (L.linear.transpose() * sec.axis).normalized();
      sec_star.pi_plus = sec_star.Z.support(sec_star.axis);
      sec_star.pi_minus = -sec_star.Z.support(-sec_star.axis);
      sec_star.ell_plus =
          chord_length(sec_star.Z, sec_star.vertex, sec_star.axis);
      auto rep = alexandrov_upper(sec_star, al_t);

      ojson j;
      j["cost"] = p.cost.name;
      j["ytilde"] = vec_json(yt);
      j["level"] = al_level;
      j["t"] = al_t;
      j["section"] = {{"volume", sec.Z.volume()},
                      {"ell_plus", sec.ell_plus},
                      {"plane_distance", sec.plane_distance()},
                      {"vertex", vec_json(sec.vertex)},
                      {"boundary_resolution", al_resolution}};
      j["renormalized"] = {{"det_L", L.det},
                           {"scale", r.scale},
                           {"volume", sec_star.Z.volume()}};
      j["upper_bound"] = {{"inf_u", rep.inf_u},
                          {"leb_z", rep.leb_z},
                          {"lhs", rep.lhs},
                          {"rhs", rep.rhs},
                          {"empirical_constant", rep.cn},
                          {"max_slope", rep.max_slope},
                          {"slope_bound", rep.slope_bound},
                          {"slope_ok", rep.slope_ok}};
      if (!al_json.empty()) write_report(al_json, j);
      std::cout << "section volume " << sec.Z.volume() << ", upper-bound "
                << "constant " << rep.cn
                << (rep.slope_ok ? "  (slope bound holds)" : "  (slope FAIL)")
                << "\n";
      return rep.slope_ok ? 0 : 1;
    }

    if (pc->parsed()) {
      auto p = load_problem(pc_cost, fd_step);
      SemidiscretePotential u;
      u.cost = &p.cost;
      u.atoms = read_atoms_csv(pc_pot, p.cost.dim);
      auto rep = contact_set_probe(u, p.source, pc_gap_tol, pc_samples,
                                   seed_with_env(pc_seed));
      ojson j = report_to_json(rep);
      j.erase("schema_version");
      if (!pc_json.empty()) write_report(pc_json, j);
      std::cout << "widest contact-set target span "
                << rep.witness.value("max_target_span", 0.0) << "\n";
      return 0;
    }

    if (rc->parsed()) {
      auto r = run_campaign(rc_config, rc_out);
      std::cout << "summary: " << r.summary_path << "\n";
      return r.exit_code;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
