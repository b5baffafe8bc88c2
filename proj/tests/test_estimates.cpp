#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "otreg/estimates.hpp"
#include "oracles.hpp"

using namespace otreg;

namespace {

VectorXd v2(double a, double b) {
  VectorXd v(2);
  v << a, b;
  return v;
}

double quad(const VectorXd& q) { return 0.5 * q.squaredNorm(); }

// one-sided Hausdorff distance between convex bodies via halfspace margins
double hausdorff(const ConvexBody& A, const ConvexBody& B) {
  double d = 0.0;
  for (const auto& v : A.vertices()) d = std::max(d, -B.margin(v));
  for (const auto& v : B.vertices()) d = std::max(d, -A.margin(v));
  return std::max(d, 0.0);
}

}  // namespace

TEST_CASE("section of the round paraboloid is the unit disc") {
  auto dom = DomainSpec::box(v2(-3, -3), v2(3, 3));
  auto sec = extract_section(quad, dom, v2(0, 0), 0.5);
  CHECK(sec.Z.volume() == doctest::Approx(M_PI).epsilon(1e-4));
  for (const auto& v : sec.Z.vertices())
    CHECK(v.norm() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(sec.plane_distance() == doctest::Approx(2.0).epsilon(1e-5));
  CHECK(sec.ell_plus == doctest::Approx(2.0).epsilon(1e-4));
  CHECK(sec.ell_plus >= sec.plane_distance() - 1e-6);
  CHECK(sec.vertex_plane_dist() == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("section of the tent is the cross-polytope") {
  auto tent = [](const VectorXd& q) { return std::abs(q[0]) + std::abs(q[1]); };
  auto dom = DomainSpec::box(v2(-3, -3), v2(3, 3));
  VectorXd e1 = v2(1, 0);
  auto sec = extract_section(tent, dom, v2(0, 0), 1.0, 1024, &e1);
  CHECK(sec.Z.volume() == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(sec.pi_plus == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(sec.pi_minus == doctest::Approx(-1.0).epsilon(1e-9));
  CHECK(sec.ell_plus == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("section hull converges under direction refinement") {
  // semidiscrete potential in chart coordinates (max of linear mountains)
  std::vector<VectorXd> ys = {v2(0.8, 0.1), v2(-0.5, 0.6), v2(-0.1, -0.9),
                              v2(0.3, 0.5), v2(0.0, 0.0)};
  auto u = [ys](const VectorXd& q) {
    double b = -1e300;
    for (const auto& y : ys) b = std::max(b, q.dot(y) - 0.2 * y.squaredNorm());
    return b;
  };
  auto dom = DomainSpec::box(v2(-4, -4), v2(4, 4));
  // boundary-point hulls converge only linearly in the direction count near
  // polygon corners, so the counts have to be generous
  auto coarse = extract_section(u, dom, v2(0, 0), 0.7, 4096);
  auto fine = extract_section(u, dom, v2(0, 0), 0.7, 16384);
  CHECK(hausdorff(coarse.Z, fine.Z) <= 1e-3 * fine.Z.diameter());
}

TEST_CASE("section errors: unanchored or unlocalized") {
  auto dom = DomainSpec::box(v2(-1, -1), v2(1, 1));
  CHECK_THROWS_AS(extract_section(quad, dom, v2(0, 0), -0.1), DomainError);
  // sublevel set {quad <= 3} sticks out of the box
  CHECK_THROWS_AS(extract_section(quad, dom, v2(0, 0), 3.0), DomainError);
}

TEST_CASE("classical cone as sup of admissible linear mountains") {
  auto coneu = [](const VectorXd& q) { return q.norm() - 1.0; };
  auto dom = DomainSpec::box(v2(-3, -3), v2(3, 3));
  auto sec = extract_section(coneu, dom, v2(0, 0), 0.0, 512);
  auto ct = linear_modified_cost(2);
  auto V = DomainSpec::ball(v2(0, 0), 1.3);
  auto cone = build_c_cone(sec, ct, V, 4096);
  CHECK(cone.height == doctest::Approx(-1.0));
  CHECK(!cone.degenerate);
  CHECK(cone.h(sec.vertex) == -1.0);  // exact at the vertex
  // kept targets are exactly the unit ball of slopes
  for (const auto& y : cone.targets) CHECK(y.norm() <= 1.0 + 1e-6);
  Rng rng(4);
  for (int t = 0; t < 200; ++t) {
    VectorXd q = rng.in_ball(v2(0, 0), 1.0);
    CHECK(cone.h(q) <= q.norm() - 1.0 + cone.boundary_tol);
    CHECK(cone.h(q) >= q.norm() - 1.0 - 0.03);
  }
  // boundary values pinched at zero
  for (const auto& v : sec.Z.vertices()) {
    CHECK(cone.h(v) <= cone.boundary_tol);
    CHECK(cone.h(v) >= -0.03);
  }
  // subgradient hull at the vertex fills the unit ball of slopes
  CHECK(hull_measure(cone.gradients, 2) == doctest::Approx(M_PI).epsilon(0.02));
}

TEST_CASE("kept cone targets support the potential somewhere on the section") {
  auto coneu = [](const VectorXd& q) { return q.norm() - 1.0; };
  auto dom = DomainSpec::box(v2(-3, -3), v2(3, 3));
  auto sec = extract_section(coneu, dom, v2(0, 0), 0.0, 256);
  auto ct = linear_modified_cost(2);
  auto cone = build_c_cone(sec, ct, DomainSpec::ball(v2(0, 0), 1.3), 1024);
  // contact condition: shift the mountain of y up to touching; it must stay
  // below u on the whole section
  std::vector<VectorXd> probes;
  for (int i = 0; i < 400; ++i)
    probes.push_back(dom.halton_interior(i, 0) * 0.33);
  int checked = 0;
  for (std::size_t k = 0; k < cone.targets.size(); k += 37) {
    const VectorXd& y = cone.targets[k];
    double shift = 1e300;
    VectorXd qstar;
    for (const auto& q : probes) {
      double gap = (coneu(q)) - (-ct.value(q, y));
      if (gap < shift) shift = gap, qstar = q;
    }
    for (const auto& q : probes)
      CHECK(-ct.value(q, y) + shift <= coneu(q) + 1e-12);
    ++checked;
  }
  CHECK(checked >= 5);
}

TEST_CASE("cone subgradient hull grows monotonically with resolution") {
  auto coneu = [](const VectorXd& q) { return q.norm() - 1.0; };
  auto dom = DomainSpec::box(v2(-3, -3), v2(3, 3));
  auto sec = extract_section(coneu, dom, v2(0, 0), 0.0, 256);
  auto ct = linear_modified_cost(2);
  auto V = DomainSpec::ball(v2(0, 0), 1.3);
  double prev = 0.0;
  for (int res : {256, 1024, 4096}) {
    auto cone = build_c_cone(sec, ct, V, res);
    double mass = hull_measure(cone.gradients, 2);
    CHECK(mass >= prev - 1e-12);
    prev = mass;
  }
}

TEST_CASE("degenerate cone falls back to the flat mountain") {
  auto coneu = [](const VectorXd& q) { return q.norm() - 1.0; };
  auto dom = DomainSpec::box(v2(-3, -3), v2(3, 3));
  auto sec = extract_section(coneu, dom, v2(0, 0), 0.0, 256);
  auto ct = linear_modified_cost(2);
  // all candidates too steep: targets far from the slope ball
  auto V = DomainSpec::ball(v2(8, 0), 0.5);
  auto cone = build_c_cone(sec, ct, V, 512);
  CHECK(cone.degenerate);
  CHECK(cone.h(v2(0.3, 0.2)) == cone.height);
}

TEST_CASE("alexandrov bound for the exact cone") {
  auto coneu = [](const VectorXd& q) { return q.norm() - 1.0; };
  auto dom = DomainSpec::box(v2(-3, -3), v2(3, 3));
  auto sec = extract_section(coneu, dom, v2(0, 0), 0.0, 1024);
  auto rep = alexandrov_upper(sec, 0.5);
  CHECK(rep.inf_u == doctest::Approx(-1.0).epsilon(1e-6));
  // subgradient-ball bound: all slopes on tZ lie in B_{|inf|/(1-t)}
  CHECK(rep.lhs == doctest::Approx(4.0 * M_PI).epsilon(1e-3));
  // |du|(B_1/2) = Leb(B_1) for the cone: the bound must dominate it
  CHECK(rep.lhs >= M_PI);
  CHECK(rep.cn == doctest::Approx(M_PI * sec.Z.volume()).epsilon(1e-9));
  CHECK(rep.slope_ok);
  CHECK(rep.max_slope <= 1.0 + 1e-6);
}

TEST_CASE("alexandrov bound for the paraboloid and rotation stability") {
  auto u = [](const VectorXd& q) { return 0.5 * q.squaredNorm() - 0.5; };
  auto dom = DomainSpec::box(v2(-3, -3), v2(3, 3));
  auto sec = extract_section(u, dom, v2(0, 0), 0.0, 1024);
  auto rep = alexandrov_upper(sec, 0.5);
  CHECK(rep.inf_u == doctest::Approx(-0.5).epsilon(1e-6));
  CHECK(rep.lhs >= ball_volume(2, 0.5));  // true measure Leb(B_1/2)
  CHECK(rep.slope_ok);

  // the verdict is unchanged by a rotation of the renormalized section
  const double th = 0.73;
  Eigen::Matrix2d R;
  R << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
  auto urot = [u, R](const VectorXd& q) -> double {
    return u(R.transpose() * q);
  };
  auto sec2 = extract_section(urot, dom, v2(0, 0), 0.0, 1024);
  auto rep2 = alexandrov_upper(sec2, 0.5);
  CHECK(rep2.cn == doctest::Approx(rep.cn).epsilon(1e-3));
  CHECK(rep2.slope_ok == rep.slope_ok);

  CHECK_THROWS_AS(alexandrov_upper(sec, 1.5), Error);
  // un-renormalized: a tiny section violates B_1 containment
  auto small = extract_section(u, dom, v2(0, 0), -0.45, 256);
  CHECK_THROWS_AS(alexandrov_upper(small, 0.5), Error);
}

TEST_CASE("linear-cost contact measure equals the gradient measure") {
  auto u = [](const VectorXd& q) {
    return 0.5 * q.squaredNorm() + 0.05 * (std::pow(q[0], 4) + std::pow(q[1], 4));
  };
  auto region = DomainSpec::box(v2(-1, -1), v2(1, 1));
  Rng rng(12);
  auto rep = ma_dominates_cma(u, linear_modified_cost(2), region, v2(0, 0),
                              1.0, 2, 40, rng);
  CHECK(rep.holds);
  CHECK(rep.worst_ratio == doctest::Approx(1.0).epsilon(0.02));
  CHECK(rep.pointwise_gap < 1e-3);
}

TEST_CASE("quadratic cost through its chart changes nothing") {
  auto c = builtin_cost("quadratic", 2);
  auto U = DomainSpec::box(v2(-1.5, -1.5), v2(1.5, 1.5));
  auto chart = make_chart(c, U, v2(0, 0));
  auto ct = chart_modified_cost(chart);
  auto u = [](const VectorXd& q) { return 0.6 * q.squaredNorm(); };
  auto region = DomainSpec::box(v2(-1, -1), v2(1, 1));
  Rng rng(13);
  auto rep = ma_dominates_cma(u, ct, region, v2(0.1, 0.1), 1.0, 1, 25, rng);
  CHECK(rep.holds);
  CHECK(rep.worst_ratio == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("log-cost contact measure stays under the determinant constant") {
  auto c = builtin_cost("log_distance", 2);
  auto U = DomainSpec::box(v2(1.6, -0.4), v2(2.4, 0.4));
  VectorXd yt = v2(0, 0);
  auto chart = make_chart(c, U, yt);
  auto ct = chart_modified_cost(chart);
  // chart image of the box (q = (y - x)/|x - y|^2 at ytilde = 0)
  VectorXd q0 = chart.forward(v2(2.0, 0.0));
  auto region = DomainSpec::ball(q0, 0.04);

  // smooth uniformly convex test potential on top of a c~-convex mountain
  VectorXd ystar = v2(0.3, 0.1);
  auto u = [&ct, ystar, q0](const VectorXd& q) {
    return -ct.value(q, ystar) + 40.0 * (q - q0).squaredNorm();
  };
  // gamma-: sup |det (D2_qy c~)^-1| over the probed region
  CostOracle cw;
  cw.dim = 2;
  cw.name = "log-chart";
  cw.eval = ct.value;
  auto Vrange = DomainSpec::ball(v2(0.25, 0.08), 0.15);
  auto consts = compute_constants(cw, region, Vrange, 48);
  Rng rng(14);
  auto rep = ma_dominates_cma(u, ct, region, ystar, consts.gamma_minus, 1, 20,
                              rng);
  CHECK(rep.worst_ratio <= consts.gamma_minus * 1.03);
  CHECK(rep.holds);
  CHECK(rep.pointwise_gap < 0.05);
}

TEST_CASE("cone lower bound: centered and off-center exact cones") {
  auto coneu = [](const VectorXd& q) { return q.norm() - 1.0; };
  auto dom = DomainSpec::box(v2(-3, -3), v2(3, 3));
  auto V = DomainSpec::ball(v2(0, 0), 2.0);
  auto ct = linear_modified_cost(2);
  VectorXd e1 = v2(1, 0);

  auto sec = extract_section(coneu, dom, v2(0, 0), 0.0, 512, &e1);
  auto cone = build_c_cone(sec, ct, V, 4096);
  auto rep = c_cone_ma_lower(cone, sec, /*eps_c=*/1e30);
  CHECK(!rep.skipped);
  CHECK(rep.dist_ratio == doctest::Approx(0.5).epsilon(1e-4));
  CHECK(rep.subgrad_mass == doctest::Approx(M_PI).epsilon(0.02));
  CHECK(rep.lhs == doctest::Approx(1.0));
  // 1 <= C * (1/2) * pi * pi  =>  smallest C = 2 / pi^2
  CHECK(rep.cn == doctest::Approx(2.0 / (M_PI * M_PI)).epsilon(0.03));

  // off-center vertex: left side shrinks with the plane distance
  auto sec2 = extract_section(coneu, dom, v2(0.9, 0), 0.0, 512, &e1);
  auto cone2 = build_c_cone(sec2, ct, V, 8192);
  auto rep2 = c_cone_ma_lower(cone2, sec2, 1e30);
  CHECK(rep2.lhs == doctest::Approx(0.01).epsilon(1e-9));
  CHECK(rep2.dist_ratio == doctest::Approx(0.05).epsilon(1e-3));
  // admissible slopes solve |y| <= 0.1 + 0.9 y_1; brute-force the area
  double oracle_area = 0.0;
  {
    const int N = 600;
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j) {
        VectorXd y = v2(-0.2 + 1.4 * (i + 0.5) / N, -0.7 + 1.4 * (j + 0.5) / N);
        if (y.norm() <= 0.1 + 0.9 * y[0]) oracle_area += 1.4 * 1.4 / (N * N);
      }
  }
  CHECK(rep2.subgrad_mass == doctest::Approx(oracle_area).epsilon(0.03));
  CHECK(rep2.cn <= 1.0);
  CHECK(rep2.cn > 0.0);
}

TEST_CASE("cone lower bound on a small log-cost section") {
  auto c = builtin_cost("log_distance", 2);
  auto U = DomainSpec::box(v2(1.7, -0.3), v2(2.3, 0.3));
  auto chart = make_chart(c, U, v2(0, 0));
  auto ct = chart_modified_cost(chart);
  VectorXd q0 = chart.forward(v2(2.0, 0.0));
  auto consts =
      compute_constants(c, U, DomainSpec::ball(v2(0, 0), 0.05), 32);
  REQUIRE(std::isfinite(consts.epsilon_c));

  const double r = std::min(0.02, 0.25 * consts.epsilon_c / 10.0);
  auto u = [q0](const VectorXd& q) { return 0.5 * (q - q0).squaredNorm(); };
  auto qdom = DomainSpec::ball(q0, 8.0 * r);
  auto sec = extract_section(u, qdom, q0, 0.5 * r * r, 256);
  auto V = DomainSpec::ball(v2(0, 0), 0.05);
  auto cone = build_c_cone(sec, ct, V, 2048);
  CHECK(!cone.degenerate);
  auto rep = c_cone_ma_lower(cone, sec, consts.epsilon_c);
  CHECK(!rep.skipped);
  CHECK(rep.subgrad_mass > 0.0);
  CHECK(std::isfinite(rep.cn));
  CHECK(rep.cn < 100.0);

  // diameter precondition gate
  auto gated = c_cone_ma_lower(cone, sec, consts.epsilon_c, 1e12);
  CHECK(gated.skipped);
  CHECK(!gated.reason.empty());
}

TEST_CASE("section ratio is the dimensional constant for the quadratic model") {
  auto dom = DomainSpec::box(v2(-3, -3), v2(3, 3));
  CostConstants flat;
  flat.gamma_plus = flat.gamma_minus = 1.0;
  const double target = 1.0 / (4.0 * M_PI * M_PI);  // (2^n w_n^2)^-1, n = 2
  for (double r : {0.1, 0.2, 0.4}) {
    auto sec = extract_section(quad, dom, v2(0, 0), 0.5 * r * r, 2048);
    auto rep = section_estimate(sec, 1.0, flat, true);
    CHECK(rep.ratio == doctest::Approx(target).epsilon(1e-3));
    CHECK(!rep.conditional);
    CHECK(rep.c1 == doctest::Approx(rep.ratio));
    CHECK(rep.c2 == doctest::Approx(rep.ratio));
  }
  auto sec = extract_section(quad, dom, v2(0, 0), 0.02, 512);
  CHECK(section_estimate(sec, 1.0, flat, false).conditional);
}

TEST_CASE("variable-distance bound decays linearly near the plane") {
  const double r = 0.5;
  auto dom = DomainSpec::box(v2(-3, -3), v2(3, 3));
  VectorXd e1 = v2(1, 0);
  auto sec = extract_section(quad, dom, v2(0, 0), 0.5 * r * r, 2048, &e1);
  auto cq = [&](double d) {
    VectorXd q = v2(r - d, 0);
    double lhs = std::pow(std::abs(quad(q) - sec.level), 2) /
                 (sec.Z.volume() * sec.Z.volume());
    return lhs * sec.ell_plus / d;
  };
  // C(q) ~ dist for the quadratic model: halving d halves the constant
  CHECK(cq(0.02) / cq(0.04) == doctest::Approx(0.5).epsilon(0.03));
  CHECK(cq(0.01) / cq(0.02) == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("section ratios stay within a decade across dyadic levels") {
  auto u = [](const VectorXd& q) {
    return 0.5 * q[0] * q[0] + q[1] * q[1] + 0.1 * std::pow(q[0], 4);
  };
  auto dom = DomainSpec::box(v2(-3, -3), v2(3, 3));
  CostConstants flat;
  flat.gamma_plus = flat.gamma_minus = 1.0;
  double lo = 1e300, hi = 0.0;
  for (double h : {0.32, 0.16, 0.08, 0.04}) {
    auto sec = extract_section(u, dom, v2(0, 0), h, 1024);
    auto rep = section_estimate(sec, 1.0, flat, true);
    lo = std::min(lo, rep.ratio);
    hi = std::max(hi, rep.ratio);
  }
  CHECK(hi / lo <= 10.0);
}

TEST_CASE("slope of the modified cost varies slowly against its base value") {
  // |D_q c~(q,y) - D_q c~(q~,y)| <= (1/eps_c) |q - q~| |D_q c~(q~,y)|
  auto c = builtin_cost("log_distance", 2);
  auto U = DomainSpec::box(v2(1.8, -0.2), v2(2.2, 0.2));
  auto V = DomainSpec::ball(v2(0, 0), 0.05);
  auto consts = compute_constants(c, U, V, 32);
  REQUIRE(std::isfinite(consts.epsilon_c));
  auto chart = make_chart(c, U, v2(0, 0));
  auto ct = chart_modified_cost(chart);
  int tested = 0;
  for (int i = 0; i < 1000; ++i) {
    VectorXd x1 = U.halton_interior(i, 0);
    VectorXd x2 = U.halton_interior(i, 3);
    VectorXd y = V.halton_interior(i, 6);
    VectorXd q = chart.forward(x1), qt = chart.forward(x2);
    VectorXd g = ct.grad_q(q, y), gt = ct.grad_q(qt, y);
    CHECK((g - gt).norm() <=
          (1.0 / consts.epsilon_c) * (q - qt).norm() * gt.norm() + 1e-12);
    ++tested;
  }
  CHECK(tested == 1000);
}
