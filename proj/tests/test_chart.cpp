#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <Eigen/Dense>
#include <cmath>

#include "doctest.h"
#include "otreg/chart.hpp"
#include "otreg/cost.hpp"
#include "otreg/domain.hpp"
#include "otreg/rng.hpp"

using namespace otreg;

namespace {
VectorXd vec2(double a, double b) {
  VectorXd v(2);
  v << a, b;
  return v;
}
}  // namespace

TEST_CASE("bilinear chart is the identity") {
  auto c = builtin_cost("bilinear", 2);
  auto U = DomainSpec::ball(vec2(0, 0), 1.0);
  auto chart = make_chart(c, U, vec2(0.3, -0.7));
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    VectorXd x = U.sample_interior(rng);
    CHECK((chart.forward(x) - x).norm() < 1e-12);
  }
}

TEST_CASE("quadratic chart at the origin target is the identity") {
  auto c = builtin_cost("quadratic", 2);
  auto U = DomainSpec::ball(vec2(2, 0), 0.5);
  auto chart = make_chart(c, U, vec2(0, 0));
  VectorXd x = vec2(2.1, 0.2);
  CHECK((chart.forward(x) - x).norm() < 1e-12);
}

TEST_CASE("log chart forward value and sign convention") {
  // q = -D_y c(x, ytilde); for c = -log|x-y|, D_y c = (x-y)/|x-y|^2, so
  // x = (2,0), ytilde = (0,0) gives q = (-1/2, 0).
  auto c = builtin_cost("log_distance", 2);
  auto U = DomainSpec::ball(vec2(2, 0), 0.4);
  auto chart = make_chart(c, U, vec2(0, 0));
  VectorXd q = chart.forward(vec2(2, 0));
  CHECK(q[0] == doctest::Approx(-0.5));
  CHECK(q[1] == doctest::Approx(0.0));
}

TEST_CASE("chart round-trip") {
  auto c = builtin_cost("log_distance", 2);
  auto U = DomainSpec::ball(vec2(2, 0), 0.4);
  auto chart = make_chart(c, U, vec2(0, 0));
  for (int i = 0; i < 1000; ++i) {
    VectorXd x = U.halton_interior(static_cast<std::uint64_t>(i));
    VectorXd back = chart.inverse(chart.forward(x));
    CHECK((back - x).norm() <= 1e-8 * U.diameter());
  }
}

TEST_CASE("modified cost vanishes at the anchor target") {
  auto c = builtin_cost("log_distance", 2);
  auto U = DomainSpec::ball(vec2(2, 0), 0.4);
  VectorXd yt = vec2(0.1, -0.1);
  auto chart = make_chart(c, U, yt);
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    VectorXd q = chart.forward(U.sample_interior(rng));
    CHECK(std::abs(chart.modified_cost(q, yt)) < 1e-10);
  }
}

TEST_CASE("segments: endpoints and the bilinear straight line") {
  auto c = builtin_cost("bilinear", 2);
  VectorXd a = vec2(0.2, 0.5), e0 = vec2(-1, 0), e1 = vec2(1, 1);
  CHECK((c_segment(c, a, e0, e1, 0.0, SegmentSide::X) - e0).norm() == 0.0);
  CHECK((c_segment(c, a, e0, e1, 1.0, SegmentSide::X) - e1).norm() == 0.0);
  for (double t : {0.25, 0.5, 0.75}) {
    VectorXd p = c_segment(c, a, e0, e1, t, SegmentSide::X);
    CHECK((p - ((1 - t) * e0 + t * e1)).norm() < 1e-10);
    VectorXd py = c_segment(c, a, e0, e1, t, SegmentSide::Y);
    CHECK((py - ((1 - t) * e0 + t * e1)).norm() < 1e-10);
  }
}

TEST_CASE("log segment midpoint matches the dual midpoint") {
  auto c = builtin_cost("log_distance", 2);
  VectorXd anchor = vec2(0, 0), e0 = vec2(2, 0), e1 = vec2(0, 2);
  VectorXd mid = c_segment(c, anchor, e0, e1, 0.5, SegmentSide::X);
  VectorXd q0 = -grad_y(c, e0, anchor), q1 = -grad_y(c, e1, anchor);
  VectorXd qmid = -grad_y(c, mid, anchor);
  CHECK((qmid - 0.5 * (q0 + q1)).norm() < 1e-8);
}

TEST_CASE("inversion failure carries the witness coordinate") {
  auto c = builtin_cost("log_distance", 2);
  auto U = DomainSpec::ball(vec2(2, 0), 0.3);
  auto chart = make_chart(c, U, vec2(0, 0));
  bool caught = false;
  try {
    chart.inverse(vec2(1e6, 1e6));  // far outside the image
  } catch (const ChartInversionError& e) {
    caught = true;
    CHECK(e.q[0] == doctest::Approx(1e6));
  }
  CHECK(caught);
}

TEST_CASE("c-convexity: ball under the bilinear cost") {
  auto c = builtin_cost("bilinear", 2);
  auto U = DomainSpec::ball(vec2(0, 0), 1.5);
  auto V = DomainSpec::ball(vec2(0, 0), 0.5);
  auto rep = check_c_convexity(c, U, V, true, 512);
  CHECK(rep.convex);
  CHECK(rep.strong_checked);
  // The image is the ball itself; fitted boundary curvature = 1/radius.
  CHECK(rep.min_curvature == doctest::Approx(1.0 / 1.5).epsilon(1e-3));
}

TEST_CASE("c-convexity: L-shaped source is flagged") {
  auto c = builtin_cost("bilinear", 2);
  auto L = DomainSpec::unite({DomainSpec::box(vec2(0, 0), vec2(2, 1)),
                              DomainSpec::box(vec2(0, 0), vec2(1, 2))});
  auto V = DomainSpec::ball(vec2(0.5, 0.5), 0.3);
  auto rep = check_c_convexity(c, L, V, false, 512);
  CHECK(!rep.convex);
  CHECK(rep.worst_violation > 0.1);  // the notch is deep
  CHECK(rep.witness_x.size() == 2);
}

TEST_CASE("c-convexity: separated balls under the log cost") {
  auto c = builtin_cost("log_distance", 2);
  auto U = DomainSpec::ball(vec2(0, 0), 0.3);
  auto V = DomainSpec::ball(vec2(2, 0), 0.3);
  auto rep = check_c_convexity(c, U, V, false, 512);
  // Dense-oracle confirmation at 4x resolution: verdict must not flip.
  auto rep_fine = check_c_convexity(c, U, V, false, 2048);
  CHECK(rep.convex == rep_fine.convex);
}

TEST_CASE("renormalization: identity and quadratic fixed point") {
  auto u = [](const VectorXd& q) { return 0.5 * q.squaredNorm(); };
  auto ct = [](const VectorXd& q, const VectorXd& y) { return -q.dot(y); };
  auto id = AffineMap::identity(2);
  auto r = renormalize(u, ct, id, 2, vec2(0, 0));
  CHECK(r.u_star(vec2(0.3, 0.4)) == doctest::Approx(u(vec2(0.3, 0.4))));

  AffineMap L2(2.0 * MatrixXd::Identity(2, 2), VectorXd::Zero(2));
  auto r2 = renormalize(u, ct, L2, 2, vec2(0, 0));
  // |det| = 4, scale = 1/4: (1/4)|2q|^2/2 = |q|^2/2.
  for (double a : {0.1, 0.7, -0.4})
    CHECK(r2.u_star(vec2(a, -a)) == doctest::Approx(u(vec2(a, -a))));
}

TEST_CASE("renormalized cost pairs with the moved targets") {
  Rng rng(8);
  auto ct = [](const VectorXd& q, const VectorXd& y) {
    return -q.dot(y) + 0.1 * std::pow(q.dot(y), 3);
  };
  auto u = [](const VectorXd& q) { return q.lpNorm<1>(); };
  MatrixXd M = MatrixXd::Random(2, 2) + 2.0 * MatrixXd::Identity(2, 2);
  AffineMap L(M, vec2(0.1, -0.2));
  auto r = renormalize(u, ct, L, 2, vec2(0, 0));
  for (int i = 0; i < 20; ++i) {
    VectorXd q = rng.in_ball(vec2(0, 0), 1.0);
    VectorXd y = rng.in_ball(vec2(0, 0), 1.0);
    // c*(q, Lstar y) = scale * c~(Lq, y) by construction.
    CHECK(r.c_star(q, r.Lstar(y)) ==
          doctest::Approx(r.scale * ct(L(q), y)).epsilon(1e-10));
  }
  // The target map contracts measures by exactly |det L|^{-1}.
  CHECK(std::abs(r.Lstar.det) == doctest::Approx(1.0 / std::abs(L.det)));
}
