#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <Eigen/Dense>
#include <cmath>

#include "doctest.h"
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
VectorXd vec3(double a, double b, double c) {
  VectorXd v(3);
  v << a, b, c;
  return v;
}
// Strips the analytic evaluator so eval_partial exercises the FD fallback.
CostOracle fd_only(CostOracle c) {
  c.analytic_partial = nullptr;
  return c;
}
}  // namespace

TEST_CASE("built-in cost values") {
  auto bil = builtin_cost("bilinear", 2);
  CHECK(bil(vec2(1, 2), vec2(3, 4)) == doctest::Approx(-11.0));

  auto quad = builtin_cost("quadratic", 2);
  CHECK(quad(vec2(0.7, -0.3), vec2(0.7, -0.3)) == doctest::Approx(0.0));

  auto logc = builtin_cost("log_distance", 2);
  CHECK(logc(vec2(1, 0), vec2(0, 0)) == doctest::Approx(0.0));  // |x-y| = 1

  CHECK_THROWS_AS(builtin_cost("nope", 2), Error);
}

TEST_CASE("bilinear cross-Hessian is minus identity") {
  auto bil = builtin_cost("bilinear", 3);
  MatrixXd H = cross_hessian(bil, vec3(0.2, -1, 0.5), vec3(1, 2, 3));
  CHECK((H + MatrixXd::Identity(3, 3)).norm() < 1e-12);
}

TEST_CASE("quadratic third derivatives vanish") {
  auto quad = builtin_cost("quadratic", 2);
  auto T = third_xxy(quad, vec2(0.3, 0.4), vec2(-0.2, 0.9));
  for (const auto& M : T) CHECK(M.norm() < 1e-12);
}

TEST_CASE("log cost x-gradient") {
  // D_x(-log|x-y|) = -(x-y)/|x-y|^2; at x=(1,0), y=(0,0) this is (-1,0).
  auto logc = builtin_cost("log_distance", 2);
  VectorXd g = grad_x(logc, vec2(1, 0), vec2(0, 0));
  CHECK(g[0] == doctest::Approx(-1.0));
  CHECK(g[1] == doctest::Approx(0.0));
}

TEST_CASE("derivative order budget") {
  auto quad = builtin_cost("quadratic", 2);
  std::vector<DerivSlot> four_on_x = {{Var::X, 0}, {Var::X, 0}, {Var::X, 1},
                                      {Var::X, 1}};
  CHECK_THROWS_AS(eval_partial(quad, vec2(0, 0), vec2(1, 1), four_on_x),
                  Error);
  std::vector<DerivSlot> three_one = {{Var::X, 0}, {Var::X, 0}, {Var::X, 1},
                                      {Var::Y, 1}};
  CHECK_NOTHROW(eval_partial(quad, vec2(0, 0), vec2(1, 1), three_one));
  std::vector<DerivSlot> five(5, DerivSlot{Var::X, 0});
  CHECK_THROWS_AS(eval_partial(quad, vec2(0, 0), vec2(1, 1), five), Error);
  CHECK_THROWS_AS(eval_partial(quad, vec2(0, 0), vec2(1, 1),
                               {DerivSlot{Var::X, 7}}),
                  Error);
}

TEST_CASE("finite differences match analytic derivatives") {
  Rng rng(42);
  for (const char* name : {"bilinear", "quadratic", "log_distance"}) {
    auto c = builtin_cost(name, 2);
    auto cfd = fd_only(c);
    for (int trial = 0; trial < 100; ++trial) {
      VectorXd x = rng.in_ball(vec2(0, 0), 0.4);
      VectorXd y = rng.in_ball(vec2(2, 0), 0.4);  // separated for the log
      std::vector<std::vector<DerivSlot>> orders = {
          {{Var::X, 0}},
          {{Var::Y, 1}},
          {{Var::X, 0}, {Var::Y, 1}},
          {{Var::X, 1}, {Var::X, 0}, {Var::Y, 0}},
          {{Var::X, 0}, {Var::X, 1}, {Var::Y, 0}, {Var::Y, 1}},
      };
      for (const auto& ord : orders) {
        double a = eval_partial(c, x, y, ord);
        double f = eval_partial(cfd, x, y, ord);
        // 5-point stencil + Richardson: absolute error well under 1e-5
        // at fd_step = 1e-3 for these smooth costs on separated balls.
        CHECK(std::abs(a - f) < 1e-5 * (1.0 + std::abs(a)));
      }
    }
  }
}

TEST_CASE("symmetric costs evaluate symmetrically") {
  Rng rng(7);
  for (const char* name : {"quadratic", "log_distance"}) {
    auto c = builtin_cost(name, 3);
    for (int trial = 0; trial < 50; ++trial) {
      VectorXd x = rng.in_ball(vec3(0, 0, 0), 0.5);
      VectorXd y = rng.in_ball(vec3(2, 0, 0), 0.5);
      CHECK(c(x, y) == c(y, x));
    }
  }
}

TEST_CASE("perturbed cost derivatives agree with finite differences") {
  auto c = builtin_cost("perturbed", 2, 0.1);
  auto cfd = fd_only(c);
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    VectorXd x = rng.in_ball(vec2(0, 0), 1.0);
    VectorXd y = rng.in_ball(vec2(0, 0), 1.0);
    std::vector<std::vector<DerivSlot>> orders = {
        {{Var::X, 0}, {Var::Y, 1}},
        {{Var::X, 0}, {Var::X, 1}, {Var::Y, 0}},
        {{Var::X, 0}, {Var::Y, 0}, {Var::Y, 1}},
        {{Var::X, 0}, {Var::X, 1}, {Var::Y, 0}, {Var::Y, 1}},
        {{Var::X, 0}, {Var::X, 0}, {Var::X, 1}, {Var::Y, 1}},
        {{Var::X, 0}, {Var::Y, 0}, {Var::Y, 1}, {Var::Y, 1}},
    };
    for (const auto& ord : orders) {
      double a = eval_partial(c, x, y, ord);
      double f = eval_partial(cfd, x, y, ord);
      CHECK(std::abs(a - f) < 2e-4 * (1.0 + std::abs(a)));
    }
  }
}

TEST_CASE("constants for flat costs") {
  auto U = DomainSpec::ball(vec2(0, 0), 1.0);
  auto V = DomainSpec::ball(vec2(0, 0), 1.0);
  for (const char* name : {"bilinear", "quadratic"}) {
    auto k = compute_constants(builtin_cost(name, 2), U, V, 64);
    CHECK(k.beta_plus == doctest::Approx(1.0));
    CHECK(k.beta_minus == doctest::Approx(1.0));
    CHECK(k.gamma_plus == doctest::Approx(1.0));
    CHECK(k.gamma_minus == doctest::Approx(1.0));
    CHECK(std::isinf(k.epsilon_c));
    CHECK(k.third_norm == 0.0);
  }
}

TEST_CASE("constants for the log cost on separated balls") {
  auto U = DomainSpec::ball(vec2(0, 0), 0.3);
  auto V = DomainSpec::ball(vec2(2, 0), 0.3);
  auto k = compute_constants(builtin_cost("log_distance", 2), U, V, 256);
  CHECK(k.beta_plus > 0);
  CHECK(k.beta_minus > 0);
  CHECK(k.gamma_plus > 0);
  CHECK(k.gamma_minus > 0);
  CHECK(k.third_norm > 0);
  CHECK(std::isfinite(k.epsilon_c));
  CHECK(k.epsilon_c > 0);
  // Product lower bounds (Cauchy-Schwarz / det multiplicativity).
  CHECK(k.beta_plus * k.beta_minus >= 1.0 - 1e-12);
  CHECK(k.gamma_plus * k.gamma_minus >= 1.0 - 1e-12);
  // Deterministic definition relating the small-section scale to the
  // bi-Lipschitz constants and the third-derivative bound.
  double inv = 2.0 * std::pow(k.beta_plus, 4) * std::pow(k.beta_minus, 6) *
               k.third_norm;
  CHECK(k.epsilon_c == doctest::Approx(1.0 / inv));
}

TEST_CASE("constants are monotone in the sample count") {
  auto U = DomainSpec::ball(vec2(0, 0), 0.3);
  auto V = DomainSpec::ball(vec2(2, 0), 0.3);
  auto c = builtin_cost("log_distance", 2);
  CostConstants prev;
  bool first = true;
  for (int samples : {16, 64, 256, 1024}) {
    auto k = compute_constants(c, U, V, samples);
    if (!first) {
      CHECK(k.beta_plus >= prev.beta_plus);
      CHECK(k.beta_minus >= prev.beta_minus);
      CHECK(k.gamma_plus >= prev.gamma_plus);
      CHECK(k.gamma_minus >= prev.gamma_minus);
      CHECK(k.third_norm >= prev.third_norm);
      CHECK(k.epsilon_c <= prev.epsilon_c);
    }
    prev = k;
    first = false;
  }
}

TEST_CASE("singular cross-Hessian raises a witness-carrying error") {
  CostOracle flat;
  flat.dim = 2;
  flat.name = "flat";
  flat.eval = [](const VectorXd&, const VectorXd&) { return 0.0; };
  flat.fd_step = 1e-3;
  bool caught = false;
  try {
    cross_hessian_checked(flat, vec2(0.5, 0.5), vec2(1, 1));
  } catch (const BiTwistError& e) {
    caught = true;
    CHECK(e.x[0] == doctest::Approx(0.5));
  }
  CHECK(caught);
}

TEST_CASE("transpose swaps the argument roles") {
  auto c = builtin_cost("perturbed", 2, 0.05);
  auto ct = transpose(c);
  VectorXd x = vec2(0.3, -0.2), y = vec2(0.8, 0.1);
  CHECK(ct(y, x) == doctest::Approx(c(x, y)));
  MatrixXd H = cross_hessian(c, x, y);
  MatrixXd Ht = cross_hessian(ct, y, x);
  CHECK((H - Ht.transpose()).norm() < 1e-12);
}
