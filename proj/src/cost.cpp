#include "otreg/cost.hpp"

#include <algorithm>
#include <cmath>

namespace otreg {

void validate_slots(const std::vector<DerivSlot>& slots, int dim) {
  const int total = static_cast<int>(slots.size());
  if (total > 4) throw Error("derivative order exceeds smoothness budget (4)");
  int nx = 0, ny = 0;
  for (const auto& s : slots) {
    if (s.index < 0 || s.index >= dim) throw Error("derivative index out of range");
    (s.var == Var::X ? nx : ny)++;
  }
  if (total == 4 && (nx == 0 || ny == 0))
    throw Error("fourth-order derivatives need at least one slot per variable");
  if (total == 4 && (nx > 3 || ny > 3))
    throw Error("no more than three derivatives may fall on one variable");
}

namespace {

// Nested 5-point centered first differences, one slot at a time.
double fd_partial(const CostOracle& c, VectorXd x, VectorXd y,
                  const std::vector<DerivSlot>& slots, size_t k, double h) {
  if (k == slots.size()) return c.eval(x, y);
  const auto& s = slots[k];
  VectorXd& v = (s.var == Var::X) ? x : y;
  const double v0 = v[s.index];
  auto at = [&](double off) {
    v[s.index] = v0 + off;
    return fd_partial(c, x, y, slots, k + 1, h);
  };
  double d = (at(-2 * h) - 8 * at(-h) + 8 * at(h) - at(2 * h)) / (12 * h);
  v[s.index] = v0;
  return d;
}

double richardson_partial(const CostOracle& c, const VectorXd& x,
                          const VectorXd& y,
                          const std::vector<DerivSlot>& slots) {
  // Roundoff in a nested order-k stencil grows like eps/h^k. Widening the
  // step with the order keeps truncation and roundoff balanced (~1e-8 at
  // fourth order for the default step).
  const double h =
      c.fd_step * std::pow(10.0, (static_cast<double>(slots.size()) - 1) / 3.0);
  double coarse = fd_partial(c, x, y, slots, 0, h);
  double fine = fd_partial(c, x, y, slots, 0, h / 2);
  return (16.0 * fine - coarse) / 15.0;
}

}  // namespace

double eval_partial(const CostOracle& c, const VectorXd& x, const VectorXd& y,
                    const std::vector<DerivSlot>& slots) {
  validate_slots(slots, c.dim);
  if (slots.empty()) return c.eval(x, y);
  if (c.analytic_partial) return c.analytic_partial(x, y, slots);
  return richardson_partial(c, x, y, slots);
}

VectorXd grad_x(const CostOracle& c, const VectorXd& x, const VectorXd& y) {
  VectorXd g(c.dim);
  for (int i = 0; i < c.dim; ++i) g[i] = eval_partial(c, x, y, {{Var::X, i}});
  return g;
}

VectorXd grad_y(const CostOracle& c, const VectorXd& x, const VectorXd& y) {
  VectorXd g(c.dim);
  for (int i = 0; i < c.dim; ++i) g[i] = eval_partial(c, x, y, {{Var::Y, i}});
  return g;
}

MatrixXd cross_hessian(const CostOracle& c, const VectorXd& x,
                       const VectorXd& y) {
  MatrixXd m(c.dim, c.dim);
  for (int i = 0; i < c.dim; ++i)
    for (int j = 0; j < c.dim; ++j)
      m(i, j) = eval_partial(c, x, y, {{Var::X, i}, {Var::Y, j}});
  return m;
}

MatrixXd hess_xx(const CostOracle& c, const VectorXd& x, const VectorXd& y) {
  MatrixXd m(c.dim, c.dim);
  for (int i = 0; i < c.dim; ++i)
    for (int j = i; j < c.dim; ++j)
      m(i, j) = m(j, i) = eval_partial(c, x, y, {{Var::X, i}, {Var::X, j}});
  return m;
}

MatrixXd hess_yy(const CostOracle& c, const VectorXd& x, const VectorXd& y) {
  MatrixXd m(c.dim, c.dim);
  for (int i = 0; i < c.dim; ++i)
    for (int j = i; j < c.dim; ++j)
      m(i, j) = m(j, i) = eval_partial(c, x, y, {{Var::Y, i}, {Var::Y, j}});
  return m;
}

std::vector<MatrixXd> third_xxy(const CostOracle& c, const VectorXd& x,
                                const VectorXd& y) {
  std::vector<MatrixXd> t(c.dim, MatrixXd(c.dim, c.dim));
  for (int k = 0; k < c.dim; ++k)
    for (int i = 0; i < c.dim; ++i)
      for (int j = i; j < c.dim; ++j)
        t[k](i, j) = t[k](j, i) =
            eval_partial(c, x, y, {{Var::X, i}, {Var::X, j}, {Var::Y, k}});
  return t;
}

std::vector<MatrixXd> third_xyy(const CostOracle& c, const VectorXd& x,
                                const VectorXd& y) {
  std::vector<MatrixXd> t(c.dim, MatrixXd(c.dim, c.dim));
  for (int i = 0; i < c.dim; ++i)
    for (int k = 0; k < c.dim; ++k)
      for (int l = k; l < c.dim; ++l)
        t[i](k, l) = t[i](l, k) =
            eval_partial(c, x, y, {{Var::X, i}, {Var::Y, k}, {Var::Y, l}});
  return t;
}

MatrixXd cross_hessian_checked(const CostOracle& c, const VectorXd& x,
                               const VectorXd& y, double det_tol) {
  MatrixXd m = cross_hessian(c, x, y);
  if (std::abs(m.determinant()) < det_tol)
    throw BiTwistError("singular cross-Hessian (B1 violation)", x, y);
  return m;
}

CostConstants compute_constants(const CostOracle& c, const DomainSpec& U,
                                const DomainSpec& V, int samples) {
  if (samples < 1) throw Error("compute_constants needs samples >= 1");
  CostConstants k;
  for (int s = 0; s < samples; ++s) {
    VectorXd x = U.halton_interior(s, 0);
    VectorXd y = V.halton_interior(s, 3);
    MatrixXd m = cross_hessian(c, x, y);
    Eigen::JacobiSVD<MatrixXd> svd(m);
    double smin = svd.singularValues().minCoeff();
    double smax = svd.singularValues().maxCoeff();
    if (smin < 1e-12)
      throw BiTwistError("singular cross-Hessian (B1 violation)", x, y);
    k.beta_plus = std::max(k.beta_plus, smax);
    k.beta_minus = std::max(k.beta_minus, 1.0 / smin);
    double det = std::abs(m.determinant());
    k.gamma_plus = std::max(k.gamma_plus, det);
    k.gamma_minus = std::max(k.gamma_minus, 1.0 / det);
    auto t3 = third_xxy(c, x, y);
    double frob2 = 0.0;
    for (const auto& slab : t3) frob2 += slab.squaredNorm();
    k.third_norm = std::max(k.third_norm, std::sqrt(frob2));
  }
  // Third derivatives of built-in quadratic/bilinear costs vanish exactly;
  // snap FD noise to zero so the sentinel is reachable.
  if (k.third_norm < 1e-10 * std::max(1.0, k.beta_plus)) k.third_norm = 0.0;
  if (k.third_norm == 0.0)
    k.epsilon_c = std::numeric_limits<double>::infinity();
  else
    k.epsilon_c = 1.0 / (2.0 * std::pow(k.beta_plus, 4) *
                         std::pow(k.beta_minus, 6) * k.third_norm);
  return k;
}

// --- built-ins ---------------------------------------------------------

namespace {

// Costs of the form c(x,y) = phi(x - y): each y-derivative flips the sign of
// the corresponding phi partial.
struct RadialPartial {
  // phi derivative entries for quadratic phi(r) = |r|^2/2.
  static double quadratic(const VectorXd& r, const std::vector<int>& ix) {
    switch (ix.size()) {
      case 1: return r[ix[0]];
      case 2: return ix[0] == ix[1] ? 1.0 : 0.0;
      default: return 0.0;
    }
  }

  // phi derivative entries for phi(r) = -log |r|.
  static double logdist(const VectorXd& r, const std::vector<int>& ix) {
    const double rho = r.squaredNorm();
    auto d = [](int a, int b) { return a == b ? 1.0 : 0.0; };
    switch (ix.size()) {
      case 1:
        return -r[ix[0]] / rho;
      case 2: {
        int i = ix[0], j = ix[1];
        return -d(i, j) / rho + 2.0 * r[i] * r[j] / (rho * rho);
      }
      case 3: {
        int i = ix[0], j = ix[1], k = ix[2];
        double rho2 = rho * rho, rho3 = rho2 * rho;
        return 2.0 * (d(i, j) * r[k] + d(i, k) * r[j] + d(j, k) * r[i]) / rho2 -
               8.0 * r[i] * r[j] * r[k] / rho3;
      }
      case 4: {
        int i = ix[0], j = ix[1], k = ix[2], l = ix[3];
        double rho2 = rho * rho, rho3 = rho2 * rho, rho4 = rho3 * rho;
        double dd = d(i, j) * d(k, l) + d(i, k) * d(j, l) + d(i, l) * d(j, k);
        double dr = d(i, j) * r[k] * r[l] + d(i, k) * r[j] * r[l] +
                    d(i, l) * r[j] * r[k] + d(j, k) * r[i] * r[l] +
                    d(j, l) * r[i] * r[k] + d(k, l) * r[i] * r[j];
        return 2.0 * dd / rho2 - 8.0 * dr / rho3 +
               48.0 * r[i] * r[j] * r[k] * r[l] / rho4;
      }
      default:
        return 0.0;
    }
  }
};

double bilinear_partial(const VectorXd& x, const VectorXd& y,
                        const std::vector<DerivSlot>& slots) {
  int nx = 0, ny = 0, ix = -1, iy = -1;
  for (const auto& s : slots) {
    if (s.var == Var::X) { ++nx; ix = s.index; }
    else { ++ny; iy = s.index; }
  }
  if (nx == 1 && ny == 0) return -y[ix];
  if (nx == 0 && ny == 1) return -x[iy];
  if (nx == 1 && ny == 1) return ix == iy ? -1.0 : 0.0;
  return 0.0;
}

// Partial derivatives of <x,y>^3.
double cube_partial(const VectorXd& x, const VectorXd& y,
                    const std::vector<DerivSlot>& slots) {
  const double s = x.dot(y);
  std::vector<int> xi, yi;
  for (const auto& sl : slots)
    (sl.var == Var::X ? xi : yi).push_back(sl.index);
  auto d = [](int a, int b) { return a == b ? 1.0 : 0.0; };
  const int nx = static_cast<int>(xi.size()), ny = static_cast<int>(yi.size());
  if (nx == 1 && ny == 0) return 3 * s * s * y[xi[0]];
  if (nx == 0 && ny == 1) return 3 * s * s * x[yi[0]];
  if (nx == 2 && ny == 0) return 6 * s * y[xi[0]] * y[xi[1]];
  if (nx == 0 && ny == 2) return 6 * s * x[yi[0]] * x[yi[1]];
  if (nx == 1 && ny == 1)
    return 6 * s * x[yi[0]] * y[xi[0]] + 3 * s * s * d(xi[0], yi[0]);
  if (nx == 3 && ny == 0) return 6 * y[xi[0]] * y[xi[1]] * y[xi[2]];
  if (nx == 0 && ny == 3) return 6 * x[yi[0]] * x[yi[1]] * x[yi[2]];
  if (nx == 2 && ny == 1) {
    int i = xi[0], j = xi[1], k = yi[0];
    return 6 * x[k] * y[i] * y[j] + 6 * s * (d(i, k) * y[j] + d(j, k) * y[i]);
  }
  if (nx == 1 && ny == 2) {
    int i = xi[0], k = yi[0], l = yi[1];
    return 6 * y[i] * x[k] * x[l] + 6 * s * (d(i, k) * x[l] + d(i, l) * x[k]);
  }
  if (nx == 2 && ny == 2) {
    int i = xi[0], j = xi[1], k = yi[0], l = yi[1];
    return 6 * x[k] * (d(i, l) * y[j] + d(j, l) * y[i]) +
           6 * x[l] * (d(i, k) * y[j] + d(j, k) * y[i]) +
           6 * s * (d(i, k) * d(j, l) + d(i, l) * d(j, k));
  }
  if (nx == 3 && ny == 1) {
    int i = xi[0], j = xi[1], k = xi[2], l = yi[0];
    return 6 * (d(i, l) * y[j] * y[k] + d(j, l) * y[i] * y[k] +
                d(k, l) * y[i] * y[j]);
  }
  if (nx == 1 && ny == 3) {
    int i = yi[0], j = yi[1], k = yi[2], l = xi[0];
    return 6 * (d(i, l) * x[j] * x[k] + d(j, l) * x[i] * x[k] +
                d(k, l) * x[i] * x[j]);
  }
  return 0.0;
}

}  // namespace

CostOracle builtin_cost(const std::string& name, int dim, double epsilon) {
  CostOracle c;
  c.dim = dim;
  c.name = name;
  if (name == "bilinear") {
    c.eval = [](const VectorXd& x, const VectorXd& y) { return -x.dot(y); };
    c.analytic_partial = [](const VectorXd& x, const VectorXd& y,
                            const std::vector<DerivSlot>& s) {
      return bilinear_partial(x, y, s);
    };
  } else if (name == "quadratic") {
    c.eval = [](const VectorXd& x, const VectorXd& y) {
      return 0.5 * (x - y).squaredNorm();
    };
    c.analytic_partial = [](const VectorXd& x, const VectorXd& y,
                            const std::vector<DerivSlot>& slots) {
      VectorXd r = x - y;
      std::vector<int> ix;
      int ny = 0;
      for (const auto& s : slots) {
        ix.push_back(s.index);
        if (s.var == Var::Y) ++ny;
      }
      double sign = (ny % 2 == 0) ? 1.0 : -1.0;
      return sign * RadialPartial::quadratic(r, ix);
    };
  } else if (name == "log_distance") {
    c.eval = [](const VectorXd& x, const VectorXd& y) {
      return -std::log((x - y).norm());
    };
    c.analytic_partial = [](const VectorXd& x, const VectorXd& y,
                            const std::vector<DerivSlot>& slots) {
      VectorXd r = x - y;
      std::vector<int> ix;
      int ny = 0;
      for (const auto& s : slots) {
        ix.push_back(s.index);
        if (s.var == Var::Y) ++ny;
      }
      double sign = (ny % 2 == 0) ? 1.0 : -1.0;
      return sign * RadialPartial::logdist(r, ix);
    };
  } else if (name == "perturbed") {
    const double eps = epsilon;
    c.eval = [eps](const VectorXd& x, const VectorXd& y) {
      double s = x.dot(y);
      return -s + eps * s * s * s;
    };
    c.analytic_partial = [eps](const VectorXd& x, const VectorXd& y,
                               const std::vector<DerivSlot>& s) {
      return bilinear_partial(x, y, s) + eps * cube_partial(x, y, s);
    };
  } else {
    throw Error("unknown cost name: " + name);
  }
  return c;
}

CostOracle transpose(const CostOracle& c) {
  CostOracle t;
  t.dim = c.dim;
  t.name = c.name + "_transposed";
  t.fd_step = c.fd_step;
  auto ev = c.eval;
  t.eval = [ev](const VectorXd& x, const VectorXd& y) { return ev(y, x); };
  if (c.analytic_partial) {
    auto ap = c.analytic_partial;
    t.analytic_partial = [ap](const VectorXd& x, const VectorXd& y,
                              const std::vector<DerivSlot>& slots) {
      std::vector<DerivSlot> sw = slots;
      for (auto& s : sw) s.var = (s.var == Var::X) ? Var::Y : Var::X;
      return ap(y, x, sw);
    };
  }
  return t;
}

}  // namespace otreg
