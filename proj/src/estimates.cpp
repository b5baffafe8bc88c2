#include "otreg/estimates.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <memory>
#include <unordered_map>

namespace otreg {

ModifiedCost linear_modified_cost(int dim) {
  ModifiedCost ct;
  ct.dim = dim;
  ct.value = [](const VectorXd& q, const VectorXd& y) { return -q.dot(y); };
  ct.grad_q = [](const VectorXd&, const VectorXd& y) -> VectorXd { return -y; };
  return ct;
}

ModifiedCost chart_modified_cost(const CoordinateChart& chart) {
  // Cone construction evaluates c~ at the same boundary points for
  // thousands of candidate targets; memoize the chart inversion.
  auto memo = std::make_shared<std::unordered_map<std::string, VectorXd>>();
  auto xof = [&chart, memo](const VectorXd& q) -> VectorXd {
    std::string key(reinterpret_cast<const char*>(q.data()),
                    q.size() * sizeof(double));
    auto it = memo->find(key);
    if (it != memo->end()) return it->second;
    VectorXd x = chart.inverse(q);
    memo->emplace(std::move(key), x);
    return x;
  };
  ModifiedCost ct;
  ct.dim = chart.cost().dim;
  const CostOracle& c = chart.cost();
  VectorXd yt = chart.base_target();
  ct.value = [&c, yt, xof](const VectorXd& q, const VectorXd& y) {
    VectorXd x = xof(q);
    return c(x, y) - c(x, yt);
  };
  ct.grad_q = [&c, yt, xof](const VectorXd& q, const VectorXd& y) -> VectorXd {
    VectorXd x = xof(q);
    // dq/dx = -(D2_xy c)^T at ytilde; pull the x-gradient back through it
    MatrixXd A = cross_hessian(c, x, yt);
    VectorXd g = grad_x(c, x, y) - grad_x(c, x, yt);
    return (-A).partialPivLu().solve(g);
  };
  return ct;
}

double Section::vertex_plane_dist() const {
  double s = axis.dot(vertex);
  return std::min(pi_plus - s, s - pi_minus);
}

namespace {

std::vector<VectorXd> direction_grid(int n, int count) {
  std::vector<VectorXd> dirs;
  dirs.reserve(count);
  if (n == 2) {
    for (int i = 0; i < count; ++i) {
      double th = 2.0 * M_PI * i / count;
      VectorXd d(2);
      d << std::cos(th), std::sin(th);
      dirs.push_back(d);
    }
  } else if (n == 3) {
    const double ga = M_PI * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < count; ++i) {
      double z = 1.0 - 2.0 * (i + 0.5) / count;
      double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      VectorXd d(3);
      d << r * std::cos(ga * i), r * std::sin(ga * i), z;
      dirs.push_back(d);
    }
  } else {
    throw DomainError("sections support n = 2 or 3");
  }
  return dirs;
}

// Ray-cast from an interior point to the facet shell.
double body_ray(const ConvexBody& Z, const VectorXd& p, const VectorXd& dir) {
  double t = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < Z.offsets().size(); ++i) {
    double denom = Z.normals().row(i).dot(dir);
    if (denom > 1e-14)
      t = std::min(t, std::max(0.0, (Z.offsets()[i] -
                                     Z.normals().row(i).dot(p)) /
                                        denom));
  }
  if (!std::isfinite(t)) throw DegenerateBodyError("unbounded body ray");
  return t;
}

std::vector<VectorXd> body_boundary(const ConvexBody& Z, int count) {
  std::vector<VectorXd> out;
  const VectorXd& c = Z.barycenter();
  for (const auto& d : direction_grid(Z.dimension(), count))
    out.push_back(c + body_ray(Z, c, d) * d);
  for (const auto& v : Z.vertices()) out.push_back(v);
  return out;
}

// Low-discrepancy interior points of a convex body.
std::vector<VectorXd> body_interior(const ConvexBody& Z, int count,
                                    int base_offset = 0) {
  const int n = Z.dimension();
  VectorXd lo = Z.vertices()[0], hi = Z.vertices()[0];
  for (const auto& v : Z.vertices()) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  std::vector<VectorXd> out;
  std::uint64_t i = 11;
  const double tol = 1e-12 * Z.diameter();
  while (static_cast<int>(out.size()) < count) {
    VectorXd u = halton_point(i, n, base_offset);
    i += 13;
    VectorXd q = lo + u.cwiseProduct(hi - lo);
    if (Z.margin(q) > tol) out.push_back(std::move(q));
    if (i > 2000000ull * (count + 1)) break;
  }
  if (out.empty()) out.push_back(Z.barycenter());
  return out;
}

double infimum_over(const ConvexBody& Z,
                    const std::function<double(const VectorXd&)>& f,
                    int samples) {
  double best = f(Z.barycenter());
  VectorXd arg = Z.barycenter();
  for (const auto& q : body_interior(Z, samples)) {
    double v = f(q);
    if (v < best) best = v, arg = q;
  }
  // compass polish inside the body
  const int n = Z.dimension();
  double h = 0.1 * Z.diameter();
  while (h > 1e-7 * Z.diameter()) {
    bool moved = false;
    for (int i = 0; i < n && !moved; ++i)
      for (int s = -1; s <= 1; s += 2) {
        VectorXd q = arg;
        q[i] += s * h;
        if (Z.margin(q) < 0) continue;
        double v = f(q);
        if (v < best) {
          best = v;
          arg = q;
          moved = true;
          break;
        }
      }
    if (!moved) h *= 0.5;
  }
  return best;
}

}  // namespace

double chord_length(const ConvexBody& Z, const VectorXd& point,
                    const VectorXd& dir) {
  if (Z.margin(point) < -1e-9 * Z.diameter()) return 0.0;
  return body_ray(Z, point, dir) + body_ray(Z, point, -dir);
}

Section extract_section(const std::function<double(const VectorXd&)>& u_tilde,
                        const DomainSpec& q_domain, const VectorXd& anchor,
                        double level, int resolution, const VectorXd* axis) {
  if (!q_domain.convex())
    throw DomainError("extract_section needs a convex chart domain");
  if (u_tilde(anchor) >= level)
    throw DomainError("anchor not in the open sublevel set");
  const auto& piece = q_domain.pieces()[0];
  std::vector<VectorXd> boundary;
  for (const auto& d : direction_grid(static_cast<int>(anchor.size()),
                                      resolution)) {
    double hi = piece.boundary_ray(anchor, d);
    if (u_tilde(anchor + hi * d) <= level)
      throw DomainError("section is not localized: sublevel set reaches the "
                        "chart boundary");
    double lo = 0.0;
    for (int it = 0; it < 60; ++it) {
      double mid = 0.5 * (lo + hi);
      (u_tilde(anchor + mid * d) <= level ? lo : hi) = mid;
    }
    boundary.push_back(anchor + 0.5 * (lo + hi) * d);
  }
  Section sec;
  sec.u_tilde = u_tilde;
  sec.level = level;
  sec.Z = ConvexBody::from_points(boundary);
  sec.vertex = anchor;
  if (axis) {
    sec.axis = axis->normalized();
  } else {
    // longest axis of the enclosing ellipsoid
    // Section hulls are dense and near-cocircular; the ellipsoid certificate
    // only needs to localize the long axis here, so relax it.
    AffineMap L = john_ellipsoid(sec.Z, 1e-6);
    Eigen::JacobiSVD<MatrixXd> svd(L.linear, Eigen::ComputeFullU);
    sec.axis = svd.matrixU().col(0);
  }
  sec.pi_plus = sec.Z.support(sec.axis);
  sec.pi_minus = -sec.Z.support(-sec.axis);
  double ell = chord_length(sec.Z, sec.Z.barycenter(), sec.axis);
  for (const auto& p : body_interior(sec.Z, 128, 3))
    ell = std::max(ell, chord_length(sec.Z, p, sec.axis));
  for (const auto& v : sec.Z.vertices()) {
    VectorXd p = v + 1e-9 * (sec.Z.barycenter() - v);
    ell = std::max(ell, chord_length(sec.Z, p, sec.axis));
  }
  sec.ell_plus = ell;
  return sec;
}

CCone build_c_cone(const Section& sec, const ModifiedCost& ct,
                   const DomainSpec& targets, int resolution) {
  CCone cone;
  cone.vertex = sec.vertex;
  cone.height = sec.u_tilde(sec.vertex) - sec.level;
  if (cone.height >= 0.0)
    throw Error("c-cone vertex is not below the section level");
  const int n = sec.Z.dimension();
  auto shell = body_boundary(sec.Z, n == 2 ? 512 : 1024);
  cone.boundary_tol = 1e-9 * (1.0 + std::abs(cone.height));

  auto violation = [&](const VectorXd& y) {
    const double base = ct.value(sec.vertex, y) + cone.height;
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& q : shell)
      worst = std::max(worst, -ct.value(q, y) + base);
    return worst;
  };
  auto admissible = [&](const VectorXd& y) {
    const double base = ct.value(sec.vertex, y) + cone.height;
    for (const auto& q : shell)
      if (-ct.value(q, y) + base > cone.boundary_tol) return false;
    return true;
  };
  for (int i = 0; i < resolution; ++i) {
    VectorXd y = targets.halton_interior(1 + 7 * std::uint64_t(i), 0);
    if (admissible(y)) cone.targets.push_back(std::move(y));
  }
  // The admissible set can be far smaller than any scan spacing (its size
  // scales with the section, not with the target domain), so locate it by
  // minimizing the boundary violation from a fixed pilot grid and then
  // ray-cast its boundary from that seed. The pilot set does not depend on
  // `resolution`, which keeps the subgradient hull monotone in it.
  VectorXd seed;
  {
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 256; ++i) {
      VectorXd y = targets.halton_interior(1 + 7 * std::uint64_t(i), 0);
      double v = violation(y);
      if (v < best) best = v, seed = std::move(y);
    }
    double h = 0.25 * targets.diameter();
    const double hmin = 1e-14 * (1.0 + targets.diameter());
    while (h > hmin) {
      bool moved = false;
      for (int i = 0; i < n && !moved; ++i)
        for (double s : {1.0, -1.0}) {
          VectorXd y = seed;
          y[i] += s * h;
          if (!targets.contains(y)) continue;
          double v = violation(y);
          if (v < best) {
            best = v, seed = std::move(y);
            moved = true;
            break;
          }
        }
      if (!moved) h *= 0.5;
    }
    if (best > cone.boundary_tol && !cone.targets.empty())
      seed = cone.targets.front();
  }
  if (admissible(seed)) {
    cone.targets.push_back(seed);
    for (const auto& d : direction_grid(n, n == 2 ? 64 : 96)) {
      double lo = 0.0, hi = targets.diameter();
      if (targets.contains(seed + hi * d) && admissible(seed + hi * d)) {
        cone.targets.push_back(seed + hi * d);
        continue;
      }
      for (int it = 0; it < 60; ++it) {
        double mid = 0.5 * (lo + hi);
        VectorXd y = seed + mid * d;
        if (targets.contains(y) && admissible(y))
          lo = mid;
        else
          hi = mid;
      }
      if (lo > 0.0) cone.targets.push_back(seed + lo * d);
    }
  }
  if (cone.targets.empty()) {
    std::cerr << "build_c_cone: no admissible target, flat mountain only\n";
    cone.degenerate = true;
  }
  cone.gradients.push_back(VectorXd::Zero(n));  // the flat mountain
  for (const auto& y : cone.targets)
    cone.gradients.push_back(-ct.grad_q(sec.vertex, y));

  std::vector<double> base(cone.targets.size());
  for (std::size_t i = 0; i < cone.targets.size(); ++i)
    base[i] = ct.value(sec.vertex, cone.targets[i]) + cone.height;
  auto value = ct.value;
  auto ys = cone.targets;
  double height = cone.height;
  cone.h = [value, ys, base, height](const VectorXd& q) {
    double best = height;
    for (std::size_t i = 0; i < ys.size(); ++i)
      best = std::max(best, -value(q, ys[i]) + base[i]);
    return best;
  };
  for (const auto& q : shell)
    if (cone.h(q) > cone.boundary_tol)
      throw Error("c-cone exceeds zero on the section boundary");
  return cone;
}

AlexandrovReport alexandrov_upper(const Section& sec, double t, int samples) {
  if (t <= 0.0 || t >= 1.0) throw Error("alexandrov_upper: t in (0,1)");
  const int n = sec.Z.dimension();
  // renormalized position: B_1 subset Z subset B_n
  const double tol = 1e-4 * (1.0 + sec.Z.diameter());
  if (sec.Z.offsets().minCoeff() < 1.0 - tol)
    throw Error("alexandrov_upper: section not renormalized (B_1 not inside)");
  for (const auto& v : sec.Z.vertices())
    if (v.norm() > n + tol)
      throw Error("alexandrov_upper: section not renormalized (outside B_n)");

  AlexandrovReport rep;
  auto shifted = [&](const VectorXd& q) { return sec.u_tilde(q) - sec.level; };
  rep.inf_u = infimum_over(sec.Z, shifted, samples);
  rep.leb_z = sec.Z.volume();
  const double a = std::abs(rep.inf_u);
  rep.slope_bound = a / (1.0 - t);
  rep.lhs = ball_volume(n, rep.slope_bound);
  rep.rhs = std::pow(a, n) / (std::pow(1.0 - t, n) * rep.leb_z);
  rep.cn = rep.lhs / rep.rhs;

  // measured difference quotients on tZ stay under the subgradient bound
  Rng rng(0xa1e7);
  const double h = 1e-5 * sec.Z.diameter();
  rep.max_slope = 0.0;
  for (const auto& q0 : body_interior(sec.Z, samples / 4, 6)) {
    VectorXd q = t * q0;
    for (int k = 0; k < 4; ++k) {
      VectorXd d = rng.on_sphere(n);
      double s = std::abs(shifted(q + h * d) - shifted(q - h * d)) / (2 * h);
      rep.max_slope = std::max(rep.max_slope, s);
    }
  }
  rep.slope_ok = rep.max_slope <= rep.slope_bound * (1.0 + 1e-3) + 1e-12;
  return rep;
}

namespace {

VectorXd fd_gradient(const std::function<double(const VectorXd&)>& f,
                     const VectorXd& q, double h) {
  VectorXd g(q.size());
  for (int i = 0; i < q.size(); ++i) {
    VectorXd e = VectorXd::Zero(q.size());
    e[i] = h;
    g[i] = (f(q + e) - f(q - e)) / (2 * h);
  }
  return g;
}

MatrixXd fd_hessian(const std::function<double(const VectorXd&)>& f,
                    const VectorXd& q, double h) {
  const int n = static_cast<int>(q.size());
  MatrixXd H(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      VectorXd ei = VectorXd::Zero(n), ej = VectorXd::Zero(n);
      ei[i] = h;
      ej[j] = h;
      H(i, j) = H(j, i) =
          (f(q + ei + ej) - f(q + ei - ej) - f(q - ei + ej) + f(q - ei - ej)) /
          (4 * h * h);
    }
  return H;
}

// Solve D_q c~(q, y) = -g for y by damped Newton with FD Jacobian in y.
VectorXd contact_target(const ModifiedCost& ct, const VectorXd& q,
                        const VectorXd& g, VectorXd y, double scale) {
  const int n = static_cast<int>(q.size());
  const double hy = 1e-6 * scale;
  for (int it = 0; it < 100; ++it) {
    VectorXd r = ct.grad_q(q, y) + g;
    if (r.norm() < 1e-11 * (1.0 + g.norm())) return y;
    MatrixXd J(n, n);
    for (int j = 0; j < n; ++j) {
      VectorXd e = VectorXd::Zero(n);
      e[j] = hy;
      J.col(j) = (ct.grad_q(q, y + e) - ct.grad_q(q, y - e)) / (2 * hy);
    }
    VectorXd step = J.partialPivLu().solve(r);
    // monotone line search: never accept a step that grows the residual,
    // it sends the iterate outside the basin on strongly curved costs
    double damp = 1.0;
    bool accepted = false;
    for (int k = 0; k < 24; ++k) {
      VectorXd y2 = y - damp * step;
      if ((ct.grad_q(q, y2) + g).norm() < r.norm()) {
        y = std::move(y2);
        accepted = true;
        break;
      }
      damp *= 0.5;
    }
    if (!accepted) break;
  }
  if ((ct.grad_q(q, y) + g).norm() < 1e-8 * (1.0 + g.norm())) return y;
  throw Error("contact target solve did not converge");
}

}  // namespace

DominationReport ma_dominates_cma(
    const std::function<double(const VectorXd&)>& u_tilde,
    const ModifiedCost& ct, const DomainSpec& region, const VectorXd& y_guess,
    double gamma_minus, int balls, int samples_per_ball, Rng& rng) {
  DominationReport rep;
  rep.gamma_minus = gamma_minus;
  rep.balls = balls;
  const int n = region.dimension();
  const double diam = region.diameter();
  const double radius = 0.12 * diam;
  const double hq = 1e-4 * diam;

  for (int b = 0; b < balls; ++b) {
    VectorXd center;
    for (int guard = 0;; ++guard) {
      center = region.sample_interior(rng);
      if (region.interior_distance(center) >= radius + hq * 4) break;
      if (guard > 100000)
        throw DomainError("ma_dominates_cma: no room for probe balls");
    }
    double ma = 0.0, cma = 0.0;
    VectorXd warm = y_guess;
    for (int s = 0; s < samples_per_ball; ++s) {
      VectorXd q = rng.in_ball(center, radius);
      MatrixXd H = fd_hessian(u_tilde, q, hq);
      ma += H.determinant();
      // contact-target map and its Jacobian by differencing the solve
      VectorXd g0 = fd_gradient(u_tilde, q, hq);
      VectorXd y0 = contact_target(ct, q, g0, warm, diam);
      warm = y0;
      MatrixXd DT(n, n);
      for (int i = 0; i < n; ++i) {
        VectorXd e = VectorXd::Zero(n);
        e[i] = hq;
        VectorXd yp = contact_target(ct, q + e, fd_gradient(u_tilde, q + e, hq),
                                     y0, diam);
        VectorXd ym = contact_target(ct, q - e, fd_gradient(u_tilde, q - e, hq),
                                     y0, diam);
        DT.col(i) = (yp - ym) / (2 * hq);
      }
      const double cma_density = std::abs(DT.determinant());
      cma += cma_density;

      // pointwise density identity:
      //   d(c~-measure)/dq = det(D^2 u - D^2_qq c~(q, Y)) / |det D_qy c~|
      auto cq = [&](const VectorXd& p) { return ct.value(p, y0); };
      MatrixXd Hc = fd_hessian(cq, q, hq);
      const double hy = 1e-5 * diam;
      MatrixXd Dqy(n, n);
      for (int j = 0; j < n; ++j) {
        VectorXd e = VectorXd::Zero(n);
        e[j] = hy;
        Dqy.col(j) = (ct.grad_q(q, y0 + e) - ct.grad_q(q, y0 - e)) / (2 * hy);
      }
      const double formula =
          (H - Hc).determinant() / std::abs(Dqy.determinant());
      rep.pointwise_gap =
          std::max(rep.pointwise_gap, std::abs(cma_density - formula) /
                                          std::max(std::abs(formula), 1e-12));
    }
    if (ma <= 0.0) throw Error("ma_dominates_cma: degenerate test potential");
    rep.worst_ratio = std::max(rep.worst_ratio, cma / ma);
  }
  rep.holds = rep.worst_ratio <= gamma_minus * 1.03;
  return rep;
}

ConeLowerReport c_cone_ma_lower(const CCone& cone, const Section& sec,
                                double eps_c, double c_guard) {
  ConeLowerReport rep;
  const int n = sec.Z.dimension();
  const double diam = sec.Z.diameter();
  if (!(diam <= eps_c / c_guard)) {
    rep.skipped = true;
    rep.reason = "diameter precondition failed: diam(Z) > eps_c / C";
    return rep;
  }
  try {
    rep.subgrad_mass = hull_measure(cone.gradients, n);
  } catch (const DegenerateBodyError&) {
    rep.subgrad_mass = 0.0;
  }
  rep.dist_ratio = sec.vertex_plane_dist() / sec.ell_plus;
  rep.lhs = std::pow(std::abs(cone.height), n);
  const double denom = rep.dist_ratio * rep.subgrad_mass * sec.Z.volume();
  rep.cn = denom > 0.0 ? rep.lhs / denom
                       : std::numeric_limits<double>::infinity();
  return rep;
}

SectionEstimateReport section_estimate(const Section& sec, double lambda,
                                       const CostConstants& constants,
                                       bool preconditions_verified,
                                       int samples) {
  SectionEstimateReport rep;
  rep.conditional = !preconditions_verified;
  const int n = sec.Z.dimension();
  auto shifted = [&](const VectorXd& q) { return sec.u_tilde(q) - sec.level; };
  rep.inf_u = infimum_over(sec.Z, shifted, samples);
  rep.leb_z = sec.Z.volume();
  rep.ratio = std::pow(std::abs(rep.inf_u), n) / (rep.leb_z * rep.leb_z);
  rep.c1 = rep.ratio * constants.gamma_minus / lambda;
  rep.c2 = rep.ratio * lambda / constants.gamma_plus;

  const double dmin = 1e-9 * sec.Z.diameter();
  for (const auto& q : body_interior(sec.Z, samples / 2, 6)) {
    double s = sec.axis.dot(q);
    double dist = std::min(sec.pi_plus - s, s - sec.pi_minus);
    if (dist < dmin) continue;
    double lhs = std::pow(std::abs(shifted(q)), n) / (rep.leb_z * rep.leb_z);
    double c = lhs * (lambda / constants.gamma_plus) *
               (sec.ell_plus / dist);
    rep.c_vardist = std::max(rep.c_vardist, c);
  }
  return rep;
}

}  // namespace otreg
