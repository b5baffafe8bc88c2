#include "otreg/potential.hpp"

#include <algorithm>
#include <array>
#include <functional>
#include <cmath>
#include <fstream>
#include <future>
#include <iostream>
#include <numeric>
#include <sstream>

#include "otreg/convex.hpp"

namespace otreg {

double SemidiscretePotential::u(const VectorXd& x) const {
  if (atoms.empty()) throw Error("potential with empty atom support");
  double best = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < static_cast<int>(atoms.size()); ++i)
    best = std::max(best, mountain(i, x));
  return best;
}

int SemidiscretePotential::argmax(const VectorXd& x) const {
  if (atoms.empty()) throw Error("potential with empty atom support");
  int arg = 0;
  double best = mountain(0, x);
  for (int i = 1; i < static_cast<int>(atoms.size()); ++i) {
    double m = mountain(i, x);
    if (m > best) best = m, arg = i;
  }
  return arg;
}

double SemidiscretePotential::default_gap_tol(const VectorXd& x) const {
  double scale = 1.0;
  for (int i = 0; i < static_cast<int>(atoms.size()); ++i)
    scale = std::max(scale, std::abs((*cost)(x, atoms[i].y)));
  return 1e-9 * scale;
}

std::function<double(const VectorXd&)> c_transform(
    const CostOracle& c, const std::vector<VectorXd>& support,
    const std::vector<double>& values, TransformDirection dir) {
  if (support.empty()) throw Error("c_transform: empty support");
  if (support.size() != values.size())
    throw Error("c_transform: support/value size mismatch");
  return [&c, support, values, dir](const VectorXd& p) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < support.size(); ++i) {
      double cv = dir == TransformDirection::ToSource ? c(p, support[i])
                                                      : c(support[i], p);
      best = std::max(best, -cv - values[i]);
    }
    return best;
  };
}

std::vector<int> c_subdifferential(const SemidiscretePotential& u,
                                   const VectorXd& x, double gap_tol) {
  if (gap_tol < 0.0) gap_tol = u.default_gap_tol(x);
  const double top = u.u(x);
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(u.atoms.size()); ++i)
    if (u.mountain(i, x) >= top - gap_tol) out.push_back(i);
  return out;
}

VectorXd map_G(const SemidiscretePotential& u, const VectorXd& x,
               double gap_tol) {
  auto sub = c_subdifferential(u, x, gap_tol);
  if (sub.size() != 1)
    throw TieError("map_G: tie between supporting mountains", x);
  return u.atoms[sub[0]].y;
}

double ball_volume(int n, double r) {
  return std::pow(M_PI, n / 2.0) / std::tgamma(n / 2.0 + 1.0) * std::pow(r, n);
}

namespace {

// In two dimensions, slide along the tie locus of the leading mountain
// pairs of u.  The landscape z -> u(z) + c(z, y) is kinked along cell
// boundaries and plain compass search stalls there at a distance that does
// not shrink with the step size, which misclassifies the contact cell.
VectorXd tie_polish(const SemidiscretePotential& u, const DomainSpec& source,
                    VectorXd x, const std::function<double(const VectorXd&)>& F) {
  const CostOracle& c = *u.cost;
  const double diam = source.diameter();
  double fx = F(x);
  double delta = 0.01 * diam;
  // the leading mountains and their gradients only change when x moves, so
  // they are cached across the delta halvings of a stalled point
  std::array<int, 3> top = {-1, -1, -1};
  std::array<double, 3> val = {-1e300, -1e300, -1e300};
  std::array<VectorXd, 3> grads;
  bool stale = true;
  while (delta > 1e-10 * diam) {
    if (stale) {
      // three leading mountains; at a cell vertex any descent edge is a tie
      // of one of their pairs
      top = {-1, -1, -1};
      val = {-1e300, -1e300, -1e300};
      for (std::size_t i = 0; i < u.atoms.size(); ++i) {
        double m = u.mountain(static_cast<int>(i), x);
        for (int r = 0; r < 3; ++r)
          if (m > val[r]) {
            for (int s = 2; s > r; --s) val[s] = val[s - 1], top[s] = top[s - 1];
            val[r] = m;
            top[r] = static_cast<int>(i);
            break;
          }
      }
      for (int r = 0; r < 3; ++r)
        if (top[r] >= 0)
          grads[size_t(r)] = -grad_x(c, x, u.atoms[size_t(top[r])].y);
      stale = false;
    }
    bool improved = false;
    for (auto [pa, pb] : {std::pair{0, 1}, {0, 2}, {1, 2}}) {
      if (improved || top[pb] < 0) continue;
      const int i1 = top[pa], i2 = top[pb];
      VectorXd gd = grads[size_t(pa)] - grads[size_t(pb)];
      double gn = gd.norm();
      if (gn <= 1e-14 || val[pa] - val[pb] >= delta * gn) continue;
      gd /= gn;
      VectorXd tang(2);
      tang << -gd[1], gd[0];
      auto gapf = [&](const VectorXd& z) {
        return u.mountain(i1, z) - u.mountain(i2, z);
      };
      for (double s : {1.0, -1.0}) {
        VectorXd xn = x + s * delta * tang;
        double lo = -delta, hi = delta;
        double flo = gapf(xn + lo * gd), fhi = gapf(xn + hi * gd);
        if (flo * fhi <= 0.0) {
          for (int b = 0; b < 50; ++b) {
            double mid = 0.5 * (lo + hi);
            double fm = gapf(xn + mid * gd);
            if (flo * fm <= 0.0)
              hi = mid, fhi = fm;
            else
              lo = mid, flo = fm;
          }
          xn += 0.5 * (lo + hi) * gd;
        }
        if (source.contains(xn) && F(xn) < fx) {
          x = std::move(xn);
          fx = F(x);
          improved = true;
          stale = true;
          break;
        }
      }
    }
    if (!improved) delta *= 0.5;
  }
  return x;
}

// argmin over the source of u(z) + c(z, y): coarse low-discrepancy scan,
// compass search (axes + diagonals) shrinking to ~1e-5 of the diameter,
// then (in 2-d) a tie-following polish along the kink set of u.
VectorXd contact_point(const SemidiscretePotential& u, const DomainSpec& source,
                       const VectorXd& y, const std::vector<VectorXd>& grid,
                       const std::vector<double>& grid_u) {
  const CostOracle& c = *u.cost;
  auto score = [&](const VectorXd& z) { return u.u(z) + c(z, y); };
  int g0 = 0;
  double fbest = grid_u[0] + c(grid[0], y);
  for (int g = 1; g < static_cast<int>(grid.size()); ++g) {
    double f = grid_u[g] + c(grid[g], y);
    if (f < fbest) fbest = f, g0 = g;
  }
  VectorXd best = grid[g0];
  const int n = source.dimension();
  std::vector<VectorXd> dirs;
  for (int i = 0; i < n; ++i) {
    VectorXd e = VectorXd::Zero(n);
    e[i] = 1.0;
    dirs.push_back(e);
    dirs.push_back(-e);
  }
  if (n == 2) {
    VectorXd d(2);
    d << M_SQRT1_2, M_SQRT1_2;
    dirs.push_back(d);
    dirs.push_back(-d);
    d << M_SQRT1_2, -M_SQRT1_2;
    dirs.push_back(d);
    dirs.push_back(-d);
  }
  const double diam = source.diameter();
  double h = diam / std::max(4.0, std::cbrt(double(grid.size())));
  while (h > 1e-5 * diam) {
    bool moved = false;
    for (const auto& d : dirs) {
      VectorXd z = best + h * d;
      if (!source.contains(z)) continue;
      double f = score(z);
      if (f < fbest - 1e-15 * std::abs(fbest)) {
        fbest = f;
        best = z;
        moved = true;
      }
    }
    if (!moved) h *= 0.5;
  }
  if (n == 2) best = tie_polish(u, source, std::move(best), score);
  return best;
}

std::vector<VectorXd> interior_grid(const DomainSpec& d, int count,
                                    int base_offset) {
  std::vector<VectorXd> g;
  g.reserve(count);
  for (int i = 0; i < count; ++i)
    g.push_back(d.halton_interior(100 + 37 * std::uint64_t(i), base_offset));
  return g;
}

double domain_volume(const DomainSpec& d) {
  if (!d.convex()) throw DomainError("volume needs a convex domain");
  const auto& p = d.pieces()[0];
  if (p.kind == ConvexPiece::Kind::Ball)
    return ball_volume(d.dimension(), p.radius);
  auto verts = polytope_vertices(p.normals, p.offsets);
  return hull_measure(verts, d.dimension());
}

}  // namespace

MeasureEstimate ma_measure(const SemidiscretePotential& u, const DomainSpec& X,
                           const DomainSpec& source, const DomainSpec& V,
                           int mc_samples, Rng& rng) {
  if (mc_samples <= 0) throw Error("ma_measure: mc_samples must be positive");
  for (int i = 0; i < 8; ++i)
    if (!source.contains(X.halton_interior(3 + 11 * std::uint64_t(i))))
      throw DomainError("ma_measure: region not inside the source domain");
  const double volV = domain_volume(V);
  auto grid = interior_grid(source, 512, 0);
  std::vector<double> grid_u(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) grid_u[g] = u.u(grid[g]);
  const double tol = X.membership_tol() + 1e-5 * source.diameter();
  long hits = 0;
  for (int s = 0; s < mc_samples; ++s) {
    VectorXd y = V.sample_interior(rng);
    VectorXd x = contact_point(u, source, y, grid, grid_u);
    if (X.interior_distance(x) >= -tol) ++hits;
  }
  const double p = double(hits) / mc_samples;
  MeasureEstimate est;
  est.value = volV * p;
  est.std_error = volV * std::sqrt(std::max(p * (1.0 - p), 1.0 / mc_samples) /
                                   mc_samples);
  est.method = MeasureEstimate::Method::MonteCarloPushforward;
  return est;
}

namespace {

// For bilinear and quadratic costs the mountains differ by affine functions
// of x, so each cell is the source polygon clipped by one halfplane per
// competitor.
bool linear_cells_apply(const SemidiscretePotential& u, const DomainSpec& src) {
  if (src.dimension() != 2 || !src.convex()) return false;
  const std::string& n = u.cost->name;
  return n == "bilinear" || n == "quadratic";
}

// clip base polygon: polytope vertices, or an inscribed 512-gon for a ball
// (area defect ~1e-5 relative, consistent across cells so the normalized
// masses stay exact to the polygonal approximation)
std::vector<VectorXd> clip_base(const DomainSpec& src) {
  const auto& piece = src.pieces()[0];
  if (piece.kind == ConvexPiece::Kind::Ball) return src.boundary_grid(512);
  auto verts = polytope_vertices(piece.normals, piece.offsets);
  return convex_hull_2d(verts);
}

// mountain_i(x) = a_i . x + b_i  (up to a common term independent of i).
void linear_forms(const SemidiscretePotential& u, std::vector<VectorXd>& a,
                  std::vector<double>& b) {
  const bool quad = u.cost->name == "quadratic";
  a.clear();
  b.clear();
  for (const auto& at : u.atoms) {
    a.push_back(at.y);
    b.push_back((quad ? -0.5 * at.y.squaredNorm() : 0.0) - at.weight);
  }
}

std::vector<VectorXd> clip_halfplane(std::vector<VectorXd> poly,
                                     const VectorXd& n, double off) {
  std::vector<VectorXd> out;
  const int m = static_cast<int>(poly.size());
  for (int i = 0; i < m; ++i) {
    const VectorXd& p = poly[i];
    const VectorXd& q = poly[(i + 1) % m];
    double dp = n.dot(p) - off, dq = n.dot(q) - off;
    if (dp <= 0.0) out.push_back(p);
    if ((dp < 0.0) != (dq < 0.0) && dp != dq)
      out.push_back(p + (dp / (dp - dq)) * (q - p));
  }
  return out;
}

double polygon_area(const std::vector<VectorXd>& poly) {
  double s = 0.0;
  const int m = static_cast<int>(poly.size());
  for (int i = 0; i < m; ++i)
    s += poly[i][0] * poly[(i + 1) % m][1] - poly[(i + 1) % m][0] * poly[i][1];
  return 0.5 * std::abs(s);
}

std::vector<double> exact_cell_areas(const SemidiscretePotential& u,
                                     const DomainSpec& src) {
  auto base = clip_base(src);
  std::vector<VectorXd> a;
  std::vector<double> b;
  linear_forms(u, a, b);
  const int k = static_cast<int>(u.atoms.size());
  std::vector<double> area(k, 0.0);
  auto cell_area = [&](int i) {
    auto poly = base;
    for (int j = 0; j < k && !poly.empty(); ++j) {
      if (j == i) continue;
      // a_i.x + b_i >= a_j.x + b_j  <=>  (a_j - a_i).x <= b_i - b_j
      poly = clip_halfplane(std::move(poly), a[j] - a[i], b[i] - b[j]);
    }
    return poly.size() >= 3 ? polygon_area(poly) : 0.0;
  };
  if (k >= 32) {
    const int workers = 4;
    std::vector<std::future<void>> fs;
    for (int w = 0; w < workers; ++w)
      fs.push_back(std::async(std::launch::async, [&, w] {
        for (int i = w; i < k; i += workers) area[i] = cell_area(i);
      }));
    for (auto& f : fs) f.get();
  } else {
    for (int i = 0; i < k; ++i) area[i] = cell_area(i);
  }
  return area;
}

}  // namespace

std::vector<double> cell_masses(const SemidiscretePotential& u,
                                const DomainSpec& source, bool* exact) {
  const int k = static_cast<int>(u.atoms.size());
  double total = 0.0;
  for (const auto& a : u.atoms) total += a.mass;
  if (total <= 0.0) total = 1.0;
  std::vector<double> m(k, 0.0);
  if (linear_cells_apply(u, source)) {
    auto area = exact_cell_areas(u, source);
    double s = std::accumulate(area.begin(), area.end(), 0.0);
    if (s <= 0.0) throw Error("cell_masses: all cells empty");
    for (int i = 0; i < k; ++i) m[i] = total * area[i] / s;
    if (exact) *exact = true;
    return m;
  }
  const int N = std::max(20000, 500 * k);
  std::vector<long> count(k, 0);
  for (int s = 0; s < N; ++s)
    ++count[u.argmax(source.halton_interior(1 + 13 * std::uint64_t(s), 0))];
  for (int i = 0; i < k; ++i) m[i] = total * double(count[i]) / N;
  if (exact) *exact = false;
  return m;
}

SemidiscretePotential solve_semidiscrete(const CostOracle& c,
                                         const DomainSpec& source,
                                         std::vector<Atom> atoms, double tol,
                                         SolveTrace* trace) {
  // Degenerate inputs: drop zero-mass atoms, merge coincident ones.
  std::vector<Atom> kept;
  const double merge_tol = 1e-12 * (1.0 + source.diameter());
  for (auto& a : atoms) {
    if (a.mass < 0.0) throw Error("solve_semidiscrete: negative atom mass");
    if (a.mass == 0.0) {
      std::cerr << "solve_semidiscrete: dropping zero-mass atom\n";
      continue;
    }
    bool merged = false;
    for (auto& b : kept)
      if ((a.y - b.y).norm() <= merge_tol) {
        b.mass += a.mass;
        merged = true;
        break;
      }
    if (!merged) kept.push_back(a);
  }
  if (kept.empty()) throw Error("solve_semidiscrete: no atoms with mass");

  SemidiscretePotential u;
  u.cost = &c;
  u.atoms = std::move(kept);
  const int k = static_cast<int>(u.atoms.size());
  if (trace) *trace = SolveTrace{};
  if (k == 1) {
    if (trace) trace->exact_cells = linear_cells_apply(u, source);
    return u;  // single cell is all of the source for any weight
  }

  // Weight scale for the ascent step: spread of the mountains at the center.
  VectorXd x0 = source.an_interior_point();
  double spread = 0.0;
  for (const auto& a : u.atoms)
    for (const auto& b : u.atoms)
      spread = std::max(spread, std::abs(c(x0, a.y) - c(x0, b.y)));
  if (spread <= 0.0) spread = 1.0;
  double total = 0.0;
  for (const auto& a : u.atoms) total += a.mass;

  bool exact = false;
  auto masses = cell_masses(u, source, &exact);
  auto max_rel = [&](const std::vector<double>& m) {
    double e = 0.0;
    for (int i = 0; i < k; ++i)
      e = std::max(e, std::abs(m[i] - u.atoms[i].mass) / u.atoms[i].mass);
    return e;
  };
  double err = max_rel(masses);
  double eta = 0.5;
  const int max_iters = 20000;
  int it = 0;
  for (; it < max_iters && err > tol; ++it) {
    std::vector<double> saved(k);
    for (int i = 0; i < k; ++i) saved[i] = u.atoms[i].weight;
    // Jacobi ascent: oversized cells raise their weight (lower the mountain).
    double mean = 0.0;
    for (int i = 0; i < k; ++i) {
      double d = eta * spread * (masses[i] - u.atoms[i].mass) / total;
      u.atoms[i].weight += d;
      mean += u.atoms[i].weight;
    }
    mean /= k;
    for (int i = 0; i < k; ++i) u.atoms[i].weight -= mean;  // gauge fix
    auto m2 = cell_masses(u, source, &exact);
    double e2 = max_rel(m2);
    if (e2 <= err * 1.0000001) {
      masses = std::move(m2);
      err = e2;
      eta = std::min(eta * 1.1, 4.0);
      if (trace) trace->max_rel_error.push_back(err);
    } else {
      for (int i = 0; i < k; ++i) u.atoms[i].weight = saved[i];
      eta *= 0.5;
      if (eta < 1e-12)
        throw Error("solve_semidiscrete: step collapsed before convergence");
    }
  }
  if (err > tol) throw Error("solve_semidiscrete: no convergence");
  for (int i = 0; i < k; ++i)
    if (masses[i] <= 0.0)
      throw Error("solve_semidiscrete: empty cell at optimum");
  if (trace) {
    trace->iterations = it;
    trace->exact_cells = exact;
  }
  return u;
}

MaBoundsReport check_ma_bounds(const SemidiscretePotential& u,
                               const DomainSpec& source, const DomainSpec& V,
                               const BoundsSpec& bounds, double probe_radius,
                               int balls, int mc_samples, Rng& rng) {
  if (bounds.lambda <= 0.0 || bounds.lambda > 1.0 || bounds.Lambda < 1.0)
    throw Error("check_ma_bounds: need lambda in (0,1], Lambda >= 1");
  MaBoundsReport rep;
  const int n = source.dimension();
  const double lebB = ball_volume(n, probe_radius);
  auto probe = [&](const VectorXd& center, bool two_sided) {
    DomainSpec B = DomainSpec::ball(center, probe_radius);
    auto est = ma_measure(u, B, source, V, mc_samples, rng);
    const double slack = 3.0 * est.std_error;
    double lo = two_sided ? bounds.lambda * lebB - slack : 0.0;
    double hi = (two_sided ? lebB / bounds.lambda : bounds.Lambda * lebB) +
                slack;
    rep.worst_lower_ratio = std::min(rep.worst_lower_ratio, est.value / lebB);
    rep.worst_upper_ratio = std::max(rep.worst_upper_ratio, est.value / lebB);
    if (est.value < lo || est.value > hi) {
      rep.passed = false;
      rep.violations.push_back({center, est.value, lo, hi});
    }
    ++rep.balls_checked;
  };
  int made = 0;
  for (int guard = 0; made < balls && guard < 1000 * balls; ++guard) {
    VectorXd center = bounds.U_lambda.sample_interior(rng);
    if (bounds.U_lambda.interior_distance(center) < probe_radius) continue;
    probe(center, true);
    ++made;
  }
  if (made < balls)
    throw DomainError("check_ma_bounds: probe balls do not fit in U_lambda");
  for (int guard = 0, extra = 0; extra < balls / 2 && guard < 1000 * balls;
       ++guard) {
    VectorXd center = source.sample_interior(rng);
    if (source.interior_distance(center) < probe_radius) continue;
    probe(center, false);
    ++extra;
  }
  return rep;
}

std::vector<Atom> read_atoms_csv(const std::string& path, int dim) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open atoms file: " + path);
  std::vector<Atom> atoms;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (lineno == 1 && line.find_first_not_of("0123456789+-.eE, \t") !=
                           std::string::npos)
      continue;  // header
    std::stringstream ss(line);
    std::string tok;
    std::vector<double> vals;
    while (std::getline(ss, tok, ',')) vals.push_back(std::stod(tok));
    if (static_cast<int>(vals.size()) != dim + 2)
      throw ConfigError("atoms row needs dim + 2 columns", lineno);
    Atom a;
    a.y = Eigen::Map<VectorXd>(vals.data(), dim);
    a.mass = vals[dim];
    a.weight = vals[dim + 1];
    atoms.push_back(std::move(a));
  }
  if (atoms.empty()) throw Error("empty atoms file: " + path);
  return atoms;
}

void write_atoms_csv(const std::string& path, const std::vector<Atom>& atoms) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write atoms file: " + path);
  if (atoms.empty()) throw Error("write_atoms_csv: no atoms");
  const int dim = static_cast<int>(atoms[0].y.size());
  for (int i = 0; i < dim; ++i) out << "y" << i + 1 << ",";
  out << "mass,weight\n";
  out.precision(17);
  for (const auto& a : atoms) {
    for (int i = 0; i < dim; ++i) out << a.y[i] << ",";
    out << a.mass << "," << a.weight << "\n";
  }
}

}  // namespace otreg
