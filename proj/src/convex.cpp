#include "otreg/convex.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "otreg/domain.hpp"

namespace otreg {

namespace {

double cross2(const VectorXd& o, const VectorXd& a, const VectorXd& b) {
  return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

double point_scale(const std::vector<VectorXd>& pts) {
  double s = 1.0;
  for (const auto& p : pts) s = std::max(s, p.lpNorm<Eigen::Infinity>());
  return s;
}

std::vector<VectorXd> dedup_points(const std::vector<VectorXd>& pts,
                                   double tol) {
  std::vector<VectorXd> out;
  for (const auto& p : pts) {
    bool dup = false;
    for (const auto& q : out)
      if ((p - q).norm() < tol) {
        dup = true;
        break;
      }
    if (!dup) out.push_back(p);
  }
  return out;
}

struct Facet3 {
  std::array<int, 3> v;
  Eigen::Vector3d n;  // unit outward
  double off;
  bool alive = true;
};

// Incremental convex hull in 3D. Returns false when the points are
// (numerically) affinely dependent.
bool hull_3d(const std::vector<VectorXd>& pts, std::vector<Facet3>& facets) {
  const int m = static_cast<int>(pts.size());
  if (m < 4) return false;
  const double eps = 1e-12 * point_scale(pts);

  // Initial tetrahedron: greedily extreme points.
  int i0 = 0, i1 = -1, i2 = -1, i3 = -1;
  double best = -1;
  for (int i = 1; i < m; ++i) {
    double d = (pts[i] - pts[i0]).norm();
    if (d > best) best = d, i1 = i;
  }
  if (best < eps) return false;
  Eigen::Vector3d e1 = (pts[i1] - pts[i0]).normalized();
  best = -1;
  for (int i = 0; i < m; ++i) {
    Eigen::Vector3d r = pts[i] - pts[i0];
    double d = (r - e1 * e1.dot(r)).norm();
    if (d > best) best = d, i2 = i;
  }
  if (best < eps) return false;
  Eigen::Vector3d nrm =
      e1.cross(Eigen::Vector3d(pts[i2] - pts[i0])).normalized();
  best = -1;
  for (int i = 0; i < m; ++i) {
    double d = std::abs(nrm.dot(pts[i] - pts[i0]));
    if (d > best) best = d, i3 = i;
  }
  if (best < eps) return false;

  Eigen::Vector3d interior =
      (pts[i0] + pts[i1] + pts[i2] + pts[i3]) / 4.0;
  auto add_facet = [&](int a, int b, int c) {
    Facet3 f;
    f.v = {a, b, c};
    Eigen::Vector3d u = pts[b] - pts[a], w = pts[c] - pts[a];
    Eigen::Vector3d n = u.cross(w);
    double nn = n.norm();
    if (nn < eps * eps) return;  // sliver; skip
    n /= nn;
    double off = n.dot(pts[a]);
    if (n.dot(interior) > off) {
      std::swap(f.v[1], f.v[2]);
      n = -n;
      off = -off;
    }
    f.n = n;
    f.off = off;
    facets.push_back(f);
  };
  add_facet(i0, i1, i2);
  add_facet(i0, i1, i3);
  add_facet(i0, i2, i3);
  add_facet(i1, i2, i3);

  for (int p = 0; p < m; ++p) {
    if (p == i0 || p == i1 || p == i2 || p == i3) continue;
    // Visible facets and their directed edges.
    std::map<std::pair<int, int>, int> edge_count;
    bool any = false;
    for (auto& f : facets) {
      if (!f.alive) continue;
      if (f.n.dot(Eigen::Vector3d(pts[p])) - f.off > eps) {
        any = true;
        f.alive = false;
        for (int k = 0; k < 3; ++k) {
          int a = f.v[k], b = f.v[(k + 1) % 3];
          edge_count[{a, b}]++;
        }
      }
    }
    if (!any) continue;
    // Horizon: directed edges whose reverse is not among visible facets.
    for (const auto& [e, cnt] : edge_count) {
      (void)cnt;
      if (edge_count.count({e.second, e.first})) continue;
      add_facet(e.first, e.second, p);
    }
    facets.erase(std::remove_if(facets.begin(), facets.end(),
                                [](const Facet3& f) { return !f.alive; }),
                 facets.end());
  }
  return !facets.empty();
}

}  // namespace

std::vector<VectorXd> convex_hull_2d(std::vector<VectorXd> pts) {
  double tol = 1e-12 * point_scale(pts);
  pts = dedup_points(pts, tol);
  if (pts.size() < 3) return pts;
  std::sort(pts.begin(), pts.end(), [](const VectorXd& a, const VectorXd& b) {
    return a[0] < b[0] || (a[0] == b[0] && a[1] < b[1]);
  });
  std::vector<VectorXd> h(2 * pts.size());
  size_t k = 0;
  for (const auto& p : pts) {  // lower
    while (k >= 2 && cross2(h[k - 2], h[k - 1], p) <= tol) --k;
    h[k++] = p;
  }
  size_t lower = k + 1;
  for (auto it = pts.rbegin() + 1; it != pts.rend(); ++it) {  // upper
    while (k >= lower && cross2(h[k - 2], h[k - 1], *it) <= tol) --k;
    h[k++] = *it;
  }
  h.resize(k - 1);
  return h;
}

ConvexBody ConvexBody::from_points(const std::vector<VectorXd>& pts) {
  if (pts.empty()) throw DegenerateBodyError("empty point set");
  const int n = static_cast<int>(pts.front().size());
  ConvexBody body;
  body.dim_ = n;
  if (n == 2) {
    auto hull = convex_hull_2d(pts);
    if (hull.size() < 3) throw DegenerateBodyError("flat 2d point set");
    body.vertices_ = hull;
    const int m = static_cast<int>(hull.size());
    body.normals_.resize(m, 2);
    body.offsets_.resize(m);
    double area = 0.0;
    Eigen::Vector2d cen = Eigen::Vector2d::Zero();
    for (int i = 0; i < m; ++i) {
      const VectorXd& a = hull[i];
      const VectorXd& b = hull[(i + 1) % m];
      double c = a[0] * b[1] - b[0] * a[1];
      area += c;
      cen += c * Eigen::Vector2d(a[0] + b[0], a[1] + b[1]);
      Eigen::Vector2d nrm(b[1] - a[1], a[0] - b[0]);  // outward for ccw
      nrm.normalize();
      body.normals_.row(i) = nrm;
      body.offsets_[i] = nrm.dot(Eigen::Vector2d(a));
    }
    area *= 0.5;
    if (area <= 0) throw DegenerateBodyError("degenerate 2d hull");
    body.volume_ = area;
    body.barycenter_ = cen / (6.0 * area);
  } else if (n == 3) {
    std::vector<Facet3> facets;
    if (!hull_3d(pts, facets))
      throw DegenerateBodyError("flat 3d point set");
    std::vector<int> used;
    for (const auto& f : facets)
      for (int v : f.v) used.push_back(v);
    std::sort(used.begin(), used.end());
    used.erase(std::unique(used.begin(), used.end()), used.end());
    for (int v : used) body.vertices_.push_back(pts[v]);

    Eigen::Vector3d ref = Eigen::Vector3d::Zero();
    for (const auto& v : body.vertices_) ref += Eigen::Vector3d(v);
    ref /= static_cast<double>(body.vertices_.size());
    double vol = 0.0;
    Eigen::Vector3d cen = Eigen::Vector3d::Zero();
    for (const auto& f : facets) {
      Eigen::Vector3d a = pts[f.v[0]], b = pts[f.v[1]], c = pts[f.v[2]];
      double vt = (a - ref).dot((b - ref).cross(c - ref)) / 6.0;
      vol += vt;
      cen += vt * (ref + a + b + c) / 4.0;
    }
    if (vol <= 0) throw DegenerateBodyError("degenerate 3d hull");
    body.volume_ = vol;
    body.barycenter_ = cen / vol;

    // Deduplicate coplanar triangle planes for the halfspace list.
    std::vector<Eigen::Vector3d> ns;
    std::vector<double> offs;
    double scale = point_scale(pts);
    for (const auto& f : facets) {
      bool dup = false;
      for (size_t i = 0; i < ns.size(); ++i)
        if (ns[i].dot(f.n) > 1.0 - 1e-10 &&
            std::abs(offs[i] - f.off) < 1e-9 * scale) {
          dup = true;
          break;
        }
      if (!dup) {
        ns.push_back(f.n);
        offs.push_back(f.off);
      }
    }
    body.normals_.resize(static_cast<int>(ns.size()), 3);
    body.offsets_.resize(static_cast<int>(ns.size()));
    for (size_t i = 0; i < ns.size(); ++i) {
      body.normals_.row(static_cast<int>(i)) = ns[i];
      body.offsets_[static_cast<int>(i)] = offs[i];
    }
  } else {
    throw DomainError("convex bodies supported in dimensions 2 and 3 only");
  }
  return body;
}

ConvexBody ConvexBody::from_halfspaces(const MatrixXd& A, const VectorXd& b) {
  auto verts = polytope_vertices(A, b);
  if (verts.empty()) throw DegenerateBodyError("empty halfspace system");
  return from_points(verts);
}

double ConvexBody::diameter() const {
  if (diameter_ >= 0.0) return diameter_;
  double d = 0.0;
  for (size_t i = 0; i < vertices_.size(); ++i)
    for (size_t j = i + 1; j < vertices_.size(); ++j)
      d = std::max(d, (vertices_[i] - vertices_[j]).norm());
  return diameter_ = d;
}

ConvexBody ConvexBody::map(const AffineMap& L) const {
  std::vector<VectorXd> pts;
  pts.reserve(vertices_.size());
  for (const auto& v : vertices_) pts.push_back(L(v));
  return from_points(pts);
}

namespace {

// Minimum-volume enclosing ellipsoid {c + A s : |s| <= 1} of a point set by
// Khachiyan ascent with away steps on the lifted points; converges fast when
// the set is small (at or near the MVEE support size).
void mvee_core(const std::vector<VectorXd>& P, int d, MatrixXd& A,
               VectorXd& c) {
  const int m = static_cast<int>(P.size());
  const int d1 = d + 1;
  MatrixXd Q(d1, m);
  for (int i = 0; i < m; ++i) {
    Q.block(0, i, d, 1) = P[static_cast<size_t>(i)];
    Q(d, i) = 1.0;
  }
  VectorXd u = VectorXd::Constant(m, 1.0 / m);
  const double tol = 5e-14;
  for (int iter = 0; iter < 200000; ++iter) {
    MatrixXd M = Q * u.asDiagonal() * Q.transpose();
    MatrixXd G = M.ldlt().solve(Q);
    VectorXd g = (Q.array() * G.array()).colwise().sum().transpose();

    int jp = 0, jm = -1;
    double gmax = -1, gmin = std::numeric_limits<double>::infinity();
    for (int i = 0; i < m; ++i) {
      if (g[i] > gmax) gmax = g[i], jp = i;
      if (u[i] > 0 && g[i] < gmin) gmin = g[i], jm = i;
    }
    double ep = gmax / d1 - 1.0;
    double em = 1.0 - gmin / d1;
    if (std::max(ep, em) < tol) break;

    int j;
    double gj;
    if (ep >= em) {
      j = jp;
      gj = gmax;
    } else {
      j = jm;
      gj = gmin;
    }
    double beta = (gj - d1) / (d1 * (gj - 1.0));
    if (j == jm && ep < em) beta = std::max(beta, -u[j] / (1.0 - u[j]));
    u *= (1.0 - beta);
    u[j] += beta;
    u = u.cwiseMax(0.0);
  }

  c = VectorXd::Zero(d);
  for (int i = 0; i < m; ++i) c += u[i] * P[static_cast<size_t>(i)];
  MatrixXd C = MatrixXd::Zero(d, d);
  for (int i = 0; i < m; ++i) {
    VectorXd r = P[static_cast<size_t>(i)] - c;
    C += u[i] * r * r.transpose();
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(C);
  if (es.eigenvalues().minCoeff() <= 0)
    throw DegenerateBodyError("singular enclosing ellipsoid");
  A = es.eigenvectors() *
      (d * es.eigenvalues().array()).sqrt().matrix().asDiagonal() *
      es.eigenvectors().transpose();
}

}  // namespace

AffineMap john_ellipsoid(const ConvexBody& S, double cert_tol) {
  const auto& V = S.vertices();
  const int d = S.dimension();
  const int m = static_cast<int>(V.size());
  const int d1 = d + 1;
  if (m < d1) throw DegenerateBodyError("too few vertices");

  // Coreset loop: the MVEE support has at most d(d+3)/2 points, so solve on
  // a growing working subset, each round adding the vertex worst violating
  // the current ellipsoid. Dense near-cocircular hulls stall the plain
  // ascent; small subsets converge in a few hundred iterations.
  std::vector<int> idx;
  auto add_extreme = [&](const VectorXd& dir) {
    int best = 0;
    double s = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < m; ++i) {
      double v = dir.dot(V[static_cast<size_t>(i)]);
      if (v > s) s = v, best = i;
    }
    if (std::find(idx.begin(), idx.end(), best) == idx.end())
      idx.push_back(best);
  };
  for (int i = 0; i < d; ++i) {
    VectorXd e = VectorXd::Zero(d);
    e[i] = 1.0;
    add_extreme(e);
    add_extreme(-e);
  }
  for (int k = 0; k < (1 << d); ++k) {
    VectorXd e(d);
    for (int i = 0; i < d; ++i) e[i] = (k >> i) & 1 ? 1.0 : -1.0;
    add_extreme(e.normalized());
  }
  if (static_cast<int>(idx.size()) < d1)
    throw DegenerateBodyError("too few distinct extreme vertices");

  MatrixXd A;
  VectorXd c;
  const double stop = 1.0 + 0.1 * cert_tol / d;
  double wnorm = 1.0;
  for (int round = 0; round < 200; ++round) {
    std::vector<VectorXd> P;
    P.reserve(idx.size());
    for (int i : idx) P.push_back(V[static_cast<size_t>(i)]);
    mvee_core(P, d, A, c);
    Eigen::PartialPivLU<MatrixXd> lu(A);
    int worst = -1;
    wnorm = 1.0;
    for (int i = 0; i < m; ++i) {
      double r = lu.solve(V[static_cast<size_t>(i)] - c).norm();
      if (r > wnorm) wnorm = r, worst = i;
    }
    if (wnorm <= stop ||
        std::find(idx.begin(), idx.end(), worst) != idx.end())
      break;
    idx.push_back(worst);
  }
  // Near-cocircular hulls leave a residual violation at the ascent's
  // iteration cap; absorb it by inflation (volume excess (wnorm)^d stays
  // within cert_tol, inner slack shrinks by the same hair).
  A *= wnorm;
  AffineMap L(A / d, c);

  // Certify B_1 subset L^-1(S) subset B_d directly.
  for (const auto& v : V)
    if (L.apply_inverse(v).norm() > d + cert_tol)
      throw Error("john normalization: outer containment failed");
  const double scale = 1.0 + S.diameter();
  auto check_inner = [&](const VectorXd& s) {
    if (S.margin(L(s)) < -cert_tol * scale)
      throw Error("john normalization: inner containment failed");
  };
  if (d == 2) {
    for (int k = 0; k < 256; ++k) {
      double a = 2.0 * M_PI * k / 256.0;
      Eigen::Vector2d s(std::cos(a), std::sin(a));
      check_inner(s);
    }
  } else {
    const double ga = M_PI * (3.0 - std::sqrt(5.0));
    for (int k = 0; k < 512; ++k) {
      double z = 1.0 - 2.0 * (k + 0.5) / 512.0;
      double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      Eigen::Vector3d s(r * std::cos(ga * k), r * std::sin(ga * k), z);
      check_inner(s);
    }
  }
  return L;
}

double hull_measure(const std::vector<VectorXd>& pts, int dim) {
  if (dim == 1) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& p : pts) {
      lo = std::min(lo, p[0]);
      hi = std::max(hi, p[0]);
    }
    return std::max(0.0, hi - lo);
  }
  if (dim == 2) {
    auto hull = convex_hull_2d(pts);
    if (hull.size() < 3) return 0.0;
    double area = 0.0;
    for (size_t i = 0; i < hull.size(); ++i) {
      const VectorXd& a = hull[i];
      const VectorXd& b = hull[(i + 1) % hull.size()];
      area += a[0] * b[1] - b[0] * a[1];
    }
    return 0.5 * std::abs(area);
  }
  if (dim == 3) {
    try {
      return ConvexBody::from_points(pts).volume();
    } catch (const DegenerateBodyError&) {
      return 0.0;
    }
  }
  throw DomainError("hull measures supported in dimensions 1-3 only");
}

double slice_projection_ratio(const ConvexBody& Z, int n_prime,
                              const VectorXd& anchor) {
  const int n = Z.dimension();
  const int n2 = n - n_prime;
  if (n_prime < 1 || n2 < 1)
    throw DomainError("split must leave both factors nonempty");

  std::vector<VectorXd> proj;
  proj.reserve(Z.vertices().size());
  for (const auto& v : Z.vertices()) proj.push_back(v.tail(n2));
  double proj_measure = hull_measure(proj, n2);

  // Slice {x' : A' x' <= b - A'' anchor''} through the anchor.
  const MatrixXd& A = Z.normals();
  VectorXd bp = Z.offsets() - A.rightCols(n2) * anchor.tail(n2);
  MatrixXd Ap = A.leftCols(n_prime);
  double slice_measure = 0.0;
  if (n_prime == 1) {
    double lo = -std::numeric_limits<double>::infinity(), hi = -lo;
    for (int i = 0; i < Ap.rows(); ++i) {
      double a = Ap(i, 0);
      if (std::abs(a) < 1e-14) {
        if (bp[i] < -1e-12 * (1.0 + Z.diameter())) return 0.0;  // empty
        continue;
      }
      if (a > 0)
        hi = std::min(hi, bp[i] / a);
      else
        lo = std::max(lo, bp[i] / a);
    }
    slice_measure = std::max(0.0, hi - lo);
  } else {
    auto verts = polytope_vertices(Ap, bp);
    slice_measure = hull_measure(verts, n_prime);
  }
  if (slice_measure <= 0 || proj_measure <= 0)
    throw DegenerateBodyError("slice or projection has zero measure");
  return Z.volume() / (slice_measure * proj_measure);
}

}  // namespace otreg
