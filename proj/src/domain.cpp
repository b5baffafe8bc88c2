#include "otreg/domain.hpp"

namespace otreg {

std::vector<VectorXd> polytope_vertices(const MatrixXd& A, const VectorXd& b,
                                        double tol) {
  const int m = static_cast<int>(A.rows());
  const int n = static_cast<int>(A.cols());
  if (n > 3) throw DomainError("vertex enumeration supports n <= 3");
  std::vector<VectorXd> verts;
  std::vector<int> idx(n);
  auto consider = [&](const std::vector<int>& rows) {
    MatrixXd M(n, n);
    VectorXd rhs(n);
    for (int i = 0; i < n; ++i) {
      M.row(i) = A.row(rows[i]);
      rhs[i] = b[rows[i]];
    }
    Eigen::FullPivLU<MatrixXd> lu(M);
    if (!lu.isInvertible()) return;
    VectorXd x = lu.solve(rhs);
    if (((A * x - b).array() <= tol).all()) {
      for (const auto& v : verts)
        if ((v - x).norm() < tol) return;
      verts.push_back(x);
    }
  };
  if (n == 1) {
    for (int i = 0; i < m; ++i) consider({i});
  } else if (n == 2) {
    for (int i = 0; i < m; ++i)
      for (int j = i + 1; j < m; ++j) consider({i, j});
  } else {
    for (int i = 0; i < m; ++i)
      for (int j = i + 1; j < m; ++j)
        for (int k = j + 1; k < m; ++k) consider({i, j, k});
  }
  return verts;
}

DomainSpec DomainSpec::polytope(MatrixXd A, VectorXd b) {
  // Normalize rows.
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    double nrm = A.row(i).norm();
    if (nrm < 1e-14) throw DomainError("zero normal in halfspace description");
    A.row(i) /= nrm;
    b[i] /= nrm;
  }
  auto verts = polytope_vertices(A, b, 1e-9);
  if (verts.size() < static_cast<size_t>(A.cols()) + 1)
    throw DomainError("polytope is empty or degenerate");
  ConvexPiece p;
  p.kind = ConvexPiece::Kind::Polytope;
  p.normals = std::move(A);
  p.offsets = std::move(b);
  p.box_lo = verts[0];
  p.box_hi = verts[0];
  VectorXd sum = VectorXd::Zero(verts[0].size());
  for (const auto& v : verts) {
    p.box_lo = p.box_lo.cwiseMin(v);
    p.box_hi = p.box_hi.cwiseMax(v);
    sum += v;
  }
  p.interior_point = sum / static_cast<double>(verts.size());
  if (p.interior_distance(p.interior_point) <= 0)
    throw DomainError("polytope has empty interior");
  DomainSpec d;
  d.pieces_.push_back(std::move(p));
  d.finalize();
  return d;
}

}  // namespace otreg
