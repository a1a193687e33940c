#include "hps/leafops.hpp"

#include "hps/instrumentation.hpp"

#include <cmath>
#include <sstream>

namespace hps {

CoefficientField CoefficientField::laplace() {
  CoefficientField f;
  f.c11 = [](Point) { return 1.0; };
  f.c22 = [](Point) { return 1.0; };
  return f;
}

Matrix cheb_diff_matrix(int p, double a, double b) {
  if (p < 2) throw ConfigError("cheb_diff_matrix: p must be at least 2");
  const auto x = cheb_nodes(p, a, b);
  const auto w = barycentric_weights(x);
  Matrix D = Matrix::Zero(p, p);
  for (int i = 0; i < p; ++i) {
    double diag = 0.0;
    for (int j = 0; j < p; ++j) {
      if (i == j) continue;
      const auto ui = static_cast<std::size_t>(i);
      const auto uj = static_cast<std::size_t>(j);
      D(i, j) = (w[uj] / w[ui]) / (x[ui] - x[uj]);
      diag -= D(i, j);
    }
    D(i, i) = diag;
  }
  return D;
}

namespace {

std::vector<double> sample(const CoefficientField::Function& f, const std::vector<double>& x1,
                           const std::vector<double>& x2, const char* name) {
  const std::size_t p = x1.size();
  std::vector<double> v(p * p, 0.0);
  if (!f) return v;
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      const double val = f({x1[i], x2[j]});
      if (!std::isfinite(val)) {
        std::ostringstream msg;
        msg << "coefficient " << name << " is not finite at (" << x1[i] << ", " << x2[j] << ")";
        throw Error(msg.str());
      }
      v[i * p + j] = val;
    }
  }
  return v;
}

bool all_zero(const std::vector<double>& v) {
  for (double x : v)
    if (x != 0.0) return false;
  return true;
}

}  // namespace

Matrix build_local_operator(const CoefficientField& coeffs, const Rectangle& leaf, int p) {
  if (p < 3) throw ConfigError("build_local_operator: p must be at least 3");
  leaf.validate();
  const auto x1 = cheb_nodes(p, leaf.x_lo, leaf.x_hi);
  const auto x2 = cheb_nodes(p, leaf.y_lo, leaf.y_hi);
  const Matrix Dx = cheb_diff_matrix(p, leaf.x_lo, leaf.x_hi);
  const Matrix Dy = cheb_diff_matrix(p, leaf.y_lo, leaf.y_hi);
  const Matrix Dxx = Dx * Dx;
  const Matrix Dyy = Dy * Dy;

  const auto c11 = sample(coeffs.c11, x1, x2, "c11");
  const auto c12 = sample(coeffs.c12, x1, x2, "c12");
  const auto c22 = sample(coeffs.c22, x1, x2, "c22");
  const auto c1 = sample(coeffs.c1, x1, x2, "c1");
  const auto c2 = sample(coeffs.c2, x1, x2, "c2");
  const auto c0 = sample(coeffs.c, x1, x2, "c");
  const bool mixed = !all_zero(c12);

  const Index n = static_cast<Index>(p) * p;
  Matrix A = Matrix::Zero(n, n);
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < p; ++j) {
      const Index row = static_cast<Index>(i) * p + j;
      const auto k = static_cast<std::size_t>(row);
      // d/dx1 terms couple (i', j).
      for (int ii = 0; ii < p; ++ii) {
        A(row, static_cast<Index>(ii) * p + j) += -c11[k] * Dxx(i, ii) + c1[k] * Dx(i, ii);
      }
      // d/dx2 terms couple (i, j').
      for (int jj = 0; jj < p; ++jj) {
        A(row, static_cast<Index>(i) * p + jj) += -c22[k] * Dyy(j, jj) + c2[k] * Dy(j, jj);
      }
      if (mixed && c12[k] != 0.0) {
        for (int ii = 0; ii < p; ++ii)
          for (int jj = 0; jj < p; ++jj)
            A(row, static_cast<Index>(ii) * p + jj) += -2.0 * c12[k] * Dx(i, ii) * Dy(j, jj);
      }
      A(row, row) += c0[k];
    }
  }
  return A;
}

Matrix leaf_solve_operator(const Matrix& A, const std::vector<Index>& interior,
                           const std::vector<Index>& boundary, int box) {
  const Matrix Aii = A(interior, interior);
  const Matrix Aie = A(interior, boundary);
  Eigen::PartialPivLU<Matrix> lu(Aii);
  const double rcond = lu.rcond();
  if (!(rcond >= 1e-13)) {
    std::ostringstream msg;
    msg << "leaf resonance at box " << box << ": interior collocation block is singular"
        << " (rcond " << rcond << "); change the number of levels or q";
    throw ResonanceError(ResonanceError::Kind::leaf, box, msg.str());
  }
  return -lu.solve(Aie);
}

LeafDiscretization::LeafDiscretization(int q_)
    : q(q_), gauss(gauss_nodes(q_)), cheb(cheb_nodes(q_, -1.0, 1.0)),
      diff(cheb_diff_matrix(q_, -1.0, 1.0)) {
  if (q < 3) throw ConfigError("leaf discretization needs q >= 3");
  for (int i = 0; i < q; ++i) {
    for (int j = 0; j < q; ++j) {
      const bool edge = i == 0 || j == 0 || i == q - 1 || j == q - 1;
      (edge ? boundary : interior).push_back(grid_index(i, j));
    }
  }
  side_gauss_to_cheb = interp_matrix(gauss, cheb);
  side_cheb_to_gauss = interp_matrix(cheb, gauss);

  // Boundary Chebyshev node (i, j) takes the average of every side it lies on.
  gauss_to_cheb = Matrix::Zero(static_cast<Index>(boundary.size()), 4 * q);
  for (std::size_t r = 0; r < boundary.size(); ++r) {
    const int i = static_cast<int>(boundary[r] / q);
    const int j = static_cast<int>(boundary[r] % q);
    struct Hit {
      int side;
      int pos;
    };
    std::vector<Hit> hits;
    if (j == 0) hits.push_back({0, i});
    if (i == q - 1) hits.push_back({1, j});
    if (j == q - 1) hits.push_back({2, i});
    if (i == 0) hits.push_back({3, j});
    const double weight = 1.0 / static_cast<double>(hits.size());
    for (const Hit& h : hits) {
      gauss_to_cheb.row(static_cast<Index>(r)).segment(static_cast<Index>(h.side) * q, q) +=
          weight * side_gauss_to_cheb.row(h.pos);
    }
  }
  cheb_to_gauss = Matrix::Zero(4 * q, 4 * q);
  for (int s = 0; s < 4; ++s) cheb_to_gauss.block(s * q, s * q, q, q) = side_cheb_to_gauss;
}

Matrix leaf_flux_matrix(const LeafDiscretization& disc, const Rectangle& leaf) {
  const int q = disc.q;
  const Matrix Dx = disc.diff * (2.0 / leaf.width());
  const Matrix Dy = disc.diff * (2.0 / leaf.height());
  Matrix L3 = Matrix::Zero(4 * q, static_cast<Index>(q) * q);
  for (int k = 0; k < q; ++k) {
    // south (j = 0) and north (j = q-1): d/dx2 at (k, j)
    for (int jj = 0; jj < q; ++jj) {
      L3(k, disc.grid_index(k, jj)) = Dy(0, jj);
      L3(2 * q + k, disc.grid_index(k, jj)) = Dy(q - 1, jj);
    }
    // east (i = q-1) and west (i = 0): d/dx1 at (i, k)
    for (int ii = 0; ii < q; ++ii) {
      L3(q + k, disc.grid_index(ii, k)) = Dx(q - 1, ii);
      L3(3 * q + k, disc.grid_index(ii, k)) = Dx(0, ii);
    }
  }
  return L3;
}

LeafOperators build_leaf_dtn(const CoefficientField& coeffs, const Rectangle& leaf,
                             const LeafDiscretization& disc, int box) {
  instrumentation::count_leaf_build();
  const Matrix A = build_local_operator(coeffs, leaf, disc.q);
  LeafOperators ops;
  ops.Psi = leaf_solve_operator(A, disc.interior, disc.boundary, box);
  const Matrix L3 = leaf_flux_matrix(disc, leaf);
  // L3 L2 without forming the q^2 x 4(q-1) matrix L2.
  const Matrix flux_from_boundary = L3(Eigen::all, disc.boundary) + L3(Eigen::all, disc.interior) * ops.Psi;
  const Matrix cheb_flux = flux_from_boundary * disc.gauss_to_cheb;
  ops.T.resize(4 * disc.q, 4 * disc.q);
  for (int s = 0; s < 4; ++s) {
    ops.T.middleRows(s * disc.q, disc.q).noalias() =
        disc.side_cheb_to_gauss * cheb_flux.middleRows(s * disc.q, disc.q);
  }
  return ops;
}

LeafOperators build_leaf_dtn(const CoefficientField& coeffs, const Rectangle& leaf, int q) {
  const LeafDiscretization disc(q);
  return build_leaf_dtn(coeffs, leaf, disc);
}

Vector leaf_grid_values(const LeafDiscretization& disc, const Matrix& Psi, const Vector& u_e) {
  const Vector wb = disc.gauss_to_cheb * u_e;
  Vector w(static_cast<Index>(disc.q) * disc.q);
  w(disc.boundary) = wb;
  w(disc.interior) = Psi * wb;
  return w;
}

}  // namespace hps
