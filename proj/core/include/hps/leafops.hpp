#pragma once

#include "hps/common.hpp"
#include "hps/grid.hpp"

#include <functional>
#include <vector>

namespace hps {

/// Coefficients of
///   A u = -c11 u_11 - 2 c12 u_12 - c22 u_22 + c1 u_1 + c2 u_2 + c u.
/// An empty function stands for the zero function.
struct CoefficientField {
  using Function = std::function<double(Point)>;
  Function c11, c12, c22, c1, c2, c;

  /// c11 = c22 = 1, everything else zero.
  static CoefficientField laplace();
};

/// Spectral differentiation matrix on p Chebyshev extreme points of [a, b]
/// (nodes increasing, as returned by cheb_nodes).
Matrix cheb_diff_matrix(int p, double a, double b);

/// Collocated operator A on the p x p tensor Chebyshev grid of `leaf`.
/// Grid ordering is x1-major: node (i, j) sits at row i * p + j, where i
/// indexes x1 and j indexes x2.
Matrix build_local_operator(const CoefficientField& coeffs, const Rectangle& leaf, int p);

/// Psi = -A_ii^{-1} A_ie. Throws ResonanceError (kind leaf) when the interior
/// block is numerically singular (reciprocal condition estimate < 1e-13).
Matrix leaf_solve_operator(const Matrix& A, const std::vector<Index>& interior,
                           const std::vector<Index>& boundary, int box = -1);

/// Reference data shared by every leaf with the same q: node sets, index
/// partitions of the Chebyshev grid and the two re-tabulation maps.
struct LeafDiscretization {
  explicit LeafDiscretization(int q);

  int q;
  std::vector<double> gauss;  // on (-1, 1)
  std::vector<double> cheb;   // on [-1, 1]
  Matrix diff;                // cheb_diff_matrix(q, -1, 1)
  /// J_e: grid indices of the 4(q-1) boundary Chebyshev nodes (increasing).
  std::vector<Index> boundary;
  /// J_i: grid indices of the (q-2)^2 interior nodes (increasing).
  std::vector<Index> interior;
  /// L1: 4(q-1) x 4q, Gauss values (S, E, N, W) to boundary Chebyshev nodes.
  /// Corner rows average the two adjacent sides.
  Matrix gauss_to_cheb;
  /// L4: 4q x 4q, block diagonal by side, Chebyshev side values to Gauss.
  Matrix cheb_to_gauss;
  /// Per-side q x q blocks of the above.
  Matrix side_gauss_to_cheb;
  Matrix side_cheb_to_gauss;

  Index grid_index(int i, int j) const { return static_cast<Index>(i) * q + j; }
};

struct LeafOperators {
  /// 4q x 4q discrete Dirichlet-to-Neumann map in the exterior ordering.
  Matrix T;
  /// (q-2)^2 x 4(q-1) interior solve operator.
  Matrix Psi;
};

/// T = L4 L3 L2 L1 for one leaf box.
LeafOperators build_leaf_dtn(const CoefficientField& coeffs, const Rectangle& leaf,
                             const LeafDiscretization& disc, int box = -1);
LeafOperators build_leaf_dtn(const CoefficientField& coeffs, const Rectangle& leaf, int q);

/// L3: 4q x q^2 map from grid values to d/dx2 on the horizontal sides and
/// d/dx1 on the vertical sides (side Chebyshev nodes, corners included).
Matrix leaf_flux_matrix(const LeafDiscretization& disc, const Rectangle& leaf);

/// Full q^2 grid values of the local solution with Gauss boundary data `u_e`
/// (4q values in exterior order).
Vector leaf_grid_values(const LeafDiscretization& disc, const Matrix& Psi, const Vector& u_e);

}  // namespace hps
