#include "hps/hbs.hpp"

#include <Eigen/SVD>

#include <sstream>

namespace hps {

namespace {

std::size_t at(int i) { return static_cast<std::size_t>(i); }

struct ThinQr {
  Matrix Q;  // rows x min(rows, cols), orthonormal columns
  Matrix R;  // min(rows, cols) x cols
};

ThinQr thin_qr(const Matrix& A) {
  const Index r = std::min(A.rows(), A.cols());
  ThinQr out;
  if (r == 0) {
    out.Q = Matrix(A.rows(), 0);
    out.R = Matrix(0, A.cols());
    return out;
  }
  Eigen::HouseholderQR<Matrix> qr(A);
  out.Q = qr.householderQ() * Matrix::Identity(A.rows(), r);
  out.R = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
  return out;
}

Matrix blockdiag(const Matrix& A, const Matrix& B) {
  Matrix out = Matrix::Zero(A.rows() + B.rows(), A.cols() + B.cols());
  out.topLeftCorner(A.rows(), A.cols()) = A;
  out.bottomRightCorner(B.rows(), B.cols()) = B;
  return out;
}

Matrix hcat(const Matrix& A, const Matrix& B) {
  if (A.cols() == 0) return B;
  if (B.cols() == 0) return A;
  Matrix out(A.rows(), A.cols() + B.cols());
  out << A, B;
  return out;
}

// Square factor R (rows x rows at most) with R R^* = G G^*.
Matrix compact(const Matrix& G) {
  if (G.cols() <= G.rows()) return G;
  return thin_qr(G.transpose()).R.transpose();
}

// Leading left singular vectors with sigma > eps * sigma_max.
Matrix dominant_subspace(const Matrix& G, double eps) {
  if (G.rows() == 0) return Matrix(0, 0);
  if (G.cols() == 0) return Matrix(G.rows(), 0);
  Eigen::BDCSVD<Matrix> svd(G, Eigen::ComputeThinU);
  const auto& s = svd.singularValues();
  Index r = 0;
  if (s.size() > 0 && s(0) > 0.0) {
    while (r < s.size() && s(r) > eps * s(0)) ++r;
  }
  return svd.matrixU().leftCols(r);
}

Matrix insert_zero_rows(const Matrix& A, Index pos, Index count) {
  Matrix out = Matrix::Zero(A.rows() + count, A.cols());
  out.topRows(pos) = A.topRows(pos);
  out.bottomRows(A.rows() - pos) = A.bottomRows(A.rows() - pos);
  return out;
}

Matrix insert_zero_cols(const Matrix& A, Index pos, Index count) {
  return insert_zero_rows(A.transpose(), pos, count).transpose();
}

// Last `count` columns of a full orthogonal basis whose leading columns span M.
Matrix range_complement(const Matrix& M, Index count) {
  Eigen::HouseholderQR<Matrix> qr(M);
  const Matrix Q = qr.householderQ() * Matrix::Identity(M.rows(), M.rows());
  return Q.rightCols(count);
}

// Pads the smaller of U_t, V_t (both orthonormal) so that V^* D^-1 U is
// square. The new basis vectors get zero coefficients in the parent, so the
// represented matrix is unchanged; they are chosen as D V z (or D^* U z) with
// z orthogonal to the existing projected block, which keeps it well
// conditioned.
void pad_ranks(HbsMatrix& H, int t, const Matrix& Dt, const Matrix& Di) {
  auto& f = H.factors(t);
  const Index ku = f.U.cols();
  const Index kv = f.V.cols();
  if (ku == kv) return;
  const auto& tree = H.tree();
  const int p = tree.node(t).parent;
  auto& fp = H.factors(p);
  const bool left = tree.node(p).left == t;
  const int sib = left ? tree.node(p).right : tree.node(p).left;
  const double dn = Di.norm() / std::sqrt(static_cast<double>(std::max<Index>(Di.rows(), 1)));
  if (ku < kv) {
    const Matrix M = f.V.transpose() * Di * f.U;
    const double s = ku > 0 ? M.norm() / std::sqrt(static_cast<double>(ku)) : dn;
    const Index d = kv - ku;
    const Matrix extra = Dt * (f.V * (s * range_complement(M, d)));
    const Index pos = left ? ku : H.row_rank(sib) + ku;
    if (p != 0) fp.U = insert_zero_rows(fp.U, pos, d);
    Matrix& B = left ? fp.B12 : fp.B21;
    B = insert_zero_rows(B, B.rows(), d);
    Matrix U(f.U.rows(), kv);
    U << f.U, extra;
    f.U = std::move(U);
  } else {
    const Matrix M = f.U.transpose() * Di.transpose() * f.V;
    const double s = kv > 0 ? M.norm() / std::sqrt(static_cast<double>(kv)) : dn;
    const Index d = ku - kv;
    const Matrix extra = Dt.transpose() * (f.U * (s * range_complement(M, d)));
    const Index pos = left ? kv : H.col_rank(sib) + kv;
    if (p != 0) fp.V = insert_zero_rows(fp.V, pos, d);
    Matrix& B = left ? fp.B21 : fp.B12;
    B = insert_zero_cols(B, B.cols(), d);
    Matrix V(f.V.rows(), ku);
    V << f.V, extra;
    f.V = std::move(V);
  }
}

[[noreturn]] void singular_block(int node, double rcond, const char* what) {
  std::ostringstream msg;
  msg << "HBS inversion: " << what << " at node " << node << " is singular (rcond " << rcond
      << ")";
  throw ResonanceError(ResonanceError::Kind::hbs, node, msg.str());
}

constexpr double kMinRcond = 1e-13;

}  // namespace

HbsMatrix orthonormalized(const HbsMatrix& H0) {
  HbsMatrix H = H0;
  const auto& tree = H.tree();
  const int n = tree.size();
  std::vector<Matrix> Ru(at(n)), Rv(at(n));
  for (int t = n - 1; t >= 0; --t) {
    const auto& nd = tree.node(t);
    auto& f = H.factors(t);
    if (!nd.is_leaf()) {
      const auto a = at(nd.left), b = at(nd.right);
      f.B12 = Ru[a] * f.B12 * Rv[b].transpose();
      f.B21 = Ru[b] * f.B21 * Rv[a].transpose();
      if (t != 0) {
        const Index ka = Ru[a].cols(), la = Rv[a].cols();
        Matrix U(Ru[a].rows() + Ru[b].rows(), f.U.cols());
        U << Ru[a] * f.U.topRows(ka), Ru[b] * f.U.bottomRows(f.U.rows() - ka);
        Matrix V(Rv[a].rows() + Rv[b].rows(), f.V.cols());
        V << Rv[a] * f.V.topRows(la), Rv[b] * f.V.bottomRows(f.V.rows() - la);
        f.U = std::move(U);
        f.V = std::move(V);
      }
      Ru[a] = Rv[a] = Ru[b] = Rv[b] = Matrix();
    }
    if (t == 0) break;
    auto qu = thin_qr(f.U);
    auto qv = thin_qr(f.V);
    f.U = std::move(qu.Q);
    f.V = std::move(qv.Q);
    Ru[at(t)] = std::move(qu.R);
    Rv[at(t)] = std::move(qv.R);
  }
  return H;
}

namespace {

// Truncates bases that are already orthonormal.
HbsMatrix truncate(const HbsMatrix& H0, double eps) {
  HbsMatrix H = H0;
  const auto& tree = H.tree();
  const int n = tree.size();
  if (n == 1) return H;
  // G_t G_t^* is the Gram matrix of the off-diagonal block row of node t in
  // the coordinates of its own basis (column side likewise).
  std::vector<Matrix> Gu(at(n)), Gv(at(n));
  for (int t = 0; t < n; ++t) {
    const auto& nd = tree.node(t);
    if (nd.is_leaf()) continue;
    const auto& f = H.factors(t);
    const int a = nd.left, b = nd.right;
    const Index ka = H.row_rank(a), la = H.col_rank(a);
    Matrix up_a, up_b, vp_a, vp_b;
    if (t != 0) {
      up_a = f.U.topRows(ka) * Gu[at(t)];
      up_b = f.U.bottomRows(f.U.rows() - ka) * Gu[at(t)];
      vp_a = f.V.topRows(la) * Gv[at(t)];
      vp_b = f.V.bottomRows(f.V.rows() - la) * Gv[at(t)];
    }
    Gu[at(a)] = compact(hcat(f.B12, up_a));
    Gu[at(b)] = compact(hcat(f.B21, up_b));
    Gv[at(a)] = compact(hcat(f.B21.transpose(), vp_a));
    Gv[at(b)] = compact(hcat(f.B12.transpose(), vp_b));
  }
  std::vector<Matrix> Pu(at(n)), Pv(at(n));
  for (int t = 1; t < n; ++t) {
    Pu[at(t)] = dominant_subspace(Gu[at(t)], eps);
    Pv[at(t)] = dominant_subspace(Gv[at(t)], eps);
    Gu[at(t)] = Gv[at(t)] = Matrix();
  }
  for (int t = 0; t < n; ++t) {
    const auto& nd = tree.node(t);
    auto& f = H.factors(t);
    if (nd.is_leaf()) {
      f.U = f.U * Pu[at(t)];
      f.V = f.V * Pv[at(t)];
      continue;
    }
    const auto a = at(nd.left), b = at(nd.right);
    f.B12 = Pu[a].transpose() * f.B12 * Pv[b];
    f.B21 = Pu[b].transpose() * f.B21 * Pv[a];
    if (t != 0) {
      f.U = blockdiag(Pu[a].transpose(), Pu[b].transpose()) * f.U * Pu[at(t)];
      f.V = blockdiag(Pv[a].transpose(), Pv[b].transpose()) * f.V * Pv[at(t)];
    }
  }
  return H;
}

}  // namespace

HbsMatrix recompress(const HbsMatrix& H, double eps) {
  return orthonormalized(truncate(orthonormalized(H), eps));
}

HbsMatrix scaled(const HbsMatrix& H0, double alpha) {
  HbsMatrix H = H0;
  for (int t = 0; t < H.tree().size(); ++t) {
    auto& f = H.factors(t);
    f.D *= alpha;
    f.B12 *= alpha;
    f.B21 *= alpha;
  }
  return H;
}

HbsMatrix hbs_add(const HbsMatrix& A, const HbsMatrix& B, double eps) {
  if (!A.tree().same_shape(B.tree())) throw Error("hbs_add: trees differ");
  const auto& tree = A.tree();
  std::vector<HbsNodeFactors> F(at(tree.size()));
  for (int t = 0; t < tree.size(); ++t) {
    const auto& nd = tree.node(t);
    const auto& fa = A.factors(t);
    const auto& fb = B.factors(t);
    auto& f = F[at(t)];
    if (nd.is_leaf()) {
      f.D = fa.D + fb.D;
      if (t != 0) {
        f.U = hcat(fa.U, fb.U);
        f.V = hcat(fa.V, fb.V);
      }
      continue;
    }
    f.B12 = blockdiag(fa.B12, fb.B12);
    f.B21 = blockdiag(fa.B21, fb.B21);
    if (t == 0) continue;
    // Child coefficient order: [A_left, B_left, A_right, B_right].
    auto stack = [](const Matrix& TA, const Matrix& TB, Index ka, Index kb) {
      Matrix T = Matrix::Zero(TA.rows() + TB.rows(), TA.cols() + TB.cols());
      T.block(0, 0, ka, TA.cols()) = TA.topRows(ka);
      T.block(ka, TA.cols(), kb, TB.cols()) = TB.topRows(kb);
      T.block(ka + kb, 0, TA.rows() - ka, TA.cols()) = TA.bottomRows(TA.rows() - ka);
      T.block(ka + kb + TA.rows() - ka, TA.cols(), TB.rows() - kb, TB.cols()) =
          TB.bottomRows(TB.rows() - kb);
      return T;
    };
    f.U = stack(fa.U, fb.U, A.row_rank(nd.left), B.row_rank(nd.left));
    f.V = stack(fa.V, fb.V, A.col_rank(nd.left), B.col_rank(nd.left));
  }
  return recompress(HbsMatrix(tree, std::move(F)), eps);
}

HbsMatrix low_rank_to_hbs(const Matrix& Q, const Matrix& R, const IndexTree& tree, double eps) {
  const Index M = tree.dimension();
  if (Q.rows() != M || R.cols() != M || Q.cols() != R.rows())
    throw Error("low_rank_to_hbs: factor shapes do not match the tree");
  const int n = tree.size();
  std::vector<HbsNodeFactors> F(at(n));
  // Q(I_t, :) = Ubig_t Z_t and R(:, I_t)^* = Vbig_t Y_t.
  std::vector<Matrix> Z(at(n)), Y(at(n));
  const Matrix Rt = R.transpose();
  for (int t = n - 1; t >= 0; --t) {
    const auto& nd = tree.node(t);
    auto& f = F[at(t)];
    if (nd.is_leaf()) {
      f.D = Q.middleRows(nd.begin, nd.size()) * R.middleCols(nd.begin, nd.size());
      if (t == 0) break;
      auto qu = thin_qr(Q.middleRows(nd.begin, nd.size()));
      auto qv = thin_qr(Rt.middleRows(nd.begin, nd.size()));
      f.U = std::move(qu.Q);
      f.V = std::move(qv.Q);
      Z[at(t)] = std::move(qu.R);
      Y[at(t)] = std::move(qv.R);
      continue;
    }
    const auto a = at(nd.left), b = at(nd.right);
    f.B12 = Z[a] * Y[b].transpose();
    f.B21 = Z[b] * Y[a].transpose();
    if (t != 0) {
      Matrix zs(Z[a].rows() + Z[b].rows(), Q.cols());
      zs << Z[a], Z[b];
      Matrix ys(Y[a].rows() + Y[b].rows(), Q.cols());
      ys << Y[a], Y[b];
      auto qu = thin_qr(zs);
      auto qv = thin_qr(ys);
      f.U = std::move(qu.Q);
      f.V = std::move(qv.Q);
      Z[at(t)] = std::move(qu.R);
      Y[at(t)] = std::move(qv.R);
    }
    Z[a] = Z[b] = Y[a] = Y[b] = Matrix();
  }
  HbsMatrix H(tree, std::move(F));
  return eps > 0.0 ? recompress(H, eps) : H;
}

HbsInverseFactors hbs_invert(const HbsMatrix& H0) {
  HbsMatrix H = orthonormalized(H0);
  const auto& tree = H.tree();
  const int n = tree.size();
  HbsInverseFactors out;
  out.tree = tree;
  out.E.resize(at(n));
  out.Fh.resize(at(n));
  out.G.resize(at(n));
  std::vector<Matrix> Dhat(at(n));

  auto reduced_block = [&](int t) -> Matrix {
    const auto& nd = tree.node(t);
    const auto& f = H.factors(t);
    if (nd.is_leaf()) return f.D;
    const Matrix& da = Dhat[at(nd.left)];
    const Matrix& db = Dhat[at(nd.right)];
    Matrix D(da.rows() + db.rows(), da.cols() + db.cols());
    D << da, f.B12, f.B21, db;
    return D;
  };

  for (int t = n - 1; t >= 1; --t) {
    const auto& nd = tree.node(t);
    const Matrix Dt = reduced_block(t);
    if (!nd.is_leaf()) Dhat[at(nd.left)] = Dhat[at(nd.right)] = Matrix();
    Eigen::PartialPivLU<Matrix> lu(Dt);
    const double rc = Dt.size() == 0 ? 1.0 : lu.rcond();
    if (!(rc >= kMinRcond)) singular_block(t, rc, "reduced diagonal block");
    const Matrix Di = lu.inverse();
    pad_ranks(H, t, Dt, Di);
    const auto& f = H.factors(t);
    const Index k = f.U.cols();
    if (k == 0) {
      Dhat[at(t)] = Matrix(0, 0);
      out.E[at(t)] = Matrix(Dt.rows(), 0);
      out.Fh[at(t)] = Matrix(0, Dt.rows());
      out.G[at(t)] = Di;
      continue;
    }
    const Matrix DiU = Di * f.U;
    const Matrix VtDi = f.V.transpose() * Di;
    const Matrix S = f.V.transpose() * DiU;
    Eigen::PartialPivLU<Matrix> slu(S);
    const double src = slu.rcond();
    if (!(src >= kMinRcond)) singular_block(t, src, "projected block V^* D^-1 U");
    Dhat[at(t)] = slu.inverse();
    out.E[at(t)] = DiU * Dhat[at(t)];
    out.Fh[at(t)] = Dhat[at(t)] * VtDi;
    out.G[at(t)] = Di - out.E[at(t)] * VtDi;
  }
  const Matrix Droot = reduced_block(0);
  Eigen::PartialPivLU<Matrix> lu(Droot);
  const double rc = Droot.size() == 0 ? 1.0 : lu.rcond();
  if (!(rc >= kMinRcond)) singular_block(0, rc, "root block");
  out.root = lu.inverse();
  return out;
}

Matrix inverse_apply(const HbsInverseFactors& inv, const Matrix& x) {
  const auto& tree = inv.tree;
  if (x.rows() != tree.dimension()) throw Error("inverse_apply: dimension mismatch");
  const int n = tree.size();
  if (n == 1) return inv.root * x;
  std::vector<Matrix> xh(at(n)), yh(at(n));
  auto stacked = [&](int t) {
    const auto& nd = tree.node(t);
    const Matrix& a = xh[at(nd.left)];
    const Matrix& b = xh[at(nd.right)];
    Matrix s(a.rows() + b.rows(), x.cols());
    s << a, b;
    return s;
  };
  for (int t = n - 1; t >= 1; --t) {
    const auto& nd = tree.node(t);
    xh[at(t)] = nd.is_leaf() ? Matrix(inv.Fh[at(t)] * x.middleRows(nd.begin, nd.size()))
                             : Matrix(inv.Fh[at(t)] * stacked(t));
  }
  Matrix y(x.rows(), x.cols());
  for (int t = 0; t < n; ++t) {
    const auto& nd = tree.node(t);
    if (nd.is_leaf()) {
      y.middleRows(nd.begin, nd.size()) =
          inv.E[at(t)] * yh[at(t)] + inv.G[at(t)] * x.middleRows(nd.begin, nd.size());
      continue;
    }
    const Matrix yt =
        t == 0 ? Matrix(inv.root * stacked(t))
               : Matrix(inv.E[at(t)] * yh[at(t)] + inv.G[at(t)] * stacked(t));
    const Index ka = xh[at(nd.left)].rows();
    yh[at(nd.left)] = yt.topRows(ka);
    yh[at(nd.right)] = yt.bottomRows(yt.rows() - ka);
  }
  return y;
}

}  // namespace hps
