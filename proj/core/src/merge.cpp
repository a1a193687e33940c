#include "hps/merge.hpp"

#include "hps/instrumentation.hpp"

#include <Eigen/SVD>

#include <sstream>
#include <unordered_map>

namespace hps {

MergeIndexSplit split_indices(const BoxNode& parent, const BoxNode& a, const BoxNode& b) {
  if (parent.is_leaf() || parent.interior.empty())
    throw Error("split_indices: parent has no shared edge");
  std::unordered_map<Index, Index> pos_a, pos_b, pos_parent;
  for (std::size_t i = 0; i < a.exterior.size(); ++i) pos_a[a.exterior[i]] = static_cast<Index>(i);
  for (std::size_t i = 0; i < b.exterior.size(); ++i) pos_b[b.exterior[i]] = static_cast<Index>(i);
  for (std::size_t i = 0; i < parent.exterior.size(); ++i)
    pos_parent[parent.exterior[i]] = static_cast<Index>(i);

  MergeIndexSplit s;
  std::unordered_map<Index, bool> shared;
  for (Index id : parent.interior) {
    const auto ia = pos_a.find(id);
    const auto ib = pos_b.find(id);
    if (ia == pos_a.end() || ib == pos_b.end())
      throw Error("split_indices: children are not adjacent along the shared edge");
    s.J3_a.push_back(ia->second);
    s.J3_b.push_back(ib->second);
    shared[id] = true;
  }
  s.a_to_parent.assign(a.exterior.size(), -1);
  s.b_to_parent.assign(b.exterior.size(), -1);
  std::vector<Index> stack_ids;
  for (std::size_t i = 0; i < a.exterior.size(); ++i) {
    const Index id = a.exterior[i];
    if (shared.count(id)) continue;
    s.J1.push_back(static_cast<Index>(i));
    stack_ids.push_back(id);
  }
  for (std::size_t i = 0; i < b.exterior.size(); ++i) {
    const Index id = b.exterior[i];
    if (shared.count(id)) continue;
    s.J2.push_back(static_cast<Index>(i));
    stack_ids.push_back(id);
  }
  if (stack_ids.size() != parent.exterior.size())
    throw Error("split_indices: children do not tile the parent boundary");
  s.parent_from_stack.assign(parent.exterior.size(), -1);
  for (std::size_t k = 0; k < stack_ids.size(); ++k) {
    const auto it = pos_parent.find(stack_ids[k]);
    if (it == pos_parent.end()) throw Error("split_indices: child node not on parent boundary");
    s.parent_from_stack[static_cast<std::size_t>(it->second)] = static_cast<Index>(k);
  }
  for (std::size_t k = 0; k < s.J1.size(); ++k)
    s.a_to_parent[static_cast<std::size_t>(s.J1[k])] = pos_parent.at(stack_ids[k]);
  for (std::size_t k = 0; k < s.J2.size(); ++k)
    s.b_to_parent[static_cast<std::size_t>(s.J2[k])] = pos_parent.at(stack_ids[s.J1.size() + k]);
  return s;
}

namespace {

[[noreturn]] void merge_resonance(int box, double rcond) {
  std::ostringstream msg;
  msg << "merge resonance at box " << box << ": shared-edge system is singular (rcond "
      << rcond << "); change the number of levels or q";
  throw ResonanceError(ResonanceError::Kind::merge, box, msg.str());
}

double gauge_weight(const Matrix& A33) {
  return A33.norm() / std::sqrt(static_cast<double>(std::max<Index>(A33.rows(), 1)));
}

}  // namespace

Matrix junction_modes(Index n, int q) {
  if (q < 2 || n % q != 0) throw Error("junction_modes: edge length is not a multiple of q");
  const Index segments = n / q;
  Matrix N = Matrix::Zero(n, std::max<Index>(segments - 1, 0));
  if (segments < 2) return N;
  const std::vector<double> g = gauss_nodes(q);
  const Matrix E = interp_matrix(cheb_nodes(q, -1.0, 1.0), g);
  for (Index j = 0; j + 1 < segments; ++j) {
    N.block(j * q, j, q, 1) = E.col(q - 1);
    N.block((j + 1) * q, j, q, 1) = E.col(0);
    N.col(j).normalize();
  }
  return N;
}

DenseMerge merge_dense(const Matrix& Ta, const Matrix& Tb, const MergeIndexSplit& s, int q,
                       int box) {
  instrumentation::count_merge();
  Matrix A33 = Ta(s.J3_a, s.J3_a) - Tb(s.J3_b, s.J3_b);
  const Matrix N = junction_modes(A33.rows(), q);
  A33.noalias() += gauge_weight(A33) * N * N.transpose();
  const Index n1 = static_cast<Index>(s.J1.size());
  const Index n2 = static_cast<Index>(s.J2.size());
  const Index n3 = A33.rows();
  Matrix rhs(n3, n1 + n2);
  rhs << -Ta(s.J3_a, s.J1), Tb(s.J3_b, s.J2);
  Eigen::PartialPivLU<Matrix> lu(A33);
  const double rcond = lu.rcond();
  if (!(rcond >= 1e-13)) merge_resonance(box, rcond);
  const Matrix S_stack = lu.solve(rhs);

  Matrix T_stack = Matrix::Zero(n1 + n2, n1 + n2);
  T_stack.topLeftCorner(n1, n1) = Ta(s.J1, s.J1);
  T_stack.bottomRightCorner(n2, n2) = Tb(s.J2, s.J2);
  T_stack.topRows(n1).noalias() += Ta(s.J1, s.J3_a) * S_stack;
  T_stack.bottomRows(n2).noalias() += Tb(s.J2, s.J3_b) * S_stack;

  DenseMerge out;
  out.T = T_stack(s.parent_from_stack, s.parent_from_stack);
  out.S = S_stack(Eigen::all, s.parent_from_stack);
  return out;
}

IndexTree box_index_tree(const BoxNode& box, int q) {
  using Node = IndexTree::Node;
  std::vector<Node> nodes;
  nodes.push_back({0, box.side_offset[4], -1, -1, -1, 0});
  // Root and the two half-boundaries split at side boundaries; below that,
  // balanced halves over whole q-point segments.
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const Node n = nodes[i];
    Index mid = -1;
    if (i == 0) {
      mid = box.side_offset[2];
    } else if (n.level == 1) {
      mid = n.begin == 0 ? box.side_offset[1] : box.side_offset[3];
    } else {
      const Index segs = n.size() / q;
      if (segs <= 1) continue;
      mid = n.begin + ((segs + 1) / 2) * q;
    }
    const int id = static_cast<int>(i);
    nodes[i].left = static_cast<int>(nodes.size());
    nodes.push_back({n.begin, mid, id, -1, -1, n.level + 1});
    nodes[i].right = static_cast<int>(nodes.size());
    nodes.push_back({mid, n.end, id, -1, -1, n.level + 1});
  }
  return IndexTree(std::move(nodes));
}

int side_node(const IndexTree& tree, const BoxNode& box, Side s) {
  const int id = tree.find(box.side_begin(s), box.side_end(s));
  if (id < 0) throw Error("side_node: side is not a node of the box tree");
  return id;
}

namespace {

struct Piece {
  int child;  // 0 = a, 1 = b
  Side side;
};

// Pieces of the parent boundary in parent exterior order, and the layout
// reproducing the parent's box tree.
std::vector<Piece> parent_pieces(SplitAxis split) {
  if (split == SplitAxis::vertical)
    return {{0, Side::south}, {1, Side::south}, {1, Side::east},
            {0, Side::north}, {1, Side::north}, {0, Side::west}};
  return {{0, Side::south}, {0, Side::east}, {1, Side::east},
          {1, Side::north}, {0, Side::west}, {1, Side::west}};
}

HbsLayout parent_layout(SplitAxis split) {
  using L = HbsLayout;
  if (split == SplitAxis::vertical)
    return L::pair(L::pair(L::pair(L::leaf(0), L::leaf(1)), L::leaf(2)),
                   L::pair(L::pair(L::leaf(3), L::leaf(4)), L::leaf(5)));
  return L::pair(L::pair(L::leaf(0), L::pair(L::leaf(1), L::leaf(2))),
                 L::pair(L::leaf(3), L::pair(L::leaf(4), L::leaf(5))));
}

Side shared_side(SplitAxis split, int child) {
  if (split == SplitAxis::vertical) return child == 0 ? Side::east : Side::west;
  return child == 0 ? Side::north : Side::south;
}

}  // namespace

HbsMerge merge_hbs(const HbsMatrix& Ta, const HbsMatrix& Tb, const BoxTree& tree, int box,
                   double tol) {
  instrumentation::count_merge();
  const BoxNode& parent = tree.box(box);
  const BoxNode& a = tree.box(parent.child_a);
  const BoxNode& b = tree.box(parent.child_b);
  const int q = tree.q();
  const IndexTree tree_a = box_index_tree(a, q);
  const IndexTree tree_b = box_index_tree(b, q);
  if (!Ta.tree().same_shape(tree_a) || !Tb.tree().same_shape(tree_b))
    throw Error("merge_hbs: child operators are not on their box trees");
  const MergeIndexSplit split = split_indices(parent, a, b);
  const HbsMatrix* T[2] = {&Ta, &Tb};
  const BoxNode* child[2] = {&a, &b};
  const std::vector<Index>* to_parent[2] = {&split.a_to_parent, &split.b_to_parent};
  const int f[2] = {side_node(Ta.tree(), a, shared_side(parent.split, 0)),
                    side_node(Tb.tree(), b, shared_side(parent.split, 1))};

  // The shared edge lists the same nodes in the same order on both sides.
  const auto& na3 = Ta.tree().node(f[0]);
  const auto& nb3 = Tb.tree().node(f[1]);
  for (std::size_t k = 0; k < split.J3_a.size(); ++k) {
    if (split.J3_a[k] != na3.begin + static_cast<Index>(k) ||
        split.J3_b[k] != nb3.begin + static_cast<Index>(k))
      throw Error("merge_hbs: shared edge is not a contiguous side");
  }

  // Delta = T^a_33 - T^b_33 + w N N^T.
  HbsMatrix delta = hbs_add(subtree(Ta, f[0]), scaled(subtree(Tb, f[1]), -1.0), tol);
  const Matrix N = junction_modes(delta.rows(), q);
  if (N.cols() > 0) {
    const Matrix probe = Matrix::Random(delta.rows(), 4);
    const double w = hbs_apply(delta, probe).norm() / probe.norm();
    delta = hbs_add(delta, low_rank_to_hbs(w * N, N.transpose(), delta.tree()), tol);
  }
  HbsInverseFactors delta_inv;
  try {
    delta_inv = hbs_invert(delta);
  } catch (const ResonanceError& e) {
    std::ostringstream msg;
    msg << "merge resonance at box " << box << ": " << e.what()
        << "; change the number of levels or q";
    throw ResonanceError(ResonanceError::Kind::merge, box, msg.str());
  }

  const auto pieces = parent_pieces(parent.split);
  const Index n3 = na3.size();
  const Index npar = parent.side_offset[4];

  // [-T^a_31 | T^b_32] = [Ubig_fa 0; 0 Ubig_fb] Rs.
  const Index ka = Ta.row_rank(f[0]);
  const Index kb = Tb.row_rank(f[1]);
  Matrix Rs = Matrix::Zero(ka + kb, npar);
  for (const Piece& p : pieces) {
    const BoxNode& c = *child[p.child];
    const HbsMatrix& Tc = *T[p.child];
    const int e = side_node(Tc.tree(), c, p.side);
    const Index col0 = (*to_parent[p.child])[static_cast<std::size_t>(c.side_begin(p.side))];
    const Matrix block = coupling(Tc, f[p.child], e) * expand_v(Tc, e).transpose();
    if (p.child == 0)
      Rs.block(0, col0, ka, block.cols()) = -block;
    else
      Rs.block(ka, col0, kb, block.cols()) = block;
  }
  Matrix Ushared(n3, ka + kb);
  Ushared << expand_u(Ta, f[0]), expand_u(Tb, f[1]);
  const Matrix Qs = inverse_apply(delta_inv, Ushared);

  // S = Qs Rs, truncated to its numerical rank.
  HbsMerge out;
  {
    Eigen::HouseholderQR<Matrix> qr(Qs);
    const Index r0 = std::min(Qs.rows(), Qs.cols());
    const Matrix Q1 = qr.householderQ() * Matrix::Identity(Qs.rows(), r0);
    const Matrix R1 = qr.matrixQR().topRows(r0).triangularView<Eigen::Upper>();
    const Matrix M = R1 * Rs;
    Eigen::BDCSVD<Matrix> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    Index r = 0;
    if (sv.size() > 0 && sv(0) > 0.0)
      while (r < sv.size() && sv(r) > tol * sv(0)) ++r;
    out.S.left = Q1 * svd.matrixU().leftCols(r);
    out.S.right = sv.head(r).asDiagonal() * svd.matrixV().leftCols(r).transpose();
  }

  // [T^a_13; T^b_23] S_left, rows in parent exterior order.
  Matrix W = Matrix::Zero(npar, out.S.rank());
  for (int c = 0; c < 2; ++c) {
    const HbsMatrix& Tc = *T[c];
    const Matrix proj = project_v(Tc, f[c], out.S.left);
    for (const Piece& p : pieces) {
      if (p.child != c) continue;
      const int e = side_node(Tc.tree(), *child[c], p.side);
      const Index row0 =
          (*to_parent[c])[static_cast<std::size_t>(child[c]->side_begin(p.side))];
      const Matrix block = expand_u(Tc, e) * (coupling(Tc, e, f[c]) * proj);
      W.middleRows(row0, block.rows()) = block;
    }
  }

  std::vector<HbsPiece> hbs_pieces;
  for (const Piece& p : pieces)
    hbs_pieces.push_back({T[p.child], side_node(T[p.child]->tree(), *child[p.child], p.side)});
  const HbsMatrix diag = compose_block_diagonal(hbs_pieces, parent_layout(parent.split));
  if (!diag.tree().same_shape(box_index_tree(parent, q)))
    throw Error("merge_hbs: composed operator does not match the parent box tree");
  out.T = hbs_add(diag, low_rank_to_hbs(W, out.S.right, diag.tree()), tol);
  return out;
}

}  // namespace hps
