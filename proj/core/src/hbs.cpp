#include "hps/hbs.hpp"

#include <algorithm>
#include <deque>
#include <string>

namespace hps {

IndexTree::IndexTree(std::vector<Node> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.empty()) throw Error("IndexTree: no nodes");
  if (nodes_[0].parent != -1 || nodes_[0].begin != 0) throw Error("IndexTree: bad root");
  for (int i = 0; i < size(); ++i) {
    const Node& n = node(i);
    if (n.end < n.begin) throw Error("IndexTree: negative range at node " + std::to_string(i));
    if ((n.left < 0) != (n.right < 0)) throw Error("IndexTree: node with a single child");
    if (n.is_leaf()) continue;
    if (n.left <= i || n.right <= i || n.left >= size() || n.right >= size())
      throw Error("IndexTree: children must follow their parent");
    const Node& a = node(n.left);
    const Node& b = node(n.right);
    if (a.parent != i || b.parent != i || a.begin != n.begin || a.end != b.begin ||
        b.end != n.end)
      throw Error("IndexTree: children do not partition node " + std::to_string(i));
  }
}

int IndexTree::depth() const {
  int d = 0;
  for (const Node& n : nodes_) d = std::max(d, n.level);
  return d;
}

std::vector<int> IndexTree::leaves() const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i)
    if (node(i).is_leaf()) out.push_back(i);
  std::sort(out.begin(), out.end(),
            [&](int a, int b) { return node(a).begin < node(b).begin; });
  return out;
}

int IndexTree::find(Index begin, Index end) const {
  int cur = 0;
  while (cur >= 0) {
    const Node& n = node(cur);
    if (n.begin == begin && n.end == end) return cur;
    if (n.is_leaf() || begin < n.begin || end > n.end) return -1;
    const Node& a = node(n.left);
    if (end <= a.end)
      cur = n.left;
    else if (begin >= a.end)
      cur = n.right;
    else
      return -1;
  }
  return -1;
}

bool IndexTree::same_shape(const IndexTree& other) const {
  if (size() != other.size()) return false;
  for (int i = 0; i < size(); ++i) {
    const Node& a = node(i);
    const Node& b = other.node(i);
    if (a.size() != b.size() || a.left != b.left || a.right != b.right) return false;
  }
  return true;
}

IndexTree IndexTree::subtree(int root) const {
  std::vector<int> map(nodes_.size(), -1);
  std::vector<Node> out;
  const Index base = node(root).begin;
  const int base_level = node(root).level;
  for (int i = root; i < size(); ++i) {
    const Node& n = node(i);
    if (i != root && (n.parent < 0 || map[static_cast<std::size_t>(n.parent)] < 0)) continue;
    map[static_cast<std::size_t>(i)] = static_cast<int>(out.size());
    Node c = n;
    c.begin -= base;
    c.end -= base;
    c.level -= base_level;
    c.parent = i == root ? -1 : map[static_cast<std::size_t>(n.parent)];
    out.push_back(c);
  }
  for (Node& n : out) {
    if (n.is_leaf()) continue;
    n.left = map[static_cast<std::size_t>(n.left)];
    n.right = map[static_cast<std::size_t>(n.right)];
  }
  return IndexTree(std::move(out));
}

IndexTree build_index_tree(Index size, Index leaf_capacity) {
  if (size <= 0) throw ConfigError("build_index_tree: empty index set");
  if (leaf_capacity <= 0) throw ConfigError("build_index_tree: leaf capacity must be positive");
  std::vector<IndexTree::Node> nodes;
  nodes.push_back({0, size, -1, -1, -1, 0});
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const IndexTree::Node n = nodes[i];
    if (n.size() <= leaf_capacity) continue;
    const Index mid = n.begin + (n.size() + 1) / 2;
    const int id = static_cast<int>(i);
    nodes[i].left = static_cast<int>(nodes.size());
    nodes.push_back({n.begin, mid, id, -1, -1, n.level + 1});
    nodes[i].right = static_cast<int>(nodes.size());
    nodes.push_back({mid, n.end, id, -1, -1, n.level + 1});
  }
  return IndexTree(std::move(nodes));
}

HbsMatrix::HbsMatrix(IndexTree tree, std::vector<HbsNodeFactors> factors)
    : tree_(std::move(tree)), factors_(std::move(factors)) {
  if (static_cast<int>(factors_.size()) != tree_.size())
    throw Error("HbsMatrix: one factor set per tree node required");
  for (int i = 0; i < tree_.size(); ++i) {
    const auto& n = tree_.node(i);
    const auto& f = this->factors(i);
    const std::string where = " at node " + std::to_string(i);
    if (n.is_leaf()) {
      if (f.D.rows() != n.size() || f.D.cols() != n.size())
        throw Error("HbsMatrix: diagonal block has the wrong size" + where);
      if (i != 0 && (f.U.rows() != n.size() || f.V.rows() != n.size()))
        throw Error("HbsMatrix: leaf basis has the wrong size" + where);
    } else {
      const auto& a = this->factors(n.left);
      const auto& b = this->factors(n.right);
      if (f.B12.rows() != a.U.cols() || f.B12.cols() != b.V.cols() ||
          f.B21.rows() != b.U.cols() || f.B21.cols() != a.V.cols())
        throw Error("HbsMatrix: sibling interaction has the wrong size" + where);
      if (i != 0 && (f.U.rows() != a.U.cols() + b.U.cols() ||
                     f.V.rows() != a.V.cols() + b.V.cols()))
        throw Error("HbsMatrix: transfer matrix has the wrong size" + where);
    }
  }
}

Index HbsMatrix::max_rank() const {
  Index k = 0;
  for (const auto& f : factors_) k = std::max({k, f.U.cols(), f.V.cols()});
  return k;
}

Index HbsMatrix::entry_count() const {
  Index n = 0;
  for (const auto& f : factors_)
    n += f.D.size() + f.U.size() + f.V.size() + f.B12.size() + f.B21.size();
  return n;
}

Matrix expand_u(const HbsMatrix& H, int node) {
  const auto& tree = H.tree();
  const auto& top = tree.node(node);
  Matrix out = Matrix::Zero(top.size(), H.row_rank(node));
  // (node, coefficient map from node basis to `node`'s basis)
  std::vector<std::pair<int, Matrix>> stack;
  stack.emplace_back(node, Matrix::Identity(H.row_rank(node), H.row_rank(node)));
  while (!stack.empty()) {
    auto [t, C] = std::move(stack.back());
    stack.pop_back();
    const auto& n = tree.node(t);
    const auto& f = H.factors(t);
    if (n.is_leaf()) {
      out.middleRows(n.begin - top.begin, n.size()) = f.U * C;
      continue;
    }
    const Index ka = H.row_rank(n.left);
    const Index kb = H.row_rank(n.right);
    stack.emplace_back(n.left, f.U.topRows(ka) * C);
    stack.emplace_back(n.right, f.U.bottomRows(kb) * C);
  }
  return out;
}

Matrix expand_v(const HbsMatrix& H, int node) {
  const auto& tree = H.tree();
  const auto& top = tree.node(node);
  Matrix out = Matrix::Zero(top.size(), H.col_rank(node));
  std::vector<std::pair<int, Matrix>> stack;
  stack.emplace_back(node, Matrix::Identity(H.col_rank(node), H.col_rank(node)));
  while (!stack.empty()) {
    auto [t, C] = std::move(stack.back());
    stack.pop_back();
    const auto& n = tree.node(t);
    const auto& f = H.factors(t);
    if (n.is_leaf()) {
      out.middleRows(n.begin - top.begin, n.size()) = f.V * C;
      continue;
    }
    const Index ka = H.col_rank(n.left);
    const Index kb = H.col_rank(n.right);
    stack.emplace_back(n.left, f.V.topRows(ka) * C);
    stack.emplace_back(n.right, f.V.bottomRows(kb) * C);
  }
  return out;
}

Matrix project_v(const HbsMatrix& H, int node, const Matrix& X) {
  const auto& tree = H.tree();
  const auto& n = tree.node(node);
  const auto& f = H.factors(node);
  if (X.rows() != n.size()) throw Error("project_v: row count mismatch");
  if (n.is_leaf()) return f.V.transpose() * X;
  const auto& a = tree.node(n.left);
  Matrix stacked(H.col_rank(n.left) + H.col_rank(n.right), X.cols());
  stacked << project_v(H, n.left, X.topRows(a.size())),
      project_v(H, n.right, X.bottomRows(n.size() - a.size()));
  return f.V.transpose() * stacked;
}

Matrix HbsMatrix::to_dense() const {
  const Index M = rows();
  Matrix out = Matrix::Zero(M, M);
  for (int t = 0; t < tree_.size(); ++t) {
    const auto& n = tree_.node(t);
    const auto& f = factors(t);
    if (n.is_leaf()) {
      out.block(n.begin, n.begin, n.size(), n.size()) = f.D;
      continue;
    }
    const auto& a = tree_.node(n.left);
    const auto& b = tree_.node(n.right);
    const Matrix Ua = expand_u(*this, n.left);
    const Matrix Ub = expand_u(*this, n.right);
    const Matrix Va = expand_v(*this, n.left);
    const Matrix Vb = expand_v(*this, n.right);
    out.block(a.begin, b.begin, a.size(), b.size()) = Ua * f.B12 * Vb.transpose();
    out.block(b.begin, a.begin, b.size(), a.size()) = Ub * f.B21 * Va.transpose();
  }
  return out;
}

namespace {

// Leading r columns of Q from a column-pivoted QR, r = numerical rank at eps.
Matrix column_basis(const Matrix& A, double eps) {
  if (A.rows() == 0) return Matrix(0, 0);
  if (A.cols() == 0) return Matrix(A.rows(), 0);
  Eigen::ColPivHouseholderQR<Matrix> qr(A);
  qr.setThreshold(eps);
  const Index r = qr.rank();
  Matrix Q = qr.householderQ() * Matrix::Identity(A.rows(), r);
  return Q;
}

// Columns of A outside [begin, end).
Matrix complement_columns(const Matrix& A, Index begin, Index end) {
  Matrix out(A.rows(), A.cols() - (end - begin));
  out << A.leftCols(begin), A.rightCols(A.cols() - end);
  return out;
}

}  // namespace

HbsMatrix compress_dense(const Matrix& H, const IndexTree& tree, double eps) {
  const Index M = tree.dimension();
  if (H.rows() != M || H.cols() != M) throw Error("compress_dense: matrix/tree size mismatch");
  const int n = tree.size();
  std::vector<HbsNodeFactors> F(static_cast<std::size_t>(n));
  std::vector<Matrix> Ubig(static_cast<std::size_t>(n)), Vbig(static_cast<std::size_t>(n));
  const Matrix Ht = H.transpose();

  for (int t = n - 1; t >= 0; --t) {
    const auto& nd = tree.node(t);
    auto& f = F[static_cast<std::size_t>(t)];
    const auto ut = static_cast<std::size_t>(t);
    if (nd.is_leaf()) f.D = H.block(nd.begin, nd.begin, nd.size(), nd.size());
    if (!nd.is_leaf()) {
      const auto a = static_cast<std::size_t>(nd.left);
      const auto b = static_cast<std::size_t>(nd.right);
      const auto& na = tree.node(nd.left);
      const auto& nb = tree.node(nd.right);
      f.B12 = Ubig[a].transpose() * H.block(na.begin, nb.begin, na.size(), nb.size()) * Vbig[b];
      f.B21 = Ubig[b].transpose() * H.block(nb.begin, na.begin, nb.size(), na.size()) * Vbig[a];
    }
    if (t == 0) break;

    // Row space of H(I_t, I_t^c) and of H(I_t^c, I_t)^*.
    Matrix rows_u, rows_v;
    if (nd.is_leaf()) {
      rows_u = complement_columns(H.middleRows(nd.begin, nd.size()), nd.begin, nd.end);
      rows_v = complement_columns(Ht.middleRows(nd.begin, nd.size()), nd.begin, nd.end);
    } else {
      const auto a = static_cast<std::size_t>(nd.left);
      const auto b = static_cast<std::size_t>(nd.right);
      const auto& na = tree.node(nd.left);
      const auto& nb = tree.node(nd.right);
      Matrix pu(Ubig[a].cols() + Ubig[b].cols(), M);
      pu << Ubig[a].transpose() * H.middleRows(na.begin, na.size()),
          Ubig[b].transpose() * H.middleRows(nb.begin, nb.size());
      Matrix pv(Vbig[a].cols() + Vbig[b].cols(), M);
      pv << Vbig[a].transpose() * Ht.middleRows(na.begin, na.size()),
          Vbig[b].transpose() * Ht.middleRows(nb.begin, nb.size());
      rows_u = complement_columns(pu, nd.begin, nd.end);
      rows_v = complement_columns(pv, nd.begin, nd.end);
    }
    f.U = column_basis(rows_u, eps);
    f.V = column_basis(rows_v, eps);
    if (nd.is_leaf()) {
      Ubig[ut] = f.U;
      Vbig[ut] = f.V;
    } else {
      const auto a = static_cast<std::size_t>(nd.left);
      const auto b = static_cast<std::size_t>(nd.right);
      const Index ka = Ubig[a].cols(), la = Vbig[a].cols();
      Ubig[ut].resize(nd.size(), f.U.cols());
      Ubig[ut] << Ubig[a] * f.U.topRows(ka), Ubig[b] * f.U.bottomRows(f.U.rows() - ka);
      Vbig[ut].resize(nd.size(), f.V.cols());
      Vbig[ut] << Vbig[a] * f.V.topRows(la), Vbig[b] * f.V.bottomRows(f.V.rows() - la);
      // Children's explicit bases are no longer needed.
      Ubig[a] = Matrix();
      Ubig[b] = Matrix();
      Vbig[a] = Matrix();
      Vbig[b] = Matrix();
    }
  }
  return HbsMatrix(tree, std::move(F));
}

Matrix hbs_apply(const HbsMatrix& H, const Matrix& x) {
  const auto& tree = H.tree();
  if (x.rows() != H.cols()) throw Error("hbs_apply: dimension mismatch");
  const int n = tree.size();
  const Index r = x.cols();
  Matrix y = Matrix::Zero(H.rows(), r);
  if (n == 1) {
    y.noalias() = H.factors(0).D * x;
    return y;
  }
  std::vector<Matrix> xh(static_cast<std::size_t>(n)), yh(static_cast<std::size_t>(n));
  for (int t = n - 1; t >= 1; --t) {
    const auto& nd = tree.node(t);
    const auto& f = H.factors(t);
    if (nd.is_leaf()) {
      xh[static_cast<std::size_t>(t)] = f.V.transpose() * x.middleRows(nd.begin, nd.size());
    } else {
      const auto& xa = xh[static_cast<std::size_t>(nd.left)];
      const auto& xb = xh[static_cast<std::size_t>(nd.right)];
      xh[static_cast<std::size_t>(t)] =
          f.V.topRows(xa.rows()).transpose() * xa + f.V.bottomRows(xb.rows()).transpose() * xb;
    }
  }
  for (int t = 0; t < n; ++t) {
    const auto& nd = tree.node(t);
    const auto& f = H.factors(t);
    if (nd.is_leaf()) {
      auto block = y.middleRows(nd.begin, nd.size());
      block.noalias() = f.D * x.middleRows(nd.begin, nd.size());
      block.noalias() += f.U * yh[static_cast<std::size_t>(t)];
      continue;
    }
    const auto a = static_cast<std::size_t>(nd.left);
    const auto b = static_cast<std::size_t>(nd.right);
    yh[a] = f.B12 * xh[b];
    yh[b] = f.B21 * xh[a];
    if (t != 0) {
      const auto& yt = yh[static_cast<std::size_t>(t)];
      yh[a].noalias() += f.U.topRows(yh[a].rows()) * yt;
      yh[b].noalias() += f.U.bottomRows(yh[b].rows()) * yt;
    }
    xh[a] = Matrix();
    xh[b] = Matrix();
  }
  return y;
}

HbsMatrix subtree(const HbsMatrix& H, int node) {
  const auto& tree = H.tree();
  IndexTree sub = tree.subtree(node);
  std::vector<HbsNodeFactors> F;
  F.reserve(static_cast<std::size_t>(sub.size()));
  // Subtree nodes appear in the same relative order as in the source tree.
  std::vector<bool> inside(static_cast<std::size_t>(tree.size()), false);
  for (int i = node; i < tree.size(); ++i) {
    const int p = tree.node(i).parent;
    if (i == node || (p >= 0 && inside[static_cast<std::size_t>(p)])) {
      inside[static_cast<std::size_t>(i)] = true;
      F.push_back(H.factors(i));
    }
  }
  F.front().U = Matrix();
  F.front().V = Matrix();
  return HbsMatrix(std::move(sub), std::move(F));
}

namespace {

std::vector<int> ancestors(const IndexTree& tree, int t) {
  std::vector<int> path;
  for (int c = t; c >= 0; c = tree.node(c).parent) path.push_back(c);
  return path;
}

// Coefficient map from the U-basis of `from` to the U-basis of its ancestor
// `to` (rows: rank of from, cols: rank of to).
Matrix climb(const HbsMatrix& H, int from, int to, bool row_side) {
  const auto& tree = H.tree();
  auto rank = [&](int t) { return row_side ? H.row_rank(t) : H.col_rank(t); };
  Matrix X = Matrix::Identity(rank(from), rank(from));
  for (int c = from; c != to; c = tree.node(c).parent) {
    const int p = tree.node(c).parent;
    const Matrix& T = row_side ? H.factors(p).U : H.factors(p).V;
    const bool left = tree.node(p).left == c;
    X = left ? Matrix(X * T.topRows(rank(c))) : Matrix(X * T.bottomRows(rank(c)));
  }
  return X;
}

}  // namespace

Matrix coupling(const HbsMatrix& H, int f, int g) {
  const auto& tree = H.tree();
  const auto pf = ancestors(tree, f);
  const auto pg = ancestors(tree, g);
  // Walk down from the root while the paths agree.
  auto itf = pf.rbegin();
  auto itg = pg.rbegin();
  int lca = -1;
  while (itf != pf.rend() && itg != pg.rend() && *itf == *itg) {
    lca = *itf;
    ++itf;
    ++itg;
  }
  if (itf == pf.rend() || itg == pg.rend()) throw Error("coupling: nodes are nested");
  const int a = *itf;
  const int b = *itg;
  const auto& fl = H.factors(lca);
  const Matrix& B = tree.node(lca).left == a ? fl.B12 : fl.B21;
  return climb(H, f, a, true) * B * climb(H, g, b, false).transpose();
}

HbsMatrix compose_block_diagonal(std::span<const HbsPiece> pieces, const HbsLayout& layout) {
  if (pieces.empty()) throw Error("compose_block_diagonal: no pieces");
  for (const auto& p : pieces)
    if (p.source == nullptr) throw Error("compose_block_diagonal: null source");

  if (layout.children.empty()) {
    const auto& p = pieces[static_cast<std::size_t>(layout.piece)];
    return subtree(*p.source, p.node);
  }

  struct Slot {
    const HbsLayout* layout;
    int parent;
    int level;
  };
  std::vector<IndexTree::Node> nodes;
  std::vector<HbsNodeFactors> F;
  std::vector<const HbsLayout*> slot_layout;
  // Pieces covered by each group node, in layout order.
  std::vector<std::vector<int>> members;

  std::deque<Slot> queue{{&layout, -1, 0}};
  while (!queue.empty()) {
    Slot s = queue.front();
    queue.pop_front();
    const int id = static_cast<int>(nodes.size());
    nodes.push_back({0, 0, s.parent, -1, -1, s.level});
    F.emplace_back();
    slot_layout.push_back(s.layout);
    members.emplace_back();
    if (s.parent >= 0) {
      auto& pn = nodes[static_cast<std::size_t>(s.parent)];
      (pn.left < 0 ? pn.left : pn.right) = id;
    }
    if (s.layout->children.size() == 2) {
      queue.push_back({&s.layout->children[0], id, s.level + 1});
      queue.push_back({&s.layout->children[1], id, s.level + 1});
    } else if (!s.layout->children.empty()) {
      throw Error("compose_block_diagonal: layout nodes need zero or two children");
    }
  }
  const int groups = static_cast<int>(nodes.size());

  // In-order offsets and membership.
  Index offset = 0;
  std::vector<int> piece_slot(pieces.size(), -1);
  auto assign = [&](auto&& self, int id) -> void {
    auto& nd = nodes[static_cast<std::size_t>(id)];
    const HbsLayout* l = slot_layout[static_cast<std::size_t>(id)];
    nd.begin = offset;
    if (l->children.empty()) {
      const auto& p = pieces[static_cast<std::size_t>(l->piece)];
      offset += p.source->tree().node(p.node).size();
      members[static_cast<std::size_t>(id)] = {l->piece};
      piece_slot[static_cast<std::size_t>(l->piece)] = id;
    } else {
      const int a = nd.left, b = nd.right;
      self(self, a);
      self(self, b);
      auto& m = members[static_cast<std::size_t>(id)];
      m = members[static_cast<std::size_t>(a)];
      const auto& mb = members[static_cast<std::size_t>(b)];
      m.insert(m.end(), mb.begin(), mb.end());
    }
    nodes[static_cast<std::size_t>(id)].end = offset;
  };
  assign(assign, 0);

  // Append each piece's subtree below its slot.
  for (std::size_t k = 0; k < pieces.size(); ++k) {
    const int slot = piece_slot[k];
    if (slot < 0) continue;
    const auto& p = pieces[k];
    const auto& src = p.source->tree();
    const Index shift = nodes[static_cast<std::size_t>(slot)].begin - src.node(p.node).begin;
    const int level_shift = nodes[static_cast<std::size_t>(slot)].level - src.node(p.node).level;
    std::vector<int> map(static_cast<std::size_t>(src.size()), -1);
    map[static_cast<std::size_t>(p.node)] = slot;
    F[static_cast<std::size_t>(slot)] = p.source->factors(p.node);
    for (int i = p.node + 1; i < src.size(); ++i) {
      const int par = src.node(i).parent;
      if (par < 0 || map[static_cast<std::size_t>(par)] < 0) continue;
      const int id = static_cast<int>(nodes.size());
      map[static_cast<std::size_t>(i)] = id;
      auto nd = src.node(i);
      nd.begin += shift;
      nd.end += shift;
      nd.level += level_shift;
      nd.parent = map[static_cast<std::size_t>(par)];
      nd.left = nd.right = -1;
      nodes.push_back(nd);
      F.push_back(p.source->factors(i));
      auto& pn = nodes[static_cast<std::size_t>(nd.parent)];
      (src.node(par).left == i ? pn.left : pn.right) = id;
    }
  }

  auto rank_u = [&](int id) { return F[static_cast<std::size_t>(id)].U.cols(); };
  auto rank_v = [&](int id) { return F[static_cast<std::size_t>(id)].V.cols(); };
  auto piece_rank_u = [&](int k) { return rank_u(piece_slot[static_cast<std::size_t>(k)]); };
  auto piece_rank_v = [&](int k) { return rank_v(piece_slot[static_cast<std::size_t>(k)]); };

  auto interaction = [&](const std::vector<int>& rows, const std::vector<int>& cols) {
    Index m = 0, n = 0;
    for (int k : rows) m += piece_rank_u(k);
    for (int k : cols) n += piece_rank_v(k);
    Matrix B = Matrix::Zero(m, n);
    Index r0 = 0;
    for (int f : rows) {
      Index c0 = 0;
      for (int g : cols) {
        const auto& pf = pieces[static_cast<std::size_t>(f)];
        const auto& pg = pieces[static_cast<std::size_t>(g)];
        if (pf.source == pg.source && piece_rank_u(f) > 0 && piece_rank_v(g) > 0)
          B.block(r0, c0, piece_rank_u(f), piece_rank_v(g)) =
              coupling(*pf.source, pf.node, pg.node);
        c0 += piece_rank_v(g);
      }
      r0 += piece_rank_u(f);
    }
    return B;
  };

  // Group factors bottom-up (group ids are BFS ordered, so reverse works).
  for (int id = groups - 1; id >= 0; --id) {
    const HbsLayout* l = slot_layout[static_cast<std::size_t>(id)];
    if (l->children.empty()) continue;
    const auto& nd = nodes[static_cast<std::size_t>(id)];
    auto& f = F[static_cast<std::size_t>(id)];
    const auto& ma = members[static_cast<std::size_t>(nd.left)];
    const auto& mb = members[static_cast<std::size_t>(nd.right)];
    f.B12 = interaction(ma, mb);
    f.B21 = interaction(mb, ma);
    const Index ku = rank_u(nd.left) + rank_u(nd.right);
    const Index kv = rank_v(nd.left) + rank_v(nd.right);
    f.U = id == 0 ? Matrix() : Matrix(Matrix::Identity(ku, ku));
    f.V = id == 0 ? Matrix() : Matrix(Matrix::Identity(kv, kv));
  }
  // Renumber breadth-first (by level, then position) so that trees of equal
  // shape get identical node ids regardless of how they were assembled.
  std::vector<int> order(nodes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int x, int y) {
    const auto& nx = nodes[static_cast<std::size_t>(x)];
    const auto& ny = nodes[static_cast<std::size_t>(y)];
    return nx.level != ny.level ? nx.level < ny.level : nx.begin < ny.begin;
  });
  std::vector<int> rank_of(nodes.size());
  for (std::size_t i = 0; i < order.size(); ++i)
    rank_of[static_cast<std::size_t>(order[i])] = static_cast<int>(i);
  auto remap = [&](int id) { return id < 0 ? -1 : rank_of[static_cast<std::size_t>(id)]; };
  std::vector<IndexTree::Node> sorted_nodes;
  std::vector<HbsNodeFactors> sorted_factors;
  sorted_nodes.reserve(nodes.size());
  sorted_factors.reserve(nodes.size());
  for (int id : order) {
    auto nd = nodes[static_cast<std::size_t>(id)];
    nd.parent = remap(nd.parent);
    nd.left = remap(nd.left);
    nd.right = remap(nd.right);
    sorted_nodes.push_back(nd);
    sorted_factors.push_back(std::move(F[static_cast<std::size_t>(id)]));
  }
  return HbsMatrix(IndexTree(std::move(sorted_nodes)), std::move(sorted_factors));
}

}  // namespace hps
