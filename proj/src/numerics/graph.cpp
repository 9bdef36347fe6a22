#include "mergan/graph.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

namespace mergan {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

ConstMap as_matrix(const Tensor& t) {
  return ConstMap(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}
MutMap as_matrix(Tensor& t) {
  return MutMap(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

std::optional<testing::AdjointFault> g_fault;

Shape with_rows(const Shape& s, std::size_t rows) {
  Shape out = s.empty() ? Shape{1} : s;
  out[0] = rows;
  return out;
}

}  // namespace

void testing::set_adjoint_fault(std::optional<AdjointFault> fault) { g_fault = fault; }

std::string_view op_name(Op op) {
  switch (op) {
    case Op::Input: return "input";
    case Op::MatMul: return "matmul";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Div: return "div";
    case Op::Scale: return "scale";
    case Op::AddScalar: return "add_scalar";
    case Op::LeakyRelu: return "leaky_relu";
    case Op::LeakyReluSlope: return "leaky_relu_slope";
    case Op::Tanh: return "tanh";
    case Op::Square: return "square";
    case Op::Sqrt: return "sqrt";
    case Op::Reshape: return "reshape";
    case Op::SumAll: return "sum";
    case Op::BroadcastScalar: return "broadcast_scalar";
    case Op::SumRows: return "sum_rows";
    case Op::BroadcastRows: return "broadcast_rows";
    case Op::SumCols: return "sum_cols";
    case Op::BroadcastCols: return "broadcast_cols";
    case Op::ConcatRows: return "concat_rows";
    case Op::SliceRows: return "slice_rows";
    case Op::PadRows: return "pad_rows";
    case Op::GatherRows: return "gather_rows";
    case Op::ScatterAddRows: return "scatter_add_rows";
    case Op::Softmax: return "softmax";
    case Op::SoftmaxCrossEntropy: return "softmax_cross_entropy";
  }
  return "unknown";
}

const Tensor& Var::value() const { return graph_->value(id_); }

std::size_t Graph::count(Op op) const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [op](const Node& n) { return n.op == op; }));
}

Var Graph::push(Node node) {
  if (options_.check_finite && !node.value.all_finite()) {
    throw NumericalError(std::string("non-finite value produced by ") + std::string(op_name(node.op)));
  }
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

void Graph::check_owned(Var v, std::string_view op) const {
  if (v.graph_ != this || v.id_ < 0 || static_cast<std::size_t>(v.id_) >= nodes_.size()) {
    throw std::invalid_argument(std::string(op) + ": operand does not belong to this graph");
  }
}

Var Graph::input(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Graph::matmul(Var a, Var b, bool ta, bool tb) {
  check_owned(a, "matmul");
  check_owned(b, "matmul");
  const Tensor& av = value(a.id());
  const Tensor& bv = value(b.id());
  const std::size_t ar = ta ? av.cols() : av.rows();
  const std::size_t ac = ta ? av.rows() : av.cols();
  const std::size_t br = tb ? bv.cols() : bv.rows();
  const std::size_t bc = tb ? bv.rows() : bv.cols();
  if (ac != br) throw ShapeError("matmul", av.shape(), bv.shape());
  Node n;
  n.op = Op::MatMul;
  n.in0 = a.id();
  n.in1 = b.id();
  n.flag0 = ta;
  n.flag1 = tb;
  n.value = Tensor(Shape{ar, bc});
  auto out = as_matrix(n.value);
  const auto am = as_matrix(av);
  const auto bm = as_matrix(bv);
  if (!ta && !tb) out.noalias() = am * bm;
  else if (!ta && tb) out.noalias() = am * bm.transpose();
  else if (ta && !tb) out.noalias() = am.transpose() * bm;
  else out.noalias() = am.transpose() * bm.transpose();
  return push(std::move(n));
}

Var Graph::binary(Op op, Var a, Var b) {
  check_owned(a, op_name(op));
  check_owned(b, op_name(op));
  const Tensor& av = value(a.id());
  const Tensor& bv = value(b.id());
  if (av.shape() != bv.shape()) throw ShapeError(std::string(op_name(op)), av.shape(), bv.shape());
  Node n;
  n.op = op;
  n.in0 = a.id();
  n.in1 = b.id();
  n.value = Tensor(av.shape());
  double* o = n.value.data();
  const double* x = av.data();
  const double* y = bv.data();
  const std::size_t size = av.size();
  switch (op) {
    case Op::Add: for (std::size_t i = 0; i < size; ++i) o[i] = x[i] + y[i]; break;
    case Op::Sub: for (std::size_t i = 0; i < size; ++i) o[i] = x[i] - y[i]; break;
    case Op::Mul: for (std::size_t i = 0; i < size; ++i) o[i] = x[i] * y[i]; break;
    case Op::Div: for (std::size_t i = 0; i < size; ++i) o[i] = x[i] / y[i]; break;
    default: throw std::logic_error("binary: not a binary op");
  }
  return push(std::move(n));
}

Var Graph::unary(Op op, Var a, double scalar) {
  check_owned(a, op_name(op));
  const Tensor& av = value(a.id());
  Node n;
  n.op = op;
  n.in0 = a.id();
  n.scalar = scalar;
  const double* x = av.data();
  const std::size_t size = av.size();
  switch (op) {
    case Op::Scale:
    case Op::AddScalar:
    case Op::LeakyRelu:
    case Op::LeakyReluSlope:
    case Op::Tanh:
    case Op::Square:
    case Op::Sqrt: {
      n.value = Tensor(av.shape());
      double* o = n.value.data();
      for (std::size_t i = 0; i < size; ++i) {
        const double v = x[i];
        switch (op) {
          case Op::Scale: o[i] = v * scalar; break;
          case Op::AddScalar: o[i] = v + scalar; break;
          case Op::LeakyRelu: o[i] = v >= 0.0 ? v : scalar * v; break;
          case Op::LeakyReluSlope: o[i] = v >= 0.0 ? 1.0 : scalar; break;
          case Op::Tanh: o[i] = std::tanh(v); break;
          case Op::Square: o[i] = v * v; break;
          default: o[i] = std::sqrt(v); break;
        }
      }
      break;
    }
    case Op::SumAll: {
      double s = 0.0;
      for (std::size_t i = 0; i < size; ++i) s += x[i];
      n.value = Tensor::scalar(s);
      break;
    }
    case Op::SumRows: {
      // Plain loops: Eigen's vectorized reductions peel by pointer alignment,
      // which would make the summation order depend on the allocator.
      const std::size_t r = av.rows(), c = av.cols();
      n.value = Tensor(Shape{1, c});
      double* o = n.value.data();
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) o[j] += x[i * c + j];
      break;
    }
    case Op::SumCols: {
      const std::size_t r = av.rows(), c = av.cols();
      n.value = Tensor(Shape{r, 1});
      for (std::size_t i = 0; i < r; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < c; ++j) s += x[i * c + j];
        n.value[i] = s;
      }
      break;
    }
    case Op::Softmax: {
      n.value = Tensor(Shape{av.rows(), av.cols()});
      const std::size_t r = av.rows(), c = av.cols();
      double* o = n.value.data();
      for (std::size_t i = 0; i < r; ++i) {
        const double* row = x + i * c;
        const double m = *std::max_element(row, row + c);
        double z = 0.0;
        for (std::size_t j = 0; j < c; ++j) z += (o[i * c + j] = std::exp(row[j] - m));
        for (std::size_t j = 0; j < c; ++j) o[i * c + j] /= z;
      }
      break;
    }
    default: throw std::logic_error("unary: not a unary op");
  }
  return push(std::move(n));
}

Var Graph::reshape(Var a, Shape shape) {
  check_owned(a, "reshape");
  Node n;
  n.op = Op::Reshape;
  n.in0 = a.id();
  n.value = value(a.id()).reshaped(std::move(shape));
  return push(std::move(n));
}

Var Graph::broadcast_scalar(Var a, Shape shape) {
  check_owned(a, "broadcast_scalar");
  const Tensor& av = value(a.id());
  if (av.size() != 1) throw ShapeError("broadcast_scalar", av.shape(), shape);
  Node n;
  n.op = Op::BroadcastScalar;
  n.in0 = a.id();
  n.value = Tensor(std::move(shape), av[0]);
  return push(std::move(n));
}

Var Graph::broadcast_rows(Var a, std::size_t rows) {
  check_owned(a, "broadcast_rows");
  const Tensor& av = value(a.id());
  if (av.rows() != 1) throw ShapeError("broadcast_rows", av.shape(), Shape{rows, av.cols()});
  Node n;
  n.op = Op::BroadcastRows;
  n.in0 = a.id();
  n.n0 = rows;
  n.value = Tensor(Shape{rows, av.cols()});
  as_matrix(n.value).rowwise() = as_matrix(av).row(0);
  return push(std::move(n));
}

Var Graph::broadcast_cols(Var a, std::size_t cols) {
  check_owned(a, "broadcast_cols");
  const Tensor& av = value(a.id());
  if (av.cols() != 1) throw ShapeError("broadcast_cols", av.shape(), Shape{av.rows(), cols});
  Node n;
  n.op = Op::BroadcastCols;
  n.in0 = a.id();
  n.n0 = cols;
  n.value = Tensor(Shape{av.rows(), cols});
  as_matrix(n.value).colwise() = as_matrix(av).col(0);
  return push(std::move(n));
}

Var Graph::concat_rows(Var a, Var b) {
  check_owned(a, "concat_rows");
  check_owned(b, "concat_rows");
  Node n;
  n.op = Op::ConcatRows;
  n.in0 = a.id();
  n.in1 = b.id();
  const Tensor parts[] = {value(a.id()), value(b.id())};
  n.value = mergan::concat_rows(parts);
  return push(std::move(n));
}

Var Graph::slice_rows(Var a, std::size_t begin, std::size_t count) {
  check_owned(a, "slice_rows");
  Node n;
  n.op = Op::SliceRows;
  n.in0 = a.id();
  n.n0 = begin;
  n.n1 = count;
  n.value = value(a.id()).rows_slice(begin, count);
  return push(std::move(n));
}

Var Graph::pad_rows(Var a, std::size_t begin, std::size_t total) {
  check_owned(a, "pad_rows");
  const Tensor& av = value(a.id());
  if (begin + av.rows() > total) {
    throw ShapeError("pad_rows", av.shape(), with_rows(av.shape(), total));
  }
  Node n;
  n.op = Op::PadRows;
  n.in0 = a.id();
  n.n0 = begin;
  n.n1 = total;
  n.value = Tensor(with_rows(av.shape(), total));
  std::copy(av.data(), av.data() + av.size(), n.value.data() + begin * av.cols());
  return push(std::move(n));
}

Var Graph::gather_rows(Var table, std::shared_ptr<const std::vector<int>> indices) {
  check_owned(table, "gather_rows");
  const Tensor& tv = value(table.id());
  const std::size_t c = tv.cols();
  Node n;
  n.op = Op::GatherRows;
  n.in0 = table.id();
  n.value = Tensor(Shape{indices->size(), c});
  for (std::size_t i = 0; i < indices->size(); ++i) {
    const int row = (*indices)[i];
    if (row < 0 || static_cast<std::size_t>(row) >= tv.rows()) {
      throw std::out_of_range("gather_rows: index " + std::to_string(row) + " outside table of " +
                              std::to_string(tv.rows()) + " rows");
    }
    std::copy(tv.data() + static_cast<std::size_t>(row) * c,
              tv.data() + static_cast<std::size_t>(row + 1) * c, n.value.data() + i * c);
  }
  n.indices = std::move(indices);
  return push(std::move(n));
}

Var Graph::scatter_add_rows(Var a, std::shared_ptr<const std::vector<int>> indices, std::size_t rows) {
  check_owned(a, "scatter_add_rows");
  const Tensor& av = value(a.id());
  if (av.rows() != indices->size()) {
    throw ShapeError("scatter_add_rows: " + std::to_string(indices->size()) + " indices for " +
                     to_string(av.shape()));
  }
  const std::size_t c = av.cols();
  Node n;
  n.op = Op::ScatterAddRows;
  n.in0 = a.id();
  n.n0 = rows;
  n.value = Tensor(Shape{rows, c});
  for (std::size_t i = 0; i < indices->size(); ++i) {
    const int row = (*indices)[i];
    if (row < 0 || static_cast<std::size_t>(row) >= rows) {
      throw std::out_of_range("scatter_add_rows: index " + std::to_string(row));
    }
    double* dst = n.value.data() + static_cast<std::size_t>(row) * c;
    const double* src = av.data() + i * c;
    for (std::size_t j = 0; j < c; ++j) dst[j] += src[j];
  }
  n.indices = std::move(indices);
  return push(std::move(n));
}

Var Graph::softmax_cross_entropy(Var logits, std::shared_ptr<const std::vector<int>> labels) {
  check_owned(logits, "softmax_cross_entropy");
  const Tensor& lv = value(logits.id());
  const std::size_t r = lv.rows(), c = lv.cols();
  if (labels->size() != r) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels->size()) + " labels for logits " +
                     to_string(lv.shape()));
  }
  Node n;
  n.op = Op::SoftmaxCrossEntropy;
  n.in0 = logits.id();
  n.value = Tensor(Shape{r, 1});
  for (std::size_t i = 0; i < r; ++i) {
    const int label = (*labels)[i];
    if (label < 0 || static_cast<std::size_t>(label) >= c) {
      throw std::out_of_range("softmax_cross_entropy: label " + std::to_string(label) + " with " +
                              std::to_string(c) + " classes");
    }
    const double* row = lv.data() + i * c;
    const double m = *std::max_element(row, row + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(row[j] - m);
    n.value[i] = std::log(z) + m - row[label];
  }
  n.indices = std::move(labels);
  return push(std::move(n));
}

// ---- reverse mode ----------------------------------------------------------

void Graph::accumulate(std::vector<int>& adj, int target, Var contribution) {
  const Shape& want = value(target).shape();
  if (contribution.shape() != want) contribution = reshape(contribution, want);
  int& slot = adj[static_cast<std::size_t>(target)];
  slot = slot < 0 ? contribution.id() : binary(Op::Add, Var(this, slot), contribution).id();
}

void Graph::adjoint(int id, Var g, const std::vector<char>& needs, std::vector<int>& adj) {
  // Copy what we need: pushing nodes may reallocate nodes_.
  const Node node = [&] {
    const Node& ref = nodes_[static_cast<std::size_t>(id)];
    Node copy;
    copy.op = ref.op;
    copy.in0 = ref.in0;
    copy.in1 = ref.in1;
    copy.scalar = ref.scalar;
    copy.flag0 = ref.flag0;
    copy.flag1 = ref.flag1;
    copy.n0 = ref.n0;
    copy.n1 = ref.n1;
    copy.indices = ref.indices;
    return copy;
  }();
  const Var self(this, id);
  const Var a(this, node.in0);
  const Var b(this, node.in1);
  const bool need_a = node.in0 >= 0 && needs[static_cast<std::size_t>(node.in0)];
  const bool need_b = node.in1 >= 0 && needs[static_cast<std::size_t>(node.in1)];

  auto emit = [&](int target, Var contribution) {
    if (g_fault && g_fault->op == node.op) contribution = scale(contribution, g_fault->factor);
    accumulate(adj, target, contribution);
  };

  switch (node.op) {
    case Op::Input:
    case Op::LeakyReluSlope:
      return;
    case Op::MatMul: {
      const bool ta = node.flag0, tb = node.flag1;
      if (need_a) {
        Var da;
        if (!ta && !tb) da = matmul(g, b, false, true);
        else if (!ta && tb) da = matmul(g, b, false, false);
        else if (ta && !tb) da = matmul(b, g, false, true);
        else da = matmul(b, g, true, true);
        emit(node.in0, da);
      }
      if (need_b) {
        Var db;
        if (!ta && !tb) db = matmul(a, g, true, false);
        else if (!ta && tb) db = matmul(g, a, true, false);
        else if (ta && !tb) db = matmul(a, g, false, false);
        else db = matmul(g, a, true, true);
        emit(node.in1, db);
      }
      return;
    }
    case Op::Add:
      if (need_a) emit(node.in0, g);
      if (need_b) emit(node.in1, g);
      return;
    case Op::Sub:
      if (need_a) emit(node.in0, g);
      if (need_b) emit(node.in1, neg(g));
      return;
    case Op::Mul:
      if (need_a) emit(node.in0, mul(g, b));
      if (need_b) emit(node.in1, mul(g, a));
      return;
    case Op::Div:
      if (need_a) emit(node.in0, div(g, b));
      if (need_b) emit(node.in1, neg(div(mul(g, self), b)));
      return;
    case Op::Scale:
      if (need_a) emit(node.in0, scale(g, node.scalar));
      return;
    case Op::AddScalar:
      if (need_a) emit(node.in0, g);
      return;
    case Op::LeakyRelu:
      if (need_a) emit(node.in0, mul(g, unary(Op::LeakyReluSlope, a, node.scalar)));
      return;
    case Op::Tanh:
      if (need_a) emit(node.in0, sub(g, mul(mul(g, self), self)));
      return;
    case Op::Square:
      if (need_a) emit(node.in0, mul(g, scale(a, 2.0)));
      return;
    case Op::Sqrt:
      if (need_a) emit(node.in0, div(scale(g, 0.5), self));
      return;
    case Op::Reshape:
      if (need_a) emit(node.in0, g);  // accumulate() restores the input shape
      return;
    case Op::SumAll:
      if (need_a) emit(node.in0, broadcast_scalar(g, value(node.in0).shape()));
      return;
    case Op::BroadcastScalar:
      if (need_a) emit(node.in0, sum(g));
      return;
    case Op::SumRows:
      if (need_a) emit(node.in0, broadcast_rows(g, value(node.in0).rows()));
      return;
    case Op::BroadcastRows:
      if (need_a) emit(node.in0, sum_rows(g));
      return;
    case Op::SumCols:
      if (need_a) emit(node.in0, broadcast_cols(g, value(node.in0).cols()));
      return;
    case Op::BroadcastCols:
      if (need_a) emit(node.in0, sum_cols(g));
      return;
    case Op::ConcatRows: {
      const std::size_t ra = value(node.in0).rows();
      const std::size_t rb = value(node.in1).rows();
      if (need_a) emit(node.in0, slice_rows(g, 0, ra));
      if (need_b) emit(node.in1, slice_rows(g, ra, rb));
      return;
    }
    case Op::SliceRows:
      if (need_a) emit(node.in0, pad_rows(g, node.n0, value(node.in0).rows()));
      return;
    case Op::PadRows:
      if (need_a) emit(node.in0, slice_rows(g, node.n0, value(node.in0).rows()));
      return;
    case Op::GatherRows:
      if (need_a) emit(node.in0, scatter_add_rows(g, node.indices, value(node.in0).rows()));
      return;
    case Op::ScatterAddRows:
      if (need_a) emit(node.in0, gather_rows(g, node.indices));
      return;
    case Op::Softmax:
      if (need_a) {
        const std::size_t c = value(id).cols();
        emit(node.in0, mul(self, sub(g, broadcast_cols(sum_cols(mul(g, self)), c))));
      }
      return;
    case Op::SoftmaxCrossEntropy:
      if (need_a) {
        const std::size_t rows = value(node.in0).rows();
        const std::size_t classes = value(node.in0).cols();
        Tensor one_hot(Shape{rows, classes});
        for (std::size_t i = 0; i < rows; ++i) {
          one_hot.at(i, static_cast<std::size_t>((*node.indices)[i])) = 1.0;
        }
        const Var probs = unary(Op::Softmax, a);
        emit(node.in0, mul(broadcast_cols(g, classes), sub(probs, input(std::move(one_hot)))));
      }
      return;
  }
}

std::vector<Var> Graph::gradients(Var loss, std::span<const Var> wrt) {
  check_owned(loss, "gradients");
  if (loss.value().size() != 1) {
    throw ShapeError("gradients: loss must be scalar, got shape " + to_string(loss.shape()));
  }
  const std::size_t end = static_cast<std::size_t>(loss.id()) + 1;
  std::vector<char> is_wrt(nodes_.size(), 0);
  for (Var w : wrt) {
    check_owned(w, "gradients (wrt)");
    is_wrt[static_cast<std::size_t>(w.id())] = 1;
  }

  // needs[i]: node i depends on some wrt node through a differentiable path.
  std::vector<char> needs(end, 0);
  for (std::size_t i = 0; i < end; ++i) {
    const Node& n = nodes_[i];
    if (is_wrt[i]) {
      needs[i] = 1;
    } else if (n.op != Op::Input && n.op != Op::LeakyReluSlope) {
      needs[i] = (n.in0 >= 0 && needs[static_cast<std::size_t>(n.in0)]) ||
                 (n.in1 >= 0 && needs[static_cast<std::size_t>(n.in1)]);
    }
  }

  std::vector<int> adj(end, -1);
  if (needs[end - 1]) {
    adj[end - 1] = input(Tensor(loss.shape(), 1.0)).id();
  }
  for (std::size_t i = end; i-- > 0;) {
    if (adj[i] < 0 || !needs[i]) continue;
    adjoint(static_cast<int>(i), Var(this, adj[i]), needs, adj);
  }

  std::vector<Var> out;
  out.reserve(wrt.size());
  for (Var w : wrt) {
    const std::size_t id = static_cast<std::size_t>(w.id());
    if (id < end && adj[id] >= 0) {
      out.push_back(Var(this, adj[id]));
    } else {
      out.push_back(input(Tensor(w.shape(), 0.0)));
    }
  }
  return out;
}

// ---- free functions --------------------------------------------------------

Var matmul(Var a, Var b, bool ta, bool tb) { return a.graph().matmul(a, b, ta, tb); }
Var add(Var a, Var b) { return a.graph().binary(Op::Add, a, b); }
Var sub(Var a, Var b) { return a.graph().binary(Op::Sub, a, b); }
Var mul(Var a, Var b) { return a.graph().binary(Op::Mul, a, b); }
Var div(Var a, Var b) { return a.graph().binary(Op::Div, a, b); }
Var scale(Var a, double factor) { return a.graph().unary(Op::Scale, a, factor); }
Var add_scalar(Var a, double offset) { return a.graph().unary(Op::AddScalar, a, offset); }
Var leaky_relu(Var a, double slope) { return a.graph().unary(Op::LeakyRelu, a, slope); }
Var relu(Var a) { return leaky_relu(a, 0.0); }
Var tanh(Var a) { return a.graph().unary(Op::Tanh, a); }
Var square(Var a) { return a.graph().unary(Op::Square, a); }
Var sqrt(Var a) { return a.graph().unary(Op::Sqrt, a); }
Var reshape(Var a, Shape shape) { return a.graph().reshape(a, std::move(shape)); }
Var sum(Var a) { return a.graph().unary(Op::SumAll, a); }
Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }
Var broadcast_scalar(Var a, Shape shape) { return a.graph().broadcast_scalar(a, std::move(shape)); }
Var sum_rows(Var a) { return a.graph().unary(Op::SumRows, a); }
Var broadcast_rows(Var a, std::size_t rows) { return a.graph().broadcast_rows(a, rows); }
Var sum_cols(Var a) { return a.graph().unary(Op::SumCols, a); }
Var broadcast_cols(Var a, std::size_t cols) { return a.graph().broadcast_cols(a, cols); }
Var concat_rows(Var a, Var b) { return a.graph().concat_rows(a, b); }
Var slice_rows(Var a, std::size_t begin, std::size_t count) { return a.graph().slice_rows(a, begin, count); }
Var pad_rows(Var a, std::size_t begin, std::size_t total) { return a.graph().pad_rows(a, begin, total); }

Var gather_rows(Var table, std::span<const int> indices) {
  return table.graph().gather_rows(
      table, std::make_shared<const std::vector<int>>(indices.begin(), indices.end()));
}

Var scatter_add_rows(Var a, std::span<const int> indices, std::size_t rows) {
  return a.graph().scatter_add_rows(
      a, std::make_shared<const std::vector<int>>(indices.begin(), indices.end()), rows);
}

Var softmax(Var logits) { return logits.graph().unary(Op::Softmax, logits); }

Var softmax_cross_entropy(Var logits, std::span<const int> labels) {
  return logits.graph().softmax_cross_entropy(
      logits, std::make_shared<const std::vector<int>>(labels.begin(), labels.end()));
}

Moments batch_moments(Var x) {
  const std::size_t rows = x.value().rows();
  if (rows == 0) throw ShapeError("batch_moments of an empty batch " + to_string(x.shape()));
  const double inv = 1.0 / static_cast<double>(rows);
  Var m = scale(sum_rows(x), inv);
  Var centered = sub(x.value().rank() == 2 ? x : reshape(x, Shape{rows, x.value().cols()}),
                     broadcast_rows(m, rows));
  Var v = scale(sum_rows(square(centered)), inv);
  return {m, v};
}

Var row_l2_norm(Var x) { return sqrt(sum_cols(square(x))); }

Var mean_cross_entropy(Var logits, std::span<const int> labels) {
  return mean(softmax_cross_entropy(logits, labels));
}

}  // namespace mergan
