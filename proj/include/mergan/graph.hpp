#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "mergan/tensor.hpp"

namespace mergan {

/// The closed primitive set. Every adjoint rule is written with ops from this
/// same list, so a gradient can itself be differentiated.
enum class Op : std::uint8_t {
  Input,
  MatMul,
  Add,
  Sub,
  Mul,
  Div,
  Scale,
  AddScalar,
  LeakyRelu,
  LeakyReluSlope,  // derivative mask of LeakyRelu; its own derivative is zero
  Tanh,
  Square,
  Sqrt,
  Reshape,
  SumAll,
  BroadcastScalar,
  SumRows,
  BroadcastRows,
  SumCols,
  BroadcastCols,
  ConcatRows,
  SliceRows,
  PadRows,
  GatherRows,
  ScatterAddRows,
  Softmax,
  SoftmaxCrossEntropy,
};

std::string_view op_name(Op op);

class Graph;

/// Handle to a node of a Graph. Cheap to copy; only valid while the graph lives.
class Var {
 public:
  Var() = default;

  bool valid() const noexcept { return graph_ != nullptr; }
  Graph& graph() const { return *graph_; }
  int id() const noexcept { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }

 private:
  friend class Graph;
  Var(Graph* g, int id) : graph_(g), id_(id) {}

  Graph* graph_ = nullptr;
  int id_ = -1;
};

/// Append-only record of evaluated operations. Values are computed eagerly
/// when a node is added, so insertion order is a topological order.
class Graph {
 public:
  struct Options {
    /// Throw NumericalError as soon as a node produces NaN or Inf.
    bool check_finite = false;
  };

  Graph() = default;
  explicit Graph(Options options) : options_(options) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Leaf node. Parameters, data and constants are all inputs; what gets
  /// differentiated is decided by the `wrt` list of gradients().
  Var input(Tensor value);

  /// d(loss)/d(w) for every w in `wrt`, as new nodes of this graph.
  /// The loss must hold exactly one value.
  std::vector<Var> gradients(Var loss, std::span<const Var> wrt);

  std::size_t size() const noexcept { return nodes_.size(); }
  std::size_t count(Op op) const;
  const Tensor& value(int id) const { return nodes_.at(static_cast<std::size_t>(id)).value; }

  // Primitive constructors. Use the free functions below instead.
  Var matmul(Var a, Var b, bool transpose_a, bool transpose_b);
  Var binary(Op op, Var a, Var b);
  Var unary(Op op, Var a, double scalar = 0.0);
  Var reshape(Var a, Shape shape);
  Var broadcast_scalar(Var a, Shape shape);
  Var broadcast_rows(Var a, std::size_t rows);
  Var broadcast_cols(Var a, std::size_t cols);
  Var concat_rows(Var a, Var b);
  Var slice_rows(Var a, std::size_t begin, std::size_t count);
  Var pad_rows(Var a, std::size_t begin, std::size_t total);
  Var gather_rows(Var table, std::shared_ptr<const std::vector<int>> indices);
  Var scatter_add_rows(Var a, std::shared_ptr<const std::vector<int>> indices, std::size_t rows);
  Var softmax_cross_entropy(Var logits, std::shared_ptr<const std::vector<int>> labels);

 private:
  struct Node {
    Op op = Op::Input;
    int in0 = -1;
    int in1 = -1;
    double scalar = 0.0;
    bool flag0 = false;
    bool flag1 = false;
    std::size_t n0 = 0;
    std::size_t n1 = 0;
    std::shared_ptr<const std::vector<int>> indices;
    Tensor value;
  };

  Var push(Node node);
  void check_owned(Var v, std::string_view op) const;
  void adjoint(int id, Var upstream, const std::vector<char>& needs, std::vector<int>& adj);
  void accumulate(std::vector<int>& adj, int target, Var contribution);

  Options options_;
  std::vector<Node> nodes_;
};

// ---- primitive ops -------------------------------------------------------

Var matmul(Var a, Var b, bool transpose_a = false, bool transpose_b = false);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var scale(Var a, double factor);
Var add_scalar(Var a, double offset);
inline Var neg(Var a) { return scale(a, -1.0); }

inline constexpr double kLeakySlope = 0.2;
/// max(x, slope * x). At x == 0 the adjoint uses the right derivative (1).
Var leaky_relu(Var a, double slope = kLeakySlope);
Var relu(Var a);
Var tanh(Var a);
Var square(Var a);
Var sqrt(Var a);
Var reshape(Var a, Shape shape);

Var sum(Var a);  // all elements -> rank-0
Var mean(Var a);
Var broadcast_scalar(Var a, Shape shape);
Var sum_rows(Var a);  // r x c -> 1 x c
Var broadcast_rows(Var a, std::size_t rows);
Var sum_cols(Var a);  // r x c -> r x 1
Var broadcast_cols(Var a, std::size_t cols);

Var concat_rows(Var a, Var b);
Var slice_rows(Var a, std::size_t begin, std::size_t count);
Var pad_rows(Var a, std::size_t begin, std::size_t total);
Var gather_rows(Var table, std::span<const int> indices);
Var scatter_add_rows(Var a, std::span<const int> indices, std::size_t rows);

Var softmax(Var logits);
/// Per-row cross-entropy of softmax(logits) against 0-based class labels, r x 1.
Var softmax_cross_entropy(Var logits, std::span<const int> labels);

/// Same value as `v`, cut off from differentiation.
inline Var detach(Var v) { return v.graph().input(v.value()); }

// ---- composites ----------------------------------------------------------

struct Moments {
  Var mean;      // 1 x c
  Var variance;  // 1 x c, biased (divides by the batch size)
};
/// Mean and variance over the batch (leading) axis.
Moments batch_moments(Var x);
/// Euclidean norm of every row, r x 1.
Var row_l2_norm(Var x);
Var mean_cross_entropy(Var logits, std::span<const int> labels);

namespace testing {

/// Fault injection for the gradient-check suite: every adjoint contribution
/// emitted by `op` is multiplied by `factor`. Pass std::nullopt to clear.
struct AdjointFault {
  Op op;
  double factor;
};
void set_adjoint_fault(std::optional<AdjointFault> fault);

}  // namespace testing

}  // namespace mergan
