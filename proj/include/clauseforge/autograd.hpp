#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

// Minimal reverse-mode differentiation over row-major double matrices,
// covering the operations a transformer decoder needs.
namespace clauseforge::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  bool decay = true;  // AdamW weight decay applies

  Parameter(std::string n, Matrix v, bool d)
      : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())), decay(d) {}
  std::size_t size() const { return static_cast<std::size_t>(value.size()); }
};

/// Handle to a value recorded on a Tape.
struct Var {
  std::size_t id = 0;
};

/// One attention block: query rows [q_begin, q_begin+q_len) attend to
/// key/value rows [kv_begin, kv_begin+kv_len).
struct Segment {
  Eigen::Index q_begin = 0;
  Eigen::Index q_len = 0;
  Eigen::Index kv_begin = 0;
  Eigen::Index kv_len = 0;
};

class Tape {
 public:
  /// With recording off, ops compute values only (inference).
  explicit Tape(bool record = true) : record_(record) {}

  Var constant(Matrix value);
  Var param(Parameter& p);

  const Matrix& value(Var v) const { return nodes_[v.id].value; }
  bool recording() const { return record_; }

  /// Seeds d(loss)/d(loss) = 1 for a 1x1 node and accumulates gradients
  /// into every Parameter reached.
  void backward(Var loss);

  // Internal API for ops.
  using Backward = std::function<void(Tape&, const Matrix& grad_out)>;
  Var push(Matrix value, bool needs_grad, Backward back);
  void accumulate(Var v, const Matrix& g);
  template <typename Expr>
  void accumulate_block(Var v, Eigen::Index r, Eigen::Index c, const Expr& g) {
    auto& node = nodes_[v.id];
    if (!node.needs_grad) return;
    ensure_grad(node);
    node.grad.block(r, c, g.rows(), g.cols()) += g;
  }
  bool needs_grad(Var v) const { return nodes_[v.id].needs_grad; }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward back;
    Parameter* param = nullptr;
    bool needs_grad = false;
  };
  static void ensure_grad(Node& n) {
    if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  }

  bool record_;
  std::vector<Node> nodes_;
};

Var matmul(Tape& t, Var a, Var b);
Var add(Tape& t, Var a, Var b);
/// Adds a 1 x cols row to every row of `a`.
Var add_row(Tape& t, Var a, Var row);
Var scale(Tape& t, Var a, double s);
/// Rows of `table` selected by `ids`.
Var gather_rows(Tape& t, Var table, std::span<const std::uint32_t> ids);
Var layer_norm(Tape& t, Var x, Var gamma, Var beta, double eps = 1e-5);
/// tanh approximation of GELU.
Var gelu(Tape& t, Var x);
/// Inverted dropout; identity when p == 0 or rng is null.
Var dropout(Tape& t, Var x, double p, std::mt19937_64* rng);
/// Multi-head scaled dot-product attention over packed sequences.
Var attention(Tape& t, Var q, Var k, Var v, const std::vector<Segment>& segments, int heads,
              bool causal);
/// Mean negative log-likelihood over rows whose target != ignore_id. Returns
/// a 1x1 node; zero when every row is ignored.
Var cross_entropy(Tape& t, Var logits, std::span<const std::uint32_t> targets,
                  std::uint32_t ignore_id);

/// Numerically stable row-wise log-softmax.
Matrix log_softmax_rows(const Matrix& logits);

}  // namespace clauseforge::nn
