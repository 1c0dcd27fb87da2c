#include "clauseforge/autograd.hpp"

#include <cmath>

#include "clauseforge/errors.hpp"

namespace clauseforge::nn {

Var Tape::constant(Matrix value) { return push(std::move(value), false, nullptr); }

Var Tape::param(Parameter& p) {
  Var v = push(p.value, record_, nullptr);
  nodes_[v.id].param = &p;
  return v;
}

Var Tape::push(Matrix value, bool needs_grad, Backward back) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = record_ && needs_grad;
  if (n.needs_grad) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

void Tape::accumulate(Var v, const Matrix& g) {
  auto& node = nodes_[v.id];
  if (!node.needs_grad) return;
  ensure_grad(node);
  node.grad += g;
}

void Tape::backward(Var loss) {
  if (!record_) throw Error("backward on a non-recording tape");
  auto& root = nodes_[loss.id];
  if (root.value.size() != 1) throw Error("backward needs a scalar loss");
  if (!root.needs_grad) return;
  ensure_grad(root);
  root.grad(0, 0) += 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    auto& node = nodes_[i];
    if (node.grad.size() == 0) continue;
    if (node.back) {
      // Move the closure out so it can touch other nodes freely.
      auto back = std::move(node.back);
      back(*this, nodes_[i].grad);
    }
    if (nodes_[i].param) nodes_[i].param->grad += nodes_[i].grad;
  }
}

Var matmul(Tape& t, Var a, Var b) {
  const auto& av = t.value(a);
  const auto& bv = t.value(b);
  if (av.cols() != bv.rows()) throw Error("matmul: shape mismatch");
  Matrix out = av * bv;
  return t.push(std::move(out), t.needs_grad(a) || t.needs_grad(b),
                [a, b](Tape& tape, const Matrix& g) {
                  if (tape.needs_grad(a)) tape.accumulate(a, g * tape.value(b).transpose());
                  if (tape.needs_grad(b)) tape.accumulate(b, tape.value(a).transpose() * g);
                });
}

Var add(Tape& t, Var a, Var b) {
  const auto& av = t.value(a);
  const auto& bv = t.value(b);
  if (av.rows() != bv.rows() || av.cols() != bv.cols()) throw Error("add: shape mismatch");
  return t.push(av + bv, t.needs_grad(a) || t.needs_grad(b), [a, b](Tape& tape, const Matrix& g) {
    tape.accumulate(a, g);
    tape.accumulate(b, g);
  });
}

Var add_row(Tape& t, Var a, Var row) {
  const auto& av = t.value(a);
  const auto& rv = t.value(row);
  if (rv.rows() != 1 || rv.cols() != av.cols()) throw Error("add_row: shape mismatch");
  Matrix out = av.rowwise() + rv.row(0);
  return t.push(std::move(out), t.needs_grad(a) || t.needs_grad(row),
                [a, row](Tape& tape, const Matrix& g) {
                  tape.accumulate(a, g);
                  if (tape.needs_grad(row)) tape.accumulate(row, g.colwise().sum());
                });
}

Var scale(Tape& t, Var a, double s) {
  return t.push(t.value(a) * s, t.needs_grad(a),
                [a, s](Tape& tape, const Matrix& g) { tape.accumulate(a, g * s); });
}

Var gather_rows(Tape& t, Var table, std::span<const std::uint32_t> ids) {
  const auto& tv = t.value(table);
  Matrix out(static_cast<Eigen::Index>(ids.size()), tv.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= tv.rows()) throw Error("gather_rows: id out of range");
    out.row(static_cast<Eigen::Index>(i)) = tv.row(ids[i]);
  }
  std::vector<std::uint32_t> rows(ids.begin(), ids.end());
  return t.push(std::move(out), t.needs_grad(table),
                [table, rows = std::move(rows)](Tape& tape, const Matrix& g) {
                  const auto cols = g.cols();
                  for (std::size_t i = 0; i < rows.size(); ++i) {
                    tape.accumulate_block(table, rows[i], 0,
                                          g.block(static_cast<Eigen::Index>(i), 0, 1, cols));
                  }
                });
}

Var layer_norm(Tape& t, Var x, Var gamma, Var beta, double eps) {
  const auto& xv = t.value(x);
  const auto& gv = t.value(gamma);
  const auto& bv = t.value(beta);
  const auto n = xv.cols();
  Matrix xhat(xv.rows(), n);
  Eigen::VectorXd inv_std(xv.rows());
  for (Eigen::Index r = 0; r < xv.rows(); ++r) {
    const double mean = xv.row(r).mean();
    const double var = (xv.row(r).array() - mean).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (xv.row(r).array() - mean) * inv_std(r);
  }
  Matrix out = (xhat.array().rowwise() * gv.row(0).array()).rowwise() + bv.row(0).array();
  const bool needs = t.needs_grad(x) || t.needs_grad(gamma) || t.needs_grad(beta);
  return t.push(std::move(out), needs,
                [x, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std)](
                    Tape& tape, const Matrix& g) {
                  const auto& gv = tape.value(gamma);
                  if (tape.needs_grad(gamma)) {
                    tape.accumulate(gamma, (g.array() * xhat.array()).colwise().sum().matrix());
                  }
                  if (tape.needs_grad(beta)) tape.accumulate(beta, g.colwise().sum());
                  if (tape.needs_grad(x)) {
                    Matrix dxhat = g.array().rowwise() * gv.row(0).array();
                    Matrix dx(g.rows(), g.cols());
                    for (Eigen::Index r = 0; r < g.rows(); ++r) {
                      const double m1 = dxhat.row(r).mean();
                      const double m2 = (dxhat.row(r).array() * xhat.row(r).array()).mean();
                      dx.row(r) =
                          (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2) * inv_std(r);
                    }
                    tape.accumulate(x, dx);
                  }
                });
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

Var gelu(Tape& t, Var x) {
  constexpr double kC = kGeluC;
  constexpr double kA = kGeluA;
  const auto& xv = t.value(x);
  Matrix th = ((xv.array() + kA * xv.array().cube()) * kC).tanh().matrix();
  Matrix out = (0.5 * xv.array() * (1.0 + th.array())).matrix();
  return t.push(std::move(out), t.needs_grad(x), [x, th = std::move(th)](Tape& tape, const Matrix& g) {
    const auto& xv = tape.value(x);
    const auto inner_d = kGeluC * (1.0 + 3.0 * kGeluA * xv.array().square());
    const auto d = 0.5 * (1.0 + th.array()) + 0.5 * xv.array() * (1.0 - th.array().square()) * inner_d;
    tape.accumulate(x, (g.array() * d).matrix());
  });
}

Var dropout(Tape& t, Var x, double p, std::mt19937_64* rng) {
  if (p <= 0.0 || rng == nullptr) return x;
  if (p >= 1.0) throw Error("dropout probability must be < 1");
  const auto& xv = t.value(x);
  Matrix mask(xv.rows(), xv.cols());
  const double keep_scale = 1.0 / (1.0 - p);
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    const double u = static_cast<double>((*rng)() >> 11) * 0x1.0p-53;
    mask.data()[i] = u < p ? 0.0 : keep_scale;
  }
  Matrix out = (xv.array() * mask.array()).matrix();
  return t.push(std::move(out), t.needs_grad(x), [x, mask = std::move(mask)](Tape& tape, const Matrix& g) {
    tape.accumulate(x, (g.array() * mask.array()).matrix());
  });
}

Var attention(Tape& t, Var q, Var k, Var v, const std::vector<Segment>& segments, int heads,
              bool causal) {
  const auto& qv = t.value(q);
  const auto& kv = t.value(k);
  const auto& vv = t.value(v);
  const auto d = qv.cols();
  if (kv.cols() != d || vv.cols() != d || heads <= 0 || d % heads != 0) {
    throw Error("attention: inconsistent dims");
  }
  const auto dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Matrix out = Matrix::Zero(qv.rows(), d);
  // Attention probabilities per (segment, head), kept for the backward pass.
  std::vector<Matrix> probs;
  if (t.recording()) probs.reserve(segments.size() * static_cast<std::size_t>(heads));
  for (const auto& seg : segments) {
    for (int h = 0; h < heads; ++h) {
      const auto col = h * dh;
      Matrix scores = (qv.block(seg.q_begin, col, seg.q_len, dh) *
                       kv.block(seg.kv_begin, col, seg.kv_len, dh).transpose()) *
                      scale;
      for (Eigen::Index i = 0; i < seg.q_len; ++i) {
        auto row = scores.row(i);
        if (causal) {
          for (Eigen::Index j = i + 1; j < seg.kv_len; ++j) row(j) = -INFINITY;
        }
        const double mx = row.maxCoeff();
        row = (row.array() - mx).exp();
        row /= row.sum();
      }
      out.block(seg.q_begin, col, seg.q_len, dh) =
          scores * vv.block(seg.kv_begin, col, seg.kv_len, dh);
      if (t.recording()) probs.push_back(std::move(scores));
    }
  }
  const bool needs = t.needs_grad(q) || t.needs_grad(k) || t.needs_grad(v);
  return t.push(std::move(out), needs,
                [q, k, v, segments, heads, dh, scale, probs = std::move(probs)](Tape& tape,
                                                                                const Matrix& g) {
                  const auto& qv = tape.value(q);
                  const auto& kv = tape.value(k);
                  const auto& vv = tape.value(v);
                  std::size_t pi = 0;
                  for (const auto& seg : segments) {
                    for (int h = 0; h < heads; ++h, ++pi) {
                      const auto col = h * dh;
                      const auto& p = probs[pi];
                      const auto go = g.block(seg.q_begin, col, seg.q_len, dh);
                      if (tape.needs_grad(v)) {
                        tape.accumulate_block(v, seg.kv_begin, col, (p.transpose() * go).eval());
                      }
                      Matrix dp = go * vv.block(seg.kv_begin, col, seg.kv_len, dh).transpose();
                      Matrix ds = p.array() *
                                  (dp.array().colwise() - (dp.array() * p.array()).rowwise().sum());
                      ds *= scale;
                      if (tape.needs_grad(q)) {
                        tape.accumulate_block(
                            q, seg.q_begin, col,
                            (ds * kv.block(seg.kv_begin, col, seg.kv_len, dh)).eval());
                      }
                      if (tape.needs_grad(k)) {
                        tape.accumulate_block(
                            k, seg.kv_begin, col,
                            (ds.transpose() * qv.block(seg.q_begin, col, seg.q_len, dh)).eval());
                      }
                    }
                  }
                });
}

Matrix log_softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double mx = logits.row(r).maxCoeff();
    const double lse = mx + std::log((logits.row(r).array() - mx).exp().sum());
    out.row(r) = logits.row(r).array() - lse;
  }
  return out;
}

Var cross_entropy(Tape& t, Var logits, std::span<const std::uint32_t> targets,
                  std::uint32_t ignore_id) {
  const auto& lv = t.value(logits);
  if (static_cast<std::size_t>(lv.rows()) != targets.size()) {
    throw Error("cross_entropy: logits rows and targets differ");
  }
  Matrix logp = log_softmax_rows(lv);
  double sum = 0.0;
  std::size_t counted = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] == ignore_id) continue;
    if (targets[i] >= lv.cols()) throw Error("cross_entropy: target id out of range");
    sum -= logp(static_cast<Eigen::Index>(i), targets[i]);
    ++counted;
  }
  Matrix out(1, 1);
  out(0, 0) = counted ? sum / static_cast<double>(counted) : 0.0;
  std::vector<std::uint32_t> tg(targets.begin(), targets.end());
  return t.push(std::move(out), t.needs_grad(logits),
                [logits, tg = std::move(tg), ignore_id, counted, logp = std::move(logp)](
                    Tape& tape, const Matrix& g) {
                  if (counted == 0) return;
                  Matrix d = logp.array().exp();
                  for (std::size_t i = 0; i < tg.size(); ++i) {
                    const auto r = static_cast<Eigen::Index>(i);
                    if (tg[i] == ignore_id) {
                      d.row(r).setZero();
                    } else {
                      d(r, tg[i]) -= 1.0;
                    }
                  }
                  d *= g(0, 0) / static_cast<double>(counted);
                  tape.accumulate(logits, d);
                });
}

}  // namespace clauseforge::nn
