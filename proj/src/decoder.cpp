#include "clauseforge/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "clauseforge/binary_io.hpp"
#include "clauseforge/errors.hpp"

namespace clauseforge::decoder {

using json = nlohmann::json;
using nn::Matrix;
using nn::Tape;
using nn::Var;

namespace {

class NormalSampler {
 public:
  explicit NormalSampler(std::uint64_t seed) : rng_(seed) {}
  double operator()(double stddev) {
    if (cached_) {
      cached_ = false;
      return spare_ * stddev;
    }
    const double u1 = (static_cast<double>(rng_() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * M_PI * u2);
    cached_ = true;
    return r * std::cos(2.0 * M_PI * u2) * stddev;
  }

 private:
  std::mt19937_64 rng_;
  double spare_ = 0.0;
  bool cached_ = false;
};

constexpr double kInitStd = 0.02;

Matrix sinusoidal_positions(int max_len, int dim) {
  Matrix pe(max_len, dim);
  for (int pos = 0; pos < max_len; ++pos) {
    for (int i = 0; i < dim; ++i) {
      const double rate = std::pow(10000.0, -2.0 * (i / 2) / static_cast<double>(dim));
      pe(pos, i) = (i % 2 == 0) ? std::sin(pos * rate) : std::cos(pos * rate);
    }
  }
  return pe;
}

template <typename T>
void seeded_shuffle(std::vector<T>& items, std::mt19937_64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::uint64_t bound = i;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t r;
    do {
      r = rng();
    } while (r >= limit);
    std::swap(items[i - 1], items[r % bound]);
  }
}

struct Packed {
  std::vector<std::vector<TokenId>> inputs;
  std::vector<std::span<const float>> contexts;
  std::vector<std::uint32_t> targets;
  std::size_t tokens = 0;
};

Packed pack(std::span<const Sequence> batch) {
  Packed p;
  for (const auto& s : batch) {
    std::vector<TokenId> in;
    in.reserve(s.tokens.size() + 1);
    in.push_back(tokenizer::kBos);
    in.insert(in.end(), s.tokens.begin(), s.tokens.end());
    p.inputs.push_back(std::move(in));
    p.contexts.emplace_back(s.context);
    p.targets.insert(p.targets.end(), s.tokens.begin(), s.tokens.end());
    p.targets.push_back(tokenizer::kEos);
  }
  for (auto t : p.targets) p.tokens += t != tokenizer::kPad ? 1 : 0;
  return p;
}

// Token-weighted mean loss over a dataset, no dropout.
double dataset_loss(DecoderModel& model, const std::vector<Sequence>& data, int batch_size) {
  double sum = 0.0;
  std::size_t tokens = 0;
  for (std::size_t start = 0; start < data.size(); start += static_cast<std::size_t>(batch_size)) {
    const auto n = std::min<std::size_t>(static_cast<std::size_t>(batch_size), data.size() - start);
    const std::span<const Sequence> batch(data.data() + start, n);
    const auto packed = pack(batch);
    sum += batch_loss(model, batch) * static_cast<double>(packed.tokens);
    tokens += packed.tokens;
  }
  return tokens ? sum / static_cast<double>(tokens) : 0.0;
}

}  // namespace

void DecoderConfig::validate() const {
  if (layers < 1 || model_dim < 1 || heads < 1 || ffn_dim < 1 || max_len < 1 || context_dim < 1) {
    throw ConfigError("decoder config: sizes must be positive");
  }
  if (model_dim % heads != 0) {
    throw ConfigError("decoder config: model_dim " + std::to_string(model_dim) +
                      " is not divisible by heads " + std::to_string(heads));
  }
  if (vocab_size <= static_cast<int>(tokenizer::kNumSpecials)) {
    throw ConfigError("decoder config: vocab_size must exceed the special tokens");
  }
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("decoder config: dropout in [0, 1)");
}

void TrainConfig::validate() const {
  if (epochs < 1 || batch_size < 1 || grad_accum_steps < 1) {
    throw ConfigError("train config: epochs, batch_size and grad_accum_steps must be >= 1");
  }
  if (!(peak_lr > 0.0)) throw ConfigError("train config: peak_lr must be positive");
  if (warmup_fraction < 0.0 || warmup_fraction > 1.0) {
    throw ConfigError("train config: warmup_fraction in [0, 1]");
  }
}

double learning_rate(const TrainConfig& config, std::int64_t step, std::int64_t total_steps) {
  if (total_steps <= 0) return 0.0;
  const double warmup = config.warmup_fraction * static_cast<double>(total_steps);
  const double s = static_cast<double>(std::clamp<std::int64_t>(step, 0, total_steps));
  if (warmup > 0.0 && s <= warmup) return config.peak_lr * s / warmup;
  const double rest = static_cast<double>(total_steps) - warmup;
  if (rest <= 0.0) return 0.0;
  return config.peak_lr * (static_cast<double>(total_steps) - s) / rest;
}

DecoderModel::DecoderModel(const DecoderConfig& config) : config_(config) {
  config_.validate();
  const int d = config.model_dim;
  NormalSampler normal(config.seed);
  auto weights = [&](int rows, int cols) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(kInitStd);
    return m;
  };
  auto zeros = [](int cols) { return Matrix::Zero(1, cols); };
  auto ones = [](int cols) { return Matrix::Ones(1, cols); };

  params_.reserve(static_cast<std::size_t>(8 + 26 * config.layers));
  add_param("tok_emb", weights(config.vocab_size, d), true);
  add_param("ctx_proj.w", weights(config.context_dim, d), true);
  add_param("ctx_proj.b", zeros(d), false);
  for (int l = 0; l < config.layers; ++l) {
    const auto p = "layer" + std::to_string(l) + ".";
    for (const char* block : {"self", "cross"}) {
      const auto ln = std::string(block) == "self" ? "ln1" : "ln2";
      add_param(p + ln + ".g", ones(d), false);
      add_param(p + ln + ".b", zeros(d), false);
      for (const char* proj : {"q", "k", "v", "o"}) {
        add_param(p + block + ".w" + proj, weights(d, d), true);
        add_param(p + block + ".b" + proj, zeros(d), false);
      }
    }
    add_param(p + "ln3.g", ones(d), false);
    add_param(p + "ln3.b", zeros(d), false);
    add_param(p + "ffn.w1", weights(d, config.ffn_dim), true);
    add_param(p + "ffn.b1", zeros(config.ffn_dim), false);
    add_param(p + "ffn.w2", weights(config.ffn_dim, d), true);
    add_param(p + "ffn.b2", zeros(d), false);
  }
  add_param("ln_f.g", ones(d), false);
  add_param("ln_f.b", zeros(d), false);
  add_param("out.w", weights(d, config.vocab_size), true);
  add_param("out.b", zeros(config.vocab_size), false);
  positions_ = sinusoidal_positions(config.max_len, d);
}

nn::Parameter& DecoderModel::add_param(std::string name, Matrix value, bool decay) {
  params_.emplace_back(std::move(name), std::move(value), decay);
  return params_.back();
}

nn::Parameter& DecoderModel::parameter(const std::string& name) {
  for (auto& p : params_) {
    if (p.name == name) return p;
  }
  throw Error("no parameter named " + name);
}

std::size_t DecoderModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.size();
  return n;
}

std::size_t expected_parameter_count(const DecoderConfig& c) {
  const std::size_t d = static_cast<std::size_t>(c.model_dim);
  const std::size_t v = static_cast<std::size_t>(c.vocab_size);
  const std::size_t f = static_cast<std::size_t>(c.ffn_dim);
  const std::size_t ctx = static_cast<std::size_t>(c.context_dim);
  const std::size_t attention = 4 * (d * d + d);
  const std::size_t ffn = d * f + f + f * d + d;
  const std::size_t norms = 3 * 2 * d;
  const std::size_t per_layer = 2 * attention + ffn + norms;
  return v * d + (ctx * d + d) + static_cast<std::size_t>(c.layers) * per_layer + 2 * d + (d * v + v);
}

nn::Var DecoderModel::forward(Tape& tape, const std::vector<std::vector<TokenId>>& inputs,
                              const std::vector<std::span<const float>>& contexts,
                              std::mt19937_64* dropout_rng) {
  if (inputs.size() != contexts.size() || inputs.empty()) {
    throw Error("forward: need one context per input sequence");
  }
  const int d = config_.model_dim;
  const double p = dropout_rng ? config_.dropout : 0.0;

  std::vector<std::uint32_t> ids;
  Matrix pos_rows;
  std::vector<nn::Segment> self_segments, cross_segments;
  Eigen::Index total = 0;
  for (const auto& s : inputs) total += static_cast<Eigen::Index>(s.size());
  pos_rows.resize(total, d);
  Matrix ctx(static_cast<Eigen::Index>(contexts.size()), config_.context_dim);
  Eigen::Index row = 0;
  for (std::size_t b = 0; b < inputs.size(); ++b) {
    const auto len = static_cast<Eigen::Index>(inputs[b].size());
    if (len == 0 || len > config_.max_len) {
      throw Error("forward: sequence length " + std::to_string(len) + " outside [1, " +
                  std::to_string(config_.max_len) + "]");
    }
    if (contexts[b].size() != static_cast<std::size_t>(config_.context_dim)) {
      throw ConfigError("context dim " + std::to_string(contexts[b].size()) +
                        " does not match decoder context_dim " +
                        std::to_string(config_.context_dim));
    }
    for (auto t : inputs[b]) {
      if (t >= static_cast<TokenId>(config_.vocab_size)) throw Error("forward: token id out of range");
      ids.push_back(t);
    }
    pos_rows.block(row, 0, len, d) = positions_.topRows(len);
    self_segments.push_back({row, len, row, len});
    cross_segments.push_back({row, len, static_cast<Eigen::Index>(b), 1});
    for (int j = 0; j < config_.context_dim; ++j) {
      ctx(static_cast<Eigen::Index>(b), j) = contexts[b][static_cast<std::size_t>(j)];
    }
    row += len;
  }

  std::size_t pi = 0;
  auto next = [&]() { return tape.param(params_[pi++]); };
  auto linear = [&](Var x) {
    Var w = next();
    Var bias = next();
    return nn::add_row(tape, nn::matmul(tape, x, w), bias);
  };

  Var emb = next();
  Var x = nn::gather_rows(tape, emb, ids);
  x = nn::scale(tape, x, std::sqrt(static_cast<double>(d)));
  x = nn::add(tape, x, tape.constant(std::move(pos_rows)));
  x = nn::dropout(tape, x, p, dropout_rng);

  Var memory = linear(tape.constant(std::move(ctx)));

  for (int l = 0; l < config_.layers; ++l) {
    for (int block = 0; block < 2; ++block) {
      Var g = next();
      Var b = next();
      Var h = nn::layer_norm(tape, x, g, b);
      Var q = linear(h);
      Var kv_source = block == 0 ? h : memory;
      Var k = linear(kv_source);
      Var v = linear(kv_source);
      Var a = nn::attention(tape, q, k, v, block == 0 ? self_segments : cross_segments,
                            config_.heads, block == 0);
      Var o = linear(a);
      x = nn::add(tape, x, nn::dropout(tape, o, p, dropout_rng));
    }
    Var g = next();
    Var b = next();
    Var h = nn::layer_norm(tape, x, g, b);
    Var f = nn::gelu(tape, linear(h));
    f = linear(f);
    x = nn::add(tape, x, nn::dropout(tape, f, p, dropout_rng));
  }
  Var g = next();
  Var b = next();
  x = nn::layer_norm(tape, x, g, b);
  return linear(x);
}

Matrix DecoderModel::logits(std::span<const TokenId> input, std::span<const float> context) {
  Tape tape(false);
  const std::vector<std::vector<TokenId>> inputs{{input.begin(), input.end()}};
  const std::vector<std::span<const float>> contexts{context};
  return tape.value(forward(tape, inputs, contexts));
}

void DecoderModel::zero_grad() {
  for (auto& p : params_) p.grad.setZero();
}

void DecoderModel::round_to_float() {
  for (auto& p : params_) {
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      p.value.data()[i] = static_cast<double>(static_cast<float>(p.value.data()[i]));
    }
  }
}

double batch_loss(DecoderModel& model, std::span<const Sequence> batch) {
  Tape tape(false);
  const auto packed = pack(batch);
  Var logits = model.forward(tape, packed.inputs, packed.contexts);
  return tape.value(nn::cross_entropy(tape, logits, packed.targets, tokenizer::kPad))(0, 0);
}

AdamW::AdamW(std::vector<nn::Parameter>& params, const TrainConfig& config)
    : params_(&params), config_(config) {
  for (const auto& p : params) {
    m_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
    v_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
  }
}

void AdamW::step(double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_->size(); ++i) {
    auto& p = (*params_)[i];
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * p.grad;
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * p.grad.cwiseProduct(p.grad);
    if (p.decay && config_.weight_decay > 0.0) p.value *= (1.0 - lr * config_.weight_decay);
    p.value.array() -=
        lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + config_.adam_eps);
  }
}

TrainResult train(DecoderModel& model, std::vector<Sequence> train_set,
                  std::vector<Sequence> valid_set, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  config.validate();
  const auto ctx_dim = static_cast<std::size_t>(model.config().context_dim);
  TrainResult result;
  auto drop_long = [&](std::vector<Sequence>& data) {
    for (const auto& s : data) {
      if (s.context.size() != ctx_dim) {
        throw ConfigError("mixed context dims: example " + s.id + " has " +
                          std::to_string(s.context.size()) + ", decoder expects " +
                          std::to_string(ctx_dim));
      }
    }
    const auto before = data.size();
    std::erase_if(data, [&](const Sequence& s) {
      return static_cast<int>(s.tokens.size()) + 1 > model.config().max_len;
    });
    return before - data.size();
  };
  result.dropped_too_long = drop_long(train_set) + drop_long(valid_set);
  if (train_set.empty()) throw Error("train: no usable training examples");

  const auto bs = static_cast<std::size_t>(config.batch_size);
  const auto accum = static_cast<std::size_t>(config.grad_accum_steps);
  const std::size_t micro_batches = (train_set.size() + bs - 1) / bs;
  const std::size_t steps_per_epoch = (micro_batches + accum - 1) / accum;
  const auto total_steps = static_cast<std::int64_t>(steps_per_epoch) * config.epochs;

  std::mt19937_64 shuffle_rng(config.seed);
  std::mt19937_64 dropout_rng(config.seed ^ 0x5DEECE66DULL);
  AdamW optimizer(model.parameters(), config);

  result.initial_loss = dataset_loss(model, train_set, config.batch_size);
  std::vector<Matrix> best_params;
  std::vector<std::size_t> order(train_set.size());

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    seeded_shuffle(order, shuffle_rng);
    double loss_sum = 0.0;
    std::size_t loss_tokens = 0;
    double last_lr = 0.0;

    for (std::size_t mb = 0; mb < micro_batches; mb += accum) {
      const std::size_t group = std::min(accum, micro_batches - mb);
      model.zero_grad();
      for (std::size_t g = 0; g < group; ++g) {
        const std::size_t start = (mb + g) * bs;
        const std::size_t end = std::min(start + bs, train_set.size());
        std::vector<Sequence> batch;
        batch.reserve(end - start);
        for (std::size_t i = start; i < end; ++i) batch.push_back(train_set[order[i]]);
        const auto packed = pack(batch);

        Tape tape(true);
        Var logits = model.forward(tape, packed.inputs, packed.contexts,
                                   model.config().dropout > 0.0 ? &dropout_rng : nullptr);
        Var loss = nn::cross_entropy(tape, logits, packed.targets, tokenizer::kPad);
        const double value = tape.value(loss)(0, 0);
        if (!std::isfinite(value)) {
          throw Error("non-finite loss at epoch " + std::to_string(epoch) + ", optimizer step " +
                      std::to_string(optimizer.steps() + 1) + ", first example " + batch.front().id);
        }
        loss_sum += value * static_cast<double>(packed.tokens);
        loss_tokens += packed.tokens;
        tape.backward(nn::scale(tape, loss, 1.0 / static_cast<double>(group)));
      }
      last_lr = learning_rate(config, optimizer.steps() + 1, total_steps);
      optimizer.step(last_lr);
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = loss_tokens ? loss_sum / static_cast<double>(loss_tokens) : 0.0;
    log.lr = last_lr;
    if (!valid_set.empty()) {
      log.valid_loss = dataset_loss(model, valid_set, config.batch_size);
      if (!result.best_valid_loss || *log.valid_loss < *result.best_valid_loss) {
        result.best_valid_loss = log.valid_loss;
        result.best_epoch = epoch;
        best_params.clear();
        for (const auto& p : model.parameters()) best_params.push_back(p.value);
      }
    } else {
      result.best_epoch = epoch;
    }
    result.curve.push_back(log);
    if (on_epoch) on_epoch(log);
  }

  if (!best_params.empty()) {
    auto& params = model.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) params[i].value = best_params[i];
  }
  result.optimizer_steps = optimizer.steps();
  return result;
}

std::vector<TokenId> generate(DecoderModel& model, std::span<const float> context,
                              const DecodeOptions& options) {
  const int cap = std::min(options.max_len, model.config().max_len);
  if (cap < 1) return {};

  auto argmax = [](const auto& row) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < row.size(); ++j) {
      if (row(j) > row(best)) best = j;
    }
    return static_cast<TokenId>(best);
  };

  if (options.mode == DecodeMode::Greedy) {
    std::vector<TokenId> prefix{tokenizer::kBos};
    std::vector<TokenId> out;
    while (static_cast<int>(out.size()) < cap) {
      const auto logits = model.logits(prefix, context);
      const auto next = argmax(logits.row(logits.rows() - 1));
      out.push_back(next);
      if (next == tokenizer::kEos) break;
      prefix.push_back(next);
    }
    return out;
  }

  struct Hyp {
    std::vector<TokenId> tokens;  // generated, without BOS
    double logp = 0.0;
    bool done = false;
    double norm() const { return logp / static_cast<double>(std::max<std::size_t>(1, tokens.size())); }
  };
  const auto width = static_cast<std::size_t>(std::max(1, options.beam_size));
  std::vector<Hyp> beams{Hyp{}};
  std::vector<Hyp> finished;
  for (int step = 0; step < cap && !beams.empty(); ++step) {
    std::vector<Hyp> candidates;
    for (const auto& h : beams) {
      std::vector<TokenId> prefix{tokenizer::kBos};
      prefix.insert(prefix.end(), h.tokens.begin(), h.tokens.end());
      const auto logits = model.logits(prefix, context);
      const Matrix last = logits.bottomRows(1);
      const Matrix logp = nn::log_softmax_rows(last);
      std::vector<TokenId> ids(static_cast<std::size_t>(logp.cols()));
      std::iota(ids.begin(), ids.end(), 0);
      const auto top = std::min(width, ids.size());
      std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(top), ids.end(),
                        [&](TokenId a, TokenId b) {
                          return logp(0, a) > logp(0, b) || (logp(0, a) == logp(0, b) && a < b);
                        });
      for (std::size_t i = 0; i < top; ++i) {
        Hyp next = h;
        next.tokens.push_back(ids[i]);
        next.logp += logp(0, ids[i]);
        next.done = ids[i] == tokenizer::kEos;
        candidates.push_back(std::move(next));
      }
    }
    std::stable_sort(candidates.begin(), candidates.end(), [](const Hyp& a, const Hyp& b) {
      return a.logp > b.logp || (a.logp == b.logp && a.tokens < b.tokens);
    });
    beams.clear();
    for (auto& c : candidates) {
      if (beams.size() + finished.size() >= width * 2 || beams.size() >= width) break;
      if (c.done) {
        finished.push_back(std::move(c));
      } else {
        beams.push_back(std::move(c));
      }
    }
    if (finished.size() >= width) break;
  }
  finished.insert(finished.end(), beams.begin(), beams.end());
  const auto best = std::max_element(finished.begin(), finished.end(), [](const Hyp& a, const Hyp& b) {
    return a.norm() < b.norm() || (a.norm() == b.norm() && a.tokens > b.tokens);
  });
  return best == finished.end() ? std::vector<TokenId>{} : best->tokens;
}

std::string config_to_json(const DecoderConfig& c) {
  return json{{"layers", c.layers},         {"model_dim", c.model_dim},
              {"heads", c.heads},           {"ffn_dim", c.ffn_dim},
              {"max_len", c.max_len},       {"vocab_size", c.vocab_size},
              {"context_dim", c.context_dim}, {"dropout", c.dropout},
              {"seed", c.seed}}
      .dump(2);
}

DecoderConfig config_from_json(const std::string& text) {
  const auto j = json::parse(text);
  DecoderConfig c;
  c.layers = j.value("layers", c.layers);
  c.model_dim = j.value("model_dim", c.model_dim);
  c.heads = j.value("heads", c.heads);
  c.ffn_dim = j.value("ffn_dim", c.ffn_dim);
  c.max_len = j.value("max_len", c.max_len);
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.context_dim = j.value("context_dim", c.context_dim);
  c.dropout = j.value("dropout", c.dropout);
  c.seed = j.value("seed", c.seed);
  return c;
}

std::string train_config_to_json(const TrainConfig& c) {
  return json{{"epochs", c.epochs},
              {"peak_lr", c.peak_lr},
              {"warmup_fraction", c.warmup_fraction},
              {"batch_size", c.batch_size},
              {"grad_accum_steps", c.grad_accum_steps},
              {"weight_decay", c.weight_decay},
              {"beta1", c.beta1},
              {"beta2", c.beta2},
              {"adam_eps", c.adam_eps},
              {"seed", c.seed}}
      .dump(2);
}

TrainConfig train_config_from_json(const std::string& text) {
  const auto j = json::parse(text);
  TrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.peak_lr = j.value("peak_lr", c.peak_lr);
  c.warmup_fraction = j.value("warmup_fraction", c.warmup_fraction);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.grad_accum_steps = j.value("grad_accum_steps", c.grad_accum_steps);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.adam_eps = j.value("adam_eps", c.adam_eps);
  c.seed = j.value("seed", c.seed);
  return c;
}

void save_checkpoint(const DecoderModel& model, const std::filesystem::path& dir,
                     const std::string& metadata_json) {
  std::filesystem::create_directories(dir);
  json config = json::parse(config_to_json(model.config()));
  config["metadata"] = json::parse(metadata_json);
  std::ofstream(dir / "config.json") << config.dump(2) << '\n';

  std::ofstream out(dir / "params.bin", std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint in " + dir.string());
  json tensors = json::array();
  std::size_t offset = 0;
  for (const auto& p : model.parameters()) {
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      binio::write_f32(out, static_cast<float>(p.value.data()[i]));
    }
    tensors.push_back({{"name", p.name},
                       {"shape", {p.value.rows(), p.value.cols()}},
                       {"offset", offset},
                       {"count", p.size()}});
    offset += p.size() * sizeof(float);
  }
  if (!out) throw Error("checkpoint write failed in " + dir.string());
  const json manifest = {{"dtype", "f32"}, {"byte_order", "little"}, {"bytes", offset},
                         {"tensors", tensors}};
  std::ofstream(dir / "manifest.json") << manifest.dump(2) << '\n';
}

DecoderModel load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream cin(dir / "config.json");
  if (!cin) throw Error("no checkpoint config in " + dir.string());
  const std::string config_text((std::istreambuf_iterator<char>(cin)), std::istreambuf_iterator<char>());
  DecoderModel model(config_from_json(config_text));

  std::ifstream min(dir / "manifest.json");
  const auto manifest = json::parse(min);
  const auto& tensors = manifest.at("tensors");
  auto& params = model.parameters();
  if (tensors.size() != params.size()) throw FormatError("checkpoint tensor count mismatch");

  std::ifstream in(dir / "params.bin", std::ios::binary);
  if (!in) throw Error("no params.bin in " + dir.string());
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    const auto& t = tensors[i];
    const auto shape = t.at("shape").get<std::vector<Eigen::Index>>();
    if (t.at("name").get<std::string>() != p.name || shape.size() != 2 ||
        shape[0] != p.value.rows() || shape[1] != p.value.cols()) {
      throw FormatError("checkpoint tensor " + std::to_string(i) + " does not match the config");
    }
    in.seekg(static_cast<std::streamoff>(t.at("offset").get<std::size_t>()));
    for (Eigen::Index j = 0; j < p.value.size(); ++j) {
      p.value.data()[j] = static_cast<double>(binio::read_pod<float>(in, "parameter"));
    }
  }
  return model;
}

std::string checkpoint_metadata(const std::filesystem::path& dir) {
  std::ifstream in(dir / "config.json");
  if (!in) throw Error("no checkpoint config in " + dir.string());
  const auto j = json::parse(in);
  return j.contains("metadata") ? j["metadata"].dump() : "{}";
}

}  // namespace clauseforge::decoder
