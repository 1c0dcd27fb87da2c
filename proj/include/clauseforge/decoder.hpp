#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "clauseforge/autograd.hpp"
#include "clauseforge/tokenizer.hpp"

namespace clauseforge::decoder {

using tokenizer::TokenId;

struct DecoderConfig {
  int layers = 3;
  int model_dim = 256;
  int heads = 4;
  int ffn_dim = 1024;
  int max_len = 256;
  int vocab_size = static_cast<int>(tokenizer::kDefaultVocabSize);
  int context_dim = 768;
  double dropout = 0.1;
  std::uint64_t seed = 1234;

  void validate() const;
  bool operator==(const DecoderConfig&) const = default;
};

/// Learning-rate and batching recipe. Defaults are the published ones.
struct TrainConfig {
  int epochs = 50;
  double peak_lr = 6e-5;
  double warmup_fraction = 0.25;
  int batch_size = 24;
  int grad_accum_steps = 3;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 1234;

  void validate() const;
};

/// Piecewise-linear schedule: 0 -> peak over the warmup steps, then linear
/// decay to 0 at `total_steps`. `step` is the 1-based optimizer step.
double learning_rate(const TrainConfig& config, std::int64_t step, std::int64_t total_steps);

/// One teacher-forced sequence: the target clause tokens (no BOS/EOS) and
/// the conditioning context.
struct Sequence {
  std::string id;
  std::vector<TokenId> tokens;
  std::vector<float> context;
};

/// Pre-LN transformer decoder. The context vector is projected to
/// model_dim and used as a length-1 cross-attention memory.
class DecoderModel {
 public:
  explicit DecoderModel(const DecoderConfig& config);

  const DecoderConfig& config() const { return config_; }
  std::vector<nn::Parameter>& parameters() { return params_; }
  const std::vector<nn::Parameter>& parameters() const { return params_; }
  std::size_t parameter_count() const;
  nn::Parameter& parameter(const std::string& name);

  /// Logits for a packed batch. `inputs[b]` is BOS followed by the prefix;
  /// rows of the result follow the same packing. Dropout applies when
  /// `dropout_rng` is set.
  nn::Var forward(nn::Tape& tape, const std::vector<std::vector<TokenId>>& inputs,
                  const std::vector<std::span<const float>>& contexts,
                  std::mt19937_64* dropout_rng = nullptr);

  /// Inference logits for a single prefix (rows = prefix length).
  nn::Matrix logits(std::span<const TokenId> input, std::span<const float> context);

  void zero_grad();
  /// Rounds every parameter to float precision (what checkpoints store).
  void round_to_float();

 private:
  nn::Parameter& add_param(std::string name, nn::Matrix value, bool decay);

  DecoderConfig config_;
  std::vector<nn::Parameter> params_;
  nn::Matrix positions_;
};

/// Closed-form parameter count for a configuration.
std::size_t expected_parameter_count(const DecoderConfig& config);

/// Teacher-forced mean token NLL for a batch (PAD targets ignored).
double batch_loss(DecoderModel& model, std::span<const Sequence> batch);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  std::optional<double> valid_loss;
  double lr = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> curve;
  double initial_loss = 0.0;
  int best_epoch = 0;
  std::optional<double> best_valid_loss;
  std::int64_t optimizer_steps = 0;
  std::size_t dropped_too_long = 0;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// AdamW with gradient accumulation over `grad_accum_steps` batches per
/// optimizer step. When validation data is given, the parameters with the
/// best validation loss are restored at the end.
TrainResult train(DecoderModel& model, std::vector<Sequence> train_set,
                  std::vector<Sequence> valid_set, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

/// Single AdamW optimizer over a model's parameters.
class AdamW {
 public:
  AdamW(std::vector<nn::Parameter>& params, const TrainConfig& config);
  void step(double lr);
  std::int64_t steps() const { return t_; }

 private:
  std::vector<nn::Parameter>* params_;
  TrainConfig config_;
  std::vector<nn::Matrix> m_, v_;
  std::int64_t t_ = 0;
};

enum class DecodeMode { Greedy, Beam };

struct DecodeOptions {
  DecodeMode mode = DecodeMode::Greedy;
  int beam_size = 4;
  int max_len = 256;  // generated tokens, EOS included
};

/// Autoregressive decoding from BOS. The result ends with EOS unless the
/// length cap was hit first. Deterministic.
std::vector<TokenId> generate(DecoderModel& model, std::span<const float> context,
                              const DecodeOptions& options = {});

/// Checkpoint directory: config.json, params.bin (f32 LE), manifest.json.
void save_checkpoint(const DecoderModel& model, const std::filesystem::path& dir,
                     const std::string& metadata_json = "{}");
DecoderModel load_checkpoint(const std::filesystem::path& dir);
std::string checkpoint_metadata(const std::filesystem::path& dir);

std::string config_to_json(const DecoderConfig& c);
DecoderConfig config_from_json(const std::string& text);
std::string train_config_to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const std::string& text);

}  // namespace clauseforge::decoder
