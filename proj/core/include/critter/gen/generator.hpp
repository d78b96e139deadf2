#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "critter/gen/nn.hpp"
#include "critter/gen/rvq.hpp"
#include "critter/gen/text.hpp"
#include "critter/gen/tokens.hpp"
#include "critter/motion/skeleton.hpp"

namespace critter::gen {

struct TransformerConfig {
  int codebook_size = 512;  // K; the mask transformer adds [MASK] = K
  int residual_layers = 2;  // V
  int text_dim = 64;
  int width = 256;
  int layers = 4;
  int heads = 4;
  int ff = 512;
  int max_len = 64;
  std::uint64_t seed = 0;
};

/// Positional + text-conditioned transformer stack ending in a K-way head.
class TokenTrunk {
 public:
  struct Cache {
    Linear::Cache text;
    std::vector<TransformerBlock::Cache> blocks;
    LayerNorm::Cache ln;
    Linear::Cache head;
  };

  TokenTrunk() = default;
  TokenTrunk(const std::string& name, const TransformerConfig& cfg, Rng& rng);

  /// `x` is n x width of token embeddings; returns n x K logits.
  Mat forward(const Mat& x, const Eigen::VectorXd& text, Cache* cache = nullptr) const;
  /// Returns the gradient with respect to `x`.
  Mat backward(const Mat& dlogits, const Cache& cache);
  void collect(std::vector<Param*>& out);

 private:
  int max_len_ = 0;
  Param pos_;
  Linear text_;
  std::vector<TransformerBlock> blocks_;
  LayerNorm ln_;
  Linear head_;
};

/// Bidirectional transformer over base-layer tokens with a [MASK] id.
class MaskTransformer {
 public:
  struct Cache {
    std::vector<int> tokens;
    TokenTrunk::Cache trunk;
  };

  MaskTransformer() = default;
  MaskTransformer(const TransformerConfig& cfg, Rng& rng);

  int mask_id() const { return embed_.vocab() - 1; }
  Mat forward(const std::vector<int>& tokens, const Eigen::VectorXd& text, Cache* cache = nullptr) const;
  void backward(const Mat& dlogits, const Cache& cache);
  void collect(std::vector<Param*>& out);

 private:
  Embedding embed_;
  TokenTrunk trunk_;
};

/// Predicts layer j from the summed embeddings of layers 0..j-1 plus a layer
/// indicator for j.
class ResidualTransformer {
 public:
  struct Cache {
    std::vector<std::vector<int>> inputs;
    int layer = 1;
    TokenTrunk::Cache trunk;
  };

  ResidualTransformer() = default;
  ResidualTransformer(const TransformerConfig& cfg, Rng& rng);

  Mat forward(const TokenGrid& grid, int layer, const Eigen::VectorXd& text, Cache* cache = nullptr) const;
  void backward(const Mat& dlogits, const Cache& cache);
  void collect(std::vector<Param*>& out);

  /// Indicator vector added for layer j (1-based).
  Eigen::RowVectorXd indicator(int layer) const { return indicator_.table.value.row(layer - 1); }

 private:
  std::vector<Embedding> layer_embed_;
  Embedding indicator_;
  TokenTrunk trunk_;
};

class GeneratorModel {
 public:
  /// Seeded random initialization with a hashed-trigram text encoder.
  explicit GeneratorModel(const TransformerConfig& cfg);

  const TransformerConfig& config() const { return config_; }
  MaskTransformer& mask() { return mask_; }
  const MaskTransformer& mask() const { return mask_; }
  ResidualTransformer& residual() { return residual_; }
  const ResidualTransformer& residual() const { return residual_; }

  const TextEncoder& text_encoder() const { return *text_encoder_; }
  /// Replaces the text encoder; its width must equal text_dim.
  void set_text_encoder(std::shared_ptr<const TextEncoder> encoder);

  std::vector<Param*> mask_parameters();
  std::vector<Param*> residual_parameters();

  void save(const std::string& path) const;
  std::vector<std::uint8_t> encode_checkpoint() const;
  static GeneratorModel load(const std::string& path);
  static GeneratorModel decode_checkpoint(std::span<const std::uint8_t> bytes);

 private:
  TransformerConfig config_;
  MaskTransformer mask_;
  ResidualTransformer residual_;
  std::shared_ptr<const TextEncoder> text_encoder_;
};

/// Cosine masking schedule ratio(tau) = cos(pi * tau / 2) with ratio(1) = 0.
struct MaskSchedule {
  int iterations = 10;  // L

  double ratio(double tau) const;
  /// Positions still masked after `step` of L iterations (1-based).
  int masked_after(int step, int n) const;
};

struct GenTrainConfig {
  int epochs = 100;
  int batch_size = 8;
  double lr = 3e-4;
  std::uint64_t seed = 0;
};

struct GenTrainLog {
  std::vector<double> epoch_loss;
  std::vector<std::string> warnings;
};

/// Masked-token training on the base layer. `texts[i]` conditions `tokens[i]`.
GenTrainLog train_masked(GeneratorModel& model, const std::vector<TokenGrid>& tokens,
                         const std::vector<Eigen::VectorXd>& texts, const GenTrainConfig& config);
/// Residual-layer training; a no-op with a warning when V = 0.
GenTrainLog train_residual(GeneratorModel& model, const std::vector<TokenGrid>& tokens,
                           const std::vector<Eigen::VectorXd>& texts, const GenTrainConfig& config);

/// Mean masked cross-entropy and accuracy under masks drawn from `seed`,
/// without updating the model.
struct MaskedEval {
  double loss = 0.0;
  double accuracy = 0.0;
};
MaskedEval evaluate_masked(const GeneratorModel& model, const std::vector<TokenGrid>& tokens,
                           const std::vector<Eigen::VectorXd>& texts, std::uint64_t seed);
/// Fraction of residual tokens predicted exactly by argmax over layers 1..V.
double residual_accuracy(const GeneratorModel& model, const std::vector<TokenGrid>& tokens,
                         const std::vector<Eigen::VectorXd>& texts);

struct GenerationTrace {
  std::vector<int> masked_counts;  // after each iteration
  double max_softmax_error = 0.0;  // |sum(p) - 1| over every evaluated row
  bool logits_finite = true;
};

/// Iterative masked decoding from an all-[MASK] sequence. Temperature 0 takes
/// the argmax. Confidence is the chosen token's log-probability; ties keep
/// the lower position.
std::vector<int> generate_base(const GeneratorModel& model, const Eigen::VectorXd& text, int n,
                               const MaskSchedule& schedule, double temperature, std::uint64_t seed,
                               GenerationTrace* trace = nullptr);

/// Argmax fill of layers 1..V.
TokenGrid generate_residuals(const GeneratorModel& model, const std::vector<int>& base, const Eigen::VectorXd& text);

struct GenerationOptions {
  int frames = 64;
  std::uint64_t seed = 0;
  int iterations = 10;
  double temperature = 1.0;
};

/// Prompt -> tokens -> features -> clip of exactly `frames` frames.
motion::MotionClip generate_motion(const std::string& prompt, const RvqModel& rvq, const GeneratorModel& generator,
                                   const GenerationOptions& options);

}  // namespace critter::gen
