#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "critter/gen/nn.hpp"
#include "critter/gen/tokens.hpp"
#include "critter/motion/features.hpp"

namespace critter::gen {

/// V+1 codebooks, each K x d. Residual layers keep entry 0 at the zero vector.
using Codebooks = std::vector<Mat>;

struct Quantization {
  TokenGrid grid;
  Mat quantized_sum;   // n x d
  Mat residual_norms;  // (V+1) x n, norm left after each layer
};

/// Greedy residual quantization; nearest entry by Euclidean distance, ties to
/// the lowest index.
Quantization quantize_residual(const Mat& latent, const Codebooks& codebooks);

/// Sum of the chosen entries of layers [0, layers).
Mat sum_codes(const TokenGrid& grid, const Codebooks& codebooks, int layers);

enum class EncoderKind : std::uint32_t {
  kMlp = 0,
  kIdentity = 1,  // reshape only; requires d == f * D and skips normalization
};

struct RvqConfig {
  int codebook_size = 512;  // K
  int residual_layers = 2;  // V
  int latent_dim = 64;      // d
  int downsample = 4;       // f
  int hidden = 256;
  EncoderKind encoder = EncoderKind::kMlp;

  int epochs = 100;
  int batch_size = 4;
  double beta = 0.25;  // commitment weight
  double lr = 1e-3;
  double ema_decay = 0.99;
  int dead_code_epochs = 10;
  std::uint64_t seed = 0;
};

/// Residual VQ-VAE over feature matrices.
class RvqModel {
 public:
  /// Random initialization; codebooks start as small noise with pinned zeros.
  RvqModel(const RvqConfig& config, motion::FeatureSpec spec, double frame_time);

  const RvqConfig& config() const { return config_; }
  const motion::FeatureSpec& spec() const { return spec_; }
  double frame_time() const { return frame_time_; }
  int feature_dim() const { return spec_.dim(); }

  /// N x D features (N a multiple of f) -> n x d latents.
  Mat encode(const Mat& features) const;
  /// n x d latents -> (n*f) x D features.
  Mat decode_latent(const Mat& latent) const;
  Quantization quantize(const Mat& latent) const { return quantize_residual(latent, codebooks_); }
  /// Embeds each layer, sums and decodes. Throws InvalidArgument for indices
  /// outside the codebooks.
  motion::FeatureMatrix decode_tokens(const TokenGrid& grid) const;
  /// encode then quantize; N is cropped down to a multiple of f.
  TokenGrid tokenize(const Mat& features) const;

  Codebooks& codebooks() { return codebooks_; }
  const Codebooks& codebooks() const { return codebooks_; }
  Eigen::RowVectorXd& feature_mean() { return mean_; }
  Eigen::RowVectorXd& feature_std() { return std_; }

  /// Farthest-point initialization of every layer from the given latents.
  void seed_codebooks(const Mat& latents, Rng& rng);

  std::vector<Param*> parameters();

  // Training hooks: cached passes on normalized, reshaped rows.
  struct EncoderCache {
    Linear::Cache l1, l2;
    Mat pre_act;
  };
  struct DecoderCache {
    Linear::Cache l1, l2;
    Mat pre_act;
  };
  Mat normalize_rows(const Mat& features) const;  // -> n x (f*D)
  Mat encode_rows(const Mat& rows, EncoderCache* cache = nullptr) const;
  Mat decode_rows(const Mat& latent, DecoderCache* cache = nullptr) const;  // -> n x (f*D)
  Mat backward_decoder(const Mat& drows, const DecoderCache& cache);
  void backward_encoder(const Mat& dlatent, const EncoderCache& cache);

  void save(const std::string& path) const;
  std::vector<std::uint8_t> encode_checkpoint() const;
  static RvqModel load(const std::string& path);
  static RvqModel decode_checkpoint(std::span<const std::uint8_t> bytes);

 private:
  RvqConfig config_;
  motion::FeatureSpec spec_;
  double frame_time_;
  Eigen::RowVectorXd mean_, std_;
  Linear enc1_, enc2_, dec1_, dec2_;
  Codebooks codebooks_;
};

struct RvqTrainReport {
  std::vector<double> epoch_loss;  // reconstruction + beta * commitment
  double recon_mse = 0.0;          // per normalized feature element, final pass
  double quant_mse = 0.0;          // per latent element, base + residuals, final pass
};

struct RvqTrainResult {
  RvqModel model;
  RvqTrainReport report;
};

/// Straight-through VQ-VAE training with EMA codebooks. Deterministic for a
/// seed. Throws Error with diagnostics when the loss stops being finite.
RvqTrainResult train_rvq(const std::vector<motion::FeatureMatrix>& dataset, const RvqConfig& config);

}  // namespace critter::gen
