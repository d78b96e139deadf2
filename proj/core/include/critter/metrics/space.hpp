#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "critter/gen/nn.hpp"
#include "critter/gen/text.hpp"
#include "critter/motion/features.hpp"

namespace critter::metrics {

enum class SpaceProvenance { kTrainedContrastive, kDeterministic };

std::string to_string(SpaceProvenance p);

/// Width of the skeleton-agnostic pooled motion descriptor.
inline constexpr int kDescriptorDim = 32;

/// Temporal pooling of a feature matrix into a fixed-width vector that does
/// not depend on the joint count: root channel moments, joint rotation and
/// position moments averaged over joints, spatial extent, joint speed and
/// log joint count.
Eigen::VectorXd motion_descriptor(const motion::FeatureMatrix& features);

struct SpaceConfig {
  int embed_dim = 32;
  int text_dim = 64;  // hashed trigram buckets
  int hidden = 64;
  int epochs = 150;
  int batch = 32;
  double lr = 3e-3;
  double temperature = 0.1;
  std::uint64_t seed = 0;
  bool train = true;  // false gives random-projection towers

  void validate() const;
};

struct SpaceExample {
  std::string category;
  std::string caption;
  motion::FeatureMatrix features;
};

struct SpaceTrainLog {
  std::vector<double> epoch_loss;
};

/// Joint text/motion space. Both maps return unit vectors of width dim().
class EmbeddingSpace {
 public:
  /// Untrained random-projection towers; depends only on the config seed.
  static EmbeddingSpace deterministic(const SpaceConfig& config);

  Eigen::VectorXd text_embed(std::string_view text) const;
  Eigen::VectorXd motion_embed(const motion::FeatureMatrix& features) const;
  Eigen::MatrixXd text_embed(const std::vector<std::string>& texts) const;
  Eigen::MatrixXd motion_embed(const std::vector<motion::FeatureMatrix>& clips) const;

  int dim() const { return config_.embed_dim; }
  SpaceProvenance provenance() const { return provenance_; }
  const SpaceConfig& config() const { return config_; }

  nlohmann::json to_json() const;
  static EmbeddingSpace from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  static EmbeddingSpace load(const std::string& path);

 private:
  friend EmbeddingSpace train_eval_space(const std::vector<SpaceExample>&, const SpaceConfig&, SpaceTrainLog*);

  explicit EmbeddingSpace(const SpaceConfig& config);
  std::vector<gen::Param*> params();
  Eigen::MatrixXd standardize(const Eigen::MatrixXd& descriptors) const;

  SpaceConfig config_;
  SpaceProvenance provenance_ = SpaceProvenance::kDeterministic;
  gen::HashedTrigramEncoder encoder_;
  Eigen::RowVectorXd desc_mean_;
  Eigen::RowVectorXd desc_std_;
  gen::Linear text_proj_;
  gen::Linear motion_fc1_;
  gen::Linear motion_fc2_;
};

/// Symmetric InfoNCE over (caption, motion) pairs. With config.train false
/// this returns EmbeddingSpace::deterministic. Throws InvalidArgument when
/// the examples cover fewer than 2 categories.
EmbeddingSpace train_eval_space(const std::vector<SpaceExample>& examples, const SpaceConfig& config,
                                SpaceTrainLog* log = nullptr);

/// Examples from an emitted dataset directory; category = animal.
std::vector<SpaceExample> examples_from_dataset(const std::string& dataset_dir);

}  // namespace critter::metrics
