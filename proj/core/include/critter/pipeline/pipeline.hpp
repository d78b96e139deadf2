#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "critter/avatar/rig.hpp"
#include "critter/avatar/services.hpp"
#include "critter/gen/generator.hpp"
#include "critter/gen/rvq.hpp"
#include "critter/pipeline/config.hpp"
#include "critter/planner/planner.hpp"
#include "critter/util/error.hpp"
#include "critter/zoogen/caption.hpp"

namespace critter::pipeline {

/// A pipeline failure labelled with the stage that raised it.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& message)
      : Error("stage '" + stage + "' failed: " + message), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct PipelineResult {
  planner::PlannerDecision decision;
  std::optional<motion::MotionClip> clip;  // on the generator's skeleton
  std::optional<avatar::RiggedMesh> rigged;
  std::string run_dir;
  std::vector<std::string> exports;  // absolute paths, one per format
  std::vector<StageTiming> timings;
};

struct RunOptions {
  bool keep_partial = false;
  std::string run_name;  // empty: <UTC timestamp>-<query hash>
  /// Receives one JSON object per stage {stage, duration_ms, outcome[, error]}.
  std::function<void(const nlohmann::json&)> log;
};

struct Models {
  std::shared_ptr<const gen::RvqModel> rvq;
  std::shared_ptr<const gen::GeneratorModel> generator;
};

/// Seeded random RVQ and generator on the template rig of `animal`'s body
/// plan, sized for `frames`. Stand-ins when no checkpoints are configured.
Models toy_models(std::string_view animal, int frames, std::uint64_t seed = 0);

/// The services and models a configuration names, built once.
class Pipeline {
 public:
  /// Loads the taxonomy and checkpoints and builds the backends.
  explicit Pipeline(PipelineConfig config);

  const PipelineConfig& config() const { return config_; }
  const planner::Planner& planner() const { return *planner_; }
  const zoogen::CaptionBackend& captioner() const { return *captioner_; }
  const zoogen::RefineBackend& refiner() const { return *refiner_; }

  /// Checkpoint models, or toy models for the animal.
  Models models_for(std::string_view animal) const;

  /// plan, then generate_motion alongside request_avatar_image and
  /// request_mesh, then auto_rig, retarget and export. Artifacts go to a
  /// fresh run directory under output_dir; on failure it is removed unless
  /// keep_partial is set. Throws StageError.
  PipelineResult run(std::string_view query, const RunOptions& options = {}) const;

 private:
  PipelineConfig config_;
  std::unique_ptr<planner::Planner> planner_;
  std::unique_ptr<avatar::ImageBackend> image_;
  std::unique_ptr<avatar::MeshBackend> mesh_;
  std::unique_ptr<zoogen::CaptionBackend> captioner_;
  std::unique_ptr<zoogen::RefineBackend> refiner_;
  Models checkpoint_models_;
};

PipelineResult run_pipeline(std::string_view query, const PipelineConfig& config, const RunOptions& options = {});

/// "<YYYYMMDDTHHMMSSZ>-<first 8 hex digits of FNV-1a(query)>".
std::string run_directory_name(std::string_view query);

}  // namespace critter::pipeline
