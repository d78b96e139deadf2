#include "critter/pipeline/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <future>
#include <mutex>

#include "critter/avatar/body.hpp"
#include "critter/avatar/export.hpp"
#include "critter/motion/bvh.hpp"
#include "critter/util/binary_io.hpp"
#include "critter/util/error.hpp"
#include "critter/util/hash.hpp"

namespace critter::pipeline {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Stage bookkeeping shared by the two branches.
class StageLog {
 public:
  StageLog(const RunOptions& options) : options_(options) {}

  template <typename Fn>
  auto run(const std::string& stage, Fn&& fn) -> decltype(fn()) {
    const auto start = std::chrono::steady_clock::now();
    try {
      if constexpr (std::is_void_v<decltype(fn())>) {
        fn();
        record(stage, start, nullptr);
      } else {
        auto value = fn();
        record(stage, start, nullptr);
        return value;
      }
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      record(stage, start, e.what());
      throw StageError(stage, e.what());
    }
  }

  std::vector<StageTiming> timings() const {
    std::lock_guard lock(mutex_);
    return timings_;
  }
  std::vector<json> lines() const {
    std::lock_guard lock(mutex_);
    return lines_;
  }

 private:
  void record(const std::string& stage, std::chrono::steady_clock::time_point start, const char* error) {
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    json line = {{"stage", stage}, {"duration_ms", seconds * 1000.0}, {"outcome", error ? "error" : "ok"}};
    if (error) line["error"] = error;
    std::lock_guard lock(mutex_);
    timings_.push_back({stage, seconds});
    lines_.push_back(line);
    if (options_.log) options_.log(line);
  }

  const RunOptions& options_;
  mutable std::mutex mutex_;
  std::vector<StageTiming> timings_;
  std::vector<json> lines_;
};

void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  io::write_file_atomic(path.string(), std::span<const std::uint8_t>(bytes));
}

const char* extension(avatar::ExportFormat f) { return f == avatar::ExportFormat::kGltf ? "glb" : "bvh"; }

json decision_json(const planner::PlannerDecision& d) {
  json j = {{"animal", d.animal},
            {"motion", d.motion},
            {"motion_prompt", d.motion_prompt},
            {"avatar_prompt", d.avatar_prompt},
            {"source", std::string(planner::to_string(d.source))}};
  if (d.fallback_reason) j["fallback_reason"] = *d.fallback_reason;
  return j;
}

}  // namespace

std::string run_directory_name(std::string_view query) {
  const std::time_t now = std::time(nullptr);
  std::tm utc{};
  gmtime_r(&now, &utc);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y%m%dT%H%M%SZ", &utc);
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a64(query)));
  return std::string(stamp) + "-" + std::string(hash, 8);
}

Models toy_models(std::string_view animal, int frames, std::uint64_t seed) {
  const motion::Skeleton rig = avatar::template_rig(avatar::body_plan_for(animal));
  gen::RvqConfig rc;
  rc.codebook_size = 32;
  rc.residual_layers = 2;
  rc.latent_dim = 16;
  rc.downsample = 4;
  rc.hidden = 32;
  rc.seed = seed;
  motion::FeatureSpec spec;
  spec.skeleton = rig;
  auto rvq = std::make_shared<gen::RvqModel>(rc, spec, 1.0 / 30.0);

  gen::TransformerConfig tc;
  tc.codebook_size = rc.codebook_size;
  tc.residual_layers = rc.residual_layers;
  tc.width = 32;
  tc.layers = 1;
  tc.heads = 2;
  tc.ff = 64;
  tc.max_len = std::max(1, (frames + rc.downsample - 1) / rc.downsample);
  tc.seed = seed + 1;
  return {rvq, std::make_shared<gen::GeneratorModel>(tc)};
}

Pipeline::Pipeline(PipelineConfig config) : config_(std::move(config)) {
  config_.validate();
  planner::Taxonomy taxonomy =
      config_.taxonomy_path.empty() ? planner::Taxonomy::builtin() : planner::Taxonomy::load(config_.taxonomy_path);

  std::shared_ptr<const net::ChatBackend> planner_chat;
  if (!config_.planner.mock) planner_chat = std::make_shared<net::HttpChatBackend>(config_.planner.endpoint());
  planner_ = std::make_unique<planner::Planner>(std::move(taxonomy), planner::PromptTemplates{}, planner_chat);

  if (config_.image.mock) {
    image_ = std::make_unique<avatar::MockImageBackend>();
  } else {
    image_ = std::make_unique<avatar::HttpImageBackend>(config_.image.endpoint(), config_.image.max_in_flight);
  }
  if (config_.mesh.mock) {
    mesh_ = std::make_unique<avatar::MockMeshBackend>();
  } else {
    mesh_ = std::make_unique<avatar::HttpMeshBackend>(config_.mesh.endpoint(), avatar::MeshLimits{},
                                                      config_.mesh.max_in_flight);
  }
  if (config_.caption.mock) {
    captioner_ = std::make_unique<zoogen::MockCaptionBackend>();
    refiner_ = std::make_unique<zoogen::MockRefineBackend>();
  } else {
    auto chat = std::make_shared<net::HttpChatBackend>(config_.caption.endpoint());
    captioner_ = std::make_unique<zoogen::ChatCaptionBackend>(chat);
    refiner_ = std::make_unique<zoogen::ChatRefineBackend>(chat);
  }
  if (!config_.rvq_checkpoint.empty()) {
    checkpoint_models_.rvq = std::make_shared<gen::RvqModel>(gen::RvqModel::load(config_.rvq_checkpoint));
    checkpoint_models_.generator =
        std::make_shared<gen::GeneratorModel>(gen::GeneratorModel::load(config_.generator_checkpoint));
  }
}

Models Pipeline::models_for(std::string_view animal) const {
  if (checkpoint_models_.rvq) return checkpoint_models_;
  return toy_models(animal, config_.generation.frames);
}

PipelineResult Pipeline::run(std::string_view query, const RunOptions& options) const {
  StageLog log(options);
  PipelineResult result;
  const fs::path run_dir =
      fs::path(config_.output_dir) / (options.run_name.empty() ? run_directory_name(query) : options.run_name);

  bool created = false;  // never remove a directory this run did not make
  const auto finish_logs = [&] {
    std::string text;
    for (const auto& line : log.lines()) text += line.dump() + "\n";
    if (created) io::write_file_atomic((run_dir / "log.jsonl").string(), text);
  };

  try {
    result.decision = log.run("plan", [&] { return planner_->plan(query); });
    log.run("prepare", [&] {
      if (fs::exists(run_dir)) throw IoError("run directory already exists: " + run_dir.string());
      fs::create_directories(run_dir);
      created = true;
      io::write_file_atomic((run_dir / "decision.json").string(), decision_json(result.decision).dump(2) + "\n");
    });
    const planner::PlannerDecision& decision = result.decision;

    // Motion branch and avatar branch run concurrently and join here.
    auto motion_branch = std::async(std::launch::async, [&] {
      const Models models = log.run("load_models", [&] { return models_for(decision.animal); });
      gen::GenerationOptions opts;
      opts.frames = config_.generation.frames;
      opts.seed = config_.generation.seed;
      opts.iterations = config_.generation.iterations;
      opts.temperature = config_.generation.temperature;
      motion::MotionClip clip = log.run("generate_motion", [&] {
        return gen::generate_motion(decision.motion_prompt, *models.rvq, *models.generator, opts);
      });
      log.run("write_motion", [&] {
        io::write_file_atomic((run_dir / "motion.bvh").string(), motion::write_bvh(clip));
      });
      return clip;
    });
    auto avatar_branch = std::async(std::launch::async, [&] {
      avatar::ImageRequest request{config_.image_size, config_.image_size, config_.generation.seed};
      const avatar::AvatarImage image = log.run(
          "request_avatar_image", [&] { return avatar::request_avatar_image(decision.avatar_prompt, *image_, request); });
      log.run("write_image", [&] { write_bytes(run_dir / "avatar.png", avatar::encode_png(image)); });
      return log.run("request_mesh", [&] { return avatar::request_mesh(image, *mesh_); });
    });
    std::exception_ptr failure;
    try {
      result.clip = motion_branch.get();
    } catch (...) {
      failure = std::current_exception();
    }
    std::optional<avatar::Mesh> mesh;
    try {
      mesh = avatar_branch.get();
    } catch (...) {
      if (!failure) failure = std::current_exception();
    }
    if (failure) std::rethrow_exception(failure);

    result.rigged = log.run("auto_rig", [&] { return avatar::auto_rig(*mesh, result.clip->skeleton()); });
    const motion::MotionClip retargeted = log.run("retarget", [&] {
      const auto map = avatar::JointMap::by_name(result.clip->skeleton(), result.rigged->rig,
                                                 avatar::UnmappedPolicy::kInheritParent);
      return avatar::retarget(*result.clip, map, *result.rigged);
    });
    log.run("export", [&] {
      for (const auto format : config_.formats) {
        const fs::path path = fs::absolute(run_dir / (std::string("avatar.") + extension(format)));
        write_bytes(path, avatar::export_animated(*result.rigged, retargeted, format));
        result.exports.push_back(path.string());
      }
    });
  } catch (const StageError&) {
    finish_logs();
    if (!options.keep_partial && created) {
      std::error_code ec;
      fs::remove_all(run_dir, ec);
    }
    throw;
  }
  result.run_dir = fs::absolute(run_dir).string();
  result.timings = log.timings();
  finish_logs();
  return result;
}

PipelineResult run_pipeline(std::string_view query, const PipelineConfig& config, const RunOptions& options) {
  std::unique_ptr<Pipeline> pipeline;
  try {
    pipeline = std::make_unique<Pipeline>(config);
  } catch (const std::exception& e) {
    throw StageError("load", e.what());
  }
  return pipeline->run(query, options);
}

}  // namespace critter::pipeline
