#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "critter/avatar/export.hpp"
#include "critter/net/http.hpp"

namespace critter::pipeline {

/// One external service. A mock backend never touches the network.
struct BackendConfig {
  std::string url;
  std::string model;
  std::string auth_env;  // environment variable holding the bearer token
  bool mock = true;
  double timeout_seconds = 60.0;
  std::size_t max_in_flight = 2;

  std::string auth_token;  // resolved from auth_env by resolve_auth()

  net::ServiceEndpoint endpoint() const { return {url, model, auth_token, timeout_seconds}; }
};

struct GenerationParams {
  int frames = 64;
  std::uint64_t seed = 0;
  int iterations = 10;  // L
  double temperature = 1.0;
};

struct PipelineConfig {
  std::string taxonomy_path;  // empty: built-in taxonomy
  BackendConfig planner;
  BackendConfig caption;
  BackendConfig image;
  BackendConfig mesh;
  std::string rvq_checkpoint;        // both empty: seeded toy models
  std::string generator_checkpoint;  // on the planned animal's template rig
  GenerationParams generation;
  int image_size = 256;
  std::string output_dir = "runs";
  std::vector<avatar::ExportFormat> formats = {avatar::ExportFormat::kGltf, avatar::ExportFormat::kBvh};

  std::vector<std::string> warnings;  // filled by validate()

  /// Throws InvalidArgument for a missing URL on a live backend, frames < 1,
  /// a missing referenced file, or only one of the two checkpoints. A URL on
  /// a mock backend is only a warning.
  void validate();

  /// Reads every live backend's auth_env. Throws InvalidArgument naming the
  /// variable when it is unset.
  void resolve_auth();
};

/// Relative paths resolve against base_dir.
PipelineConfig config_from_json(const nlohmann::json& j, const std::string& base_dir = ".");
nlohmann::json config_to_json(const PipelineConfig& config);

/// Parses, resolves auth and validates. IoError (with the path) when the
/// file cannot be read, ParseError for malformed JSON or unknown keys.
PipelineConfig load_config(const std::string& path);

}  // namespace critter::pipeline
