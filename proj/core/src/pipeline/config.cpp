#include "critter/pipeline/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <set>

#include "critter/util/binary_io.hpp"
#include "critter/util/error.hpp"

namespace critter::pipeline {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ParseError("unknown key '" + key + "' in " + where);
  }
}

std::string resolve(const std::string& path, const std::string& base_dir) {
  if (path.empty() || fs::path(path).is_absolute()) return path;
  return (fs::path(base_dir) / path).lexically_normal().string();
}

BackendConfig backend_from_json(const json& j, const std::string& name) {
  reject_unknown(j, {"url", "model", "auth_env", "mock", "timeout_seconds", "max_in_flight"}, "backends." + name);
  BackendConfig b;
  b.url = j.value("url", "");
  b.model = j.value("model", "");
  b.auth_env = j.value("auth_env", "");
  b.mock = j.value("mock", true);
  b.timeout_seconds = j.value("timeout_seconds", 60.0);
  b.max_in_flight = j.value("max_in_flight", std::size_t{2});
  return b;
}

json backend_to_json(const BackendConfig& b) {
  return {{"url", b.url},
          {"model", b.model},
          {"auth_env", b.auth_env},
          {"mock", b.mock},
          {"timeout_seconds", b.timeout_seconds},
          {"max_in_flight", b.max_in_flight}};
}

std::string format_name(avatar::ExportFormat f) { return f == avatar::ExportFormat::kGltf ? "gltf" : "bvh"; }

}  // namespace

void PipelineConfig::validate() {
  warnings.clear();
  const std::pair<const char*, const BackendConfig*> backends[] = {
      {"planner", &planner}, {"caption", &caption}, {"image", &image}, {"mesh", &mesh}};
  for (const auto& [name, b] : backends) {
    if (b->mock && !b->url.empty()) {
      warnings.push_back(std::string("backend '") + name + "' is mock; its url " + b->url + " is ignored");
    }
    if (!b->mock && b->url.empty()) throw InvalidArgument(std::string("backend '") + name + "' needs a url");
    if (!b->mock) net::parse_url(b->url);
    if (!(b->timeout_seconds > 0.0)) throw InvalidArgument(std::string("backend '") + name + "' timeout must be > 0");
    if (b->max_in_flight < 1) throw InvalidArgument(std::string("backend '") + name + "' max_in_flight must be >= 1");
  }
  if (generation.frames < 1) throw InvalidArgument("generation.frames must be >= 1");
  if (generation.iterations < 1) throw InvalidArgument("generation.iterations must be >= 1");
  if (generation.temperature < 0.0) throw InvalidArgument("generation.temperature must be >= 0");
  if (image_size < 8 || image_size > 4096) throw InvalidArgument("image_size must be in [8, 4096]");
  if (rvq_checkpoint.empty() != generator_checkpoint.empty()) {
    throw InvalidArgument("models.rvq and models.generator must be given together");
  }
  for (const auto* path : {&taxonomy_path, &rvq_checkpoint, &generator_checkpoint}) {
    if (!path->empty() && !fs::exists(*path)) throw InvalidArgument("referenced file not found: " + *path);
  }
  if (formats.empty()) throw InvalidArgument("at least one export format is required");
  if (output_dir.empty()) throw InvalidArgument("output_dir must not be empty");
}

void PipelineConfig::resolve_auth() {
  for (auto* b : {&planner, &caption, &image, &mesh}) {
    b->auth_token.clear();
    if (b->mock || b->auth_env.empty()) continue;
    const char* value = std::getenv(b->auth_env.c_str());
    if (value == nullptr) throw InvalidArgument("environment variable " + b->auth_env + " is not set");
    b->auth_token = value;
  }
}

PipelineConfig config_from_json(const json& j, const std::string& base_dir) {
  try {
    if (!j.is_object()) throw ParseError("pipeline config must be a JSON object");
    reject_unknown(j, {"taxonomy", "backends", "models", "generation", "image_size", "output_dir", "formats"},
                   "config");
    PipelineConfig c;
    c.taxonomy_path = resolve(j.value("taxonomy", ""), base_dir);
    if (j.contains("backends")) {
      const json& b = j.at("backends");
      reject_unknown(b, {"planner", "caption", "image", "mesh"}, "backends");
      if (b.contains("planner")) c.planner = backend_from_json(b.at("planner"), "planner");
      if (b.contains("caption")) c.caption = backend_from_json(b.at("caption"), "caption");
      if (b.contains("image")) c.image = backend_from_json(b.at("image"), "image");
      if (b.contains("mesh")) c.mesh = backend_from_json(b.at("mesh"), "mesh");
    }
    if (j.contains("models")) {
      const json& m = j.at("models");
      reject_unknown(m, {"rvq", "generator"}, "models");
      c.rvq_checkpoint = resolve(m.value("rvq", ""), base_dir);
      c.generator_checkpoint = resolve(m.value("generator", ""), base_dir);
    }
    if (j.contains("generation")) {
      const json& g = j.at("generation");
      reject_unknown(g, {"frames", "seed", "iterations", "temperature"}, "generation");
      c.generation.frames = g.value("frames", c.generation.frames);
      c.generation.seed = g.value("seed", c.generation.seed);
      c.generation.iterations = g.value("iterations", c.generation.iterations);
      c.generation.temperature = g.value("temperature", c.generation.temperature);
    }
    c.image_size = j.value("image_size", c.image_size);
    c.output_dir = resolve(j.value("output_dir", c.output_dir), base_dir);
    if (j.contains("formats")) {
      c.formats.clear();
      for (const auto& f : j.at("formats")) c.formats.push_back(avatar::export_format_from_string(f.get<std::string>()));
    }
    return c;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed pipeline config: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("malformed pipeline config: ") + e.what());
  }
}

json config_to_json(const PipelineConfig& c) {
  json formats = json::array();
  for (const auto f : c.formats) formats.push_back(format_name(f));
  return {{"taxonomy", c.taxonomy_path},
          {"backends",
           {{"planner", backend_to_json(c.planner)},
            {"caption", backend_to_json(c.caption)},
            {"image", backend_to_json(c.image)},
            {"mesh", backend_to_json(c.mesh)}}},
          {"models", {{"rvq", c.rvq_checkpoint}, {"generator", c.generator_checkpoint}}},
          {"generation",
           {{"frames", c.generation.frames},
            {"seed", c.generation.seed},
            {"iterations", c.generation.iterations},
            {"temperature", c.generation.temperature}}},
          {"image_size", c.image_size},
          {"output_dir", c.output_dir},
          {"formats", formats}};
}

PipelineConfig load_config(const std::string& path) {
  std::string text;
  try {
    text = io::read_file_text(path);
  } catch (const Error& e) {
    throw IoError("cannot read config " + path + ": " + e.what());
  }
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("config " + path + " is not valid JSON: " + e.what());
  }
  const std::string base = fs::path(path).parent_path().string();
  PipelineConfig config = config_from_json(j, base.empty() ? "." : base);
  config.resolve_auth();
  config.validate();
  return config;
}

}  // namespace critter::pipeline
