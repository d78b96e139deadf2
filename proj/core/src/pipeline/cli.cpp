#include "critter/pipeline/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>

#include "critter/gen/generator.hpp"
#include "critter/metrics/report.hpp"
#include "critter/metrics/space.hpp"
#include "critter/motion/bvh.hpp"
#include "critter/pipeline/config.hpp"
#include "critter/pipeline/pipeline.hpp"
#include "critter/planner/evaluation.hpp"
#include "critter/util/binary_io.hpp"
#include "critter/util/error.hpp"
#include "critter/util/hash.hpp"
#include "critter/zoogen/dataset.hpp"

namespace critter::pipeline {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json read_json(const std::string& path) {
  const std::string text = io::read_file_text(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(path + " is not valid JSON: " + e.what());
  }
}

void write_json(const std::string& path, const json& j) { io::write_file_atomic(path, j.dump(2) + "\n"); }

PipelineConfig config_or_defaults(const std::string& path) {
  if (!path.empty()) return load_config(path);
  PipelineConfig config;
  config.validate();
  return config;
}

// --- dataset state: sources plus review queue

struct SourceRef {
  std::string id, animal, motion, bvh;
};

std::vector<SourceRef> sources_from_json(const json& j, const std::string& base_dir) {
  std::vector<SourceRef> out;
  try {
    for (const auto& s : j) {
      SourceRef r{s.at("id"), s.at("animal"), s.at("motion"), s.at("bvh")};
      if (!fs::path(r.bvh).is_absolute()) r.bvh = fs::absolute(fs::path(base_dir) / r.bvh).lexically_normal().string();
      out.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed source list: ") + e.what());
  }
  if (out.empty()) throw InvalidArgument("source list is empty");
  return out;
}

json sources_to_json(const std::vector<SourceRef>& sources) {
  json a = json::array();
  for (const auto& s : sources) a.push_back({{"id", s.id}, {"animal", s.animal}, {"motion", s.motion}, {"bvh", s.bvh}});
  return a;
}

std::vector<zoogen::SourceClip> load_sources(const std::vector<SourceRef>& refs) {
  std::vector<zoogen::SourceClip> out;
  for (const auto& r : refs) out.push_back({r.id, r.animal, r.motion, motion::load_bvh(r.bvh)});
  return out;
}

std::vector<zoogen::AugmentOp> default_grid(std::uint64_t seed) {
  return {zoogen::MirrorOp{}, zoogen::TimeWarpOp{0.8}, zoogen::TimeWarpOp{1.25}, zoogen::JitterOp{1.0, seed}};
}

std::string dir_of(const std::string& path) {
  const std::string d = fs::path(path).parent_path().string();
  return d.empty() ? "." : d;
}

// --- commands

int cmd_plan(const std::string& query, const std::string& config_path, const std::string& taxonomy, bool as_json,
             std::ostream& out) {
  PipelineConfig config = config_or_defaults(config_path);
  if (!taxonomy.empty()) config.taxonomy_path = taxonomy;
  const Pipeline pipeline(config);
  const auto d = pipeline.planner().plan(query);
  if (as_json) {
    json j = {{"animal", d.animal},
              {"motion", d.motion},
              {"motion_prompt", d.motion_prompt},
              {"avatar_prompt", d.avatar_prompt},
              {"source", std::string(planner::to_string(d.source))}};
    if (d.fallback_reason) j["fallback_reason"] = *d.fallback_reason;
    out << j.dump(2) << "\n";
  } else {
    out << "animal: " << d.animal << "\n"
        << "motion: " << d.motion << "\n"
        << "motion prompt: " << d.motion_prompt << "\n"
        << "avatar prompt: " << d.avatar_prompt << "\n"
        << "source: " << planner::to_string(d.source) << "\n";
    if (d.fallback_reason) out << "fallback: " << *d.fallback_reason << "\n";
  }
  return kExitOk;
}

struct GenArgs {
  std::string query, config, output_dir, run_name;
  std::optional<int> frames;
  bool keep_partial = false;
  bool verbose = false;
};

int cmd_gen(const GenArgs& a, std::optional<std::uint64_t> seed, std::ostream& out, std::ostream& err) {
  PipelineConfig config = config_or_defaults(a.config);
  if (seed) config.generation.seed = *seed;
  if (a.frames) config.generation.frames = *a.frames;
  if (!a.output_dir.empty()) config.output_dir = a.output_dir;
  config.validate();
  for (const auto& w : config.warnings) err << "warning: " << w << "\n";
  RunOptions options;
  options.keep_partial = a.keep_partial;
  options.run_name = a.run_name;
  if (a.verbose) options.log = [&err](const json& line) { err << line.dump() << "\n"; };
  const PipelineResult r = run_pipeline(a.query, config, options);
  out << "animal: " << r.decision.animal << "\n"
      << "motion: " << r.decision.motion << "\n"
      << "source: " << planner::to_string(r.decision.source) << "\n"
      << "run: " << r.run_dir << "\n";
  for (const auto& e : r.exports) out << "export: " << e << "\n";
  return kExitOk;
}

struct BuildArgs {
  std::string sources, state, grid, config;
  std::size_t budget = 16;
  std::size_t max_in_flight = 4;
};

int cmd_dataset_build(const BuildArgs& a, std::uint64_t seed, std::ostream& out, std::ostream& err) {
  const Pipeline pipeline(config_or_defaults(a.config));
  const auto refs = sources_from_json(read_json(a.sources), dir_of(a.sources));
  zoogen::BuildOptions options;
  options.budget = a.budget;
  options.max_in_flight = a.max_in_flight;
  if (a.grid.empty()) {
    options.grid = default_grid(seed);
  } else {
    for (const auto& op : read_json(a.grid)) options.grid.push_back(zoogen::op_from_json(op));
  }
  const auto built = zoogen::build_records(load_sources(refs), options, pipeline.captioner(), pipeline.refiner());
  for (const auto& w : built.warnings) err << "warning: " << w << "\n";
  zoogen::ReviewQueue queue;
  for (const auto& r : built.records) queue.add(r);
  json grid = json::array();
  for (const auto& op : options.grid) grid.push_back(zoogen::op_to_json(op));
  write_json(a.state, {{"sources", sources_to_json(refs)}, {"grid", grid}, {"queue", queue.to_json()}});
  out << "records: " << built.records.size() << " (pending review)\n";
  return kExitOk;
}

struct ReviewArgs {
  std::string state, verdict, reviewer;
  std::vector<std::string> ids;
  bool all = false;
};

int cmd_dataset_review(const ReviewArgs& a, std::ostream& out) {
  json state = read_json(a.state);
  zoogen::ReviewQueue queue = zoogen::ReviewQueue::from_json(state.at("queue"));
  const zoogen::ReviewState verdict = a.verdict == "approve" ? zoogen::ReviewState::kApproved
                                      : a.verdict == "reject" ? zoogen::ReviewState::kRejected
                                                              : throw InvalidArgument("verdict must be approve or reject");
  std::vector<std::string> ids = a.ids;
  if (a.all) {
    for (const auto& r : queue.with_state(zoogen::ReviewState::kPending)) ids.push_back(r.id);
  }
  if (ids.empty()) throw InvalidArgument("no records selected; pass --id or --all");
  for (const auto& id : ids) queue.review(id, verdict, a.reviewer);
  state["queue"] = queue.to_json();
  write_json(a.state, state);
  out << "reviewed: " << ids.size() << "\n";
  return kExitOk;
}

int cmd_dataset_emit(const std::string& state_path, const std::string& out_dir, std::ostream& out) {
  const json state = read_json(state_path);
  const zoogen::ReviewQueue queue = zoogen::ReviewQueue::from_json(state.at("queue"));
  zoogen::AugmentContext context;
  for (auto& s : load_sources(sources_from_json(state.at("sources"), dir_of(state_path)))) {
    context.library.emplace(s.id, std::move(s.clip));
  }
  std::map<std::string, motion::MotionClip> clips;
  for (const auto& r : queue.with_state(zoogen::ReviewState::kApproved)) {
    clips.emplace(r.id, zoogen::replay_lineage(r.lineage, context));
  }
  const auto entries = zoogen::emit_dataset(queue, clips, out_dir);
  out << "emitted: " << entries.size() << " records to " << out_dir << "\n";
  return kExitOk;
}

int cmd_eval_planner(const std::string& dataset, const std::string& config_path, std::size_t max_in_flight,
                     bool as_json, std::ostream& out) {
  const Pipeline pipeline(config_or_defaults(config_path));
  const auto report = planner::evaluate_planner(planner::load_qa_dataset(dataset), pipeline.planner(), max_in_flight);
  if (as_json) {
    out << json{{"animal_acc", report.animal_acc},
                {"motion_acc", report.motion_acc},
                {"overall_acc", report.overall_acc},
                {"evaluated", report.evaluated}}
               .dump(2)
        << "\n";
    return kExitOk;
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "records: %zu\nanimal_acc: %.2f\nmotion_acc: %.2f\noverall_acc: %.2f\n",
                report.evaluated, report.animal_acc, report.motion_acc, report.overall_acc);
  out << buf;
  return kExitOk;
}

struct EvalMotionArgs {
  std::string manifest, space, config, json_out;
  bool generate = false;
  metrics::EvalConfig eval;
};

int cmd_eval_motion(EvalMotionArgs a, std::optional<std::uint64_t> seed, std::ostream& out) {
  if (seed) a.eval.seed = *seed;
  const auto records = zoogen::load_dataset(a.manifest);
  metrics::EmbeddingSpace space = [&] {
    if (!a.space.empty()) return metrics::EmbeddingSpace::load(a.space);
    metrics::SpaceConfig sc;
    sc.seed = a.eval.seed;
    return metrics::train_eval_space(metrics::examples_from_dataset(a.manifest), sc);
  }();
  std::optional<Pipeline> pipeline;
  if (a.generate) pipeline.emplace(config_or_defaults(a.config));
  std::vector<metrics::EvalSample> samples;
  for (const auto& r : records) {
    metrics::EvalSample s{r.entry.animal, r.entry.caption, r.features, std::nullopt};
    if (pipeline) {
      const int frames = r.features.num_frames();
      const Models models = pipeline->config().rvq_checkpoint.empty() ? toy_models(r.entry.animal, frames)
                                                                     : pipeline->models_for(r.entry.animal);
      gen::GenerationOptions opts;
      opts.frames = frames;
      opts.seed = a.eval.seed ^ fnv1a64(r.entry.id);
      opts.iterations = pipeline->config().generation.iterations;
      opts.temperature = pipeline->config().generation.temperature;
      s.generated = motion::to_features(gen::generate_motion(r.entry.caption, *models.rvq, *models.generator, opts));
    }
    samples.push_back(std::move(s));
  }
  const auto report = metrics::evaluate_corpus(samples, space, a.eval);
  out << report.to_table();
  for (const auto& s : report.metadata.skipped) out << "skipped: " << s << "\n";
  if (!a.json_out.empty()) write_json(a.json_out, report.to_json());
  return kExitOk;
}

std::vector<motion::FeatureMatrix> uniform_features(const std::vector<zoogen::LoadedRecord>& records,
                                                     const std::string& animal) {
  std::vector<motion::FeatureMatrix> out;
  for (const auto& r : records) {
    if (!animal.empty() && r.entry.animal != animal) continue;
    if (!out.empty() && !(r.features.spec.skeleton == out.front().spec.skeleton)) {
      throw InvalidArgument("records use different skeletons; select one with --animal");
    }
    out.push_back(r.features);
  }
  if (out.empty()) throw InvalidArgument("no records to train on");
  return out;
}

struct TrainRvqArgs {
  std::string manifest, out, animal;
  gen::RvqConfig rvq;
};

int cmd_train_rvq(TrainRvqArgs a, std::optional<std::uint64_t> seed, std::ostream& out) {
  if (seed) a.rvq.seed = *seed;
  const auto data = uniform_features(zoogen::load_dataset(a.manifest), a.animal);
  const auto result = gen::train_rvq(data, a.rvq);
  result.model.save(a.out);
  char buf[160];
  std::snprintf(buf, sizeof buf, "clips: %zu\nrecon_mse: %.6f\nquant_mse: %.6f\n", data.size(),
                result.report.recon_mse, result.report.quant_mse);
  out << buf << "saved: " << a.out << "\n";
  return kExitOk;
}

struct TrainGenArgs {
  std::string manifest, rvq, out, animal;
  gen::TransformerConfig transformer;
  gen::GenTrainConfig train;
};

int cmd_train_generator(TrainGenArgs a, std::optional<std::uint64_t> seed, std::ostream& out) {
  if (seed) {
    a.transformer.seed = *seed;
    a.train.seed = *seed;
  }
  const gen::RvqModel rvq = gen::RvqModel::load(a.rvq);
  a.transformer.codebook_size = rvq.config().codebook_size;
  a.transformer.residual_layers = rvq.config().residual_layers;
  std::vector<gen::TokenGrid> tokens;
  std::vector<std::string> captions;
  for (const auto& r : zoogen::load_dataset(a.manifest)) {
    if (!a.animal.empty() && r.entry.animal != a.animal) continue;
    if (!(r.features.spec.skeleton == rvq.spec().skeleton)) continue;
    if (r.features.num_frames() < rvq.config().downsample) continue;
    tokens.push_back(rvq.tokenize(r.features.data));
    captions.push_back(r.entry.caption);
  }
  if (tokens.empty()) throw InvalidArgument("no records match the RVQ model's skeleton");
  int longest = 1;
  for (const auto& t : tokens) longest = std::max(longest, t.length());
  a.transformer.max_len = std::max(a.transformer.max_len, longest);
  gen::GeneratorModel model(a.transformer);
  std::vector<Eigen::VectorXd> texts;
  for (const auto& c : captions) texts.push_back(model.text_encoder().embed(c));
  const auto base = gen::train_masked(model, tokens, texts, a.train);
  const auto residual = gen::train_residual(model, tokens, texts, a.train);
  model.save(a.out);
  char buf[160];
  std::snprintf(buf, sizeof buf, "sequences: %zu\nmasked_loss: %.4f\nresidual_loss: %.4f\n", tokens.size(),
                base.epoch_loss.empty() ? 0.0 : base.epoch_loss.back(),
                residual.epoch_loss.empty() ? 0.0 : residual.epoch_loss.back());
  out << buf << "saved: " << a.out << "\n";
  return kExitOk;
}

int cmd_train_space(const std::string& manifest, const std::string& path, metrics::SpaceConfig config,
                    std::optional<std::uint64_t> seed, std::ostream& out) {
  if (seed) config.seed = *seed;
  metrics::SpaceTrainLog log;
  const auto space = metrics::train_eval_space(metrics::examples_from_dataset(manifest), config, &log);
  space.save(path);
  out << "provenance: " << metrics::to_string(space.provenance()) << "\n";
  if (!log.epoch_loss.empty()) out << "final_loss: " << log.epoch_loss.back() << "\n";
  out << "saved: " << path << "\n";
  return kExitOk;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"critter: text-driven animal motion and avatar pipeline", "critter"};
  app.require_subcommand(1);
  app.fallthrough();
  std::optional<std::uint64_t> seed;
  app.add_option("--seed", seed, "Seed for every random choice");

  std::function<int()> action;

  // plan
  std::string plan_query, plan_config, plan_taxonomy;
  bool plan_json = false;
  auto* plan = app.add_subcommand("plan", "Map a query to animal and motion categories");
  plan->add_option("query", plan_query, "User query")->required();
  plan->add_option("--config", plan_config, "Pipeline config (JSON)");
  plan->add_option("--taxonomy", plan_taxonomy, "Taxonomy file (JSON)");
  plan->add_flag("--json", plan_json, "Print the decision as JSON");
  plan->callback([&] { action = [&] { return cmd_plan(plan_query, plan_config, plan_taxonomy, plan_json, out); }; });

  // gen
  GenArgs gen_args;
  auto* gen_cmd = app.add_subcommand("gen", "Run the full query-to-animated-avatar pipeline");
  gen_cmd->add_option("query", gen_args.query, "User query")->required();
  gen_cmd->add_option("--config", gen_args.config, "Pipeline config (JSON); all mocks when omitted");
  gen_cmd->add_option("--frames", gen_args.frames, "Frames to generate");
  gen_cmd->add_option("--output-dir", gen_args.output_dir, "Parent of the run directory");
  gen_cmd->add_option("--run-name", gen_args.run_name, "Run directory name");
  gen_cmd->add_flag("--keep-partial", gen_args.keep_partial, "Keep artifacts of a failed run");
  gen_cmd->add_flag("--verbose", gen_args.verbose, "Print stage logs to stderr");
  gen_cmd->callback([&] { action = [&] { return cmd_gen(gen_args, seed, out, err); }; });

  // dataset
  auto* dataset = app.add_subcommand("dataset", "Build, review and emit the text-motion dataset");
  dataset->require_subcommand(1);
  BuildArgs build_args;
  auto* build = dataset->add_subcommand("build", "Augment and caption source clips into a review state file");
  build->add_option("--sources", build_args.sources, "JSON list of {id, animal, motion, bvh}")->required();
  build->add_option("--state", build_args.state, "State file to write")->required();
  build->add_option("--grid", build_args.grid, "JSON list of augmentation ops");
  build->add_option("--budget", build_args.budget, "Variants per source")->check(CLI::PositiveNumber);
  build->add_option("--max-in-flight", build_args.max_in_flight, "Concurrent caption requests")
      ->check(CLI::PositiveNumber);
  build->add_option("--config", build_args.config, "Pipeline config (caption backend)");
  build->callback([&] { action = [&] { return cmd_dataset_build(build_args, seed.value_or(0), out, err); }; });

  ReviewArgs review_args;
  auto* review = dataset->add_subcommand("review", "Record verdicts for pending records");
  review->add_option("--state", review_args.state, "State file")->required();
  review->add_option("--id", review_args.ids, "Record id (repeatable)");
  review->add_flag("--all", review_args.all, "Every pending record");
  review->add_option("--verdict", review_args.verdict, "approve or reject")
      ->required()
      ->check(CLI::IsMember({"approve", "reject"}));
  review->add_option("--reviewer", review_args.reviewer, "Reviewer name")->required();
  review->callback([&] { action = [&] { return cmd_dataset_review(review_args, out); }; });

  std::string emit_state, emit_out;
  auto* emit = dataset->add_subcommand("emit", "Write approved records as a dataset directory");
  emit->add_option("--state", emit_state, "State file")->required();
  emit->add_option("--out", emit_out, "Dataset directory")->required();
  emit->callback([&] { action = [&] { return cmd_dataset_emit(emit_state, emit_out, out); }; });

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate the planner or motion quality");
  eval->require_subcommand(1);
  std::string qa_path, eval_planner_config;
  std::size_t eval_in_flight = 1;
  bool eval_planner_json = false;
  auto* eval_planner = eval->add_subcommand("planner", "Planner accuracy on a Q&A dataset");
  eval_planner->add_option("--dataset", qa_path, "Q&A JSON")->required();
  eval_planner->add_option("--config", eval_planner_config, "Pipeline config (planner backend)");
  eval_planner->add_option("--max-in-flight", eval_in_flight, "Concurrent plans")->check(CLI::PositiveNumber);
  eval_planner->add_flag("--json", eval_planner_json, "Print JSON");
  eval_planner->callback([&] {
    action = [&] { return cmd_eval_planner(qa_path, eval_planner_config, eval_in_flight, eval_planner_json, out); };
  });

  EvalMotionArgs motion_args;
  auto* eval_motion = eval->add_subcommand("motion", "R-precision, FID, MultiModal-Dist and Diversity");
  eval_motion->add_option("--manifest", motion_args.manifest, "Dataset directory")->required();
  eval_motion->add_option("--space", motion_args.space, "Embedding space JSON; trained on the manifest if omitted");
  eval_motion->add_flag("--generate", motion_args.generate, "Also score clips generated from each caption");
  eval_motion->add_option("--config", motion_args.config, "Pipeline config (models)");
  eval_motion->add_option("--pool", motion_args.eval.pool_size, "R-precision pool size")->check(CLI::PositiveNumber);
  eval_motion->add_option("--pairs", motion_args.eval.diversity_pairs, "Diversity pairs")->check(CLI::PositiveNumber);
  eval_motion->add_option("--json", motion_args.json_out, "Write the report as JSON");
  eval_motion->callback([&] { action = [&] { return cmd_eval_motion(motion_args, seed, out); }; });

  // train
  auto* train = app.add_subcommand("train", "Train models from an emitted dataset");
  train->require_subcommand(1);
  TrainRvqArgs rvq_args;
  auto* train_rvq = train->add_subcommand("rvq", "Residual VQ-VAE tokenizer");
  train_rvq->add_option("--manifest", rvq_args.manifest, "Dataset directory")->required();
  train_rvq->add_option("--out", rvq_args.out, "Checkpoint path")->required();
  train_rvq->add_option("--animal", rvq_args.animal, "Only records of this animal");
  train_rvq->add_option("--epochs", rvq_args.rvq.epochs, "Epochs")->check(CLI::NonNegativeNumber);
  train_rvq->add_option("--codebook-size", rvq_args.rvq.codebook_size, "K")->check(CLI::PositiveNumber);
  train_rvq->add_option("--residual-layers", rvq_args.rvq.residual_layers, "V")->check(CLI::NonNegativeNumber);
  train_rvq->add_option("--latent-dim", rvq_args.rvq.latent_dim, "d")->check(CLI::PositiveNumber);
  train_rvq->add_option("--downsample", rvq_args.rvq.downsample, "f")->check(CLI::PositiveNumber);
  train_rvq->callback([&] { action = [&] { return cmd_train_rvq(rvq_args, seed, out); }; });

  TrainGenArgs gen_train_args;
  auto* train_gen = train->add_subcommand("generator", "Masked and residual transformers");
  train_gen->add_option("--manifest", gen_train_args.manifest, "Dataset directory")->required();
  train_gen->add_option("--rvq", gen_train_args.rvq, "RVQ checkpoint")->required();
  train_gen->add_option("--out", gen_train_args.out, "Checkpoint path")->required();
  train_gen->add_option("--animal", gen_train_args.animal, "Only records of this animal");
  train_gen->add_option("--epochs", gen_train_args.train.epochs, "Epochs")->check(CLI::NonNegativeNumber);
  train_gen->add_option("--width", gen_train_args.transformer.width, "Model width")->check(CLI::PositiveNumber);
  train_gen->add_option("--layers", gen_train_args.transformer.layers, "Transformer blocks")
      ->check(CLI::PositiveNumber);
  train_gen->callback([&] { action = [&] { return cmd_train_generator(gen_train_args, seed, out); }; });

  std::string space_manifest, space_out;
  metrics::SpaceConfig space_config;
  bool space_deterministic = false;
  auto* train_space = train->add_subcommand("eval-space", "Contrastive text-motion evaluator");
  train_space->add_option("--manifest", space_manifest, "Dataset directory")->required();
  train_space->add_option("--out", space_out, "Embedding space JSON")->required();
  train_space->add_option("--epochs", space_config.epochs, "Epochs")->check(CLI::NonNegativeNumber);
  train_space->add_flag("--deterministic", space_deterministic, "Random-projection towers, no training");
  train_space->callback([&] {
    action = [&] {
      space_config.train = !space_deterministic;
      return cmd_train_space(space_manifest, space_out, space_config, seed, out);
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }
  try {
    return action ? action() : kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace critter::pipeline
