#include "critter/zoogen/dataset.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>

#include "critter/motion/bvh.hpp"
#include "critter/util/binary_io.hpp"
#include "critter/util/error.hpp"
#include "critter/util/parallel.hpp"

namespace critter::zoogen {

namespace fs = std::filesystem;

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

nlohmann::json lineage_to_json(const Lineage& l) {
  nlohmann::json ops = nlohmann::json::array();
  for (const auto& op : l.ops) ops.push_back(op_to_json(op));
  return {{"source", l.source}, {"ops", ops}};
}

Lineage lineage_from_json(const nlohmann::json& j) {
  Lineage l;
  l.source = j.at("source").get<std::string>();
  for (const auto& op : j.at("ops")) l.ops.push_back(op_from_json(op));
  return l;
}

std::string file_stem(const std::string& id, std::set<std::string>& used) {
  std::string s;
  for (const char c : id) s += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.') ? c : '_';
  std::string out = s;
  for (int k = 2; !used.insert(out).second; ++k) out = s + "-" + std::to_string(k);
  return out;
}

// One-frame rest pose of a skeleton, used as the skeleton file.
std::string skeleton_bvh(const motion::Skeleton& sk, double frame_time) {
  return motion::write_bvh(motion::MotionClip(sk, frame_time, Eigen::MatrixXd::Zero(1, sk.num_channels())));
}

}  // namespace

std::string_view to_string(ReviewState s) {
  switch (s) {
    case ReviewState::kPending:
      return "pending";
    case ReviewState::kApproved:
      return "approved";
    case ReviewState::kRejected:
      return "rejected";
  }
  return "unknown";
}

ReviewState review_state_from_string(std::string_view s) {
  if (s == "pending") return ReviewState::kPending;
  if (s == "approved") return ReviewState::kApproved;
  if (s == "rejected") return ReviewState::kRejected;
  throw ParseError("unknown review state '" + std::string(s) + "'");
}

nlohmann::json record_to_json(const TextMotionRecord& r) {
  return {{"id", r.id},
          {"animal", r.animal},
          {"motion", r.motion},
          {"caption", r.caption},
          {"caption_refined", r.caption_refined},
          {"feature_file", r.feature_file},
          {"num_frames", r.num_frames},
          {"review_state", to_string(r.review_state)},
          {"lineage", lineage_to_json(r.lineage)}};
}

TextMotionRecord record_from_json(const nlohmann::json& j) {
  try {
    TextMotionRecord r;
    r.id = j.at("id").get<std::string>();
    r.animal = j.at("animal").get<std::string>();
    r.motion = j.at("motion").get<std::string>();
    r.caption = j.value("caption", "");
    r.caption_refined = j.value("caption_refined", false);
    r.feature_file = j.value("feature_file", "");
    r.num_frames = j.value("num_frames", 0);
    r.review_state = review_state_from_string(j.value("review_state", "pending"));
    r.lineage = lineage_from_json(j.at("lineage"));
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("record: ") + e.what());
  }
}

void check_lineage(const std::vector<TextMotionRecord>& records) {
  std::map<std::string, std::vector<std::string>> edges;
  for (const auto& r : records) {
    if (r.lineage.source == r.id) throw InvalidArgument("record '" + r.id + "' is its own source");
    auto& e = edges[r.id];
    e.push_back(r.lineage.source);
    for (const auto& op : r.lineage.ops) {
      if (const auto* s = std::get_if<SpliceOp>(&op)) e.push_back(s->other);
    }
  }
  std::map<std::string, int> color;  // 1 on stack, 2 done
  std::function<void(const std::string&)> visit = [&](const std::string& id) {
    color[id] = 1;
    const auto it = edges.find(id);
    if (it != edges.end()) {
      for (const auto& next : it->second) {
        if (color[next] == 1) throw InvalidArgument("lineage cycle through '" + next + "'");
        if (color[next] == 0) visit(next);
      }
    }
    color[id] = 2;
  };
  for (const auto& r : records) {
    if (color[r.id] == 0) visit(r.id);
  }
}

motion::MotionClip replay_lineage(const Lineage& lineage, const AugmentContext& sources) {
  const auto it = sources.library.find(lineage.source);
  if (it == sources.library.end()) throw InvalidArgument("unknown lineage source '" + lineage.source + "'");
  return augment(it->second, lineage.ops, sources);
}

ReviewQueue::ReviewQueue(const ReviewQueue& other) {
  std::lock_guard lock(other.mutex_);
  records_ = other.records_;
  index_ = other.index_;
  audit_ = other.audit_;
}

ReviewQueue& ReviewQueue::operator=(const ReviewQueue& other) {
  if (this == &other) return *this;
  std::scoped_lock lock(mutex_, other.mutex_);
  records_ = other.records_;
  index_ = other.index_;
  audit_ = other.audit_;
  return *this;
}

void ReviewQueue::add(TextMotionRecord record) {
  std::lock_guard lock(mutex_);
  if (record.review_state != ReviewState::kPending) throw InvalidArgument("new records must be pending");
  if (index_.count(record.id) != 0) throw InvalidArgument("duplicate record id '" + record.id + "'");
  index_[record.id] = records_.size();
  records_.push_back(std::move(record));
}

std::size_t ReviewQueue::index_of(const std::string& id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) throw InvalidArgument("unknown record id '" + id + "'");
  return it->second;
}

void ReviewQueue::review(const std::string& id, ReviewState verdict, const std::string& reviewer, std::string when) {
  std::lock_guard lock(mutex_);
  auto& r = records_[index_of(id)];
  if (verdict == ReviewState::kPending) throw InvalidArgument("verdict must be approved or rejected");
  if (r.review_state != ReviewState::kPending) {
    throw Error("record '" + id + "' was already " + std::string(to_string(r.review_state)));
  }
  if (verdict == ReviewState::kApproved && r.caption.empty()) {
    throw InvalidArgument("record '" + id + "' has no caption and cannot be approved");
  }
  r.review_state = verdict;
  audit_.push_back({id, ReviewState::kPending, verdict, reviewer, when.empty() ? utc_now() : std::move(when)});
}

const TextMotionRecord& ReviewQueue::record(const std::string& id) const {
  std::lock_guard lock(mutex_);
  return records_[index_of(id)];
}

std::vector<TextMotionRecord> ReviewQueue::with_state(ReviewState state) const {
  std::lock_guard lock(mutex_);
  std::vector<TextMotionRecord> out;
  for (const auto& r : records_) {
    if (r.review_state == state) out.push_back(r);
  }
  return out;
}

nlohmann::json ReviewQueue::to_json() const {
  std::lock_guard lock(mutex_);
  nlohmann::json recs = nlohmann::json::array(), log = nlohmann::json::array();
  for (const auto& r : records_) recs.push_back(record_to_json(r));
  for (const auto& a : audit_) {
    log.push_back({{"record", a.record_id},
                   {"from", to_string(a.from)},
                   {"to", to_string(a.to)},
                   {"reviewer", a.reviewer},
                   {"when", a.when}});
  }
  return {{"records", recs}, {"audit", log}};
}

ReviewQueue ReviewQueue::from_json(const nlohmann::json& j) {
  ReviewQueue q;
  std::map<std::string, ReviewState> final_state;
  try {
    for (const auto& rj : j.at("records")) {
      TextMotionRecord r = record_from_json(rj);
      final_state[r.id] = r.review_state;
      r.review_state = ReviewState::kPending;
      q.add(std::move(r));
    }
    for (const auto& aj : j.at("audit")) {
      const std::string id = aj.at("record").get<std::string>();
      if (review_state_from_string(aj.at("from").get<std::string>()) != ReviewState::kPending) {
        throw ParseError("audit entry for '" + id + "' does not start from pending");
      }
      q.review(id, review_state_from_string(aj.at("to").get<std::string>()), aj.at("reviewer").get<std::string>(),
               aj.at("when").get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("review queue: ") + e.what());
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(std::string("review queue: audit log does not replay: ") + e.what());
  }
  for (const auto& r : q.records_) {
    if (r.review_state != final_state[r.id]) {
      throw ParseError("review queue: state of '" + r.id + "' disagrees with the audit log");
    }
  }
  return q;
}

BuildResult build_records(const std::vector<SourceClip>& sources, const BuildOptions& options,
                          const CaptionBackend& captioner, const RefineBackend& refiner) {
  AugmentContext ctx;
  ctx.pairing = options.pairing;
  for (const auto& s : sources) {
    if (!ctx.library.emplace(s.id, s.clip).second) throw InvalidArgument("duplicate source id '" + s.id + "'");
  }
  BuildResult out;
  std::vector<motion::MotionClip> clips;
  for (const auto& s : sources) {
    int k = 0;
    if (options.include_source) {
      out.records.push_back({s.id + "/0", s.animal, s.motion, "", false, "", s.clip.num_frames(),
                             ReviewState::kPending, {s.id, {}}});
      clips.push_back(s.clip);
    }
    for (auto& v : enumerate_variants(s.clip, options.grid, options.budget, ctx)) {
      ++k;
      out.records.push_back({s.id + "/" + std::to_string(k), s.animal, s.motion, "", false, "", v.clip.num_frames(),
                             ReviewState::kPending, {s.id, v.ops}});
      clips.push_back(std::move(v.clip));
    }
  }
  std::vector<std::string> warn(out.records.size());
  parallel_for(out.records.size(), options.max_in_flight, [&](std::size_t i) {
    auto& r = out.records[i];
    try {
      r.caption = caption_motion(clips[i], r.animal, r.motion, captioner);
    } catch (const Error& e) {
      warn[i] = r.id + ": caption failed, left pending without caption: " + e.what();
      return;
    }
    const RefineResult refined = refine_caption(r.caption, refiner);
    r.caption = refined.text;
    r.caption_refined = refined.refined;
    if (!refined.refined) warn[i] = r.id + ": caption kept unrefined: " + refined.note;
  });
  for (auto& w : warn) {
    if (!w.empty()) out.warnings.push_back(std::move(w));
  }
  for (std::size_t i = 0; i < out.records.size(); ++i) out.clips.emplace(out.records[i].id, std::move(clips[i]));
  return out;
}

std::vector<ManifestEntry> emit_dataset(const ReviewQueue& queue, const std::map<std::string, motion::MotionClip>& clips,
                                        const std::string& out_dir) {
  const auto approved = queue.with_state(ReviewState::kApproved);
  if (approved.empty()) throw InvalidArgument("emit_dataset: no approved records");
  for (const auto& r : approved) {
    if (clips.count(r.id) == 0) throw InvalidArgument("emit_dataset: no clip for '" + r.id + "'");
  }
  const fs::path root(out_dir);
  fs::create_directories(root / "features");
  fs::create_directories(root / "captions");
  fs::create_directories(root / "skeletons");

  std::set<std::string> used;
  std::vector<std::pair<motion::Skeleton, std::string>> skeletons;
  std::vector<ManifestEntry> manifest;
  std::string lines;
  for (const auto& r : approved) {
    const motion::MotionClip& clip = clips.at(r.id);
    std::string skel_file;
    for (const auto& [sk, file] : skeletons) {
      if (sk == clip.skeleton()) skel_file = file;
    }
    if (skel_file.empty()) {
      skel_file = "skeletons/" + std::to_string(skeletons.size()) + ".bvh";
      io::write_file_atomic((root / skel_file).string(), skeleton_bvh(clip.skeleton(), clip.frame_time()));
      skeletons.emplace_back(clip.skeleton(), skel_file);
    }
    const std::string stem = file_stem(r.id, used);
    ManifestEntry e{r.id,
                    r.animal,
                    r.motion,
                    r.caption,
                    "features/" + stem + ".mafm",
                    "captions/" + stem + ".txt",
                    skel_file,
                    clip.num_frames(),
                    clip.frame_time(),
                    r.lineage};
    const auto features = motion::to_features(clip);
    io::write_file_atomic((root / e.features_file).string(), motion::encode_feature_file(features.data));
    io::write_file_atomic((root / e.caption_file).string(), r.caption + "\n");
    const nlohmann::json line = {{"id", e.id},
                                 {"animal", e.animal},
                                 {"motion", e.motion},
                                 {"caption", e.caption},
                                 {"files", {{"features", e.features_file}, {"caption", e.caption_file}, {"skeleton", e.skeleton_file}}},
                                 {"frames", e.frames},
                                 {"frame_time", e.frame_time},
                                 {"lineage", lineage_to_json(e.lineage)}};
    lines += line.dump() + "\n";
    manifest.push_back(std::move(e));
  }
  io::write_file_atomic((root / "manifest.jsonl").string(), lines);
  return manifest;
}

std::vector<ManifestEntry> load_manifest(const std::string& dataset_dir) {
  const std::string text = io::read_file_text((fs::path(dataset_dir) / "manifest.jsonl").string());
  std::istringstream in(text);
  std::vector<ManifestEntry> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ManifestEntry e;
      e.id = j.at("id").get<std::string>();
      e.animal = j.at("animal").get<std::string>();
      e.motion = j.at("motion").get<std::string>();
      e.caption = j.at("caption").get<std::string>();
      e.features_file = j.at("files").at("features").get<std::string>();
      e.caption_file = j.at("files").at("caption").get<std::string>();
      e.skeleton_file = j.at("files").at("skeleton").get<std::string>();
      e.frames = j.at("frames").get<int>();
      e.frame_time = j.at("frame_time").get<double>();
      e.lineage = lineage_from_json(j.at("lineage"));
      out.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw ParseError(std::string("manifest: ") + ex.what(), lineno, 1);
    } catch (const ParseError& ex) {
      throw ParseError(std::string("manifest: ") + ex.what(), lineno, 1);
    }
  }
  return out;
}

std::vector<LoadedRecord> load_dataset(const std::string& dataset_dir) {
  const fs::path root(dataset_dir);
  std::map<std::string, motion::Skeleton> skeletons;
  std::vector<LoadedRecord> out;
  for (auto& e : load_manifest(dataset_dir)) {
    auto it = skeletons.find(e.skeleton_file);
    if (it == skeletons.end()) {
      it = skeletons.emplace(e.skeleton_file, motion::load_bvh((root / e.skeleton_file).string()).skeleton()).first;
    }
    motion::FeatureMatrix fm;
    fm.spec.skeleton = it->second;
    fm.data = motion::read_feature_file((root / e.features_file).string());
    fm.frame_time = e.frame_time;
    if (fm.data.rows() != e.frames || fm.data.cols() != fm.spec.dim()) {
      throw ParseError("dataset: feature file " + e.features_file + " does not match its manifest entry");
    }
    out.push_back({std::move(e), std::move(fm)});
  }
  return out;
}

}  // namespace critter::zoogen
