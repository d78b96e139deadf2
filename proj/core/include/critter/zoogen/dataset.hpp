#pragma once

#include <map>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "critter/motion/features.hpp"
#include "critter/zoogen/augment.hpp"
#include "critter/zoogen/caption.hpp"

namespace critter::zoogen {

enum class ReviewState { kPending, kApproved, kRejected };

std::string_view to_string(ReviewState s);
/// Throws ParseError for anything but pending/approved/rejected.
ReviewState review_state_from_string(std::string_view s);

struct Lineage {
  std::string source;  // id of the source clip
  std::vector<AugmentOp> ops;
};

struct TextMotionRecord {
  std::string id;
  std::string animal;
  std::string motion;
  std::string caption;
  bool caption_refined = false;
  std::string feature_file;  // set on emission
  int num_frames = 0;
  ReviewState review_state = ReviewState::kPending;
  Lineage lineage;
};

nlohmann::json record_to_json(const TextMotionRecord& r);
TextMotionRecord record_from_json(const nlohmann::json& j);

/// Throws InvalidArgument if the source/splice references among records form
/// a cycle or a record names itself as its source.
void check_lineage(const std::vector<TextMotionRecord>& records);

/// Clip of a record rebuilt from its source and ops.
motion::MotionClip replay_lineage(const Lineage& lineage, const AugmentContext& sources);

struct AuditEntry {
  std::string record_id;
  ReviewState from = ReviewState::kPending;
  ReviewState to = ReviewState::kPending;
  std::string reviewer;
  std::string when;  // ISO 8601 UTC
};

/// Records under human review. Only pending -> approved and pending ->
/// rejected transitions exist; every verdict appends one audit entry.
/// Mutations are serialized by an internal lock.
class ReviewQueue {
 public:
  ReviewQueue() = default;
  ReviewQueue(const ReviewQueue& other);
  ReviewQueue& operator=(const ReviewQueue& other);

  /// New records must be pending with a unique id.
  void add(TextMotionRecord record);

  /// Throws InvalidArgument for an unknown id, a pending verdict, or
  /// approval of a record without caption; Error if the record was already
  /// reviewed. `when` defaults to the current UTC time.
  void review(const std::string& id, ReviewState verdict, const std::string& reviewer, std::string when = {});

  const std::vector<TextMotionRecord>& records() const { return records_; }
  const TextMotionRecord& record(const std::string& id) const;
  std::vector<TextMotionRecord> with_state(ReviewState state) const;
  const std::vector<AuditEntry>& audit() const { return audit_; }

  nlohmann::json to_json() const;
  /// Checks that the audit log replays onto the recorded states.
  static ReviewQueue from_json(const nlohmann::json& j);

 private:
  std::size_t index_of(const std::string& id) const;

  std::vector<TextMotionRecord> records_;
  std::map<std::string, std::size_t> index_;
  std::vector<AuditEntry> audit_;
  mutable std::mutex mutex_;
};

struct SourceClip {
  std::string id;
  std::string animal;
  std::string motion;
  motion::MotionClip clip;
};

struct BuildOptions {
  std::vector<AugmentOp> grid;
  std::size_t budget = 16;  // variants per source, besides the source itself
  bool include_source = true;
  std::size_t max_in_flight = 4;
  MirrorPairing pairing;
};

struct BuildResult {
  std::vector<TextMotionRecord> records;  // all pending
  std::map<std::string, motion::MotionClip> clips;
  std::vector<std::string> warnings;
};

/// Expands every source with enumerate_variants, then captions and refines
/// each clip. A failed caption leaves the record pending with an empty
/// caption and a warning. Record ids are "<source>/<k>", k = 0 for the
/// source itself.
BuildResult build_records(const std::vector<SourceClip>& sources, const BuildOptions& options,
                          const CaptionBackend& captioner, const RefineBackend& refiner);

struct ManifestEntry {
  std::string id;
  std::string animal;
  std::string motion;
  std::string caption;
  std::string features_file;  // relative to the dataset directory
  std::string caption_file;
  std::string skeleton_file;  // one-frame BVH of the skeleton
  int frames = 0;
  double frame_time = 0.0;
  Lineage lineage;
};

/// Writes features/<id>.mafm, captions/<id>.txt, skeletons/<k>.bvh and
/// manifest.jsonl (one JSON object per line) for the approved records.
/// Every file is written to a temporary name and renamed. Throws
/// InvalidArgument when no record is approved or an approved clip is
/// missing.
std::vector<ManifestEntry> emit_dataset(const ReviewQueue& queue, const std::map<std::string, motion::MotionClip>& clips,
                                        const std::string& out_dir);

std::vector<ManifestEntry> load_manifest(const std::string& dataset_dir);

struct LoadedRecord {
  ManifestEntry entry;
  motion::FeatureMatrix features;
};

/// Manifest plus every feature file, with each record's skeleton.
std::vector<LoadedRecord> load_dataset(const std::string& dataset_dir);

}  // namespace critter::zoogen
