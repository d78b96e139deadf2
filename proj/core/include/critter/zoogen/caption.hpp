#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "critter/motion/features.hpp"
#include "critter/motion/skeleton.hpp"
#include "critter/net/chat.hpp"

namespace critter::zoogen {

/// Root trajectory summary handed to caption backends in place of video.
struct MotionStats {
  double duration = 0.0;          // seconds, N * frame_time
  double path_length = 0.0;       // ground-plane distance travelled by the root
  double net_displacement = 0.0;  // ground-plane distance start to end
  double mean_speed = 0.0;        // path_length / duration
  double max_speed = 0.0;
  std::vector<double> speed_profile;  // mean speed over four equal time slices
  double heading_change = 0.0;        // degrees, net turn of the travel direction, counterclockwise about up
  double height_range = 0.0;          // max - min root height
};

MotionStats compute_motion_stats(const motion::MotionClip& clip, motion::UpAxis up = motion::UpAxis::kY);

struct CaptionRequest {
  std::string animal;
  std::string motion;
  MotionStats stats;
};

class CaptionBackend {
 public:
  virtual ~CaptionBackend() = default;
  virtual std::string caption(const CaptionRequest& request) const = 0;
};

/// "a {animal} performs {motion} for {seconds}s" with one decimal.
class MockCaptionBackend final : public CaptionBackend {
 public:
  std::string caption(const CaptionRequest& request) const override;
};

/// Chat-completion captioner. The user message carries the labels and the
/// statistics; the reply is trimmed and must be non-empty (ParseError).
class ChatCaptionBackend final : public CaptionBackend {
 public:
  explicit ChatCaptionBackend(std::shared_ptr<const net::ChatBackend> chat) : chat_(std::move(chat)) {}
  std::string caption(const CaptionRequest& request) const override;

 private:
  std::shared_ptr<const net::ChatBackend> chat_;
};

std::vector<net::ChatMessage> caption_messages(const CaptionRequest& request);

/// Throws InvalidArgument for an empty category; backend errors propagate.
std::string caption_motion(const motion::MotionClip& clip, std::string_view animal, std::string_view motion,
                           const CaptionBackend& backend);

class RefineBackend {
 public:
  virtual ~RefineBackend() = default;
  virtual std::string refine(std::string_view text) const = 0;
};

/// Returns the text unchanged.
class MockRefineBackend final : public RefineBackend {
 public:
  std::string refine(std::string_view text) const override { return std::string(text); }
};

class ChatRefineBackend final : public RefineBackend {
 public:
  explicit ChatRefineBackend(std::shared_ptr<const net::ChatBackend> chat) : chat_(std::move(chat)) {}
  std::string refine(std::string_view text) const override;

 private:
  std::shared_ptr<const net::ChatBackend> chat_;
};

struct RefineResult {
  std::string text;
  bool refined = false;
  std::string note;  // why the original was kept
};

/// Asks the backend for a concise rewrite. The original is kept (refined =
/// false) on a transport or parse failure, an empty reply, or a reply longer
/// than twice the original. Throws InvalidArgument for empty input.
RefineResult refine_caption(std::string_view text, const RefineBackend& backend);

}  // namespace critter::zoogen
