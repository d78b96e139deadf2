#include "critter/motion/bvh.hpp"

#include <charconv>
#include <cstdio>
#include <string>
#include <vector>

#include "critter/util/binary_io.hpp"
#include "critter/util/error.hpp"

namespace critter::motion {

namespace {

struct Token {
  std::string_view text;
  int line;
  int column;
};

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> tokens;
  int line = 1;
  int column = 1;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c == '\n') {
      ++line;
      column = 1;
      ++i;
      continue;
    }
    if (c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v') {
      ++column;
      ++i;
      continue;
    }
    if (c == '{' || c == '}') {
      tokens.push_back({text.substr(i, 1), line, column});
      ++column;
      ++i;
      continue;
    }
    const std::size_t start = i;
    const int start_col = column;
    while (i < text.size()) {
      const char d = text[i];
      if (d == ' ' || d == '\t' || d == '\r' || d == '\n' || d == '\f' || d == '\v' || d == '{' || d == '}') break;
      ++i;
      ++column;
    }
    tokens.push_back({text.substr(start, i - start), line, start_col});
  }
  return tokens;
}

class Parser {
 public:
  explicit Parser(std::string_view text) : tokens_(tokenize(text)) {}

  MotionClip parse() {
    expect("HIERARCHY");
    const Token& root = next("ROOT");
    if (root.text != "ROOT") fail("expected ROOT, found '" + std::string(root.text) + "'", root);
    parse_joint(-1, root);
    if (!done() && peek().text == "ROOT") fail("multiple ROOT joints are not supported", peek());
    Skeleton skeleton(std::move(joints_));

    expect("MOTION");
    const Token& frames_kw = next("Frames:");
    if (frames_kw.text != "Frames:") fail("expected 'Frames:'", frames_kw);
    const Token& count_tok = next("frame count");
    const double count_value = number(count_tok);
    if (count_value < 1 || count_value != static_cast<double>(static_cast<long long>(count_value))) {
      fail("frame count must be a positive integer", count_tok);
    }
    const auto num_frames = static_cast<long long>(count_value);
    const Token& frame_kw = next("Frame Time:");
    const Token& time_kw = next("Frame Time:");
    if (frame_kw.text != "Frame" || time_kw.text != "Time:") fail("expected 'Frame Time:'", frame_kw);
    const Token& time_tok = next("frame time");
    const double frame_time = number(time_tok);
    if (!(frame_time > 0.0)) fail("frame time must be positive", time_tok);

    const int channels = skeleton.num_channels();
    Eigen::MatrixXd frames(num_frames, channels);
    long long row = 0;
    while (!done()) {
      const int line = peek().line;
      if (row >= num_frames) fail("more data rows than the declared " + std::to_string(num_frames) + " frames", peek());
      int col = 0;
      const Token* last = &peek();
      while (!done() && peek().line == line) {
        last = &tokens_[pos_++];
        if (col >= channels) fail("row has more values than the " + std::to_string(channels) + " declared channels", *last);
        frames(row, col++) = number(*last);
      }
      if (col != channels) {
        fail("row has " + std::to_string(col) + " values, hierarchy declares " + std::to_string(channels) +
                 " channels",
             *last);
      }
      ++row;
    }
    if (row != num_frames) {
      throw ParseError("header declares " + std::to_string(num_frames) + " frames but " + std::to_string(row) +
                           " data rows were found",
                       tokens_.empty() ? 0 : tokens_.back().line, 1);
    }
    return MotionClip(std::move(skeleton), frame_time, std::move(frames));
  }

 private:
  [[noreturn]] static void fail(const std::string& msg, const Token& at) { throw ParseError(msg, at.line, at.column); }

  bool done() const { return pos_ >= tokens_.size(); }

  const Token& peek() const { return tokens_[pos_]; }

  const Token& next(const char* what) {
    if (done()) {
      const int line = tokens_.empty() ? 1 : tokens_.back().line;
      throw ParseError(std::string("unexpected end of document, expected ") + what, line, 1);
    }
    return tokens_[pos_++];
  }

  void expect(std::string_view word) {
    const Token& t = next(std::string(word).c_str());
    if (t.text != word) fail("expected '" + std::string(word) + "', found '" + std::string(t.text) + "'", t);
  }

  static double number(const Token& t) {
    std::string_view s = t.text;
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
      fail("expected a number, found '" + std::string(t.text) + "'", t);
    }
    return v;
  }

  Eigen::Vector3d vec3() {
    Eigen::Vector3d v;
    for (int i = 0; i < 3; ++i) v[i] = number(next("offset component"));
    return v;
  }

  void parse_joint(int parent, const Token& keyword) {
    std::string name;
    while (!done() && peek().line == keyword.line && peek().text != "{") {
      if (!name.empty()) name += ' ';
      name += peek().text;
      ++pos_;
    }
    if (name.empty()) fail("joint without a name", keyword);
    expect("{");
    Joint joint;
    joint.name = name;
    joint.parent = parent;
    const int index = static_cast<int>(joints_.size());
    joints_.push_back(joint);
    bool have_offset = false;
    while (true) {
      const Token& t = next("'}'");
      if (t.text == "}") break;
      if (t.text == "OFFSET") {
        joints_[static_cast<std::size_t>(index)].offset = vec3();
        have_offset = true;
      } else if (t.text == "CHANNELS") {
        const Token& n_tok = next("channel count");
        const double n = number(n_tok);
        if (n < 0 || n > 6 || n != static_cast<int>(n)) fail("channel count must be 0..6", n_tok);
        std::vector<Channel> channels;
        for (int c = 0; c < static_cast<int>(n); ++c) {
          const Token& ct = next("channel name");
          const auto ch = channel_from_name(ct.text);
          if (!ch) fail("unknown channel '" + std::string(ct.text) + "'", ct);
          channels.push_back(*ch);
        }
        joints_[static_cast<std::size_t>(index)].channels = std::move(channels);
      } else if (t.text == "JOINT") {
        parse_joint(index, t);
      } else if (t.text == "End") {
        const Token& site = next("Site");
        if (site.text != "Site") fail("expected 'Site' after 'End'", site);
        expect("{");
        expect("OFFSET");
        joints_[static_cast<std::size_t>(index)].end_site = vec3();
        expect("}");
      } else {
        fail("unexpected token '" + std::string(t.text) + "' in joint '" + name + "'", t);
      }
    }
    if (!have_offset) fail("joint '" + name + "' has no OFFSET", keyword);
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  std::vector<Joint> joints_;
};

void append_fixed(std::string& out, double v, int decimals) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, decimals);
  std::string_view s(buf, static_cast<std::size_t>(res.ptr - buf));
  if (s.front() == '-' && s.find_first_not_of("-0.") == std::string_view::npos) s.remove_prefix(1);
  out.append(s);
}

void append_vec3(std::string& out, const Eigen::Vector3d& v) {
  for (int i = 0; i < 3; ++i) {
    out += ' ';
    append_fixed(out, v[i], 6);
  }
}

void write_joint(const Skeleton& skeleton, int j, int depth, std::string& out) {
  const Joint& jt = skeleton.joint(j);
  const std::string indent(static_cast<std::size_t>(depth), '\t');
  out += indent;
  out += (jt.parent < 0 ? "ROOT " : "JOINT ");
  out += jt.name;
  out += '\n';
  out += indent + "{\n";
  out += indent + "\tOFFSET";
  append_vec3(out, jt.offset);
  out += '\n';
  out += indent + "\tCHANNELS " + std::to_string(jt.channels.size());
  for (Channel c : jt.channels) {
    out += ' ';
    out += channel_name(c);
  }
  out += '\n';
  for (int child : skeleton.children(j)) write_joint(skeleton, child, depth + 1, out);
  if (jt.end_site) {
    out += indent + "\tEnd Site\n";
    out += indent + "\t{\n";
    out += indent + "\t\tOFFSET";
    append_vec3(out, *jt.end_site);
    out += '\n';
    out += indent + "\t}\n";
  }
  out += indent + "}\n";
}

}  // namespace

MotionClip parse_bvh(std::string_view text) { return Parser(text).parse(); }

MotionClip load_bvh(const std::string& path) { return parse_bvh(io::read_file_text(path)); }

std::string write_bvh(const MotionClip& clip) {
  const Skeleton& skeleton = clip.skeleton();
  std::string out = "HIERARCHY\n";
  write_joint(skeleton, 0, 0, out);
  out += "MOTION\nFrames: " + std::to_string(clip.num_frames()) + "\nFrame Time: ";
  append_fixed(out, clip.frame_time(), 7);
  out += '\n';

  std::vector<int> columns;
  columns.reserve(static_cast<std::size_t>(skeleton.num_channels()));
  for (int j : skeleton.depth_first_order()) {
    const int base = skeleton.channel_offset(j);
    for (std::size_t c = 0; c < skeleton.joint(j).channels.size(); ++c) columns.push_back(base + static_cast<int>(c));
  }
  const Eigen::MatrixXd& frames = clip.frames();
  for (Eigen::Index f = 0; f < frames.rows(); ++f) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (c) out += ' ';
      append_fixed(out, frames(f, columns[c]), 6);
    }
    out += '\n';
  }
  return out;
}

std::string write_bvh(const Skeleton& skeleton, const MotionClip& clip) {
  if (!(skeleton == clip.skeleton())) throw InvalidArgument("clip skeleton does not match the target skeleton");
  return write_bvh(clip);
}

}  // namespace critter::motion
