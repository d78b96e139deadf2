#include "critter/avatar/export.hpp"

#include <json.hpp>

#include "critter/motion/bvh.hpp"
#include "critter/motion/rotation.hpp"
#include "critter/util/binary_io.hpp"
#include "critter/util/error.hpp"

namespace critter::avatar {

namespace {

using nlohmann::json;

constexpr int kFloat = 5126;
constexpr int kUnsignedShort = 5123;
constexpr int kUnsignedInt = 5125;
constexpr int kArrayBuffer = 34962;
constexpr int kElementArrayBuffer = 34963;

// Single-buffer builder; every view starts on a 4-byte boundary.
class BinBuilder {
 public:
  template <typename T>
  int view(const std::vector<T>& data, int target = 0) {
    while (bytes_.size() % 4 != 0) bytes_.push_back(0);
    const std::size_t offset = bytes_.size();
    const auto* p = reinterpret_cast<const std::uint8_t*>(data.data());
    bytes_.insert(bytes_.end(), p, p + data.size() * sizeof(T));
    json v = {{"buffer", 0}, {"byteOffset", offset}, {"byteLength", data.size() * sizeof(T)}};
    if (target != 0) v["target"] = target;
    views_.push_back(v);
    return static_cast<int>(views_.size()) - 1;
  }

  int accessor(int view, int component, std::size_t count, const char* type, json extra = json::object()) {
    json a = {{"bufferView", view}, {"componentType", component}, {"count", count}, {"type", type}};
    a.update(extra);
    accessors_.push_back(a);
    return static_cast<int>(accessors_.size()) - 1;
  }

  std::vector<std::uint8_t>& bytes() { return bytes_; }
  json& views() { return views_; }
  json& accessors() { return accessors_; }

 private:
  std::vector<std::uint8_t> bytes_;
  json views_ = json::array();
  json accessors_ = json::array();
};

void check_skeleton(const RiggedMesh& rigged, const motion::MotionClip& clip) {
  if (!(clip.skeleton() == rigged.rig)) {
    throw InvalidArgument("export: channel mismatch, clip skeleton differs from the rig");
  }
}

}  // namespace

ExportFormat export_format_from_string(std::string_view name) {
  if (name == "gltf" || name == "glb") return ExportFormat::kGltf;
  if (name == "bvh") return ExportFormat::kBvh;
  throw InvalidArgument("unknown export format '" + std::string(name) + "'");
}

std::vector<std::uint8_t> export_glb(const RiggedMesh& rigged, const motion::MotionClip& clip) {
  check_skeleton(rigged, clip);
  rigged.validate();
  const motion::Skeleton& sk = rigged.rig;
  const int J = sk.num_joints();
  const int N = clip.num_frames();
  BinBuilder bin;

  // Mesh attributes.
  const auto& mesh = rigged.mesh;
  std::vector<float> positions;
  Eigen::Vector3d lo = Eigen::Vector3d::Constant(1e300), hi = Eigen::Vector3d::Constant(-1e300);
  for (const auto& v : mesh.vertices) {
    const Eigen::Vector3f f = v.cast<float>();
    positions.insert(positions.end(), {f.x(), f.y(), f.z()});
    lo = lo.cwiseMin(f.cast<double>());
    hi = hi.cwiseMax(f.cast<double>());
  }
  std::vector<std::uint16_t> joints;
  std::vector<float> weights;
  for (const auto& w : rigged.weights) {
    float sum = 0.0f;
    std::array<float, 4> ws{};
    for (std::size_t k = 0; k < 4; ++k) {
      joints.push_back(k < w.size() ? static_cast<std::uint16_t>(w[k].joint) : 0);
      ws[k] = k < w.size() ? static_cast<float>(w[k].weight) : 0.0f;
      sum += ws[k];
    }
    for (auto& x : ws) x /= sum;
    weights.insert(weights.end(), ws.begin(), ws.end());
  }
  std::vector<std::uint32_t> indices;
  for (const auto& f : mesh.faces) {
    for (const int i : f) indices.push_back(static_cast<std::uint32_t>(i));
  }
  const std::size_t V = mesh.vertices.size();
  const int pos_acc = bin.accessor(bin.view(positions, kArrayBuffer), kFloat, V, "VEC3",
                                   {{"min", {lo.x(), lo.y(), lo.z()}}, {"max", {hi.x(), hi.y(), hi.z()}}});
  const int joint_acc = bin.accessor(bin.view(joints, kArrayBuffer), kUnsignedShort, V, "VEC4");
  const int weight_acc = bin.accessor(bin.view(weights, kArrayBuffer), kFloat, V, "VEC4");
  const int index_acc = bin.accessor(bin.view(indices, kElementArrayBuffer), kUnsignedInt, indices.size(), "SCALAR");

  // Inverse bind matrices, column-major.
  std::vector<float> ibm;
  for (const auto& m : rigged.bind_pose) {
    const Eigen::Matrix4f inv = m.inverse().cast<float>();
    for (int c = 0; c < 4; ++c) {
      for (int r = 0; r < 4; ++r) ibm.push_back(inv(r, c));
    }
  }
  const int ibm_acc = bin.accessor(bin.view(ibm), kFloat, static_cast<std::size_t>(J), "MAT4");

  // Nodes: joints 0..J-1, then the mesh node.
  json nodes = json::array();
  for (int j = 0; j < J; ++j) {
    const auto& o = sk.joint(j).offset;
    json node = {{"name", sk.joint(j).name}, {"translation", {o.x(), o.y(), o.z()}}};
    const auto kids = sk.children(j);
    if (!kids.empty()) node["children"] = kids;
    nodes.push_back(node);
  }
  nodes.push_back({{"name", "avatar"}, {"mesh", 0}, {"skin", 0}});

  // Animation.
  std::vector<float> times;
  for (int i = 0; i <= N; ++i) times.push_back(static_cast<float>(i * clip.frame_time()));
  const int time_acc = bin.accessor(bin.view(times), kFloat, times.size(), "SCALAR",
                                    {{"min", {times.front()}}, {"max", {times.back()}}});
  json samplers = json::array();
  json channels = json::array();
  auto add_channel = [&](int node, const char* path, const std::vector<float>& values, const char* type) {
    const int acc = bin.accessor(bin.view(values), kFloat, times.size(), type);
    samplers.push_back({{"input", time_acc}, {"output", acc}, {"interpolation", "LINEAR"}});
    channels.push_back({{"sampler", static_cast<int>(samplers.size()) - 1}, {"target", {{"node", node}, {"path", path}}}});
  };
  for (int j = 0; j < J; ++j) {
    const auto& ch = sk.joint(j).channels;
    const bool rotates = std::any_of(ch.begin(), ch.end(), motion::is_rotation);
    const bool moves = std::any_of(ch.begin(), ch.end(), motion::is_position);
    if (rotates) {
      std::vector<float> q;
      Eigen::Quaterniond prev = Eigen::Quaterniond::Identity();
      for (int i = 0; i <= N; ++i) {
        const Eigen::VectorXd row = clip.frame(std::min(i, N - 1));
        Eigen::Quaterniond r = motion::joint_rotation(sk, j, {row.data(), static_cast<std::size_t>(row.size())});
        r.normalize();
        // Keep consecutive keys in one hemisphere so LINEAR takes the short arc.
        if (i > 0 && r.dot(prev) < 0.0) r.coeffs() = -r.coeffs();
        prev = r;
        q.insert(q.end(), {static_cast<float>(r.x()), static_cast<float>(r.y()), static_cast<float>(r.z()),
                           static_cast<float>(r.w())});
      }
      add_channel(j, "rotation", q, "VEC4");
    }
    if (moves) {
      std::vector<float> t;
      for (int i = 0; i <= N; ++i) {
        const Eigen::VectorXd row = clip.frame(std::min(i, N - 1));
        const Eigen::Vector3d p =
            sk.joint(j).offset + motion::joint_translation(sk, j, {row.data(), static_cast<std::size_t>(row.size())});
        t.insert(t.end(), {static_cast<float>(p.x()), static_cast<float>(p.y()), static_cast<float>(p.z())});
      }
      add_channel(j, "translation", t, "VEC3");
    }
  }

  std::vector<int> joint_nodes(static_cast<std::size_t>(J));
  for (int j = 0; j < J; ++j) joint_nodes[static_cast<std::size_t>(j)] = j;
  json doc = {
      {"asset", {{"version", "2.0"}, {"generator", "critter"}}},
      {"scene", 0},
      {"scenes", {{{"nodes", {J, 0}}}}},
      {"nodes", nodes},
      {"meshes",
       {{{"primitives",
          {{{"attributes", {{"POSITION", pos_acc}, {"JOINTS_0", joint_acc}, {"WEIGHTS_0", weight_acc}}},
            {"indices", index_acc},
            {"mode", 4}}}}}}},
      {"skins", {{{"joints", joint_nodes}, {"inverseBindMatrices", ibm_acc}, {"skeleton", 0}}}},
      {"buffers", {{{"byteLength", 0}}}},
      {"bufferViews", bin.views()},
      {"accessors", bin.accessors()},
  };
  if (!channels.empty()) doc["animations"] = {{{"name", "motion"}, {"samplers", samplers}, {"channels", channels}}};

  auto& data = bin.bytes();
  while (data.size() % 4 != 0) data.push_back(0);
  doc["buffers"][0]["byteLength"] = data.size();
  std::string text = doc.dump();
  while (text.size() % 4 != 0) text.push_back(' ');

  io::ByteWriter w;
  w.magic("glTF");
  w.u32(2);
  w.u32(static_cast<std::uint32_t>(12 + 8 + text.size() + 8 + data.size()));
  w.u32(static_cast<std::uint32_t>(text.size()));
  w.magic("JSON");
  w.magic(text);
  w.u32(static_cast<std::uint32_t>(data.size()));
  w.u32(0x004E4942);  // "BIN\0"
  auto out = w.take();
  out.insert(out.end(), data.begin(), data.end());
  return out;
}

std::vector<std::uint8_t> export_bvh(const RiggedMesh& rigged, const motion::MotionClip& clip) {
  check_skeleton(rigged, clip);
  const std::string text = motion::write_bvh(rigged.rig, clip);
  return {text.begin(), text.end()};
}

std::vector<std::uint8_t> export_animated(const RiggedMesh& rigged, const motion::MotionClip& clip,
                                          ExportFormat format) {
  switch (format) {
    case ExportFormat::kGltf:
      return export_glb(rigged, clip);
    case ExportFormat::kBvh:
      return export_bvh(rigged, clip);
  }
  throw InvalidArgument("unknown export format");
}

}  // namespace critter::avatar
