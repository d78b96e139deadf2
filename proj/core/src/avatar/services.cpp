#include "critter/avatar/services.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <json.hpp>

#include "critter/motion/kinematics.hpp"
#include "critter/planner/taxonomy.hpp"
#include "critter/util/error.hpp"
#include "critter/util/hash.hpp"

namespace critter::avatar {

namespace {

// Side view of the template rig: bones drawn as thick strokes, +Z to the
// right, +Y up.
void draw_silhouette(AvatarImage& img, BodyPlan plan, const std::array<std::uint8_t, 3>& colour) {
  const motion::Skeleton rig = template_rig(plan, 1.0);
  const auto world = motion::rest_positions(rig);
  std::vector<std::pair<Eigen::Vector2d, Eigen::Vector2d>> bones;
  Eigen::Vector2d lo(1e300, 1e300), hi(-1e300, -1e300);
  auto side = [](const Eigen::Vector3d& p) { return Eigen::Vector2d(p.z(), p.y()); };
  for (int j = 0; j < rig.num_joints(); ++j) {
    const Eigen::Vector2d a = side(world[static_cast<std::size_t>(j)]);
    std::vector<Eigen::Vector2d> tips;
    for (const int c : rig.children(j)) tips.push_back(side(world[static_cast<std::size_t>(c)]));
    if (rig.joint(j).end_site) tips.push_back(side(world[static_cast<std::size_t>(j)] + *rig.joint(j).end_site));
    for (const auto& b : tips) {
      bones.emplace_back(a, b);
      lo = lo.cwiseMin(a).cwiseMin(b);
      hi = hi.cwiseMax(a).cwiseMax(b);
    }
  }
  const double span = std::max((hi - lo).maxCoeff(), 1e-9);
  const double scale = 0.8 * std::min(img.width, img.height) / span;
  const Eigen::Vector2d centre = (lo + hi) / 2.0;
  const double thick = 0.06 * span;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const Eigen::Vector2d p((x + 0.5 - img.width / 2.0) / scale + centre.x(),
                              (img.height / 2.0 - y - 0.5) / scale + centre.y());
      bool inside = false;
      for (const auto& [a, b] : bones) {
        const Eigen::Vector2d d = b - a;
        const double t = std::clamp((p - a).dot(d) / std::max(d.squaredNorm(), 1e-18), 0.0, 1.0);
        if ((a + t * d - p).norm() <= thick) {
          inside = true;
          break;
        }
      }
      if (!inside) continue;
      auto* px = &img.rgba[4 * (static_cast<std::size_t>(y) * static_cast<std::size_t>(img.width) + static_cast<std::size_t>(x))];
      px[0] = colour[0];
      px[1] = colour[1];
      px[2] = colour[2];
      px[3] = 255;
    }
  }
}

std::string_view lower_media_type(std::string_view content_type, std::string& storage) {
  storage = std::string(content_type.substr(0, content_type.find(';')));
  std::transform(storage.begin(), storage.end(), storage.begin(), [](unsigned char c) { return std::tolower(c); });
  while (!storage.empty() && storage.back() == ' ') storage.pop_back();
  return storage;
}

}  // namespace

std::string prompt_category(std::string_view prompt) {
  static const planner::Taxonomy taxonomy = planner::Taxonomy::builtin();
  const auto match = planner::match_taxonomy(prompt, taxonomy);
  if (!match.animals.empty()) return match.animals.front().category;
  return planner::normalize_text(prompt);
}

AvatarImage MockImageBackend::generate(std::string_view prompt, const ImageRequest& request) const {
  if (request.width <= 0 || request.height <= 0) throw InvalidArgument("image dimensions must be positive");
  const std::string category = prompt_category(prompt);
  const std::uint64_t h = fnv1a64(category);
  AvatarImage img;
  img.width = request.width;
  img.height = request.height;
  img.rgba.assign(4ull * static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height), 0);
  img.provenance = {"mock", std::string(prompt)};
  const std::array<std::uint8_t, 3> colour = {static_cast<std::uint8_t>(64 + (h & 0x7f)),
                                              static_cast<std::uint8_t>(64 + ((h >> 8) & 0x7f)),
                                              static_cast<std::uint8_t>(64 + ((h >> 16) & 0x7f))};
  draw_silhouette(img, body_plan_for(category), colour);
  return img;
}

HttpImageBackend::HttpImageBackend(net::ServiceEndpoint endpoint, std::size_t max_in_flight)
    : endpoint_(std::move(endpoint)), gate_(std::make_unique<net::RequestGate>(max_in_flight)) {}

AvatarImage HttpImageBackend::generate(std::string_view prompt, const ImageRequest& request) const {
  const nlohmann::json body = {
      {"prompt", prompt}, {"width", request.width}, {"height", request.height}, {"seed", request.seed}};
  net::HttpResponse res;
  {
    net::RequestGate::Permit permit(*gate_);
    res = net::http_post(endpoint_, body.dump(), "application/json");
  }
  const auto* data = reinterpret_cast<const std::uint8_t*>(res.body.data());
  AvatarImage img = decode_png({data, res.body.size()});
  if (img.width != request.width || img.height != request.height) {
    throw ParseError("image service returned " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                     ", requested " + std::to_string(request.width) + "x" + std::to_string(request.height));
  }
  img.provenance = {endpoint_.url, std::string(prompt)};
  return img;
}

AvatarImage request_avatar_image(std::string_view prompt, const ImageBackend& backend, const ImageRequest& request) {
  if (planner::normalize_text(prompt).empty()) throw InvalidArgument("avatar prompt is empty");
  AvatarImage img = backend.generate(prompt, request);
  img.validate();
  return img;
}

Mesh MockMeshBackend::reconstruct(const AvatarImage& image) const {
  return procedural_mesh(body_plan_for(prompt_category(image.provenance.prompt)), params_);
}

HttpMeshBackend::HttpMeshBackend(net::ServiceEndpoint endpoint, MeshLimits limits, std::size_t max_in_flight)
    : endpoint_(std::move(endpoint)), limits_(limits), gate_(std::make_unique<net::RequestGate>(max_in_flight)) {}

Mesh HttpMeshBackend::reconstruct(const AvatarImage& image) const {
  const auto png = encode_png(image);
  net::HttpResponse res;
  {
    net::RequestGate::Permit permit(*gate_);
    res = net::http_post(endpoint_, std::string_view(reinterpret_cast<const char*>(png.data()), png.size()),
                         "image/png");
  }
  Mesh mesh = parse_mesh_payload(res.content_type, res.body);
  if (mesh.vertices.size() > limits_.max_vertices || mesh.faces.size() > limits_.max_faces) {
    throw ParseError("mesh service reply exceeds declared bounds (" + std::to_string(mesh.vertices.size()) +
                     " vertices, " + std::to_string(mesh.faces.size()) + " faces)");
  }
  return mesh;
}

Mesh parse_mesh_payload(std::string_view content_type, std::string_view body) {
  std::string storage;
  const std::string_view type = lower_media_type(content_type, storage);
  if (type == "model/obj" || type == "text/plain" || type == "application/x-tgif" || type == "text/x-obj") {
    return parse_obj(body);
  }
  if (type == "model/gltf-binary" || type == "application/octet-stream") {
    return parse_glb_mesh({reinterpret_cast<const std::uint8_t*>(body.data()), body.size()});
  }
  if (type == "model/gltf+json" || type == "application/json") return parse_gltf_json_mesh(body);
  throw ParseError("mesh service returned unsupported content type '" + std::string(content_type) + "'");
}

Mesh request_mesh(const AvatarImage& image, const MeshBackend& backend) {
  image.validate();
  Mesh mesh = backend.reconstruct(image);
  if (mesh.vertices.empty() || mesh.faces.empty()) throw ParseError("mesh service returned an empty mesh");
  mesh.validate();
  return mesh;
}

}  // namespace critter::avatar
