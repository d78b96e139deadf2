#pragma once

#include <memory>
#include <string>
#include <string_view>

#include "critter/avatar/body.hpp"
#include "critter/avatar/image.hpp"
#include "critter/avatar/mesh.hpp"
#include "critter/net/http.hpp"

namespace critter::avatar {

struct ImageRequest {
  int width = 256;
  int height = 256;
  std::uint64_t seed = 0;
};

class ImageBackend {
 public:
  virtual ~ImageBackend() = default;
  virtual AvatarImage generate(std::string_view prompt, const ImageRequest& request) const = 0;
};

/// Animal category named in an avatar prompt (the built-in taxonomy's best
/// match), or the normalized prompt when nothing matches.
std::string prompt_category(std::string_view prompt);

/// Solid-colour silhouette on a transparent background. The colour and
/// the body plan drawn depend only on prompt_category(prompt).
class MockImageBackend final : public ImageBackend {
 public:
  AvatarImage generate(std::string_view prompt, const ImageRequest& request) const override;
};

/// POST {prompt, width, height, seed} -> PNG bytes. The decoded image must
/// have the requested size.
class HttpImageBackend final : public ImageBackend {
 public:
  explicit HttpImageBackend(net::ServiceEndpoint endpoint, std::size_t max_in_flight = 4);
  AvatarImage generate(std::string_view prompt, const ImageRequest& request) const override;

 private:
  net::ServiceEndpoint endpoint_;
  std::unique_ptr<net::RequestGate> gate_;
};

/// Throws InvalidArgument for an empty prompt; backend errors propagate.
AvatarImage request_avatar_image(std::string_view prompt, const ImageBackend& backend, const ImageRequest& request = {});

class MeshBackend {
 public:
  virtual ~MeshBackend() = default;
  virtual Mesh reconstruct(const AvatarImage& image) const = 0;
};

/// Ignores the pixels: procedural_mesh(body_plan_for(category of the
/// provenance prompt)).
class MockMeshBackend final : public MeshBackend {
 public:
  explicit MockMeshBackend(ProceduralParams params = {}) : params_(params) {}
  Mesh reconstruct(const AvatarImage& image) const override;

 private:
  ProceduralParams params_;
};

/// Bounds a mesh service promises to respect.
struct MeshLimits {
  std::size_t max_vertices = 2'000'000;
  std::size_t max_faces = 4'000'000;
};

/// POST image/png -> OBJ (text/plain, model/obj), binary glTF
/// (model/gltf-binary) or glTF JSON with embedded buffers (model/gltf+json).
/// Any other content type, or a payload that fails to parse, is a ParseError.
class HttpMeshBackend final : public MeshBackend {
 public:
  explicit HttpMeshBackend(net::ServiceEndpoint endpoint, MeshLimits limits = {}, std::size_t max_in_flight = 2);
  Mesh reconstruct(const AvatarImage& image) const override;

 private:
  net::ServiceEndpoint endpoint_;
  MeshLimits limits_;
  std::unique_ptr<net::RequestGate> gate_;
};

/// Decodes a mesh-service reply by content type.
Mesh parse_mesh_payload(std::string_view content_type, std::string_view body);

/// Validates the image, runs the backend, validates the mesh.
Mesh request_mesh(const AvatarImage& image, const MeshBackend& backend);

}  // namespace critter::avatar
