#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace critter::avatar {

struct Mesh {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<std::array<int, 3>> faces;
  std::optional<std::vector<Eigen::Vector2d>> uvs;
  std::optional<std::vector<Eigen::Vector4d>> colors;  // RGBA in [0, 1]

  /// Throws InvalidArgument for out-of-range or repeated face indices,
  /// non-finite positions, or attribute arrays of the wrong length.
  void validate() const;

  /// Axis-aligned bounds; requires at least one vertex.
  std::pair<Eigen::Vector3d, Eigen::Vector3d> bounds() const;

  /// Appends `other` with re-based face indices. Optional attributes survive
  /// only when both sides carry them.
  void append(const Mesh& other);
};

/// Vertex/face count of every connected component (faces sharing vertices).
struct ComponentTopology {
  int vertices = 0;
  int edges = 0;
  int faces = 0;
  int euler() const { return vertices - edges + faces; }
};
std::vector<ComponentTopology> component_topology(const Mesh& mesh);

/// Wavefront OBJ: v, vt, f (v, v/vt, v//vn, v/vt/vn, negative indices);
/// polygons are fan-triangulated. Throws ParseError with the line number.
Mesh parse_obj(std::string_view text);
std::string write_obj(const Mesh& mesh);

/// First primitive of the first mesh in a glTF 2.0 asset: POSITION, optional
/// TEXCOORD_0, triangle indices. Buffers may be the GLB BIN chunk or base64
/// data URIs.
Mesh parse_glb_mesh(std::span<const std::uint8_t> bytes);
Mesh parse_gltf_json_mesh(std::string_view json_text);

}  // namespace critter::avatar
