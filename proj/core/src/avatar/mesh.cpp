#include "critter/avatar/mesh.hpp"

#include <cctype>
#include <charconv>
#include <cstring>
#include <json.hpp>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "critter/util/base64.hpp"
#include "critter/util/error.hpp"

namespace critter::avatar {

void Mesh::validate() const {
  const auto n = static_cast<int>(vertices.size());
  for (const auto& v : vertices) {
    if (!v.allFinite()) throw InvalidArgument("mesh has a non-finite vertex");
  }
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const auto& t = faces[f];
    for (const int i : t) {
      if (i < 0 || i >= n) throw InvalidArgument("face " + std::to_string(f) + " references vertex " + std::to_string(i));
    }
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) throw InvalidArgument("face " + std::to_string(f) + " is degenerate");
  }
  if (uvs && uvs->size() != vertices.size()) throw InvalidArgument("uv count does not match vertex count");
  if (colors && colors->size() != vertices.size()) throw InvalidArgument("color count does not match vertex count");
}

std::pair<Eigen::Vector3d, Eigen::Vector3d> Mesh::bounds() const {
  if (vertices.empty()) throw InvalidArgument("mesh has no vertices");
  Eigen::Vector3d lo = vertices.front(), hi = vertices.front();
  for (const auto& v : vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  return {lo, hi};
}

void Mesh::append(const Mesh& other) {
  const int base = static_cast<int>(vertices.size());
  const bool keep_uvs = uvs.has_value() && other.uvs.has_value();
  const bool keep_colors = colors.has_value() && other.colors.has_value();
  if (vertices.empty()) {
    *this = other;
    return;
  }
  vertices.insert(vertices.end(), other.vertices.begin(), other.vertices.end());
  for (const auto& f : other.faces) faces.push_back({f[0] + base, f[1] + base, f[2] + base});
  if (keep_uvs) {
    uvs->insert(uvs->end(), other.uvs->begin(), other.uvs->end());
  } else {
    uvs.reset();
  }
  if (keep_colors) {
    colors->insert(colors->end(), other.colors->begin(), other.colors->end());
  } else {
    colors.reset();
  }
}

std::vector<ComponentTopology> component_topology(const Mesh& mesh) {
  const auto n = mesh.vertices.size();
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  };
  for (const auto& f : mesh.faces) {
    parent[static_cast<std::size_t>(find(f[1]))] = find(f[0]);
    parent[static_cast<std::size_t>(find(f[2]))] = find(f[0]);
  }
  std::map<int, ComponentTopology> comps;
  std::set<std::pair<int, int>> edges;
  std::set<int> used;
  for (const auto& f : mesh.faces) {
    const int root = find(f[0]);
    ++comps[root].faces;
    for (int k = 0; k < 3; ++k) {
      const int a = std::min(f[k], f[(k + 1) % 3]);
      const int b = std::max(f[k], f[(k + 1) % 3]);
      if (edges.insert({a, b}).second) ++comps[root].edges;
      if (used.insert(f[k]).second) ++comps[root].vertices;
    }
  }
  std::vector<ComponentTopology> out;
  for (const auto& [root, c] : comps) out.push_back(c);
  return out;
}

// --- OBJ

namespace {

double parse_number(std::string_view tok, int line) {
  double v = 0.0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
    throw ParseError("OBJ: bad number '" + std::string(tok) + "'", line, 1);
  }
  return v;
}

int resolve_index(std::string_view tok, int count, int line) {
  long v = 0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size() || v == 0) {
    throw ParseError("OBJ: bad index '" + std::string(tok) + "'", line, 1);
  }
  const long idx = v > 0 ? v - 1 : count + v;
  if (idx < 0 || idx >= count) {
    throw ParseError("OBJ: index " + std::to_string(v) + " out of range", line, 1);
  }
  return static_cast<int>(idx);
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    const std::size_t start = i;
    while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

}  // namespace

Mesh parse_obj(std::string_view text) {
  Mesh mesh;
  std::vector<Eigen::Vector2d> texcoords;
  std::vector<int> uv_of_vertex;
  bool any_uv = false;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = text.find('\n', pos);
    std::string_view line = text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
    pos = end == std::string_view::npos ? text.size() + 1 : end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok[0] == "v") {
      if (tok.size() < 4) throw ParseError("OBJ: vertex needs 3 coordinates", line_no, 1);
      mesh.vertices.emplace_back(parse_number(tok[1], line_no), parse_number(tok[2], line_no), parse_number(tok[3], line_no));
      uv_of_vertex.push_back(-1);
    } else if (tok[0] == "vt") {
      if (tok.size() < 3) throw ParseError("OBJ: vt needs 2 coordinates", line_no, 1);
      texcoords.emplace_back(parse_number(tok[1], line_no), parse_number(tok[2], line_no));
    } else if (tok[0] == "f") {
      if (tok.size() < 4) throw ParseError("OBJ: face needs 3 vertices", line_no, 1);
      std::vector<int> poly;
      for (std::size_t k = 1; k < tok.size(); ++k) {
        const auto slash = tok[k].find('/');
        const int vi = resolve_index(tok[k].substr(0, slash), static_cast<int>(mesh.vertices.size()), line_no);
        if (slash != std::string_view::npos) {
          const auto rest = tok[k].substr(slash + 1);
          const auto slash2 = rest.find('/');
          const auto vt = rest.substr(0, slash2);
          if (!vt.empty()) {
            uv_of_vertex[static_cast<std::size_t>(vi)] =
                resolve_index(vt, static_cast<int>(texcoords.size()), line_no);
            any_uv = true;
          }
        }
        poly.push_back(vi);
      }
      for (std::size_t k = 1; k + 1 < poly.size(); ++k) mesh.faces.push_back({poly[0], poly[k], poly[k + 1]});
    }
    // Other statements (vn, o, g, s, usemtl, mtllib) carry nothing we keep.
  }
  if (any_uv) {
    mesh.uvs.emplace();
    for (const int t : uv_of_vertex) mesh.uvs->push_back(t >= 0 ? texcoords[static_cast<std::size_t>(t)] : Eigen::Vector2d::Zero());
  }
  try {
    mesh.validate();
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("OBJ: ") + e.what());
  }
  return mesh;
}

std::string write_obj(const Mesh& mesh) {
  std::ostringstream os;
  os.precision(9);
  for (const auto& v : mesh.vertices) os << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  if (mesh.uvs) {
    for (const auto& t : *mesh.uvs) os << "vt " << t.x() << ' ' << t.y() << '\n';
  }
  for (const auto& f : mesh.faces) {
    os << 'f';
    for (const int i : f) {
      os << ' ' << i + 1;
      if (mesh.uvs) os << '/' << i + 1;
    }
    os << '\n';
  }
  return os.str();
}

// --- glTF

namespace {

using nlohmann::json;

struct Accessor {
  const std::uint8_t* data = nullptr;
  std::size_t count = 0;
  int components = 1;
  int component_type = 0;
  std::size_t stride = 0;
};

int component_size(int type) {
  switch (type) {
    case 5120:
    case 5121:
      return 1;
    case 5122:
    case 5123:
      return 2;
    case 5125:
    case 5126:
      return 4;
    default:
      throw ParseError("unsupported accessor component type " + std::to_string(type));
  }
}

int type_components(const std::string& t) {
  if (t == "SCALAR") return 1;
  if (t == "VEC2") return 2;
  if (t == "VEC3") return 3;
  if (t == "VEC4") return 4;
  throw ParseError("unsupported accessor type " + t);
}

Accessor accessor(const json& doc, const std::vector<std::vector<std::uint8_t>>& buffers, int index) {
  const json& a = doc.at("accessors").at(static_cast<std::size_t>(index));
  const json& view = doc.at("bufferViews").at(a.at("bufferView").get<std::size_t>());
  const auto& buf = buffers.at(view.at("buffer").get<std::size_t>());
  Accessor acc;
  acc.count = a.at("count").get<std::size_t>();
  acc.component_type = a.at("componentType").get<int>();
  acc.components = type_components(a.at("type").get<std::string>());
  const std::size_t elem = static_cast<std::size_t>(component_size(acc.component_type) * acc.components);
  acc.stride = view.value("byteStride", elem);
  const std::size_t offset = view.value("byteOffset", std::size_t{0}) + a.value("byteOffset", std::size_t{0});
  const std::size_t view_len = view.at("byteLength").get<std::size_t>();
  if (acc.count > 0 && (acc.count - 1) * acc.stride + elem > view_len) throw ParseError("accessor overruns its buffer view");
  if (view.value("byteOffset", std::size_t{0}) + view_len > buf.size() || offset > buf.size()) {
    throw ParseError("buffer view overruns its buffer");
  }
  acc.data = buf.data() + offset;
  return acc;
}

double read_component(const Accessor& a, std::size_t i, int c) {
  const std::uint8_t* p = a.data + i * a.stride + static_cast<std::size_t>(c * component_size(a.component_type));
  switch (a.component_type) {
    case 5126: {
      float f;
      std::memcpy(&f, p, 4);
      return f;
    }
    case 5125: {
      std::uint32_t u;
      std::memcpy(&u, p, 4);
      return u;
    }
    case 5123: {
      std::uint16_t u;
      std::memcpy(&u, p, 2);
      return u;
    }
    case 5121:
      return *p;
    default:
      throw ParseError("unsupported component type for mesh data");
  }
}

Mesh mesh_from_gltf(const json& doc, const std::vector<std::vector<std::uint8_t>>& buffers) {
  const json& prim = doc.at("meshes").at(0).at("primitives").at(0);
  if (prim.value("mode", 4) != 4) throw ParseError("only triangle primitives are supported");
  const Accessor pos = accessor(doc, buffers, prim.at("attributes").at("POSITION").get<int>());
  if (pos.components != 3 || pos.component_type != 5126) throw ParseError("POSITION must be float VEC3");
  Mesh mesh;
  for (std::size_t i = 0; i < pos.count; ++i) {
    mesh.vertices.emplace_back(read_component(pos, i, 0), read_component(pos, i, 1), read_component(pos, i, 2));
  }
  if (prim.at("attributes").contains("TEXCOORD_0")) {
    const Accessor uv = accessor(doc, buffers, prim.at("attributes").at("TEXCOORD_0").get<int>());
    if (uv.components != 2 || uv.count != pos.count) throw ParseError("TEXCOORD_0 must be VEC2 per vertex");
    mesh.uvs.emplace();
    for (std::size_t i = 0; i < uv.count; ++i) mesh.uvs->emplace_back(read_component(uv, i, 0), read_component(uv, i, 1));
  }
  std::vector<int> idx;
  if (prim.contains("indices")) {
    const Accessor ind = accessor(doc, buffers, prim.at("indices").get<int>());
    if (ind.components != 1) throw ParseError("indices must be SCALAR");
    for (std::size_t i = 0; i < ind.count; ++i) idx.push_back(static_cast<int>(read_component(ind, i, 0)));
  } else {
    for (std::size_t i = 0; i < pos.count; ++i) idx.push_back(static_cast<int>(i));
  }
  if (idx.size() % 3 != 0) throw ParseError("index count is not a multiple of 3");
  for (std::size_t i = 0; i < idx.size(); i += 3) mesh.faces.push_back({idx[i], idx[i + 1], idx[i + 2]});
  try {
    mesh.validate();
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("glTF mesh: ") + e.what());
  }
  return mesh;
}

std::vector<std::vector<std::uint8_t>> uri_buffers(const json& doc, std::vector<std::uint8_t> bin) {
  std::vector<std::vector<std::uint8_t>> out;
  if (!doc.contains("buffers")) return out;
  for (const auto& b : doc.at("buffers")) {
    if (b.contains("uri")) {
      const std::string uri = b.at("uri");
      const auto comma = uri.find(";base64,");
      if (uri.rfind("data:", 0) != 0 || comma == std::string::npos) throw ParseError("external buffer URIs are not supported");
      out.push_back(base64_decode(std::string_view(uri).substr(comma + 8)));
    } else {
      out.push_back(std::move(bin));
      bin.clear();
    }
  }
  return out;
}

std::uint32_t le32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 | static_cast<std::uint32_t>(p[2]) << 16 |
         static_cast<std::uint32_t>(p[3]) << 24;
}

}  // namespace

Mesh parse_glb_mesh(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 20 || std::memcmp(bytes.data(), "glTF", 4) != 0) throw ParseError("not a GLB file");
  if (le32(bytes.data() + 4) != 2) throw ParseError("unsupported GLB version");
  if (le32(bytes.data() + 8) != bytes.size()) throw ParseError("GLB length header does not match payload");
  std::size_t pos = 12;
  std::string json_text;
  std::vector<std::uint8_t> bin;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t len = le32(bytes.data() + pos);
    const std::uint32_t type = le32(bytes.data() + pos + 4);
    if (pos + 8 + len > bytes.size()) throw ParseError("GLB chunk overruns the file");
    const auto* body = bytes.data() + pos + 8;
    if (type == 0x4E4F534A) json_text.assign(reinterpret_cast<const char*>(body), len);
    if (type == 0x004E4942) bin.assign(body, body + len);
    pos += 8 + len;
  }
  if (json_text.empty()) throw ParseError("GLB has no JSON chunk");
  try {
    const json doc = json::parse(json_text);
    return mesh_from_gltf(doc, uri_buffers(doc, std::move(bin)));
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed glTF: ") + e.what());
  }
}

Mesh parse_gltf_json_mesh(std::string_view json_text) {
  try {
    const json doc = json::parse(json_text);
    return mesh_from_gltf(doc, uri_buffers(doc, {}));
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed glTF: ") + e.what());
  }
}

}  // namespace critter::avatar
