#include "critter/gen/tokens.hpp"

#include "critter/util/binary_io.hpp"
#include "critter/util/error.hpp"

namespace critter::gen {

namespace {
constexpr std::uint32_t kTokenVersion = 1;
}

std::vector<int> TokenGrid::layer(int v) const {
  std::vector<int> out(static_cast<std::size_t>(length()));
  for (int i = 0; i < length(); ++i) out[static_cast<std::size_t>(i)] = layers(v, i);
  return out;
}

void TokenGrid::validate() const {
  if (layers.rows() < 1) throw InvalidArgument("token grid has no base layer");
  if (codebook_size < 1) throw InvalidArgument("token grid has no codebook size");
  if (layers.size() > 0 && (layers.minCoeff() < 0 || layers.maxCoeff() >= codebook_size)) {
    throw InvalidArgument("token index outside [0, " + std::to_string(codebook_size) + ")");
  }
}

std::vector<std::uint8_t> encode_token_file(const std::vector<TokenRecord>& records) {
  io::ByteWriter w;
  w.magic("MATK");
  w.u32(kTokenVersion);
  w.u32(static_cast<std::uint32_t>(records.size()));
  for (const auto& r : records) {
    r.grid.validate();
    w.u32(static_cast<std::uint32_t>(r.grid.codebook_size));
    w.u32(static_cast<std::uint32_t>(r.grid.layers.rows()));
    w.u32(static_cast<std::uint32_t>(r.grid.layers.cols()));
    for (Eigen::Index v = 0; v < r.grid.layers.rows(); ++v) {
      for (Eigen::Index i = 0; i < r.grid.layers.cols(); ++i) w.u32(static_cast<std::uint32_t>(r.grid.layers(v, i)));
    }
    w.str(r.caption);
  }
  return w.take();
}

std::vector<TokenRecord> decode_token_file(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes);
  r.expect_magic("MATK");
  if (const auto v = r.u32(); v != kTokenVersion) throw ParseError("unsupported MATK version " + std::to_string(v));
  const std::uint32_t count = r.u32();
  std::vector<TokenRecord> out;
  for (std::uint32_t k = 0; k < count; ++k) {
    TokenRecord rec;
    rec.grid.codebook_size = static_cast<int>(r.u32());
    const auto rows = r.u32();
    const auto cols = r.u32();
    if (static_cast<std::uint64_t>(rows) * cols * 4 > r.remaining()) throw ParseError("truncated MATK record");
    rec.grid.layers.resize(rows, cols);
    for (std::uint32_t v = 0; v < rows; ++v) {
      for (std::uint32_t i = 0; i < cols; ++i) rec.grid.layers(v, i) = static_cast<int>(r.u32());
    }
    rec.caption = r.str();
    try {
      rec.grid.validate();
    } catch (const InvalidArgument& e) {
      throw ParseError(std::string("invalid MATK record: ") + e.what());
    }
    out.push_back(std::move(rec));
  }
  if (!r.at_end()) throw ParseError("trailing bytes after MATK records");
  return out;
}

void write_token_file(const std::string& path, const std::vector<TokenRecord>& records) {
  io::write_file_atomic(path, encode_token_file(records));
}

std::vector<TokenRecord> read_token_file(const std::string& path) {
  return decode_token_file(io::read_file_bytes(path));
}

}  // namespace critter::gen
