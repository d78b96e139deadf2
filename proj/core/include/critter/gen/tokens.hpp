#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace critter::gen {

/// Code indices of a residual quantization: row 0 is the base layer,
/// rows 1..V the residual layers, one column per token position.
struct TokenGrid {
  Eigen::MatrixXi layers;
  int codebook_size = 0;

  int depth() const { return static_cast<int>(layers.rows()) - 1; }  // V
  int length() const { return static_cast<int>(layers.cols()); }     // n
  std::vector<int> layer(int v) const;

  /// Throws InvalidArgument when layer 0 is missing or an index is outside
  /// [0, codebook_size).
  void validate() const;

  friend bool operator==(const TokenGrid& a, const TokenGrid& b) {
    return a.codebook_size == b.codebook_size && a.layers.rows() == b.layers.rows() &&
           a.layers.cols() == b.layers.cols() && a.layers == b.layers;
  }
};

struct TokenRecord {
  TokenGrid grid;
  std::string caption;
};

/// MATK file: "MATK", u32 version, u32 count, then per record u32 K,
/// u32 layers, u32 n, layers*n u32 indices (row-major), caption string.
std::vector<std::uint8_t> encode_token_file(const std::vector<TokenRecord>& records);
std::vector<TokenRecord> decode_token_file(std::span<const std::uint8_t> bytes);
void write_token_file(const std::string& path, const std::vector<TokenRecord>& records);
std::vector<TokenRecord> read_token_file(const std::string& path);

}  // namespace critter::gen
