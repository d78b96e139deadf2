#pragma once

#include <Eigen/Core>

#include "critter/util/binary_io.hpp"
#include "critter/util/error.hpp"

namespace critter::gen::detail {

template <typename M>
inline void write_tensor(io::ByteWriter& w, const M& m) {
  w.u32(static_cast<std::uint32_t>(m.rows()));
  w.u32(static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) w.f32(static_cast<float>(m(r, c)));
  }
}

template <typename M>
inline void read_tensor(io::ByteReader& r, M& m, const char* what) {
  const auto rows = r.u32();
  const auto cols = r.u32();
  if (rows != m.rows() || cols != m.cols()) {
    throw ParseError(std::string("checkpoint tensor ") + what + " has shape " + std::to_string(rows) + "x" +
                     std::to_string(cols) + ", expected " + std::to_string(m.rows()) + "x" +
                     std::to_string(m.cols()));
  }
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = r.f32();
  }
}

}  // namespace critter::gen::detail
