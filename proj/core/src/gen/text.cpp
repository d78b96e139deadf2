#include "critter/gen/text.hpp"

#include <cctype>
#include <json.hpp>

#include "critter/util/error.hpp"
#include "critter/util/hash.hpp"

namespace critter::gen {

HashedTrigramEncoder::HashedTrigramEncoder(int dim) : dim_(dim) {
  if (dim < 1) throw InvalidArgument("text embedding width must be positive");
}

Eigen::VectorXd HashedTrigramEncoder::embed(std::string_view text) const {
  std::string padded = " ";
  for (const char ch : text) padded += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  padded += ' ';
  Eigen::VectorXd v = Eigen::VectorXd::Zero(dim_);
  if (text.empty()) return v;
  for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
    const std::uint64_t h = fnv1a64(std::string_view(padded).substr(i, 3));
    v(static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(dim_))) += ((h >> 63) != 0U) ? -1.0 : 1.0;
  }
  const double n = v.norm();
  if (n > 0.0) v /= n;
  return v;
}

Eigen::VectorXd HttpTextEncoder::embed(std::string_view text) const {
  const nlohmann::json req = {{"model", endpoint_.model}, {"input", {std::string(text)}}};
  const auto res = net::http_post(endpoint_, req.dump(), "application/json");
  try {
    const auto doc = nlohmann::json::parse(res.body);
    const auto& emb = doc.at("data").at(0).at("embedding");
    if (static_cast<int>(emb.size()) != dim_) {
      throw ParseError("embedding service returned width " + std::to_string(emb.size()) + ", expected " +
                       std::to_string(dim_));
    }
    Eigen::VectorXd v(dim_);
    for (int i = 0; i < dim_; ++i) v(i) = emb.at(static_cast<std::size_t>(i)).get<double>();
    const double n = v.norm();
    if (n > 0.0) v /= n;
    return v;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed embedding response: ") + e.what());
  }
}

}  // namespace critter::gen
