#pragma once

#include <Eigen/Core>
#include <string_view>

#include "critter/net/http.hpp"

namespace critter::gen {

class TextEncoder {
 public:
  virtual ~TextEncoder() = default;
  virtual Eigen::VectorXd embed(std::string_view text) const = 0;
  virtual int dim() const = 0;
};

/// Signed hashed bag of character trigrams over the lower-cased text padded
/// with spaces, L2-normalized. Text with no trigrams maps to zero.
class HashedTrigramEncoder final : public TextEncoder {
 public:
  explicit HashedTrigramEncoder(int dim = 64);
  Eigen::VectorXd embed(std::string_view text) const override;
  int dim() const override { return dim_; }

 private:
  int dim_;
};

/// Embedding service speaking {model, input: [text]} -> {data: [{embedding}]}.
/// The reply is L2-normalized; a width other than `dim` is a ParseError.
class HttpTextEncoder final : public TextEncoder {
 public:
  HttpTextEncoder(net::ServiceEndpoint endpoint, int dim) : endpoint_(std::move(endpoint)), dim_(dim) {}
  Eigen::VectorXd embed(std::string_view text) const override;
  int dim() const override { return dim_; }

 private:
  net::ServiceEndpoint endpoint_;
  int dim_;
};

}  // namespace critter::gen
