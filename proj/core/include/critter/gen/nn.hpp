#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "critter/util/rng.hpp"

// Small dense layers with hand-written backward passes. Sequences are
// matrices with one row per position. Forward passes are const and may be
// shared across threads; passing a cache records what backward() needs.

namespace critter::gen {

using Mat = Eigen::MatrixXd;

struct Param {
  std::string name;
  Mat value;
  Mat grad;

  void init(std::string n, int rows, int cols);
  void zero_grad() { grad.setZero(); }
};

class Linear {
 public:
  struct Cache {
    Mat x;
  };

  Linear() = default;
  Linear(const std::string& name, int in, int out, double init_std, Rng& rng);

  Mat forward(const Mat& x, Cache* cache = nullptr) const;
  Mat backward(const Mat& dy, const Cache& cache);
  void collect(std::vector<Param*>& out);

  int in() const { return static_cast<int>(w.value.rows()); }
  int out() const { return static_cast<int>(w.value.cols()); }

  Param w;  // in x out
  Param b;  // 1 x out
};

class LayerNorm {
 public:
  struct Cache {
    Mat xhat;
    Eigen::VectorXd inv_sigma;
  };

  LayerNorm() = default;
  LayerNorm(const std::string& name, int dim);

  Mat forward(const Mat& x, Cache* cache = nullptr) const;
  Mat backward(const Mat& dy, const Cache& cache);
  void collect(std::vector<Param*>& out);

  Param gain;
  Param bias;
};

/// tanh approximation of GELU.
Mat gelu(const Mat& x);
Mat gelu_backward(const Mat& x, const Mat& dy);

class Embedding {
 public:
  Embedding() = default;
  Embedding(const std::string& name, int vocab, int dim, double init_std, Rng& rng);

  Mat forward(const std::vector<int>& ids) const;
  void backward(const std::vector<int>& ids, const Mat& dy);
  void collect(std::vector<Param*>& out);

  int vocab() const { return static_cast<int>(table.value.rows()); }

  Param table;  // vocab x dim
};

/// Bidirectional multi-head self-attention.
class SelfAttention {
 public:
  struct Cache {
    Linear::Cache q, k, v, o;
    Mat Q, K, V;
    std::vector<Mat> probs;
  };

  SelfAttention() = default;
  SelfAttention(const std::string& name, int dim, int heads, double init_std, Rng& rng);

  Mat forward(const Mat& x, Cache* cache = nullptr) const;
  Mat backward(const Mat& dy, const Cache& cache);
  void collect(std::vector<Param*>& out);

 private:
  int heads_ = 1;
  Linear q_, k_, v_, o_;
};

/// Pre-norm transformer block: x + attn(ln(x)), then h + mlp(ln(h)).
class TransformerBlock {
 public:
  struct Cache {
    LayerNorm::Cache ln1, ln2;
    SelfAttention::Cache attn;
    Linear::Cache fc1, fc2;
    Mat pre_act;
  };

  TransformerBlock() = default;
  TransformerBlock(const std::string& name, int dim, int heads, int ff, double init_std, Rng& rng);

  Mat forward(const Mat& x, Cache* cache = nullptr) const;
  Mat backward(const Mat& dy, const Cache& cache);
  void collect(std::vector<Param*>& out);

 private:
  LayerNorm ln1_, ln2_;
  SelfAttention attn_;
  Linear fc1_, fc2_;
};

/// Mean softmax cross-entropy over the listed rows. When `dlogits` is given
/// it receives the gradient (zero on unlisted rows).
double cross_entropy(const Mat& logits, const std::vector<int>& rows, const std::vector<int>& targets,
                     Mat* dlogits = nullptr);

/// Row-wise log-softmax.
Mat log_softmax(const Mat& logits);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 1.0;  // global gradient norm; <= 0 disables
};

class Adam {
 public:
  Adam(std::vector<Param*> params, AdamConfig config);

  void zero_grad();
  void step();
  double last_grad_norm() const { return last_norm_; }

 private:
  std::vector<Param*> params_;
  AdamConfig config_;
  std::vector<Mat> m_, v_;
  long step_ = 0;
  double last_norm_ = 0.0;
};

Mat random_normal(int rows, int cols, double stddev, Rng& rng);

}  // namespace critter::gen
