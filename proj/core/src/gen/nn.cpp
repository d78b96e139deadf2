#include "critter/gen/nn.hpp"

#include <cmath>
#include <numbers>

#include "critter/util/error.hpp"

namespace critter::gen {

void Param::init(std::string n, int rows, int cols) {
  name = std::move(n);
  value = Mat::Zero(rows, cols);
  grad = Mat::Zero(rows, cols);
}

Mat random_normal(int rows, int cols, double stddev, Rng& rng) {
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = rng.normal(0.0, stddev);
  }
  return m;
}

// --- Linear

Linear::Linear(const std::string& name, int in, int out, double init_std, Rng& rng) {
  w.init(name + ".w", in, out);
  b.init(name + ".b", 1, out);
  w.value = random_normal(in, out, init_std, rng);
}

Mat Linear::forward(const Mat& x, Cache* cache) const {
  if (cache) cache->x = x;
  Mat y = x * w.value;
  y.rowwise() += b.value.row(0);
  return y;
}

Mat Linear::backward(const Mat& dy, const Cache& cache) {
  w.grad.noalias() += cache.x.transpose() * dy;
  b.grad += dy.colwise().sum();
  return dy * w.value.transpose();
}

void Linear::collect(std::vector<Param*>& out) {
  out.push_back(&w);
  out.push_back(&b);
}

// --- LayerNorm

namespace {
constexpr double kNormEps = 1e-5;
}

LayerNorm::LayerNorm(const std::string& name, int dim) {
  gain.init(name + ".g", 1, dim);
  bias.init(name + ".b", 1, dim);
  gain.value.setOnes();
}

Mat LayerNorm::forward(const Mat& x, Cache* cache) const {
  const Eigen::Index d = x.cols();
  Mat xhat(x.rows(), d);
  Eigen::VectorXd inv(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).mean();
    const double var = (x.row(r).array() - mean).square().sum() / static_cast<double>(d);
    inv(r) = 1.0 / std::sqrt(var + kNormEps);
    xhat.row(r) = (x.row(r).array() - mean) * inv(r);
  }
  Mat y = xhat.array().rowwise() * gain.value.row(0).array();
  y.rowwise() += bias.value.row(0);
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_sigma = std::move(inv);
  }
  return y;
}

Mat LayerNorm::backward(const Mat& dy, const Cache& cache) {
  gain.grad += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
  bias.grad += dy.colwise().sum();
  const Mat dxhat = dy.array().rowwise() * gain.value.row(0).array();
  Mat dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const double m1 = dxhat.row(r).mean();
    const double m2 = (dxhat.row(r).array() * cache.xhat.row(r).array()).mean();
    dx.row(r) = cache.inv_sigma(r) * (dxhat.row(r).array() - m1 - cache.xhat.row(r).array() * m2);
  }
  return dx;
}

void LayerNorm::collect(std::vector<Param*>& out) {
  out.push_back(&gain);
  out.push_back(&bias);
}

// --- GELU

namespace {
const double kGeluC = std::sqrt(2.0 / std::numbers::pi);
constexpr double kGeluA = 0.044715;
}  // namespace

Mat gelu(const Mat& x) {
  return x.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::tanh(kGeluC * (v + kGeluA * v * v * v))); });
}

Mat gelu_backward(const Mat& x, const Mat& dy) {
  const Mat d = x.unaryExpr([](double v) {
    const double t = std::tanh(kGeluC * (v + kGeluA * v * v * v));
    return 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * v * v);
  });
  return d.cwiseProduct(dy);
}

// --- Embedding

Embedding::Embedding(const std::string& name, int vocab, int dim, double init_std, Rng& rng) {
  table.init(name, vocab, dim);
  table.value = random_normal(vocab, dim, init_std, rng);
}

Mat Embedding::forward(const std::vector<int>& ids) const {
  Mat y(static_cast<Eigen::Index>(ids.size()), table.value.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= vocab()) throw InvalidArgument("embedding id out of range: " + std::to_string(ids[i]));
    y.row(static_cast<Eigen::Index>(i)) = table.value.row(ids[i]);
  }
  return y;
}

void Embedding::backward(const std::vector<int>& ids, const Mat& dy) {
  for (std::size_t i = 0; i < ids.size(); ++i) table.grad.row(ids[i]) += dy.row(static_cast<Eigen::Index>(i));
}

void Embedding::collect(std::vector<Param*>& out) { out.push_back(&table); }

// --- Attention

namespace {

void softmax_rows_inplace(Mat& s) {
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    const double mx = s.row(r).maxCoeff();
    s.row(r) = (s.row(r).array() - mx).exp();
    s.row(r) /= s.row(r).sum();
  }
}

}  // namespace

SelfAttention::SelfAttention(const std::string& name, int dim, int heads, double init_std, Rng& rng)
    : heads_(heads),
      q_(name + ".q", dim, dim, init_std, rng),
      k_(name + ".k", dim, dim, init_std, rng),
      v_(name + ".v", dim, dim, init_std, rng),
      o_(name + ".o", dim, dim, init_std, rng) {
  if (heads < 1 || dim % heads != 0) throw InvalidArgument("attention width must divide evenly into heads");
}

Mat SelfAttention::forward(const Mat& x, Cache* cache) const {
  Cache local;
  Cache& c = cache ? *cache : local;
  c.Q = q_.forward(x, cache ? &c.q : nullptr);
  c.K = k_.forward(x, cache ? &c.k : nullptr);
  c.V = v_.forward(x, cache ? &c.v : nullptr);
  const Eigen::Index dh = x.cols() / heads_;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Mat concat(x.rows(), x.cols());
  c.probs.resize(heads_);
  for (int h = 0; h < heads_; ++h) {
    const auto Qh = c.Q.middleCols(h * dh, dh);
    const auto Kh = c.K.middleCols(h * dh, dh);
    const auto Vh = c.V.middleCols(h * dh, dh);
    Mat p = (Qh * Kh.transpose()) * scale;
    softmax_rows_inplace(p);
    concat.middleCols(h * dh, dh) = p * Vh;
    c.probs[h] = std::move(p);
  }
  return o_.forward(concat, cache ? &c.o : nullptr);
}

Mat SelfAttention::backward(const Mat& dy, const Cache& c) {
  const Mat dconcat = o_.backward(dy, c.o);
  const Eigen::Index dh = dy.cols() / heads_;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Mat dQ(dy.rows(), dy.cols()), dK(dy.rows(), dy.cols()), dV(dy.rows(), dy.cols());
  for (int h = 0; h < heads_; ++h) {
    const Mat& p = c.probs[h];
    const auto dO = dconcat.middleCols(h * dh, dh);
    dV.middleCols(h * dh, dh) = p.transpose() * dO;
    const Mat dp = dO * c.V.middleCols(h * dh, dh).transpose();
    const Eigen::VectorXd dot = (dp.array() * p.array()).rowwise().sum();
    const Mat ds = (p.array() * (dp.array().colwise() - dot.array())).matrix() * scale;
    dQ.middleCols(h * dh, dh) = ds * c.K.middleCols(h * dh, dh);
    dK.middleCols(h * dh, dh) = ds.transpose() * c.Q.middleCols(h * dh, dh);
  }
  return q_.backward(dQ, c.q) + k_.backward(dK, c.k) + v_.backward(dV, c.v);
}

void SelfAttention::collect(std::vector<Param*>& out) {
  q_.collect(out);
  k_.collect(out);
  v_.collect(out);
  o_.collect(out);
}

// --- Block

TransformerBlock::TransformerBlock(const std::string& name, int dim, int heads, int ff, double init_std, Rng& rng)
    : ln1_(name + ".ln1", dim),
      ln2_(name + ".ln2", dim),
      attn_(name + ".attn", dim, heads, init_std, rng),
      fc1_(name + ".fc1", dim, ff, init_std, rng),
      fc2_(name + ".fc2", ff, dim, init_std, rng) {}

Mat TransformerBlock::forward(const Mat& x, Cache* cache) const {
  Cache local;
  Cache& c = cache ? *cache : local;
  const bool rec = cache != nullptr;
  const Mat h = x + attn_.forward(ln1_.forward(x, rec ? &c.ln1 : nullptr), rec ? &c.attn : nullptr);
  c.pre_act = fc1_.forward(ln2_.forward(h, rec ? &c.ln2 : nullptr), rec ? &c.fc1 : nullptr);
  return h + fc2_.forward(gelu(c.pre_act), rec ? &c.fc2 : nullptr);
}

Mat TransformerBlock::backward(const Mat& dy, const Cache& c) {
  const Mat dact = fc2_.backward(dy, c.fc2);
  const Mat dh = dy + ln2_.backward(fc1_.backward(gelu_backward(c.pre_act, dact), c.fc1), c.ln2);
  return dh + ln1_.backward(attn_.backward(dh, c.attn), c.ln1);
}

void TransformerBlock::collect(std::vector<Param*>& out) {
  ln1_.collect(out);
  attn_.collect(out);
  ln2_.collect(out);
  fc1_.collect(out);
  fc2_.collect(out);
}

// --- Loss

Mat log_softmax(const Mat& logits) {
  Mat out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double mx = logits.row(r).maxCoeff();
    const double lse = mx + std::log((logits.row(r).array() - mx).exp().sum());
    out.row(r) = logits.row(r).array() - lse;
  }
  return out;
}

double cross_entropy(const Mat& logits, const std::vector<int>& rows, const std::vector<int>& targets,
                     Mat* dlogits) {
  if (rows.size() != targets.size() || rows.empty()) throw InvalidArgument("cross_entropy needs matching rows");
  if (dlogits) *dlogits = Mat::Zero(logits.rows(), logits.cols());
  const double inv = 1.0 / static_cast<double>(rows.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Eigen::Index r = rows[i];
    const double mx = logits.row(r).maxCoeff();
    const Eigen::RowVectorXd e = (logits.row(r).array() - mx).exp();
    const double z = e.sum();
    loss -= (logits(r, targets[i]) - mx - std::log(z)) * inv;
    if (dlogits) {
      dlogits->row(r) = e / z * inv;
      (*dlogits)(r, targets[i]) -= inv;
    }
  }
  return loss;
}

// --- Adam

Adam::Adam(std::vector<Param*> params, AdamConfig config) : params_(std::move(params)), config_(config) {
  for (const Param* p : params_) {
    m_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::zero_grad() {
  for (Param* p : params_) p->zero_grad();
}

void Adam::step() {
  double sq = 0.0;
  for (const Param* p : params_) sq += p->grad.squaredNorm();
  last_norm_ = std::sqrt(sq);
  const double clip = (config_.clip_norm > 0.0 && last_norm_ > config_.clip_norm) ? config_.clip_norm / last_norm_ : 1.0;
  ++step_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const Mat g = params_[i]->grad * clip;
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * g;
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * g.cwiseProduct(g);
    params_[i]->value.array() -=
        config_.lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + config_.eps);
  }
}

}  // namespace critter::gen
