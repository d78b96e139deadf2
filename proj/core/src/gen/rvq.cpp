#include "critter/gen/rvq.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "critter/gen/checkpoint.hpp"
#include "critter/motion/bvh.hpp"
#include "critter/util/binary_io.hpp"
#include "critter/util/error.hpp"
#include "tensor_io.hpp"

namespace critter::gen {

namespace {

int nearest_code(const Mat& codebook, const Eigen::RowVectorXd& x) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < codebook.rows(); ++k) {
    const double d = (codebook.row(k) - x).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(k);
    }
  }
  return best;
}

void check_codebooks(const Codebooks& codebooks) {
  if (codebooks.empty()) throw InvalidArgument("no codebooks");
  for (const auto& cb : codebooks) {
    if (cb.rows() != codebooks[0].rows() || cb.cols() != codebooks[0].cols() || cb.rows() < 1) {
      throw InvalidArgument("codebooks must share (K, d)");
    }
  }
}

void seed_layer(Mat& cb, const Mat& pts, bool pinned_zero, Rng& rng) {
  const Eigen::Index count = pts.rows();
  Eigen::VectorXd mind = Eigen::VectorXd::Constant(count, std::numeric_limits<double>::infinity());
  auto absorb = [&](const Eigen::RowVectorXd& c) {
    for (Eigen::Index i = 0; i < count; ++i) mind(i) = std::min(mind(i), (pts.row(i) - c).squaredNorm());
  };
  if (pinned_zero) {
    cb.row(0).setZero();
  } else {
    cb.row(0) = pts.row(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(count))));
  }
  absorb(cb.row(0));
  for (Eigen::Index k = 1; k < cb.rows(); ++k) {
    Eigen::Index idx = 0;
    mind.maxCoeff(&idx);
    cb.row(k) = pts.row(idx);
    absorb(cb.row(k));
  }
}

}  // namespace

Quantization quantize_residual(const Mat& latent, const Codebooks& codebooks) {
  check_codebooks(codebooks);
  if (latent.cols() != codebooks[0].cols()) throw InvalidArgument("latent width does not match codebooks");
  const auto layers = static_cast<Eigen::Index>(codebooks.size());
  Quantization q;
  q.grid.codebook_size = static_cast<int>(codebooks[0].rows());
  q.grid.layers.resize(layers, latent.rows());
  q.quantized_sum = Mat::Zero(latent.rows(), latent.cols());
  q.residual_norms.resize(layers, latent.rows());
  for (Eigen::Index i = 0; i < latent.rows(); ++i) {
    Eigen::RowVectorXd r = latent.row(i);
    for (Eigen::Index v = 0; v < layers; ++v) {
      const int k = nearest_code(codebooks[v], r);
      q.grid.layers(v, i) = k;
      q.quantized_sum.row(i) += codebooks[v].row(k);
      r -= codebooks[v].row(k);
      q.residual_norms(v, i) = r.norm();
    }
  }
  return q;
}

Mat sum_codes(const TokenGrid& grid, const Codebooks& codebooks, int layers) {
  check_codebooks(codebooks);
  grid.validate();
  if (grid.codebook_size != codebooks[0].rows() || layers > grid.layers.rows() ||
      layers > static_cast<int>(codebooks.size())) {
    throw InvalidArgument("token grid does not fit the codebooks");
  }
  Mat out = Mat::Zero(grid.length(), codebooks[0].cols());
  for (int v = 0; v < layers; ++v) {
    for (int i = 0; i < grid.length(); ++i) out.row(i) += codebooks[v].row(grid.layers(v, i));
  }
  return out;
}

// --- model

RvqModel::RvqModel(const RvqConfig& config, motion::FeatureSpec spec, double frame_time)
    : config_(config), spec_(std::move(spec)), frame_time_(frame_time) {
  const int D = spec_.dim();
  const int f = config_.downsample;
  if (config_.codebook_size < 1 || config_.residual_layers < 0 || config_.latent_dim < 1 || f < 1 ||
      config_.hidden < 1) {
    throw InvalidArgument("invalid RVQ configuration");
  }
  if (!(frame_time_ > 0.0)) throw InvalidArgument("frame time must be positive");
  if (config_.encoder == EncoderKind::kIdentity && config_.latent_dim != f * D) {
    throw InvalidArgument("identity encoder needs latent_dim == downsample * feature dim");
  }
  Rng rng(config_.seed);
  mean_ = Eigen::RowVectorXd::Zero(D);
  std_ = Eigen::RowVectorXd::Ones(D);
  if (config_.encoder == EncoderKind::kMlp) {
    const int in = f * D;
    const int h = config_.hidden;
    const int d = config_.latent_dim;
    enc1_ = Linear("enc1", in, h, std::sqrt(1.0 / in), rng);
    enc2_ = Linear("enc2", h, d, std::sqrt(1.0 / h), rng);
    dec1_ = Linear("dec1", d, h, std::sqrt(1.0 / d), rng);
    dec2_ = Linear("dec2", h, in, std::sqrt(1.0 / h), rng);
  }
  for (int v = 0; v <= config_.residual_layers; ++v) {
    Mat cb = random_normal(config_.codebook_size, config_.latent_dim, 1.0 / std::sqrt(config_.latent_dim), rng);
    if (v > 0) cb.row(0).setZero();
    codebooks_.push_back(std::move(cb));
  }
}

std::vector<Param*> RvqModel::parameters() {
  std::vector<Param*> out;
  if (config_.encoder == EncoderKind::kMlp) {
    enc1_.collect(out);
    enc2_.collect(out);
    dec1_.collect(out);
    dec2_.collect(out);
  }
  return out;
}

Mat RvqModel::normalize_rows(const Mat& features) const {
  const int D = spec_.dim();
  const int f = config_.downsample;
  if (features.cols() != D) throw InvalidArgument("feature width does not match the model");
  if (features.rows() % f != 0 || features.rows() == 0) {
    throw InvalidArgument("frame count must be a positive multiple of " + std::to_string(f));
  }
  Mat norm = features;
  if (config_.encoder == EncoderKind::kMlp) {
    norm = ((features.rowwise() - mean_).array().rowwise() / std_.array()).matrix();
  }
  const Eigen::Index n = features.rows() / f;
  Mat rows(n, static_cast<Eigen::Index>(f) * D);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int k = 0; k < f; ++k) rows.block(i, static_cast<Eigen::Index>(k) * D, 1, D) = norm.row(i * f + k);
  }
  return rows;
}

Mat RvqModel::encode_rows(const Mat& rows, EncoderCache* cache) const {
  if (config_.encoder == EncoderKind::kIdentity) return rows;
  Mat pre = enc1_.forward(rows, cache ? &cache->l1 : nullptr);
  Mat out = enc2_.forward(gelu(pre), cache ? &cache->l2 : nullptr);
  if (cache) cache->pre_act = std::move(pre);
  return out;
}

Mat RvqModel::decode_rows(const Mat& latent, DecoderCache* cache) const {
  if (latent.cols() != config_.latent_dim) throw InvalidArgument("latent width does not match the model");
  if (config_.encoder == EncoderKind::kIdentity) return latent;
  Mat pre = dec1_.forward(latent, cache ? &cache->l1 : nullptr);
  Mat out = dec2_.forward(gelu(pre), cache ? &cache->l2 : nullptr);
  if (cache) cache->pre_act = std::move(pre);
  return out;
}

Mat RvqModel::backward_decoder(const Mat& drows, const DecoderCache& cache) {
  if (config_.encoder == EncoderKind::kIdentity) return drows;
  return dec1_.backward(gelu_backward(cache.pre_act, dec2_.backward(drows, cache.l2)), cache.l1);
}

void RvqModel::backward_encoder(const Mat& dlatent, const EncoderCache& cache) {
  if (config_.encoder == EncoderKind::kIdentity) return;
  enc1_.backward(gelu_backward(cache.pre_act, enc2_.backward(dlatent, cache.l2)), cache.l1);
}

Mat RvqModel::encode(const Mat& features) const { return encode_rows(normalize_rows(features)); }

Mat RvqModel::decode_latent(const Mat& latent) const {
  const Mat rows = decode_rows(latent);
  const int D = spec_.dim();
  const int f = config_.downsample;
  Mat out(rows.rows() * f, D);
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    for (int k = 0; k < f; ++k) out.row(i * f + k) = rows.block(i, static_cast<Eigen::Index>(k) * D, 1, D);
  }
  if (config_.encoder == EncoderKind::kMlp) out = ((out.array().rowwise() * std_.array()).rowwise() + mean_.array()).matrix();
  return out;
}

motion::FeatureMatrix RvqModel::decode_tokens(const TokenGrid& grid) const {
  if (grid.depth() != config_.residual_layers) throw InvalidArgument("token grid depth does not match the model");
  motion::FeatureMatrix fm{decode_latent(sum_codes(grid, codebooks_, grid.depth() + 1)), spec_, {}, frame_time_};
  return fm;
}

TokenGrid RvqModel::tokenize(const Mat& features) const {
  const Eigen::Index usable = features.rows() - features.rows() % config_.downsample;
  return quantize(encode(features.topRows(usable))).grid;
}

void RvqModel::seed_codebooks(const Mat& latents, Rng& rng) {
  if (latents.rows() == 0 || latents.cols() != config_.latent_dim) throw InvalidArgument("no latents to seed from");
  Mat residual = latents;
  for (std::size_t v = 0; v < codebooks_.size(); ++v) {
    seed_layer(codebooks_[v], residual, v > 0, rng);
    for (Eigen::Index i = 0; i < residual.rows(); ++i) {
      residual.row(i) -= codebooks_[v].row(nearest_code(codebooks_[v], residual.row(i)));
    }
  }
}

// --- checkpoint

std::vector<std::uint8_t> RvqModel::encode_checkpoint() const {
  const auto dfs = spec_.skeleton.depth_first_order();
  for (std::size_t i = 0; i < dfs.size(); ++i) {
    // The skeleton travels as BVH text, which lists joints depth-first.
    if (dfs[i] != static_cast<int>(i)) throw InvalidArgument("checkpoint skeleton must be in depth-first joint order");
  }
  io::ByteWriter w;
  write_checkpoint_header(w, CheckpointKind::kRvq);
  w.u32(static_cast<std::uint32_t>(config_.codebook_size));
  w.u32(static_cast<std::uint32_t>(config_.residual_layers));
  w.u32(static_cast<std::uint32_t>(config_.latent_dim));
  w.u32(static_cast<std::uint32_t>(config_.downsample));
  w.u32(static_cast<std::uint32_t>(config_.hidden));
  w.u32(static_cast<std::uint32_t>(config_.encoder));
  w.u32(static_cast<std::uint32_t>(spec_.dim()));
  w.u32(static_cast<std::uint32_t>(spec_.up));
  w.f32(static_cast<float>(frame_time_));
  detail::write_tensor(w, mean_);
  detail::write_tensor(w, std_);
  for (Param* p : const_cast<RvqModel*>(this)->parameters()) detail::write_tensor(w, p->value);
  for (const auto& cb : codebooks_) detail::write_tensor(w, cb);
  // Skeleton as a one-frame BVH document.
  const motion::MotionClip rest(spec_.skeleton, frame_time_,
                                Eigen::MatrixXd::Zero(1, spec_.skeleton.num_channels()));
  w.str(motion::write_bvh(rest));
  return w.take();
}

void RvqModel::save(const std::string& path) const { io::write_file_atomic(path, encode_checkpoint()); }

RvqModel RvqModel::decode_checkpoint(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes);
  read_checkpoint_header(r, CheckpointKind::kRvq);
  RvqConfig cfg;
  cfg.codebook_size = static_cast<int>(r.u32());
  cfg.residual_layers = static_cast<int>(r.u32());
  cfg.latent_dim = static_cast<int>(r.u32());
  cfg.downsample = static_cast<int>(r.u32());
  cfg.hidden = static_cast<int>(r.u32());
  const auto enc = r.u32();
  if (enc > 1) throw ParseError("unknown encoder kind " + std::to_string(enc));
  cfg.encoder = static_cast<EncoderKind>(enc);
  const auto dim = r.u32();
  const auto up = r.u32();
  if (up != 1 && up != 2) throw ParseError("unknown up axis " + std::to_string(up));
  const double frame_time = r.f32();
  if (cfg.codebook_size > (1 << 20) || cfg.residual_layers > 64 || cfg.latent_dim > (1 << 16) ||
      cfg.hidden > (1 << 16) || cfg.downsample > 1024) {
    throw ParseError("implausible RVQ checkpoint configuration");
  }
  // Tensor payload comes before the skeleton; read the skeleton first.
  io::ByteReader probe(bytes);
  {
    read_checkpoint_header(probe, CheckpointKind::kRvq);
    for (int i = 0; i < 8; ++i) probe.u32();
    probe.f32();
    auto skip_tensor = [&] {
      const std::uint64_t rows = probe.u32();
      const std::uint64_t cols = probe.u32();
      if (rows * cols * 4 > probe.remaining()) throw ParseError("truncated RVQ checkpoint");
      for (std::uint64_t i = 0; i < rows * cols; ++i) probe.u32();
    };
    const int tensors = 2 + (cfg.encoder == EncoderKind::kMlp ? 8 : 0) + cfg.residual_layers + 1;
    for (int t = 0; t < tensors; ++t) skip_tensor();
  }
  const motion::MotionClip rest = motion::parse_bvh(probe.str());
  if (!probe.at_end()) throw ParseError("trailing bytes after RVQ checkpoint");
  motion::FeatureSpec spec{rest.skeleton(), static_cast<motion::UpAxis>(up)};
  if (spec.dim() != static_cast<int>(dim)) throw ParseError("checkpoint feature width does not match its skeleton");

  RvqModel model(cfg, spec, frame_time);
  detail::read_tensor(r, model.mean_, "feature_mean");
  detail::read_tensor(r, model.std_, "feature_std");
  for (Param* p : model.parameters()) detail::read_tensor(r, p->value, p->name.c_str());
  for (auto& cb : model.codebooks_) detail::read_tensor(r, cb, "codebook");
  return model;
}

RvqModel RvqModel::load(const std::string& path) { return decode_checkpoint(io::read_file_bytes(path)); }

// --- training

namespace {

struct EmaLayer {
  Eigen::VectorXd count;
  Mat sum;
  std::vector<int> last_used;
  Eigen::VectorXd batch_count;
  Mat batch_sum;
  std::vector<Mat> seen;  // residual inputs observed this epoch
};

}  // namespace

RvqTrainResult train_rvq(const std::vector<motion::FeatureMatrix>& dataset, const RvqConfig& config) {
  if (dataset.empty()) throw InvalidArgument("empty RVQ training set");
  const int D = dataset.front().spec.dim();
  for (const auto& fm : dataset) {
    if (fm.data.cols() != D) throw InvalidArgument("RVQ training set has mixed feature widths");
    if (fm.data.rows() < config.downsample) throw InvalidArgument("clip shorter than the downsample factor");
  }
  if (config.epochs < 0 || config.batch_size < 1) throw InvalidArgument("invalid RVQ training schedule");

  RvqModel model(config, dataset.front().spec, dataset.front().frame_time);
  Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

  if (config.encoder == EncoderKind::kMlp) {
    Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(D);
    Eigen::RowVectorXd sq = Eigen::RowVectorXd::Zero(D);
    double frames = 0.0;
    for (const auto& fm : dataset) {
      sum += fm.data.colwise().sum();
      sq += fm.data.array().square().colwise().sum().matrix();
      frames += static_cast<double>(fm.data.rows());
    }
    model.feature_mean() = sum / frames;
    Eigen::RowVectorXd var = sq / frames - model.feature_mean().cwiseProduct(model.feature_mean());
    model.feature_std() = var.unaryExpr([](double v) { return v > 1e-12 ? std::sqrt(v) : 1.0; });
  }

  std::vector<Mat> rows;
  Eigen::Index total_rows = 0;
  for (const auto& fm : dataset) {
    const Eigen::Index usable = fm.data.rows() - fm.data.rows() % config.downsample;
    rows.push_back(model.normalize_rows(fm.data.topRows(usable)));
    total_rows += rows.back().rows();
  }
  {
    Mat all(total_rows, config.latent_dim);
    Eigen::Index at = 0;
    for (const auto& x : rows) {
      const Mat lat = model.encode_rows(x);
      all.middleRows(at, lat.rows()) = lat;
      at += lat.rows();
    }
    model.seed_codebooks(all, rng);
  }

  const int layers = config.residual_layers + 1;
  const int K = config.codebook_size;
  const int d = config.latent_dim;
  std::vector<EmaLayer> ema(static_cast<std::size_t>(layers));
  for (int v = 0; v < layers; ++v) {
    ema[v].count = Eigen::VectorXd::Ones(K);
    ema[v].sum = model.codebooks()[v];
    ema[v].last_used.assign(static_cast<std::size_t>(K), 0);
  }

  const auto params = model.parameters();
  Adam adam(params, AdamConfig{config.lr});
  RvqTrainReport report;
  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    for (auto& e : ema) e.seen.clear();
    double epoch_loss = 0.0;

    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      const double inv_batch = 1.0 / static_cast<double>(stop - start);
      adam.zero_grad();
      for (auto& e : ema) {
        e.batch_count = Eigen::VectorXd::Zero(K);
        e.batch_sum = Mat::Zero(K, d);
      }
      for (std::size_t b = start; b < stop; ++b) {
        const std::size_t idx = order[b];
        const Mat& x = rows[idx];
        RvqModel::EncoderCache ec;
        RvqModel::DecoderCache dc;
        const Mat lat = model.encode_rows(x, &ec);
        const Quantization q = model.quantize(lat);
        const Mat rec = model.decode_rows(q.quantized_sum, &dc);
        const Mat diff = rec - x;
        const double recon = diff.squaredNorm() / static_cast<double>(diff.size());
        const Mat commit_diff = lat - q.quantized_sum;
        const double commit = commit_diff.squaredNorm() / static_cast<double>(lat.size());
        const double loss = recon + config.beta * commit;
        if (!std::isfinite(loss)) {
          std::ostringstream os;
          os << "RVQ training diverged at epoch " << epoch << ", clip " << idx << ": reconstruction " << recon
             << ", commitment " << commit << ", last gradient norm " << adam.last_grad_norm();
          throw Error(os.str());
        }
        epoch_loss += loss;
        if (!params.empty()) {
          Mat dlat = model.backward_decoder(diff * (2.0 * inv_batch / static_cast<double>(diff.size())), dc);
          dlat += commit_diff * (2.0 * config.beta * inv_batch / static_cast<double>(lat.size()));
          model.backward_encoder(dlat, ec);
        }
        Mat residual = lat;
        for (int v = 0; v < layers; ++v) {
          ema[v].seen.push_back(residual);
          for (Eigen::Index i = 0; i < residual.rows(); ++i) {
            const int k = q.grid.layers(v, i);
            ema[v].batch_count(k) += 1.0;
            ema[v].batch_sum.row(k) += residual.row(i);
            ema[v].last_used[static_cast<std::size_t>(k)] = epoch;
            residual.row(i) -= model.codebooks()[v].row(k);
          }
        }
      }
      if (!params.empty()) adam.step();
      for (int v = 0; v < layers; ++v) {
        auto& e = ema[v];
        for (int k = (v > 0 ? 1 : 0); k < K; ++k) {
          if (e.batch_count(k) == 0.0) continue;
          e.count(k) = config.ema_decay * e.count(k) + (1.0 - config.ema_decay) * e.batch_count(k);
          e.sum.row(k) = config.ema_decay * e.sum.row(k) + (1.0 - config.ema_decay) * e.batch_sum.row(k);
          model.codebooks()[v].row(k) = e.sum.row(k) / e.count(k);
        }
      }
    }

    for (int v = 0; v < layers; ++v) {
      auto& e = ema[v];
      for (int k = (v > 0 ? 1 : 0); k < K; ++k) {
        if (epoch - e.last_used[static_cast<std::size_t>(k)] < config.dead_code_epochs) continue;
        const Mat& src = e.seen[rng.below(e.seen.size())];
        const Eigen::RowVectorXd row = src.row(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(src.rows()))));
        model.codebooks()[v].row(k) = row;
        e.sum.row(k) = row;
        e.count(k) = 1.0;
        e.last_used[static_cast<std::size_t>(k)] = epoch;
      }
    }
    report.epoch_loss.push_back(epoch_loss / static_cast<double>(dataset.size()));
  }

  double recon_sum = 0.0, quant_sum = 0.0;
  double recon_n = 0.0, quant_n = 0.0;
  for (const auto& x : rows) {
    const Mat lat = model.encode_rows(x);
    const Quantization q = model.quantize(lat);
    recon_sum += (model.decode_rows(q.quantized_sum) - x).squaredNorm();
    quant_sum += (lat - q.quantized_sum).squaredNorm();
    recon_n += static_cast<double>(x.size());
    quant_n += static_cast<double>(lat.size());
  }
  report.recon_mse = recon_sum / recon_n;
  report.quant_mse = quant_sum / quant_n;
  return RvqTrainResult{std::move(model), std::move(report)};
}

}  // namespace critter::gen
