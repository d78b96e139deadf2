#include "critter/gen/generator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "critter/gen/checkpoint.hpp"
#include "critter/motion/features.hpp"
#include "critter/util/binary_io.hpp"
#include "critter/util/error.hpp"
#include "tensor_io.hpp"

namespace critter::gen {

namespace {

constexpr double kInitStd = 0.02;

void check_config(const TransformerConfig& c) {
  if (c.codebook_size < 1 || c.residual_layers < 0 || c.text_dim < 1 || c.width < 1 || c.layers < 0 ||
      c.heads < 1 || c.ff < 1 || c.max_len < 1 || c.width % c.heads != 0) {
    throw InvalidArgument("invalid transformer configuration");
  }
}

void check_text(const Eigen::VectorXd& text, int dim) {
  if (text.size() != dim) {
    throw InvalidArgument("text embedding has width " + std::to_string(text.size()) + ", expected " +
                          std::to_string(dim));
  }
}

int argmax_row(const Mat& m, Eigen::Index r) {
  int best = 0;
  for (Eigen::Index k = 1; k < m.cols(); ++k) {
    if (m(r, k) > m(r, best)) best = static_cast<int>(k);
  }
  return best;
}

int sample_row(const Mat& logits, Eigen::Index r, double temperature, Rng& rng) {
  if (temperature <= 0.0) return argmax_row(logits, r);
  const Eigen::RowVectorXd scaled = logits.row(r) / temperature;
  const Eigen::RowVectorXd e = (scaled.array() - scaled.maxCoeff()).exp();
  const double u = rng.uniform() * e.sum();
  double acc = 0.0;
  for (Eigen::Index k = 0; k < e.size(); ++k) {
    acc += e(k);
    if (u < acc) return static_cast<int>(k);
  }
  return static_cast<int>(e.size() - 1);
}

std::vector<int> choose_positions(int n, int count, Rng& rng) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  for (int i = 0; i < count; ++i) {
    const auto j = static_cast<std::size_t>(i) + rng.below(static_cast<std::uint64_t>(n - i));
    std::swap(idx[static_cast<std::size_t>(i)], idx[j]);
  }
  idx.resize(static_cast<std::size_t>(count));
  std::sort(idx.begin(), idx.end());
  return idx;
}

int training_mask_count(int n, Rng& rng) {
  const double ratio = std::cos(std::numbers::pi * rng.uniform() / 2.0);
  return std::clamp(static_cast<int>(std::ceil(ratio * n)), 1, n);
}

void check_dataset(const GeneratorModel& model, const std::vector<TokenGrid>& tokens,
                   const std::vector<Eigen::VectorXd>& texts) {
  if (tokens.empty()) throw InvalidArgument("empty token dataset");
  if (tokens.size() != texts.size()) throw InvalidArgument("token and text counts differ");
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    tokens[i].validate();
    if (tokens[i].codebook_size != model.config().codebook_size) throw InvalidArgument("token codebook size mismatch");
    if (tokens[i].depth() != model.config().residual_layers) throw InvalidArgument("token depth mismatch");
    if (tokens[i].length() < 1 || tokens[i].length() > model.config().max_len) {
      throw InvalidArgument("token sequence length outside [1, max_len]");
    }
    check_text(texts[i], model.config().text_dim);
  }
}

void check_finite(double loss, const char* what, int epoch, std::size_t sample) {
  if (!std::isfinite(loss)) {
    std::ostringstream os;
    os << what << " training diverged at epoch " << epoch << ", sample " << sample << " (loss " << loss << ")";
    throw Error(os.str());
  }
}

std::vector<std::size_t> identity_order(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

}  // namespace

// --- trunk

TokenTrunk::TokenTrunk(const std::string& name, const TransformerConfig& cfg, Rng& rng)
    : max_len_(cfg.max_len),
      text_(name + ".text", cfg.text_dim, cfg.width, kInitStd, rng),
      ln_(name + ".ln_f", cfg.width),
      head_(name + ".head", cfg.width, cfg.codebook_size, kInitStd, rng) {
  pos_.init(name + ".pos", cfg.max_len, cfg.width);
  pos_.value = random_normal(cfg.max_len, cfg.width, kInitStd, rng);
  for (int l = 0; l < cfg.layers; ++l) {
    blocks_.emplace_back(name + ".block" + std::to_string(l), cfg.width, cfg.heads, cfg.ff, kInitStd, rng);
  }
}

Mat TokenTrunk::forward(const Mat& x, const Eigen::VectorXd& text, Cache* cache) const {
  const Eigen::Index n = x.rows();
  if (n < 1 || n > max_len_) throw InvalidArgument("sequence length outside [1, max_len]");
  Mat h = x + pos_.value.topRows(n);
  h.rowwise() += text_.forward(text.transpose(), cache ? &cache->text : nullptr).row(0);
  if (cache) cache->blocks.resize(blocks_.size());
  for (std::size_t l = 0; l < blocks_.size(); ++l) h = blocks_[l].forward(h, cache ? &cache->blocks[l] : nullptr);
  return head_.forward(ln_.forward(h, cache ? &cache->ln : nullptr), cache ? &cache->head : nullptr);
}

Mat TokenTrunk::backward(const Mat& dlogits, const Cache& cache) {
  Mat dh = ln_.backward(head_.backward(dlogits, cache.head), cache.ln);
  for (std::size_t l = blocks_.size(); l-- > 0;) dh = blocks_[l].backward(dh, cache.blocks[l]);
  pos_.grad.topRows(dh.rows()) += dh;
  text_.backward(dh.colwise().sum(), cache.text);
  return dh;
}

void TokenTrunk::collect(std::vector<Param*>& out) {
  out.push_back(&pos_);
  text_.collect(out);
  for (auto& b : blocks_) b.collect(out);
  ln_.collect(out);
  head_.collect(out);
}

// --- mask transformer

MaskTransformer::MaskTransformer(const TransformerConfig& cfg, Rng& rng)
    : embed_("mask.embed", cfg.codebook_size + 1, cfg.width, kInitStd, rng), trunk_("mask", cfg, rng) {}

Mat MaskTransformer::forward(const std::vector<int>& tokens, const Eigen::VectorXd& text, Cache* cache) const {
  if (cache) cache->tokens = tokens;
  return trunk_.forward(embed_.forward(tokens), text, cache ? &cache->trunk : nullptr);
}

void MaskTransformer::backward(const Mat& dlogits, const Cache& cache) {
  embed_.backward(cache.tokens, trunk_.backward(dlogits, cache.trunk));
}

void MaskTransformer::collect(std::vector<Param*>& out) {
  embed_.collect(out);
  trunk_.collect(out);
}

// --- residual transformer

ResidualTransformer::ResidualTransformer(const TransformerConfig& cfg, Rng& rng) {
  for (int l = 0; l < cfg.residual_layers; ++l) {
    layer_embed_.emplace_back("residual.embed" + std::to_string(l), cfg.codebook_size, cfg.width, kInitStd, rng);
  }
  indicator_ = Embedding("residual.indicator", cfg.residual_layers, cfg.width, kInitStd, rng);
  trunk_ = TokenTrunk("residual", cfg, rng);
}

Mat ResidualTransformer::forward(const TokenGrid& grid, int layer, const Eigen::VectorXd& text, Cache* cache) const {
  if (layer < 1 || layer > static_cast<int>(layer_embed_.size())) throw InvalidArgument("residual layer out of range");
  if (grid.layers.rows() < layer) throw InvalidArgument("token grid lacks the preceding layers");
  Mat x = Mat::Zero(grid.length(), indicator_.table.value.cols());
  if (cache) {
    cache->inputs.clear();
    cache->layer = layer;
  }
  for (int l = 0; l < layer; ++l) {
    const std::vector<int> ids = grid.layer(l);
    x += layer_embed_[static_cast<std::size_t>(l)].forward(ids);
    if (cache) cache->inputs.push_back(ids);
  }
  x.rowwise() += indicator(layer);
  return trunk_.forward(x, text, cache ? &cache->trunk : nullptr);
}

void ResidualTransformer::backward(const Mat& dlogits, const Cache& cache) {
  const Mat dx = trunk_.backward(dlogits, cache.trunk);
  for (std::size_t l = 0; l < cache.inputs.size(); ++l) layer_embed_[l].backward(cache.inputs[l], dx);
  indicator_.table.grad.row(cache.layer - 1) += dx.colwise().sum();
}

void ResidualTransformer::collect(std::vector<Param*>& out) {
  for (auto& e : layer_embed_) e.collect(out);
  indicator_.collect(out);
  trunk_.collect(out);
}

// --- model

GeneratorModel::GeneratorModel(const TransformerConfig& cfg) : config_(cfg) {
  check_config(cfg);
  Rng rng(cfg.seed);
  mask_ = MaskTransformer(cfg, rng);
  residual_ = ResidualTransformer(cfg, rng);
  text_encoder_ = std::make_shared<HashedTrigramEncoder>(cfg.text_dim);
}

void GeneratorModel::set_text_encoder(std::shared_ptr<const TextEncoder> encoder) {
  if (!encoder || encoder->dim() != config_.text_dim) throw InvalidArgument("text encoder width does not match the model");
  text_encoder_ = std::move(encoder);
}

std::vector<Param*> GeneratorModel::mask_parameters() {
  std::vector<Param*> out;
  mask_.collect(out);
  return out;
}

std::vector<Param*> GeneratorModel::residual_parameters() {
  std::vector<Param*> out;
  residual_.collect(out);
  return out;
}

std::vector<std::uint8_t> GeneratorModel::encode_checkpoint() const {
  io::ByteWriter w;
  write_checkpoint_header(w, CheckpointKind::kGenerator);
  for (const int v : {config_.codebook_size, config_.residual_layers, config_.text_dim, config_.width, config_.layers,
                      config_.heads, config_.ff, config_.max_len}) {
    w.u32(static_cast<std::uint32_t>(v));
  }
  w.u32(0);  // text encoder: hashed trigrams
  auto* self = const_cast<GeneratorModel*>(this);
  for (Param* p : self->mask_parameters()) detail::write_tensor(w, p->value);
  for (Param* p : self->residual_parameters()) detail::write_tensor(w, p->value);
  return w.take();
}

void GeneratorModel::save(const std::string& path) const { io::write_file_atomic(path, encode_checkpoint()); }

GeneratorModel GeneratorModel::decode_checkpoint(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes);
  read_checkpoint_header(r, CheckpointKind::kGenerator);
  TransformerConfig cfg;
  for (int* v : {&cfg.codebook_size, &cfg.residual_layers, &cfg.text_dim, &cfg.width, &cfg.layers, &cfg.heads,
                 &cfg.ff, &cfg.max_len}) {
    const auto raw = r.u32();
    if (raw > (1U << 20)) throw ParseError("implausible generator checkpoint configuration");
    *v = static_cast<int>(raw);
  }
  if (const auto enc = r.u32(); enc != 0) throw ParseError("unknown text encoder kind " + std::to_string(enc));
  try {
    check_config(cfg);
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("bad generator checkpoint: ") + e.what());
  }
  GeneratorModel model(cfg);
  for (Param* p : model.mask_parameters()) detail::read_tensor(r, p->value, p->name.c_str());
  for (Param* p : model.residual_parameters()) detail::read_tensor(r, p->value, p->name.c_str());
  if (!r.at_end()) throw ParseError("trailing bytes after generator checkpoint");
  return model;
}

GeneratorModel GeneratorModel::load(const std::string& path) { return decode_checkpoint(io::read_file_bytes(path)); }

// --- schedule

double MaskSchedule::ratio(double tau) const {
  if (tau >= 1.0) return 0.0;
  if (tau <= 0.0) return 1.0;
  return std::cos(std::numbers::pi * tau / 2.0);
}

int MaskSchedule::masked_after(int step, int n) const {
  return static_cast<int>(std::ceil(ratio(static_cast<double>(step) / iterations) * n));
}

// --- training

GenTrainLog train_masked(GeneratorModel& model, const std::vector<TokenGrid>& tokens,
                         const std::vector<Eigen::VectorXd>& texts, const GenTrainConfig& config) {
  check_dataset(model, tokens, texts);
  Adam adam(model.mask_parameters(), AdamConfig{config.lr});
  Rng rng(config.seed);
  const int mask_id = model.mask().mask_id();
  GenTrainLog log;
  auto order = identity_order(tokens.size());
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle(order, rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      const double inv = 1.0 / static_cast<double>(stop - start);
      adam.zero_grad();
      for (std::size_t b = start; b < stop; ++b) {
        const std::size_t i = order[b];
        std::vector<int> input = tokens[i].layer(0);
        const std::vector<int> target = input;
        const int n = static_cast<int>(input.size());
        const auto rows = choose_positions(n, training_mask_count(n, rng), rng);
        std::vector<int> targets;
        for (const int p : rows) {
          targets.push_back(target[static_cast<std::size_t>(p)]);
          input[static_cast<std::size_t>(p)] = mask_id;
        }
        MaskTransformer::Cache cache;
        const Mat logits = model.mask().forward(input, texts[i], &cache);
        Mat dlogits;
        const double loss = cross_entropy(logits, rows, targets, &dlogits);
        check_finite(loss, "masked transformer", epoch, i);
        total += loss;
        model.mask().backward(dlogits * inv, cache);
      }
      adam.step();
    }
    log.epoch_loss.push_back(total / static_cast<double>(tokens.size()));
  }
  return log;
}

GenTrainLog train_residual(GeneratorModel& model, const std::vector<TokenGrid>& tokens,
                           const std::vector<Eigen::VectorXd>& texts, const GenTrainConfig& config) {
  GenTrainLog log;
  const int V = model.config().residual_layers;
  if (V == 0) {
    log.warnings.push_back("no residual layers; residual transformer training skipped");
    return log;
  }
  check_dataset(model, tokens, texts);
  Adam adam(model.residual_parameters(), AdamConfig{config.lr});
  Rng rng(config.seed);
  auto order = identity_order(tokens.size());
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle(order, rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      const double inv = 1.0 / static_cast<double>(stop - start);
      adam.zero_grad();
      for (std::size_t b = start; b < stop; ++b) {
        const std::size_t i = order[b];
        const int j = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(V)));
        ResidualTransformer::Cache cache;
        const Mat logits = model.residual().forward(tokens[i], j, texts[i], &cache);
        std::vector<int> rows(static_cast<std::size_t>(tokens[i].length()));
        for (int p = 0; p < tokens[i].length(); ++p) rows[static_cast<std::size_t>(p)] = p;
        Mat dlogits;
        const double loss = cross_entropy(logits, rows, tokens[i].layer(j), &dlogits);
        check_finite(loss, "residual transformer", epoch, i);
        total += loss;
        model.residual().backward(dlogits * inv, cache);
      }
      adam.step();
    }
    log.epoch_loss.push_back(total / static_cast<double>(tokens.size()));
  }
  return log;
}

MaskedEval evaluate_masked(const GeneratorModel& model, const std::vector<TokenGrid>& tokens,
                           const std::vector<Eigen::VectorXd>& texts, std::uint64_t seed) {
  check_dataset(model, tokens, texts);
  Rng rng(seed);
  MaskedEval out;
  double correct = 0.0;
  double count = 0.0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    std::vector<int> input = tokens[i].layer(0);
    const std::vector<int> target = input;
    const int n = static_cast<int>(input.size());
    const auto rows = choose_positions(n, training_mask_count(n, rng), rng);
    std::vector<int> targets;
    for (const int p : rows) {
      targets.push_back(target[static_cast<std::size_t>(p)]);
      input[static_cast<std::size_t>(p)] = model.mask().mask_id();
    }
    const Mat logits = model.mask().forward(input, texts[i]);
    out.loss += cross_entropy(logits, rows, targets);
    for (std::size_t k = 0; k < rows.size(); ++k) {
      correct += argmax_row(logits, rows[k]) == targets[k] ? 1.0 : 0.0;
      count += 1.0;
    }
  }
  out.loss /= static_cast<double>(tokens.size());
  out.accuracy = correct / count;
  return out;
}

double residual_accuracy(const GeneratorModel& model, const std::vector<TokenGrid>& tokens,
                         const std::vector<Eigen::VectorXd>& texts) {
  check_dataset(model, tokens, texts);
  double correct = 0.0;
  double count = 0.0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    for (int j = 1; j <= tokens[i].depth(); ++j) {
      const Mat logits = model.residual().forward(tokens[i], j, texts[i]);
      for (int p = 0; p < tokens[i].length(); ++p) {
        correct += argmax_row(logits, p) == tokens[i].layers(j, p) ? 1.0 : 0.0;
        count += 1.0;
      }
    }
  }
  return count > 0.0 ? correct / count : 1.0;
}

// --- inference

std::vector<int> generate_base(const GeneratorModel& model, const Eigen::VectorXd& text, int n,
                               const MaskSchedule& schedule, double temperature, std::uint64_t seed,
                               GenerationTrace* trace) {
  if (n < 1) throw InvalidArgument("token length must be at least 1");
  if (schedule.iterations < 1) throw InvalidArgument("iteration count must be at least 1");
  check_text(text, model.config().text_dim);
  const int mask_id = model.mask().mask_id();
  Rng rng(seed);
  std::vector<int> tokens(static_cast<std::size_t>(n), mask_id);
  int masked = n;
  for (int step = 1; step <= schedule.iterations; ++step) {
    const Mat logits = model.mask().forward(tokens, text);
    const Mat lp = log_softmax(logits);
    if (trace) {
      trace->logits_finite = trace->logits_finite && logits.allFinite();
      const Eigen::VectorXd sums = lp.array().exp().rowwise().sum();
      trace->max_softmax_error = std::max(trace->max_softmax_error, (sums.array() - 1.0).abs().maxCoeff());
    }
    struct Pick {
      int pos;
      int token;
      double confidence;
    };
    std::vector<Pick> picks;
    for (int p = 0; p < n; ++p) {
      if (tokens[static_cast<std::size_t>(p)] != mask_id) continue;
      // Only the first K logits are codes.
      const int tok = sample_row(logits, p, temperature, rng);
      picks.push_back({p, tok, lp(p, tok)});
    }
    std::stable_sort(picks.begin(), picks.end(), [](const Pick& a, const Pick& b) { return a.confidence > b.confidence; });
    const int target = std::min(masked, schedule.masked_after(step, n));
    const int keep = masked - target;
    for (int k = 0; k < keep; ++k) tokens[static_cast<std::size_t>(picks[static_cast<std::size_t>(k)].pos)] = picks[static_cast<std::size_t>(k)].token;
    masked = target;
    if (trace) trace->masked_counts.push_back(masked);
  }
  return tokens;
}

TokenGrid generate_residuals(const GeneratorModel& model, const std::vector<int>& base, const Eigen::VectorXd& text) {
  const int V = model.config().residual_layers;
  const int n = static_cast<int>(base.size());
  TokenGrid grid;
  grid.codebook_size = model.config().codebook_size;
  grid.layers = Eigen::MatrixXi::Zero(V + 1, n);
  for (int p = 0; p < n; ++p) grid.layers(0, p) = base[static_cast<std::size_t>(p)];
  grid.validate();
  for (int j = 1; j <= V; ++j) {
    const Mat logits = model.residual().forward(grid, j, text);
    for (int p = 0; p < n; ++p) grid.layers(j, p) = argmax_row(logits, p);
  }
  return grid;
}

motion::MotionClip generate_motion(const std::string& prompt, const RvqModel& rvq, const GeneratorModel& generator,
                                   const GenerationOptions& options) {
  if (options.frames < 1) throw InvalidArgument("frame count must be positive");
  if (generator.config().codebook_size != rvq.config().codebook_size ||
      generator.config().residual_layers != rvq.config().residual_layers) {
    throw InvalidArgument("generator and RVQ model disagree on codebook shape");
  }
  const int f = rvq.config().downsample;
  const int n = (options.frames + f - 1) / f;
  if (n > generator.config().max_len) {
    throw InvalidArgument("requested " + std::to_string(options.frames) + " frames exceed the generator's " +
                          std::to_string(generator.config().max_len * f) + "-frame limit");
  }
  const Eigen::VectorXd text = generator.text_encoder().embed(prompt);
  const auto base = generate_base(generator, text, n, MaskSchedule{options.iterations}, options.temperature, options.seed);
  motion::FeatureMatrix fm = rvq.decode_tokens(generate_residuals(generator, base, text));
  fm.data = fm.data.topRows(options.frames).eval();
  return motion::from_features(fm);
}

}  // namespace critter::gen
