#include "critter/metrics/space.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "critter/util/binary_io.hpp"
#include "critter/util/error.hpp"
#include "critter/util/rng.hpp"
#include "critter/zoogen/dataset.hpp"

namespace critter::metrics {

using gen::Mat;
using nlohmann::json;

namespace {

constexpr double kStdFloor = 1e-6;

double column_std(const Eigen::VectorXd& v) {
  if (v.size() < 2) return 0.0;
  return std::sqrt((v.array() - v.mean()).square().mean());
}

Mat normalize_rows(const Mat& x, Eigen::VectorXd* norms = nullptr) {
  Eigen::VectorXd n = x.rowwise().norm().cwiseMax(1e-12);
  if (norms) *norms = n;
  return n.cwiseInverse().asDiagonal() * x;
}

// Backward of row normalization y = x / |x|.
Mat normalize_backward(const Mat& y, const Eigen::VectorXd& norms, const Mat& dy) {
  const Eigen::VectorXd dots = (y.array() * dy.array()).rowwise().sum();
  return norms.cwiseInverse().asDiagonal() * (dy - dots.asDiagonal() * y);
}

json param_to_json(const gen::Param& p) {
  std::vector<double> values(p.value.data(), p.value.data() + p.value.size());
  return {{"rows", p.value.rows()}, {"cols", p.value.cols()}, {"values", values}};
}

void param_from_json(gen::Param& p, const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto values = j.at("values").get<std::vector<double>>();
  if (rows != p.value.rows() || cols != p.value.cols() || static_cast<Eigen::Index>(values.size()) != rows * cols) {
    throw ParseError("embedding space parameter " + p.name + " has the wrong shape", 0, 0);
  }
  p.value = Eigen::Map<const Mat>(values.data(), rows, cols);
}

}  // namespace

std::string to_string(SpaceProvenance p) {
  return p == SpaceProvenance::kTrainedContrastive ? "trained-contrastive" : "deterministic";
}

Eigen::VectorXd motion_descriptor(const motion::FeatureMatrix& features) {
  const Mat& d = features.data;
  const int joints = features.spec.num_joints();
  if (joints < 1 || d.rows() < 1 || d.cols() != features.spec.dim()) {
    throw InvalidArgument("feature matrix does not match its spec");
  }
  const auto n = d.rows();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(kDescriptorDim);
  int at = 0;
  for (int c = 0; c < 4; ++c) out[at++] = d.col(c).mean();
  for (int c = 0; c < 4; ++c) out[at++] = column_std(d.col(c));

  for (int k = 0; k < 6; ++k) {
    double mean = 0.0, spread = 0.0;
    for (int j = 0; j < joints; ++j) {
      const Eigen::VectorXd col = d.col(features.spec.rotation_column(j) + k);
      mean += col.mean();
      spread += column_std(col);
    }
    out[at + k] = mean / joints;
    out[at + 6 + k] = spread / joints;
  }
  at += 12;

  for (int a = 0; a < 3; ++a) {
    double mean = 0.0, spread = 0.0;
    Eigen::VectorXd lo = Eigen::VectorXd::Constant(n, INFINITY), hi = Eigen::VectorXd::Constant(n, -INFINITY);
    for (int j = 0; j < joints; ++j) {
      const Eigen::VectorXd col = d.col(features.spec.position_column(j) + a);
      mean += col.mean();
      spread += column_std(col);
      lo = lo.cwiseMin(col);
      hi = hi.cwiseMax(col);
    }
    out[at + a] = mean / joints;
    out[at + 3 + a] = spread / joints;
    out[at + 6 + a] = (hi - lo).mean();
  }
  at += 9;

  double speed_sum = 0.0, speed_max = 0.0;
  for (Eigen::Index f = 1; f < n; ++f) {
    double s = 0.0;
    for (int j = 0; j < joints; ++j) {
      const int c = features.spec.position_column(j);
      s += (d.row(f).segment<3>(c) - d.row(f - 1).segment<3>(c)).norm();
    }
    s /= joints;
    speed_sum += s;
    speed_max = std::max(speed_max, s);
  }
  out[at++] = n > 1 ? speed_sum / static_cast<double>(n - 1) : 0.0;
  out[at++] = speed_max;
  out[at++] = std::log(static_cast<double>(joints));
  return out;
}

void SpaceConfig::validate() const {
  if (embed_dim < 1 || text_dim < 1 || hidden < 1) throw InvalidArgument("embedding space widths must be >= 1");
  if (epochs < 0 || batch < 2) throw InvalidArgument("space training needs epochs >= 0 and batch >= 2");
  if (!(lr > 0.0) || !(temperature > 0.0)) throw InvalidArgument("space lr and temperature must be positive");
}

EmbeddingSpace::EmbeddingSpace(const SpaceConfig& config)
    : config_(config),
      encoder_(config.text_dim),
      desc_mean_(Eigen::RowVectorXd::Zero(kDescriptorDim)),
      desc_std_(Eigen::RowVectorXd::Ones(kDescriptorDim)) {
  config_.validate();
  Rng rng(config.seed);
  text_proj_ = gen::Linear("text_proj", config.text_dim, config.embed_dim, 1.0 / std::sqrt(config.text_dim), rng);
  motion_fc1_ = gen::Linear("motion_fc1", kDescriptorDim, config.hidden, 1.0 / std::sqrt(kDescriptorDim), rng);
  motion_fc2_ = gen::Linear("motion_fc2", config.hidden, config.embed_dim, 1.0 / std::sqrt(config.hidden), rng);
}

EmbeddingSpace EmbeddingSpace::deterministic(const SpaceConfig& config) { return EmbeddingSpace(config); }

std::vector<gen::Param*> EmbeddingSpace::params() {
  std::vector<gen::Param*> out;
  text_proj_.collect(out);
  motion_fc1_.collect(out);
  motion_fc2_.collect(out);
  return out;
}

Mat EmbeddingSpace::standardize(const Mat& descriptors) const {
  return (descriptors.rowwise() - desc_mean_).array().rowwise() / desc_std_.array();
}

Eigen::VectorXd EmbeddingSpace::text_embed(std::string_view text) const {
  return text_embed(std::vector<std::string>{std::string(text)}).row(0).transpose();
}

Eigen::VectorXd EmbeddingSpace::motion_embed(const motion::FeatureMatrix& features) const {
  return motion_embed(std::vector<motion::FeatureMatrix>{features}).row(0).transpose();
}

Mat EmbeddingSpace::text_embed(const std::vector<std::string>& texts) const {
  Mat x(static_cast<Eigen::Index>(texts.size()), config_.text_dim);
  for (std::size_t i = 0; i < texts.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = encoder_.embed(texts[i]).transpose();
  return normalize_rows(text_proj_.forward(x));
}

Mat EmbeddingSpace::motion_embed(const std::vector<motion::FeatureMatrix>& clips) const {
  Mat x(static_cast<Eigen::Index>(clips.size()), kDescriptorDim);
  for (std::size_t i = 0; i < clips.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = motion_descriptor(clips[i]).transpose();
  return normalize_rows(motion_fc2_.forward(gen::gelu(motion_fc1_.forward(standardize(x)))));
}

json EmbeddingSpace::to_json() const {
  json params_json = json::object();
  for (const auto* p : const_cast<EmbeddingSpace*>(this)->params()) params_json[p->name] = param_to_json(*p);
  return {{"format", "critter-embedding-space"},
          {"version", 1},
          {"provenance", to_string(provenance_)},
          {"config",
           {{"embed_dim", config_.embed_dim},
            {"text_dim", config_.text_dim},
            {"hidden", config_.hidden},
            {"epochs", config_.epochs},
            {"batch", config_.batch},
            {"lr", config_.lr},
            {"temperature", config_.temperature},
            {"seed", config_.seed},
            {"train", config_.train}}},
          {"descriptor_mean", std::vector<double>(desc_mean_.data(), desc_mean_.data() + desc_mean_.size())},
          {"descriptor_std", std::vector<double>(desc_std_.data(), desc_std_.data() + desc_std_.size())},
          {"params", params_json}};
}

EmbeddingSpace EmbeddingSpace::from_json(const json& j) {
  try {
    if (j.at("format") != "critter-embedding-space" || j.at("version") != 1) {
      throw ParseError("not an embedding space file", 0, 0);
    }
    const json& c = j.at("config");
    SpaceConfig config;
    config.embed_dim = c.at("embed_dim");
    config.text_dim = c.at("text_dim");
    config.hidden = c.at("hidden");
    config.epochs = c.at("epochs");
    config.batch = c.at("batch");
    config.lr = c.at("lr");
    config.temperature = c.at("temperature");
    config.seed = c.at("seed");
    config.train = c.at("train");
    EmbeddingSpace space(config);
    const std::string prov = j.at("provenance");
    if (prov == "trained-contrastive") {
      space.provenance_ = SpaceProvenance::kTrainedContrastive;
    } else if (prov != "deterministic") {
      throw ParseError("unknown embedding space provenance '" + prov + "'", 0, 0);
    }
    const auto mean = j.at("descriptor_mean").get<std::vector<double>>();
    const auto stdv = j.at("descriptor_std").get<std::vector<double>>();
    if (mean.size() != kDescriptorDim || stdv.size() != kDescriptorDim) {
      throw ParseError("embedding space descriptor statistics have the wrong width", 0, 0);
    }
    space.desc_mean_ = Eigen::Map<const Eigen::RowVectorXd>(mean.data(), kDescriptorDim);
    space.desc_std_ = Eigen::Map<const Eigen::RowVectorXd>(stdv.data(), kDescriptorDim);
    for (auto* p : space.params()) param_from_json(*p, j.at("params").at(p->name));
    return space;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed embedding space: ") + e.what(), 0, 0);
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("malformed embedding space: ") + e.what(), 0, 0);
  }
}

void EmbeddingSpace::save(const std::string& path) const { io::write_file_atomic(path, to_json().dump()); }

EmbeddingSpace EmbeddingSpace::load(const std::string& path) {
  const std::string text = io::read_file_text(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("embedding space is not JSON: ") + e.what(), 0, 0);
  }
  return from_json(j);
}

EmbeddingSpace train_eval_space(const std::vector<SpaceExample>& examples, const SpaceConfig& config,
                                SpaceTrainLog* log) {
  config.validate();
  std::set<std::string> categories;
  for (const auto& e : examples) categories.insert(e.category);
  if (categories.size() < 2) throw InvalidArgument("embedding space training needs at least 2 categories");

  EmbeddingSpace space(config);
  if (!config.train) return space;

  const auto count = static_cast<Eigen::Index>(examples.size());
  Mat desc(count, kDescriptorDim);
  Mat text(count, config.text_dim);
  for (Eigen::Index i = 0; i < count; ++i) {
    desc.row(i) = motion_descriptor(examples[static_cast<std::size_t>(i)].features).transpose();
    text.row(i) = space.encoder_.embed(examples[static_cast<std::size_t>(i)].caption).transpose();
  }
  space.desc_mean_ = desc.colwise().mean();
  space.desc_std_ =
      ((desc.rowwise() - space.desc_mean_).array().square().colwise().mean().sqrt()).cwiseMax(kStdFloor).matrix();
  const Mat input = space.standardize(desc);

  gen::AdamConfig adam_config;
  adam_config.lr = config.lr;
  gen::Adam adam(space.params(), adam_config);
  Rng rng(config.seed ^ 0x5eed5eedULL);
  std::vector<int> order(static_cast<std::size_t>(count));
  std::iota(order.begin(), order.end(), 0);
  const double inv_tau = 1.0 / config.temperature;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start + 1 < order.size(); start += static_cast<std::size_t>(config.batch)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch));
      const auto b = static_cast<Eigen::Index>(end - start);
      if (b < 2) break;
      Mat xt(b, config.text_dim), xm(b, kDescriptorDim);
      for (Eigen::Index r = 0; r < b; ++r) {
        xt.row(r) = text.row(order[start + static_cast<std::size_t>(r)]);
        xm.row(r) = input.row(order[start + static_cast<std::size_t>(r)]);
      }
      gen::Linear::Cache ct, c1, c2;
      Eigen::VectorXd nt, nm;
      const Mat t = normalize_rows(space.text_proj_.forward(xt, &ct), &nt);
      const Mat pre = space.motion_fc1_.forward(xm, &c1);
      const Mat m = normalize_rows(space.motion_fc2_.forward(gen::gelu(pre), &c2), &nm);

      const Mat logits = m * t.transpose() * inv_tau;  // motion rows, text columns
      std::vector<int> rows(static_cast<std::size_t>(b));
      std::iota(rows.begin(), rows.end(), 0);
      Mat d_m2t, d_t2m;
      const double loss = 0.5 * (gen::cross_entropy(logits, rows, rows, &d_m2t) +
                                 gen::cross_entropy(logits.transpose(), rows, rows, &d_t2m));
      const Mat dlogits = 0.5 * (d_m2t + d_t2m.transpose()) * inv_tau;
      const Mat dm = dlogits * t;
      const Mat dt = dlogits.transpose() * m;

      adam.zero_grad();
      space.text_proj_.backward(normalize_backward(t, nt, dt), ct);
      const Mat dh = space.motion_fc2_.backward(normalize_backward(m, nm, dm), c2);
      space.motion_fc1_.backward(gen::gelu_backward(pre, dh), c1);
      adam.step();
      loss_sum += loss;
      ++batches;
    }
    if (log && batches > 0) log->epoch_loss.push_back(loss_sum / batches);
  }
  space.provenance_ = SpaceProvenance::kTrainedContrastive;
  return space;
}

std::vector<SpaceExample> examples_from_dataset(const std::string& dataset_dir) {
  std::vector<SpaceExample> out;
  for (auto& rec : zoogen::load_dataset(dataset_dir)) {
    out.push_back({rec.entry.animal, rec.entry.caption, std::move(rec.features)});
  }
  return out;
}

}  // namespace critter::metrics
