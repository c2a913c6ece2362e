#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "phaselink/dataset.hpp"
#include "phaselink/error.hpp"
#include "phaselink/gru.hpp"
#include "phaselink/pick.hpp"
#include "phaselink/rng.hpp"
#include "phaselink/window.hpp"

namespace phaselink {

/// Production scalar type. Gradient checks instantiate the templates with double.
using LinkerModel = BasicLinkerModel<float>;

inline constexpr double kDefaultThreshold = 0.5;

struct TrainConfig {
  std::size_t batch_size = 96;
  double learning_rate = 2e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int epochs = 20;
  std::size_t hidden = 32;
  std::uint64_t seed = 1;
  double clip_norm = 5.0;        // global gradient norm bound; 0 disables
  int checkpoint_every = 1;      // epochs between checkpoint writes of the best model
  std::string checkpoint_path;   // empty: keep in memory only
  std::string log_path;          // empty: no CSV log

  std::vector<std::string> problems() const {
    std::vector<std::string> out;
    if (batch_size < 1) out.emplace_back("batch_size must be >= 1");
    if (!(learning_rate > 0.0)) out.emplace_back("learning_rate must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) out.emplace_back("beta1 must be in [0,1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) out.emplace_back("beta2 must be in [0,1)");
    if (!(adam_epsilon > 0.0)) out.emplace_back("adam_epsilon must be > 0");
    if (epochs < 1) out.emplace_back("epochs must be >= 1");
    if (hidden < 1) out.emplace_back("hidden must be >= 1");
    if (checkpoint_every < 1) out.emplace_back("checkpoint_every must be >= 1");
    return out;
  }
};

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"batch_size", c.batch_size}, {"learning_rate", c.learning_rate},
          {"beta1", c.beta1},           {"beta2", c.beta2},
          {"adam_epsilon", c.adam_epsilon}, {"epochs", c.epochs},
          {"hidden", c.hidden},         {"seed", c.seed},
          {"clip_norm", c.clip_norm}};
}

/// Per-pick scores of a linker against dataset labels.
struct LinkMetrics {
  double loss = 0.0;
  double accuracy = 0.0;       // over all n_p positions, pads included
  double accuracy_real = 0.0;  // over real picks only
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;  // real picks only, positive = linked

  double precision() const { return tp + fp == 0 ? 1.0 : double(tp) / double(tp + fp); }
  double recall() const { return tp + fn == 0 ? 1.0 : double(tp) / double(tp + fn); }
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
  double val_accuracy_real = 0.0;
};

struct TrainResult {
  LinkerModel best;
  LinkerModel last;
  std::vector<EpochStats> history;
  int best_epoch = 0;
  bool diverged = false;
};

namespace detail {

// Copies records into a 5 x (n_p * B) input block and a 1 x (n_p * B) label row.
template <class Scalar>
void assemble_batch(const Dataset& ds, std::span<const std::size_t> idx,
                    Eigen::Matrix<Scalar, -1, -1>& x, Eigen::Matrix<Scalar, 1, -1>& y) {
  const auto B = static_cast<Eigen::Index>(idx.size());
  const auto T = static_cast<Eigen::Index>(ds.n_p);
  x.resize(kFeatureWidth, T * B);
  y.resize(1, T * B);
  for (Eigen::Index b = 0; b < B; ++b) {
    const auto f = ds.features_of(idx[b]);
    const auto l = ds.labels_of(idx[b]);
    for (Eigen::Index t = 0; t < T; ++t) {
      for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(kFeatureWidth); ++c)
        x(c, t * B + b) = static_cast<Scalar>(f[t * kFeatureWidth + c]);
      y(0, t * B + b) = static_cast<Scalar>(l[t]);
    }
  }
}

template <class Scalar>
double batch_loss(const Eigen::Matrix<Scalar, 1, -1>& y, const Eigen::Matrix<Scalar, 1, -1>& p) {
  return bce_loss(y.reshaped(), p.reshaped());
}

inline std::vector<std::size_t> nonempty_range(const Dataset& ds, std::size_t begin,
                                               std::size_t end) {
  std::vector<std::size_t> out;
  for (std::size_t i = begin; i < end; ++i)
    if (!ds.summaries[i].empty) out.push_back(i);
  return out;
}

}  // namespace detail

/// Loss and per-pick accuracy of `model` on the given records.
template <class Scalar>
LinkMetrics evaluate_linker(const BasicLinkerModel<Scalar>& model, const Dataset& ds,
                            std::span<const std::size_t> records, double threshold = kDefaultThreshold,
                            std::size_t batch_size = 256) {
  LinkMetrics m;
  if (records.empty()) return m;
  LinkerTrace<Scalar> tr;
  Eigen::Matrix<Scalar, 1, -1> y;
  double loss_sum = 0.0;
  std::size_t positions = 0, correct = 0, real = 0, real_correct = 0;
  for (std::size_t start = 0; start < records.size(); start += batch_size) {
    const auto idx = records.subspan(start, std::min(batch_size, records.size() - start));
    detail::assemble_batch(ds, idx, tr.x, y);
    linker_forward(model, static_cast<Eigen::Index>(ds.n_p), static_cast<Eigen::Index>(idx.size()),
                   tr);
    loss_sum += detail::batch_loss(y, tr.probs) * static_cast<double>(y.size());
    for (Eigen::Index c = 0; c < y.size(); ++c) {
      const bool truth = y(0, c) > Scalar(0.5);
      const bool pred = static_cast<double>(tr.probs(0, c)) >= threshold;
      const bool pad = tr.x(4, c) != Scalar(0);
      ++positions;
      const bool hit = pad ? !truth : truth == pred;  // pads are always scored as label 0
      correct += hit;
      if (pad) continue;
      ++real;
      real_correct += truth == pred;
      if (truth && pred) ++m.tp;
      else if (!truth && pred) ++m.fp;
      else if (truth && !pred) ++m.fn;
      else ++m.tn;
    }
  }
  m.loss = loss_sum / static_cast<double>(positions);
  m.accuracy = static_cast<double>(correct) / static_cast<double>(positions);
  m.accuracy_real = real == 0 ? 1.0 : static_cast<double>(real_correct) / static_cast<double>(real);
  return m;
}

/// Adam with bias correction over every parameter tensor.
template <class Scalar>
class AdamOptimizer {
 public:
  AdamOptimizer(const BasicLinkerModel<Scalar>& shape, const TrainConfig& cfg)
      : cfg_(cfg),
        m_(BasicLinkerModel<Scalar>::zeros(shape.hidden, shape.input)),
        v_(BasicLinkerModel<Scalar>::zeros(shape.hidden, shape.input)) {}

  void step(BasicLinkerModel<Scalar>& params, BasicLinkerModel<Scalar>& grad) {
    ++t_;
    auto p = params.tensors();
    auto g = grad.tensors();
    auto m = m_.tensors();
    auto v = v_.tensors();
    if (cfg_.clip_norm > 0.0) {
      double sq = 0.0;
      for (const auto& gt : g)
        for (Scalar x : gt) sq += static_cast<double>(x) * static_cast<double>(x);
      const double norm = std::sqrt(sq);
      if (norm > cfg_.clip_norm) {
        const auto scale = static_cast<Scalar>(cfg_.clip_norm / norm);
        for (auto& gt : g)
          for (Scalar& x : gt) x *= scale;
      }
    }
    const double c1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double c2 = 1.0 - std::pow(cfg_.beta2, t_);
    const auto b1 = static_cast<Scalar>(cfg_.beta1);
    const auto b2 = static_cast<Scalar>(cfg_.beta2);
    const auto lr = static_cast<Scalar>(cfg_.learning_rate * std::sqrt(c2) / c1);
    const auto eps = static_cast<Scalar>(cfg_.adam_epsilon * std::sqrt(c2));
    for (std::size_t k = 0; k < p.size(); ++k) {
      for (std::size_t i = 0; i < p[k].size(); ++i) {
        const Scalar gi = g[k][i];
        m[k][i] = b1 * m[k][i] + (Scalar(1) - b1) * gi;
        v[k][i] = b2 * v[k][i] + (Scalar(1) - b2) * gi * gi;
        p[k][i] -= lr * m[k][i] / (std::sqrt(v[k][i]) + eps);
      }
    }
  }

  long steps() const noexcept { return t_; }

 private:
  TrainConfig cfg_;
  BasicLinkerModel<Scalar> m_, v_;
  long t_ = 0;
};

/// Gradient of mean BCE over all positions of one batch; returns the loss.
template <class Scalar>
double loss_and_gradient(const BasicLinkerModel<Scalar>& model, LinkerTrace<Scalar>& tr,
                         const Eigen::Matrix<Scalar, 1, -1>& y, Eigen::Index steps,
                         Eigen::Index batch, BasicLinkerModel<Scalar>& grad) {
  linker_forward(model, steps, batch, tr);
  const double loss = detail::batch_loss(y, tr.probs);
  const Eigen::Matrix<Scalar, 1, -1> d_logits =
      (tr.probs - y) / static_cast<Scalar>(y.size());
  linker_backward(model, tr, d_logits, grad);
  return loss;
}

inline void save_checkpoint(const std::string& path, const LinkerModel& model,
                     const nlohmann::json& extra = {});

/// Mini-batch Adam training on the dataset's train split, validated on the rest.
/// Empty records are skipped. Training stops early if the loss becomes non-finite;
/// the best finite model is returned with `diverged` set.
inline TrainResult train(const Dataset& ds, const TrainConfig& cfg,
                         const std::function<void(const EpochStats&)>& on_epoch = {}) {
  if (const auto p = cfg.problems(); !p.empty()) throw InvariantError("train config: " + join_problems(p));
  using Scalar = float;
  const auto train_idx = detail::nonempty_range(ds, 0, ds.n_train);
  const auto val_idx = detail::nonempty_range(ds, ds.n_train, ds.size());
  if (train_idx.empty()) throw InvariantError("training split has no non-empty records");

  TrainResult result;
  LinkerModel model = LinkerModel::initialized(cfg.hidden, cfg.seed, kFeatureWidth);
  LinkerModel grad = LinkerModel::zeros(cfg.hidden, kFeatureWidth);
  AdamOptimizer<Scalar> adam(model, cfg);
  result.best = model;
  double best_val = std::numeric_limits<double>::infinity();

  std::ofstream log;
  if (!cfg.log_path.empty()) {
    log.open(cfg.log_path, std::ios::trunc);
    if (!log) throw IoError("cannot write training log: " + cfg.log_path);
    log << "epoch,train_loss,val_loss,val_accuracy,val_accuracy_real\n";
  }

  LinkerTrace<Scalar> tr;
  Eigen::Matrix<Scalar, 1, -1> y;
  std::vector<std::size_t> order = train_idx;
  const auto T = static_cast<Eigen::Index>(ds.n_p);
  for (int epoch = 1; epoch <= cfg.epochs && !result.diverged; ++epoch) {
    Rng rng = Rng::stream(cfg.seed, 0x5eed0000ULL + static_cast<std::uint64_t>(epoch));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, i - 1))]);

    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::span<const std::size_t> idx(order.data() + start,
                                             std::min(cfg.batch_size, order.size() - start));
      detail::assemble_batch(ds, idx, tr.x, y);
      for (auto t : grad.tensors()) std::fill(t.begin(), t.end(), Scalar(0));
      const double loss =
          loss_and_gradient(model, tr, y, T, static_cast<Eigen::Index>(idx.size()), grad);
      if (!std::isfinite(loss)) {
        result.diverged = true;
        break;
      }
      adam.step(model, grad);
      loss_sum += loss;
      ++batches;
    }
    if (result.diverged) break;

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(std::max<std::size_t>(1, batches));
    const LinkMetrics val = evaluate_linker(model, ds, val_idx);
    stats.val_loss = val_idx.empty() ? stats.train_loss : val.loss;
    stats.val_accuracy = val.accuracy;
    stats.val_accuracy_real = val.accuracy_real;
    if (!std::isfinite(stats.val_loss)) {
      result.diverged = true;
      break;
    }
    if (stats.val_loss < best_val) {
      best_val = stats.val_loss;
      result.best = model;
      result.best_epoch = epoch;
    }
    result.history.push_back(stats);
    if (log) {
      log.precision(17);
      log << stats.epoch << ',' << stats.train_loss << ',' << stats.val_loss << ','
          << stats.val_accuracy << ',' << stats.val_accuracy_real << '\n';
      log.flush();
    }
    if (!cfg.checkpoint_path.empty() &&
        (epoch % cfg.checkpoint_every == 0 || epoch == cfg.epochs))
      save_checkpoint(cfg.checkpoint_path, result.best,
                      {{"train", to_json(cfg)}, {"best_epoch", result.best_epoch},
                       {"dataset", {{"seed", ds.seed}, {"n_samples", ds.size()},
                                    {"n_p", ds.n_p}, {"window_s", ds.window_s}}}});
    if (on_epoch) on_epoch(stats);
  }
  result.last = model;
  return result;
}

/// Link probabilities for one sub-sequence, thresholded. Pad rows are always 0.
struct Prediction {
  std::vector<double> probs;
  std::vector<std::uint8_t> labels;
};

template <class Scalar>
std::vector<Prediction> predict_batch(const BasicLinkerModel<Scalar>& model,
                                      std::span<const SubSequence> subs,
                                      double threshold = kDefaultThreshold) {
  std::vector<Prediction> out(subs.size());
  if (subs.empty()) return out;
  model.validate();
  const std::size_t n_p = subs.front().rows.size();
  const auto T = static_cast<Eigen::Index>(n_p);
  const auto B = static_cast<Eigen::Index>(subs.size());
  LinkerTrace<Scalar> tr;
  tr.x.resize(kFeatureWidth, T * B);
  for (Eigen::Index b = 0; b < B; ++b) {
    if (subs[b].rows.size() != n_p) throw InvariantError("predict: mixed sub-sequence lengths");
    for (Eigen::Index t = 0; t < T; ++t) {
      const FeatureRow& r = subs[b].rows[t];
      const Eigen::Index c = t * B + b;
      tr.x(0, c) = static_cast<Scalar>(r.x);
      tr.x(1, c) = static_cast<Scalar>(r.y);
      tr.x(2, c) = static_cast<Scalar>(r.t_norm);
      tr.x(3, c) = static_cast<Scalar>(r.phase_flag);
      tr.x(4, c) = static_cast<Scalar>(r.pad_flag);
    }
  }
  linker_forward(model, T, B, tr);
  for (Eigen::Index b = 0; b < B; ++b) {
    Prediction& p = out[b];
    p.probs.resize(n_p);
    p.labels.assign(n_p, 0);
    for (Eigen::Index t = 0; t < T; ++t) {
      p.probs[t] = static_cast<double>(tr.probs(0, t * B + b));
      p.labels[t] = !subs[b].rows[t].is_pad() && p.probs[t] >= threshold ? 1 : 0;
    }
  }
  return out;
}

template <class Scalar>
Prediction predict(const BasicLinkerModel<Scalar>& model, const SubSequence& sub,
                   double threshold = kDefaultThreshold) {
  return predict_batch(model, std::span<const SubSequence>(&sub, 1), threshold).front();
}

/// Exact labels from ground truth: the root and every pick of the root's event are
/// linked; a false root is linked only to itself. `picks` is the global stream.
inline Prediction oracle_link(const std::vector<Pick>& picks, const SubSequence& sub) {
  Prediction p;
  const std::size_t n_p = sub.rows.size();
  p.probs.assign(n_p, 0.0);
  p.labels.assign(n_p, 0);
  if (sub.members.empty()) return p;
  const std::int32_t root_event = picks.at(sub.root_index).event_id;
  for (std::size_t i = 0; i < sub.members.size(); ++i) {
    const bool linked =
        i == 0 || (root_event != kFalsePick && picks.at(sub.members[i]).event_id == root_event);
    p.labels[i] = linked ? 1 : 0;
    p.probs[i] = linked ? 1.0 : 0.0;
  }
  return p;
}

/// Source of link predictions for the association pipeline.
class Linker {
 public:
  virtual ~Linker() = default;
  virtual std::vector<Prediction> link(std::span<const SubSequence> subs) const = 0;
};

class ModelLinker final : public Linker {
 public:
  explicit ModelLinker(LinkerModel model, double threshold = kDefaultThreshold)
      : model_(std::move(model)), threshold_(threshold) {
    model_.validate();
  }
  std::vector<Prediction> link(std::span<const SubSequence> subs) const override {
    return predict_batch(model_, subs, threshold_);
  }
  const LinkerModel& model() const noexcept { return model_; }

 private:
  LinkerModel model_;
  double threshold_;
};

class OracleLinker final : public Linker {
 public:
  explicit OracleLinker(const std::vector<Pick>& picks) : picks_(&picks) {}
  std::vector<Prediction> link(std::span<const SubSequence> subs) const override {
    std::vector<Prediction> out;
    out.reserve(subs.size());
    for (const auto& s : subs) out.push_back(oracle_link(*picks_, s));
    return out;
  }

 private:
  const std::vector<Pick>* picks_;
};

// Checkpoint container: "PLMD", u32 version, u32 header length, JSON header,
// then every tensor as little-endian float64 in column-major order.
inline constexpr char kCheckpointMagic[4] = {'P', 'L', 'M', 'D'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void write_checkpoint(std::ostream& out, const LinkerModel& model,
                             const nlohmann::json& extra = {}) {
  model.validate();
  nlohmann::json header = {{"format", "phaselink-model"},
                           {"version", kCheckpointVersion},
                           {"architecture", "bigru2-dense-sigmoid"},
                           {"input", model.input},
                           {"hidden", model.hidden},
                           {"dtype", "f64"}};
  nlohmann::json tensors = nlohmann::json::array();
  const auto names = LinkerModel::tensor_names();
  const auto shapes = model.tensor_shapes();
  for (std::size_t i = 0; i < names.size(); ++i)
    tensors.push_back({{"name", names[i]}, {"rows", shapes[i].first}, {"cols", shapes[i].second}});
  header["tensors"] = tensors;
  if (!extra.is_null()) header["config"] = extra;
  const std::string text = header.dump();
  out.write(kCheckpointMagic, 4);
  detail::put<std::uint32_t>(out, kCheckpointVersion);
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (auto t : model.tensors())
    for (float v : t) detail::put<double>(out, static_cast<double>(v));
}

inline void save_checkpoint(const std::string& path, const LinkerModel& model,
                            const nlohmann::json& extra) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint: " + path);
    write_checkpoint(out, model, extra);
    if (!out) throw IoError("write failed: " + path);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw IoError("cannot move checkpoint to " + path);
}

inline LinkerModel read_checkpoint(std::istream& in, const std::string& source = "checkpoint",
                                   nlohmann::json* header_out = nullptr) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw IoError("not a phaselink checkpoint: " + source);
  if (const auto v = detail::get<std::uint32_t>(in, source); v != kCheckpointVersion)
    throw IoError("unsupported checkpoint version " + std::to_string(v) + ": " + source);
  const auto len = detail::get<std::uint32_t>(in, source);
  std::string text(len, '\0');
  if (!in.read(text.data(), len)) throw IoError("truncated header: " + source);
  nlohmann::json header;
  LinkerModel model;
  try {
    header = nlohmann::json::parse(text);
    model = LinkerModel::zeros(header.at("hidden").get<std::size_t>(),
                               header.at("input").get<std::size_t>());
    const auto shapes = model.tensor_shapes();
    const auto& listed = header.at("tensors");
    if (listed.size() != shapes.size()) throw IoError("tensor count mismatch in " + source);
    for (std::size_t i = 0; i < shapes.size(); ++i)
      if (listed[i].at("rows").get<std::size_t>() != shapes[i].first ||
          listed[i].at("cols").get<std::size_t>() != shapes[i].second)
        throw IoError("shape mismatch for " + listed[i].at("name").get<std::string>() + " in " +
                      source);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad checkpoint header in " + source + ": " + e.what());
  }
  for (auto t : model.tensors())
    for (float& v : t) v = static_cast<float>(detail::get<double>(in, source));
  if (header_out) *header_out = std::move(header);
  return model;
}

inline LinkerModel load_checkpoint(const std::string& path, nlohmann::json* header = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  return read_checkpoint(in, path, header);
}

}  // namespace phaselink
