#include "gosr/detector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "gosr/common.hpp"
#include "gosr/metrics.hpp"
#include "gosr/rng.hpp"
#include "gosr/sha256.hpp"

using nlohmann::json;

namespace gosr {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

std::vector<double> pre_transform(const std::vector<double>& row, const std::string& kind) {
  std::vector<double> t = row;
  if (kind == "log1p_zscore")
    for (auto& v : t) v = std::log1p(std::max(v, 0.0));
  return t;
}

}  // namespace

std::vector<double> Standardizer::apply(const std::vector<double>& features) const {
  if (static_cast<int>(features.size()) != width())
    throw std::invalid_argument("standardizer width " + std::to_string(width()) + " does not match feature length " +
                                std::to_string(features.size()));
  if (kind == "none") return features;
  std::vector<double> t = pre_transform(features, kind);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = (t[i] - shift[i]) / scale[i];
  return t;
}

Standardizer fit_standardizer(const std::vector<std::vector<double>>& rows, const std::string& kind) {
  if (rows.empty()) throw std::invalid_argument("fit_standardizer: empty table");
  if (kind != "log1p_zscore" && kind != "zscore" && kind != "none")
    throw ConfigError("fit_standardizer: unknown transform kind " + kind);
  const std::size_t width = rows.front().size();
  Standardizer st;
  st.kind = kind;
  st.shift.assign(width, 0.0);
  st.scale.assign(width, 1.0);
  if (kind == "none") return st;

  std::vector<double> mean(width, 0.0), var(width, 0.0);
  for (const auto& row : rows) {
    if (row.size() != width) throw std::invalid_argument("fit_standardizer: ragged rows");
    auto t = pre_transform(row, kind);
    for (std::size_t i = 0; i < width; ++i) mean[i] += t[i];
  }
  for (auto& m : mean) m /= static_cast<double>(rows.size());
  for (const auto& row : rows) {
    auto t = pre_transform(row, kind);
    for (std::size_t i = 0; i < width; ++i) {
      const double d = t[i] - mean[i];
      var[i] += d * d;
    }
  }
  for (std::size_t i = 0; i < width; ++i) {
    var[i] /= static_cast<double>(rows.size());
    st.shift[i] = mean[i];
    st.scale[i] = var[i] > 1e-24 ? std::sqrt(var[i]) : 1.0;
  }
  return st;
}

Standardizer fit_standardizer(const FeatureTable& table, const std::string& kind) {
  return fit_standardizer(table.rows, kind);
}

std::vector<double> DetectorCheckpoint::select(const std::vector<double>& features) const {
  if (static_cast<int>(features.size()) != full_width)
    throw std::invalid_argument("detector expects feature length " + std::to_string(full_width) + ", got " +
                                std::to_string(features.size()));
  if (feature_indices.empty()) return features;
  std::vector<double> out;
  out.reserve(feature_indices.size());
  for (int i : feature_indices) out.push_back(features[static_cast<std::size_t>(i)]);
  return out;
}

namespace {

struct DetectorForward {
  std::vector<double> hidden_pre;
  std::vector<double> hidden;
  double logit = 0.0;
  double prob = 0.5;
};

DetectorForward det_forward(const DetectorCheckpoint& det, const std::vector<double>& std_features) {
  const int hidden = det.w1.dim(0);
  const int in = det.w1.dim(1);
  DetectorForward f;
  f.hidden_pre.resize(static_cast<std::size_t>(hidden));
  f.hidden.resize(static_cast<std::size_t>(hidden));
  for (int h = 0; h < hidden; ++h) {
    const double* row = det.w1.data.data() + static_cast<std::size_t>(h) * static_cast<std::size_t>(in);
    double acc = det.b1[h];
    for (int i = 0; i < in; ++i) acc += row[i] * std_features[static_cast<std::size_t>(i)];
    f.hidden_pre[static_cast<std::size_t>(h)] = acc;
    f.hidden[static_cast<std::size_t>(h)] = acc > 0.0 ? acc : 0.0;
  }
  double z = det.b2[0];
  for (int h = 0; h < hidden; ++h) z += det.w2[h] * f.hidden[static_cast<std::size_t>(h)];
  f.logit = z;
  f.prob = sigmoid(z);
  return f;
}

}  // namespace

DetectorCheckpoint train_detector(const FeatureTable& known_rows, const FeatureTable& unknown_rows,
                                  const DetectorHyper& hyper, std::vector<int> feature_indices) {
  if (known_rows.rows.empty()) throw std::invalid_argument("train_detector: known rows are empty");
  if (unknown_rows.rows.empty()) throw std::invalid_argument("train_detector: unknown rows are empty");
  if (known_rows.width() != unknown_rows.width())
    throw std::invalid_argument("train_detector: feature widths differ (" + std::to_string(known_rows.width()) +
                                " vs " + std::to_string(unknown_rows.width()) + ")");
  if (hyper.hidden_width <= 0 || hyper.epochs <= 0 || hyper.batch_size <= 1)
    throw std::invalid_argument("train_detector: bad hyperparameters");

  const int full_width = known_rows.width();
  std::sort(feature_indices.begin(), feature_indices.end());
  for (int i : feature_indices)
    if (i < 0 || i >= full_width) throw std::invalid_argument("train_detector: feature index out of range");

  DetectorCheckpoint det;
  det.full_width = full_width;
  det.feature_indices = feature_indices;
  const int in = det.input_width();

  // Selected training rows, knowns first. Positive class = known.
  std::vector<std::vector<double>> rows;
  std::vector<int> targets;
  rows.reserve(known_rows.size() + unknown_rows.size());
  auto add_rows = [&](const FeatureTable& table, int target) {
    for (const auto& r : table.rows) {
      rows.push_back(det.select(r));
      targets.push_back(target);
    }
  };
  add_rows(known_rows, 1);
  add_rows(unknown_rows, 0);

  det.standardizer = fit_standardizer(rows, hyper.standardize);
  for (auto& r : rows) r = det.standardizer.apply(r);

  Rng rng(hyper.seed);
  Rng holdout_rng = rng.fork(1);
  Rng init_rng = rng.fork(2);
  Rng batch_rng = rng.fork(3);

  // Stratified holdout for validation.
  std::vector<std::size_t> known_idx, unknown_idx;
  for (std::size_t i = 0; i < rows.size(); ++i) (targets[i] == 1 ? known_idx : unknown_idx).push_back(i);
  holdout_rng.shuffle(known_idx);
  holdout_rng.shuffle(unknown_idx);
  auto take_val = [&](std::vector<std::size_t>& pool) {
    std::size_t n = static_cast<std::size_t>(std::floor(hyper.val_fraction * static_cast<double>(pool.size())));
    if (n >= pool.size()) n = pool.size() - 1;
    std::vector<std::size_t> val(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n));
    pool.erase(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n));
    return val;
  };
  std::vector<std::size_t> val_idx = take_val(known_idx);
  {
    auto vu = take_val(unknown_idx);
    val_idx.insert(val_idx.end(), vu.begin(), vu.end());
  }

  det.w1 = Tensor({hyper.hidden_width, in});
  det.b1 = Tensor({hyper.hidden_width});
  det.w2 = Tensor({1, hyper.hidden_width});
  det.b2 = Tensor({1});
  const double std1 = std::sqrt(2.0 / in), std2 = std::sqrt(2.0 / hyper.hidden_width);
  for (auto& w : det.w1.data) w = std1 * init_rng.normal();
  for (auto& w : det.w2.data) w = std2 * init_rng.normal();

  Tensor vw1(det.w1.shape), vb1(det.b1.shape), vw2(det.w2.shape), vb2(det.b2.shape);
  const int half = hyper.batch_size / 2;
  const std::size_t steps_per_epoch =
      std::max<std::size_t>(1, std::max(known_idx.size(), unknown_idx.size()) / static_cast<std::size_t>(half));

  // Class-balanced sampling: each batch draws the same number of known and
  // unknown rows from independently cycling shuffled pools.
  std::vector<std::size_t> known_pool = known_idx, unknown_pool = unknown_idx;
  std::size_t known_pos = known_pool.size(), unknown_pos = unknown_pool.size();
  auto draw = [&](std::vector<std::size_t>& pool, std::size_t& pos) {
    if (pos >= pool.size()) {
      batch_rng.shuffle(pool);
      pos = 0;
    }
    return pool[pos++];
  };

  for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
    for (std::size_t step = 0; step < steps_per_epoch; ++step) {
      Tensor gw1(det.w1.shape), gb1(det.b1.shape), gw2(det.w2.shape), gb2(det.b2.shape);
      double loss = 0.0;
      const int batch_n = 2 * half;
      for (int k = 0; k < batch_n; ++k) {
        const std::size_t row_i = k < half ? draw(known_pool, known_pos) : draw(unknown_pool, unknown_pos);
        const double y = targets[row_i];
        const auto& x = rows[row_i];
        DetectorForward f = det_forward(det, x);
        const double pc = std::clamp(f.prob, 1e-12, 1.0 - 1e-12);
        loss -= y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc);
        const double dz = (f.prob - y) / batch_n;
        gb2[0] += dz;
        for (int h = 0; h < hyper.hidden_width; ++h) {
          gw2[h] += dz * f.hidden[static_cast<std::size_t>(h)];
          if (f.hidden_pre[static_cast<std::size_t>(h)] <= 0.0) continue;
          const double dh = dz * det.w2[h];
          gb1[h] += dh;
          double* grow = gw1.data.data() + static_cast<std::size_t>(h) * static_cast<std::size_t>(in);
          for (int i = 0; i < in; ++i) grow[i] += dh * x[static_cast<std::size_t>(i)];
        }
      }
      if (!std::isfinite(loss))
        throw std::runtime_error("train_detector: non-finite loss at epoch " + std::to_string(epoch));
      auto sgd = [&](Tensor& w, Tensor& v, const Tensor& g) {
        for (std::int64_t i = 0; i < w.size(); ++i) {
          v[i] = hyper.momentum * v[i] - hyper.learning_rate * g[i];
          w[i] += v[i];
        }
      };
      sgd(det.w1, vw1, gw1);
      sgd(det.b1, vb1, gb1);
      sgd(det.w2, vw2, gw2);
      sgd(det.b2, vb2, gb2);
    }
  }

  det.meta.seed = hyper.seed;
  det.meta.epochs = hyper.epochs;
  det.meta.known_rows = static_cast<std::int64_t>(known_rows.size());
  det.meta.unknown_rows = static_cast<std::int64_t>(unknown_rows.size());
  det.meta.feature_checkpoint_hash = known_rows.provenance.checkpoint_hash;
  det.meta.ones_count = known_rows.provenance.ones_count;
  det.meta.squared = known_rows.provenance.squared;

  if (!val_idx.empty()) {
    ScoredSet val;
    int correct = 0;
    for (std::size_t i : val_idx) {
      const double p = det_forward(det, rows[i]).prob;
      val.scores.push_back(p);
      val.truth.push_back(targets[i]);
      if ((p >= 0.5 ? 1 : 0) == targets[i]) ++correct;
    }
    det.meta.val_accuracy = static_cast<double>(correct) / static_cast<double>(val_idx.size());
    bool both = false;
    for (std::size_t i = 1; i < val.truth.size(); ++i)
      if (val.truth[i] != val.truth[0]) both = true;
    det.meta.val_auroc = both ? auroc(val) : 0.5;
  }
  return det;
}

double score(const DetectorCheckpoint& det, const std::vector<double>& features) {
  const auto selected = det.select(features);
  return det_forward(det, det.standardizer.apply(selected)).prob;
}

double score(const DetectorCheckpoint& det, const GradientRepresentation& rep) { return score(det, rep.features); }

bool decide_known(double known_score, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("decide: tau must lie in (0,1)");
  return known_score >= tau;
}

void save_detector(const DetectorCheckpoint& det, const std::filesystem::path& blob_path,
                   const std::filesystem::path& manifest_path) {
  BinWriter w;
  w.u32(0x44455431);  // "DET1"
  w.u32(1);
  w.str(det.standardizer.kind);
  w.doubles(det.standardizer.shift);
  w.doubles(det.standardizer.scale);
  w.ints(det.w1.shape);
  w.doubles(det.w1.data);
  w.doubles(det.b1.data);
  w.doubles(det.w2.data);
  w.doubles(det.b2.data);
  write_binary_file(blob_path, w.bytes());

  json j;
  j["kind"] = "detector_checkpoint";
  j["version"] = 1;
  j["full_width"] = det.full_width;
  j["feature_indices"] = det.feature_indices;
  j["hidden_width"] = det.w1.dim(0);
  j["threshold"] = det.threshold;
  j["standardize"] = det.standardizer.kind;
  j["training"] = {{"seed", det.meta.seed},
                   {"epochs", det.meta.epochs},
                   {"val_accuracy", det.meta.val_accuracy},
                   {"val_auroc", det.meta.val_auroc},
                   {"known_rows", det.meta.known_rows},
                   {"unknown_rows", det.meta.unknown_rows},
                   {"ones_count", det.meta.ones_count},
                   {"ones_policy", det.meta.ones_policy},
                   {"squared", det.meta.squared}};
  j["feature_checkpoint_hash"] = det.meta.feature_checkpoint_hash;
  j["test_checkpoint_hash"] = det.meta.test_checkpoint_hash;
  j["param_blob_sha256"] = sha256_hex(w.bytes());
  write_text_file(manifest_path, j.dump(2) + "\n");
}

DetectorCheckpoint load_detector(const std::filesystem::path& blob_path,
                                 const std::filesystem::path& manifest_path) {
  json j = json::parse(read_text_file(manifest_path));
  if (j.value("kind", "") != "detector_checkpoint")
    throw std::runtime_error("not a detector manifest: " + manifest_path.string());
  auto blob = read_binary_file(blob_path);
  if (sha256_hex(blob) != j.at("param_blob_sha256").get<std::string>())
    throw std::runtime_error("detector blob hash mismatch for " + blob_path.string());

  BinReader r(blob);
  if (r.u32() != 0x44455431) throw std::runtime_error("detector blob: bad magic");
  if (r.u32() != 1) throw std::runtime_error("detector blob: unsupported version");
  DetectorCheckpoint det;
  det.standardizer.kind = r.str();
  det.standardizer.shift = r.doubles();
  det.standardizer.scale = r.doubles();
  auto w1_shape = r.ints();
  det.w1 = Tensor(w1_shape, r.doubles());
  det.b1 = Tensor({w1_shape[0]}, r.doubles());
  det.w2 = Tensor({1, w1_shape[0]}, r.doubles());
  det.b2 = Tensor({1}, r.doubles());

  det.full_width = j.at("full_width").get<int>();
  det.feature_indices = j.at("feature_indices").get<std::vector<int>>();
  det.threshold = j.at("threshold").get<double>();
  const auto& t = j.at("training");
  det.meta.seed = t.at("seed").get<std::uint64_t>();
  det.meta.epochs = t.at("epochs").get<int>();
  det.meta.val_accuracy = t.at("val_accuracy").get<double>();
  det.meta.val_auroc = t.at("val_auroc").get<double>();
  det.meta.known_rows = t.at("known_rows").get<std::int64_t>();
  det.meta.unknown_rows = t.at("unknown_rows").get<std::int64_t>();
  det.meta.ones_count = t.at("ones_count").get<int>();
  det.meta.ones_policy = t.at("ones_policy").get<int>();
  det.meta.squared = t.at("squared").get<bool>();
  det.meta.feature_checkpoint_hash = j.at("feature_checkpoint_hash").get<std::string>();
  det.meta.test_checkpoint_hash = j.at("test_checkpoint_hash").get<std::string>();
  return det;
}

}  // namespace gosr
