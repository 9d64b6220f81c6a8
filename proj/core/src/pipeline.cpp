#include "gosr/pipeline.hpp"

#include <cmath>

#include <json.hpp>

#include "gosr/common.hpp"
#include "gosr/sha256.hpp"
#include "gosr/splits.hpp"

using nlohmann::json;

namespace gosr {

int route_final_class(int closed_set_class, double known_score, double tau, int sentinel) {
  return decide_known(known_score, tau) ? closed_set_class : sentinel;
}

DetectorScorer::DetectorScorer(const DetectorCheckpoint& det, int num_classes) : det_(det) {
  const int n = det.meta.ones_policy < 0 ? num_classes : det.meta.ones_policy;
  label_ = make_confounding_label(num_classes, n);
  options_.squared = det.meta.squared;
}

double DetectorScorer::score_sample(const ClassifierCheckpoint& ckpt, const Tensor& image,
                                    const std::vector<double>&) const {
  GradientRepresentation rep = extract_representation(ckpt, image, label_, options_);
  return score(det_, rep);
}

double SoftmaxScorer::score_sample(const ClassifierCheckpoint&, const Tensor&,
                                   const std::vector<double>& probs_row) const {
  double best = 0.0;
  for (double p : probs_row) best = std::max(best, p);
  return best;
}

std::vector<OpenSetPrediction> open_set_predict_with(const ClassifierCheckpoint& ckpt, const KnownScorer& scorer,
                                                     double tau, const Tensor& images) {
  if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("open_set_predict: tau must lie in (0,1)");
  const int batch = images.dim(0);
  const int n = ckpt.num_classes();
  Tensor probs = predict(ckpt, images);

  std::vector<OpenSetPrediction> out(static_cast<std::size_t>(batch));
  std::vector<int> per_sample_shape(images.shape.begin() + 1, images.shape.end());
  const std::int64_t stride = Tensor::numel(per_sample_shape);
  for (int b = 0; b < batch; ++b) {
    std::vector<double> probs_row(probs.data.begin() + static_cast<std::ptrdiff_t>(b) * n,
                                  probs.data.begin() + static_cast<std::ptrdiff_t>(b + 1) * n);
    int argmax = 0;
    for (int i = 1; i < n; ++i)
      if (probs_row[static_cast<std::size_t>(i)] > probs_row[static_cast<std::size_t>(argmax)]) argmax = i;

    Tensor image(per_sample_shape,
                 std::vector<double>(images.data.begin() + static_cast<std::ptrdiff_t>(b) * stride,
                                     images.data.begin() + static_cast<std::ptrdiff_t>(b + 1) * stride));
    OpenSetPrediction& p = out[static_cast<std::size_t>(b)];
    p.closed_set_class = argmax;
    p.known_score = scorer.score_sample(ckpt, image, probs_row);
    p.threshold_used = tau;
    p.final_class = route_final_class(argmax, p.known_score, tau, n);
  }
  return out;
}

std::vector<OpenSetPrediction> open_set_predict(const ClassifierCheckpoint& ckpt, const DetectorCheckpoint& det,
                                                double tau, const Tensor& images) {
  if (!det.meta.test_checkpoint_hash.empty() && det.meta.test_checkpoint_hash != ckpt.param_hash)
    throw std::runtime_error("open_set_predict: detector was trained against classifier " +
                             det.meta.test_checkpoint_hash + " but got " + ckpt.param_hash);
  DetectorScorer scorer(det, ckpt.num_classes());
  return open_set_predict_with(ckpt, scorer, tau, images);
}

// Experiment configuration ---------------------------------------------------

namespace {

json source_to_json(const DataSourceSpec& s) {
  json j;
  j["kind"] = s.kind;
  j["path"] = s.path;
  j["split"] = s.split;
  j["classes"] = s.classes;
  j["per_class"] = s.per_class;
  j["channels"] = s.channels;
  j["height"] = s.height;
  j["width"] = s.width;
  j["noise_sigma"] = s.noise_sigma;
  j["noise_sigma_hi"] = s.noise_sigma_hi;
  j["blob_mean_lo"] = s.blob_mean_lo;
  j["blob_mean_hi"] = s.blob_mean_hi;
  j["seed"] = s.seed;
  j["name"] = s.name;
  return j;
}

DataSourceSpec source_from_json(const json& j) {
  DataSourceSpec s;
  s.kind = j.value("kind", s.kind);
  s.path = j.value("path", s.path);
  s.split = j.value("split", s.split);
  s.classes = j.value("classes", s.classes);
  s.per_class = j.value("per_class", s.per_class);
  s.channels = j.value("channels", s.channels);
  s.height = j.value("height", s.height);
  s.width = j.value("width", s.width);
  s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
  s.noise_sigma_hi = j.value("noise_sigma_hi", s.noise_sigma_hi);
  s.blob_mean_lo = j.value("blob_mean_lo", s.blob_mean_lo);
  s.blob_mean_hi = j.value("blob_mean_hi", s.blob_mean_hi);
  s.seed = j.value("seed", s.seed);
  s.name = j.value("name", s.name);
  return s;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (mode != "identification" && mode != "classification")
    throw ConfigError("config: mode must be identification or classification, got " + mode);
  if (seeds.empty()) throw ConfigError("config: seeds list is empty");
  if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("config: tau must lie in (0,1)");
  if (num_inner_known < 1 || num_inner_known >= num_known)
    throw ConfigError("config: need 1 <= num_inner_known < num_known");
  if (mode == "identification") {
    if (num_known >= train_source.classes)
      throw ConfigError("config: identification mode needs unknown classes from the same dataset "
                        "(num_known < class count)");
  } else {
    if (!outlier_source) throw ConfigError("config: classification mode requires data.outlier_test");
    if (num_known != train_source.classes)
      throw ConfigError("config: classification mode uses every class as known (num_known == class count)");
  }
  if (ones_count == 1) throw ConfigError("config: gradients.ones_count = 1 is not a confounding label");
  if (workers < 1) throw ConfigError("config: workers must be >= 1");
  if (!ratio.empty()) parse_ratio(ratio);
  for (const auto& b : baselines)
    if (b != "softmax") throw ConfigError("config: unknown baseline " + b);
}

std::string ExperimentConfig::to_json_text() const {
  json j;
  j["mode"] = mode;
  j["data"]["train"] = source_to_json(train_source);
  j["data"]["test"] = source_to_json(test_source);
  if (outlier_source) j["data"]["outlier_test"] = source_to_json(*outlier_source);
  j["split"] = {{"num_known", num_known}, {"num_inner_known", num_inner_known}};
  j["seeds"] = seeds;
  j["classifier"] = {{"architecture", backbone.architecture},
                     {"mlp_hidden", backbone.mlp.hidden},
                     {"mlp_with_bias", backbone.mlp.with_bias},
                     {"conv1_channels", backbone.small_cnn.conv1_channels},
                     {"conv2_channels", backbone.small_cnn.conv2_channels},
                     {"fc_width", backbone.small_cnn.fc_width},
                     {"epochs", classifier_hyper.epochs},
                     {"learning_rate", classifier_hyper.learning_rate},
                     {"momentum", classifier_hyper.momentum},
                     {"batch_size", classifier_hyper.batch_size},
                     {"lr_decay", classifier_hyper.lr_decay},
                     {"lr_decay_epochs", classifier_hyper.lr_decay_epochs},
                     {"val_fraction", classifier_hyper.val_fraction}};
  j["gradients"] = {{"ones_count", ones_count}, {"squared", squared}};
  j["detector"] = {{"hidden_width", detector_hyper.hidden_width},
                   {"epochs", detector_hyper.epochs},
                   {"learning_rate", detector_hyper.learning_rate},
                   {"momentum", detector_hyper.momentum},
                   {"batch_size", detector_hyper.batch_size},
                   {"val_fraction", detector_hyper.val_fraction},
                   {"standardize", detector_hyper.standardize}};
  j["eval"] = {{"tau", tau}, {"ratio", ratio}, {"baselines", baselines}};
  j["workers"] = workers;
  return j.dump(2) + "\n";
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  cfg.mode = j.value("mode", cfg.mode);
  if (j.contains("data")) {
    const auto& d = j["data"];
    if (d.contains("train")) cfg.train_source = source_from_json(d["train"]);
    if (d.contains("test")) cfg.test_source = source_from_json(d["test"]);
    if (d.contains("outlier_test")) cfg.outlier_source = source_from_json(d["outlier_test"]);
  }
  if (j.contains("split")) {
    cfg.num_known = j["split"].value("num_known", cfg.num_known);
    cfg.num_inner_known = j["split"].value("num_inner_known", cfg.num_inner_known);
  }
  if (j.contains("seeds")) cfg.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
  if (j.contains("classifier")) {
    const auto& c = j["classifier"];
    cfg.backbone.architecture = c.value("architecture", cfg.backbone.architecture);
    if (c.contains("mlp_hidden")) cfg.backbone.mlp.hidden = c["mlp_hidden"].get<std::vector<int>>();
    cfg.backbone.mlp.with_bias = c.value("mlp_with_bias", cfg.backbone.mlp.with_bias);
    cfg.backbone.small_cnn.conv1_channels = c.value("conv1_channels", cfg.backbone.small_cnn.conv1_channels);
    cfg.backbone.small_cnn.conv2_channels = c.value("conv2_channels", cfg.backbone.small_cnn.conv2_channels);
    cfg.backbone.small_cnn.fc_width = c.value("fc_width", cfg.backbone.small_cnn.fc_width);
    cfg.classifier_hyper.epochs = c.value("epochs", cfg.classifier_hyper.epochs);
    cfg.classifier_hyper.learning_rate = c.value("learning_rate", cfg.classifier_hyper.learning_rate);
    cfg.classifier_hyper.momentum = c.value("momentum", cfg.classifier_hyper.momentum);
    cfg.classifier_hyper.batch_size = c.value("batch_size", cfg.classifier_hyper.batch_size);
    cfg.classifier_hyper.lr_decay = c.value("lr_decay", cfg.classifier_hyper.lr_decay);
    if (c.contains("lr_decay_epochs")) cfg.classifier_hyper.lr_decay_epochs = c["lr_decay_epochs"].get<std::vector<int>>();
    cfg.classifier_hyper.val_fraction = c.value("val_fraction", cfg.classifier_hyper.val_fraction);
  }
  if (j.contains("gradients")) {
    cfg.ones_count = j["gradients"].value("ones_count", cfg.ones_count);
    cfg.squared = j["gradients"].value("squared", cfg.squared);
  }
  if (j.contains("detector")) {
    const auto& d = j["detector"];
    cfg.detector_hyper.hidden_width = d.value("hidden_width", cfg.detector_hyper.hidden_width);
    cfg.detector_hyper.epochs = d.value("epochs", cfg.detector_hyper.epochs);
    cfg.detector_hyper.learning_rate = d.value("learning_rate", cfg.detector_hyper.learning_rate);
    cfg.detector_hyper.momentum = d.value("momentum", cfg.detector_hyper.momentum);
    cfg.detector_hyper.batch_size = d.value("batch_size", cfg.detector_hyper.batch_size);
    cfg.detector_hyper.val_fraction = d.value("val_fraction", cfg.detector_hyper.val_fraction);
    cfg.detector_hyper.standardize = d.value("standardize", cfg.detector_hyper.standardize);
  }
  if (j.contains("eval")) {
    cfg.tau = j["eval"].value("tau", cfg.tau);
    cfg.ratio = j["eval"].value("ratio", cfg.ratio);
    if (j["eval"].contains("baselines")) cfg.baselines = j["eval"]["baselines"].get<std::vector<std::string>>();
  }
  cfg.workers = j.value("workers", cfg.workers);

  // The backbone's input shape follows the training data.
  cfg.backbone.channels = cfg.train_source.channels;
  cfg.backbone.height = cfg.train_source.height;
  cfg.backbone.width = cfg.train_source.width;
  return cfg;
}

void ExperimentResult::aggregate() {
  auto stats = [](const std::vector<double>& v, double& mean, double& stddev) {
    mean = 0.0;
    stddev = 0.0;
    if (v.empty()) return;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    if (v.size() > 1) {
      double acc = 0.0;
      for (double x : v) acc += (x - mean) * (x - mean);
      stddev = std::sqrt(acc / static_cast<double>(v.size() - 1));
    }
  };
  std::vector<double> aurocs, accs, soft_aurocs, soft_accs;
  partial = false;
  for (const auto& s : seeds) {
    if (s.failed) {
      partial = true;
      continue;
    }
    aurocs.push_back(s.auroc);
    accs.push_back(s.openset_accuracy);
    if (s.softmax_auroc) soft_aurocs.push_back(*s.softmax_auroc);
    if (s.softmax_openset_accuracy) soft_accs.push_back(*s.softmax_openset_accuracy);
  }
  stats(aurocs, mean_auroc, stddev_auroc);
  stats(accs, mean_openset_accuracy, stddev_openset_accuracy);
  if (!soft_aurocs.empty()) {
    double m, s;
    stats(soft_aurocs, m, s);
    mean_softmax_auroc = m;
  }
  if (!soft_accs.empty()) {
    double m, s;
    stats(soft_accs, m, s);
    mean_softmax_openset_accuracy = m;
  }
}

}  // namespace gosr
