#include "gosr/gradient.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gosr/common.hpp"

namespace gosr {

namespace {

constexpr double kProbFloor = 1e-7;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

Tensor as_batch1(const Tensor& image) {
  Tensor batch = image;
  batch.shape.insert(batch.shape.begin(), 1);
  return batch;
}

// J and optionally dJ/dlogits for one image's logits {1,N}.
double bce_against_label(const Tensor& logits, const ConfoundingLabel& label, Tensor* dlogits) {
  const int n = logits.dim(1);
  if (n != label.size())
    throw std::invalid_argument("confounding label length " + std::to_string(label.size()) +
                                " does not match checkpoint class count " + std::to_string(n));
  double loss = 0.0;
  if (dlogits) *dlogits = Tensor(logits.shape);
  for (int i = 0; i < n; ++i) {
    const double p = sigmoid(logits[i]);
    const double pc = std::clamp(p, kProbFloor, 1.0 - kProbFloor);
    const double y = label.values[static_cast<std::size_t>(i)];
    loss -= y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc);
    if (dlogits) {
      // Through the clamp the derivative vanishes; elsewhere it reduces to
      // (p - y) / N.
      double g = 0.0;
      if (p > kProbFloor && p < 1.0 - kProbFloor) g = (p - y) / n;
      (*dlogits)[i] = g;
    }
  }
  return loss / n;
}

}  // namespace

ConfoundingLabel make_confounding_label(int num_classes, int ones_count) {
  if (num_classes < 1) throw std::invalid_argument("make_confounding_label: num_classes must be positive");
  if (ones_count == 1)
    throw std::invalid_argument("make_confounding_label: n = 1 is an ordinary one-hot label and is rejected");
  if (ones_count < 0 || ones_count > num_classes)
    throw std::invalid_argument("make_confounding_label: n must lie in 0.." + std::to_string(num_classes));
  ConfoundingLabel label;
  label.ones_count = ones_count;
  label.values.assign(static_cast<std::size_t>(num_classes), 0.0);
  for (int i = 0; i < ones_count; ++i) label.values[static_cast<std::size_t>(i)] = 1.0;
  return label;
}

double confounding_loss(const Network& net, const Tensor& image, const ConfoundingLabel& label) {
  Tensor logits = net.infer(as_batch1(image));
  return bce_against_label(logits, label, nullptr);
}

GradientRepresentation extract_representation(const ClassifierCheckpoint& ckpt, const Tensor& image,
                                              const ConfoundingLabel& label, const ExtractOptions& options) {
  if (!ckpt.net) throw std::logic_error("extract_representation: empty checkpoint");
  const Network& net = *ckpt.net;

  NetContext ctx;
  Tensor logits = net.forward(as_batch1(image), ctx, false);
  Tensor dlogits;
  const double loss = bce_against_label(logits, label, &dlogits);
  if (!std::isfinite(loss)) throw std::runtime_error("extract_representation: non-finite loss");

  std::vector<Tensor> grads = net.make_grad_store();
  net.backward(dlogits, ctx, grads);

  GradientRepresentation rep;
  rep.sample_ref = "";
  rep.ones_count = label.ones_count;
  rep.checkpoint_hash = ckpt.param_hash;
  rep.features.reserve(grads.size());
  const auto& params = net.params();
  for (std::size_t k = 0; k < grads.size(); ++k) {
    double v = grads[k].sum_squares();
    if (!options.squared) v = std::sqrt(v);
    if (!std::isfinite(v))
      throw std::runtime_error("extract_representation: non-finite gradient in parameter set " + params[k].name);
    rep.features.push_back(v);
  }
  return rep;
}

GradientRepresentation finite_difference_oracle(const ClassifierCheckpoint& ckpt, const Tensor& image,
                                                const ConfoundingLabel& label, double epsilon,
                                                const ExtractOptions& options) {
  if (epsilon <= 0.0) throw std::invalid_argument("finite_difference_oracle: epsilon must be positive");
  if (!ckpt.net) throw std::logic_error("finite_difference_oracle: empty checkpoint");

  // Work on a private copy so the checkpoint parameters stay untouched.
  auto net = clone_network(ckpt.spec, *ckpt.net);

  GradientRepresentation rep;
  rep.ones_count = label.ones_count;
  rep.checkpoint_hash = ckpt.param_hash;
  for (const auto& pref : net->params()) {
    Tensor& w = *pref.tensor;
    double sum_sq = 0.0;
    for (std::int64_t i = 0; i < w.size(); ++i) {
      const double saved = w[i];
      w[i] = saved + epsilon;
      const double plus = confounding_loss(*net, image, label);
      w[i] = saved - epsilon;
      const double minus = confounding_loss(*net, image, label);
      w[i] = saved;
      const double g = (plus - minus) / (2.0 * epsilon);
      sum_sq += g * g;
    }
    rep.features.push_back(options.squared ? sum_sq : std::sqrt(sum_sq));
  }
  return rep;
}

bool FeatureTable::has_roles() const {
  for (int r : role_labels)
    if (r >= 0) return true;
  return false;
}

std::vector<double> FeatureTable::role_mean(int role) const {
  std::vector<double> mean(static_cast<std::size_t>(width()), 0.0);
  std::size_t count = 0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (role_labels[r] != role) continue;
    for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += rows[r][j];
    ++count;
  }
  if (count == 0) throw std::invalid_argument("role_mean: no rows with role " + std::to_string(role));
  for (auto& m : mean) m /= static_cast<double>(count);
  return mean;
}

std::string FeatureProvenance::describe() const {
  std::ostringstream os;
  os << "checkpoint=" << checkpoint_hash << " split=" << (split_hash.empty() ? "-" : split_hash)
     << " n=" << ones_count << " N=" << num_classes << " P=" << num_sets << " squared=" << (squared ? 1 : 0);
  return os.str();
}

FeatureTable extract_batch(const ClassifierCheckpoint& ckpt, const LabeledDataset& dataset,
                           const ConfoundingLabel& label, const std::vector<int>& role_labels,
                           const std::optional<std::filesystem::path>& cache_path_base,
                           const ExtractOptions& options, const std::string& split_hash) {
  if (dataset.empty()) throw std::invalid_argument("extract_batch: empty dataset");
  if (!role_labels.empty() && role_labels.size() != dataset.size())
    throw std::invalid_argument("extract_batch: role label count does not match dataset size");

  FeatureProvenance prov;
  prov.checkpoint_hash = ckpt.param_hash;
  prov.split_hash = split_hash;
  prov.ones_count = label.ones_count;
  prov.num_classes = ckpt.num_classes();
  prov.num_sets = ckpt.net->num_param_sets();
  prov.squared = options.squared;

  if (cache_path_base) {
    const auto bin = *cache_path_base;
    auto bin_path = bin;
    bin_path += ".bin";
    auto csv_path = bin;
    csv_path += ".csv";
    if (std::filesystem::exists(bin_path)) {
      FeatureTable cached = load_feature_table_bin(bin_path);
      if (cached.provenance == prov && cached.size() == dataset.size()) return cached;
    } else if (std::filesystem::exists(csv_path)) {
      FeatureTable cached = load_feature_table_csv(csv_path);
      if (cached.provenance == prov && cached.size() == dataset.size()) return cached;
    }
  }

  FeatureTable table;
  table.provenance = prov;
  table.sample_ids.resize(dataset.size());
  table.role_labels.assign(dataset.size(), -1);
  table.rows.resize(dataset.size());

  parallel_for(static_cast<std::int64_t>(dataset.size()), options.workers, [&](std::int64_t i) {
    const Sample& s = dataset.samples[static_cast<std::size_t>(i)];
    GradientRepresentation rep = extract_representation(ckpt, s.image, label, options);
    table.rows[static_cast<std::size_t>(i)] = std::move(rep.features);
    table.sample_ids[static_cast<std::size_t>(i)] = s.id;
    if (!role_labels.empty()) table.role_labels[static_cast<std::size_t>(i)] = role_labels[static_cast<std::size_t>(i)];
  });

  if (cache_path_base) {
    auto bin_path = *cache_path_base;
    bin_path += ".bin";
    auto csv_path = *cache_path_base;
    csv_path += ".csv";
    save_feature_table_csv(table, csv_path);
    save_feature_table_bin(table, bin_path);
  }
  return table;
}

// Cache files ---------------------------------------------------------------

namespace {
constexpr const char* kCsvHeaderTag = "# gosr-feature-cache v1";
constexpr std::uint32_t kBinMagic = 0x47465431;  // "GFT1"
}  // namespace

void save_feature_table_csv(const FeatureTable& table, const std::filesystem::path& path) {
  std::ostringstream os;
  os << kCsvHeaderTag << "\n";
  os << "# checkpoint_hash=" << table.provenance.checkpoint_hash << "\n";
  os << "# split_hash=" << table.provenance.split_hash << "\n";
  os << "# n=" << table.provenance.ones_count << "\n";
  os << "# N=" << table.provenance.num_classes << "\n";
  os << "# P=" << table.provenance.num_sets << "\n";
  os << "# squared=" << (table.provenance.squared ? 1 : 0) << "\n";
  os << "sample_id,role_label";
  for (int j = 0; j < table.width(); ++j) os << ",f_" << j;
  os << "\n";
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    os << table.sample_ids[r] << "," << table.role_labels[r];
    for (double v : table.rows[r]) os << "," << format_double(v);
    os << "\n";
  }
  write_text_file(path, os.str());
}

void save_feature_table_bin(const FeatureTable& table, const std::filesystem::path& path) {
  BinWriter w;
  w.u32(kBinMagic);
  w.u32(1);
  w.str(table.provenance.checkpoint_hash);
  w.str(table.provenance.split_hash);
  w.u64(static_cast<std::uint64_t>(table.provenance.ones_count));
  w.u64(static_cast<std::uint64_t>(table.provenance.num_classes));
  w.u64(static_cast<std::uint64_t>(table.provenance.num_sets));
  w.u32(table.provenance.squared ? 1 : 0);
  w.u64(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    w.str(table.sample_ids[r]);
    w.u64(static_cast<std::uint64_t>(static_cast<std::int64_t>(table.role_labels[r])));
    w.doubles(table.rows[r]);
  }
  write_binary_file(path, w.bytes());
}

FeatureTable load_feature_table_csv(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeaderTag)
    throw std::runtime_error("feature cache: bad header in " + path.string());

  FeatureTable table;
  auto header_value = [&](const std::string& l, const std::string& key) {
    const std::string prefix = "# " + key + "=";
    if (l.rfind(prefix, 0) != 0) throw std::runtime_error("feature cache: expected " + key + " in " + path.string());
    return l.substr(prefix.size());
  };
  std::getline(in, line);
  table.provenance.checkpoint_hash = header_value(line, "checkpoint_hash");
  std::getline(in, line);
  table.provenance.split_hash = header_value(line, "split_hash");
  std::getline(in, line);
  table.provenance.ones_count = std::stoi(header_value(line, "n"));
  std::getline(in, line);
  table.provenance.num_classes = std::stoi(header_value(line, "N"));
  std::getline(in, line);
  table.provenance.num_sets = std::stoi(header_value(line, "P"));
  std::getline(in, line);
  table.provenance.squared = std::stoi(header_value(line, "squared")) != 0;
  std::getline(in, line);  // column header

  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string field;
    std::getline(row, field, ',');
    table.sample_ids.push_back(field);
    std::getline(row, field, ',');
    table.role_labels.push_back(std::stoi(field));
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(table.provenance.num_sets));
    while (std::getline(row, field, ',')) values.push_back(std::stod(field));
    if (static_cast<int>(values.size()) != table.provenance.num_sets)
      throw std::runtime_error("feature cache: row width mismatch in " + path.string());
    table.rows.push_back(std::move(values));
  }
  return table;
}

FeatureTable load_feature_table_bin(const std::filesystem::path& path) {
  BinReader r(read_binary_file(path));
  if (r.u32() != kBinMagic) throw std::runtime_error("feature cache: bad magic in " + path.string());
  if (r.u32() != 1) throw std::runtime_error("feature cache: unsupported version in " + path.string());
  FeatureTable table;
  table.provenance.checkpoint_hash = r.str();
  table.provenance.split_hash = r.str();
  table.provenance.ones_count = static_cast<int>(r.u64());
  table.provenance.num_classes = static_cast<int>(r.u64());
  table.provenance.num_sets = static_cast<int>(r.u64());
  table.provenance.squared = r.u32() != 0;
  const std::uint64_t rows = r.u64();
  table.sample_ids.reserve(rows);
  table.role_labels.reserve(rows);
  table.rows.reserve(rows);
  for (std::uint64_t i = 0; i < rows; ++i) {
    table.sample_ids.push_back(r.str());
    table.role_labels.push_back(static_cast<int>(static_cast<std::int64_t>(r.u64())));
    table.rows.push_back(r.doubles());
    if (static_cast<int>(table.rows.back().size()) != table.provenance.num_sets)
      throw std::runtime_error("feature cache: row width mismatch in " + path.string());
  }
  return table;
}

FeatureTable load_feature_table_checked(const std::filesystem::path& path, const FeatureProvenance& expected) {
  FeatureTable table =
      path.extension() == ".bin" ? load_feature_table_bin(path) : load_feature_table_csv(path);
  if (!(table.provenance == expected))
    throw std::runtime_error("stale feature cache " + path.string() + ": have [" + table.provenance.describe() +
                             "], expected [" + expected.describe() + "]");
  return table;
}

}  // namespace gosr
