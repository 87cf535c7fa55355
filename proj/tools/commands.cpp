#include "commands.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "scatnet/analysis.hpp"
#include "scatnet/container.hpp"
#include "scatnet/parallel.hpp"
#include "scatnet/scattering.hpp"
#include "scatnet/spectral.hpp"

namespace scatnet::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// SplitMix64 finalizer; gives independent streams from one master seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::string num(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string num(long v) { return std::to_string(v); }
std::string num(int v) { return std::to_string(v); }

class Csv {
public:
  Csv(const json& config, std::vector<std::string> columns) {
    text_ << "# config: " << config.dump() << '\n';
    add(columns);
  }

  void add(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) text_ << (i ? "," : "") << cells[i];
    text_ << '\n';
  }

  void write(const fs::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << text_.str();
    if (!out) throw IoError("failed writing '" + path.string() + "'");
  }

private:
  std::ostringstream text_;
};

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "J", "L", "N", "morlet_sigma", "morlet_xi", "morlet_slant", "lowpass_sigma",
      "model", "local_widths", "fc_widths",
      "epochs", "batch_size", "lr_initial", "lr_drop_factor", "lr_drop_epochs", "momentum",
      "weight_decay", "seed", "crop_padding", "horizontal_flip",
      "dataset", "data_dir", "train_per_class", "test_per_class", "image_side"};
  return keys;
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
}

// Options shared by every subcommand.
struct Common {
  std::string config_path;
  std::vector<std::string> assignments;
  std::optional<std::uint64_t> seed;
  std::optional<int> J, L, N, epochs, train_per_class, test_per_class;
  std::optional<std::string> dataset, data_dir, model;
  int jobs = 1;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "JSON experiment config");
    app->add_option("--set", assignments, "Override a config key: key=value (value parsed as JSON)");
    app->add_option("--seed", seed, "Master seed");
    app->add_option("--jobs", jobs, "Worker threads (results do not depend on it)")->check(CLI::PositiveNumber);
    app->add_option("--J", J, "Number of scales");
    app->add_option("--L", L, "Number of orientations");
    app->add_option("--N", N, "Filter bank side");
    app->add_option("--epochs", epochs, "Training epochs");
    app->add_option("--dataset", dataset, "synthetic or cifar10");
    app->add_option("--data-dir", data_dir, "CIFAR-10 binary batch directory");
    app->add_option("--model", model, "scattering or mlp");
    app->add_option("--train-per-class", train_per_class, "Training samples per class");
    app->add_option("--test-per-class", test_per_class, "Test samples per class");
  }

  // Config file, then --set, then typed flags.
  ExperimentConfig resolve(const json& base) const {
    json j = json::object();
    if (!config_path.empty()) {
      const json file = read_json_file(config_path);
      if (!file.is_object()) throw std::invalid_argument("config file must hold a JSON object");
      for (const auto& [k, v] : file.items()) j[k] = v;
    }
    for (const auto& a : assignments) {
      const auto eq = a.find('=');
      if (eq == std::string::npos || eq == 0) throw std::invalid_argument("--set expects key=value, got '" + a + "'");
      const std::string key = a.substr(0, eq);
      const std::string value = a.substr(eq + 1);
      j[key] = json::accept(value) ? json::parse(value) : json(value);
    }
    if (seed) j["seed"] = *seed;
    if (J) j["J"] = *J;
    if (L) j["L"] = *L;
    if (N) j["N"] = *N;
    if (epochs) j["epochs"] = *epochs;
    if (dataset) j["dataset"] = *dataset;
    if (data_dir) j["data_dir"] = *data_dir;
    if (model) j["model"] = *model;
    if (train_per_class) j["train_per_class"] = *train_per_class;
    if (test_per_class) j["test_per_class"] = *test_per_class;
    const ExperimentConfig cfg = experiment_from_json(j, experiment_from_json(base));
    cfg.validate();
    return cfg;
  }
};

json checkpoint_config(const Container& c) {
  if (!c.meta.contains("config")) throw FormatError("checkpoint carries no experiment config", 8);
  return c.meta.at("config");
}

int colors_of(const SleModel& model, const ExperimentConfig& cfg) {
  const long per_color = path_count(cfg.scattering.J, cfg.scattering.L);
  if (model.spec.in_channels % per_color != 0) {
    throw std::invalid_argument("model input width " + std::to_string(model.spec.in_channels) +
                                " is not a multiple of the path count " + std::to_string(per_color));
  }
  return static_cast<int>(model.spec.in_channels / per_color);
}

void print_accuracy(std::ostream& out, const std::string& label, const Accuracy& acc) {
  out << label << " top1=" << num(acc.top1);
  if (acc.top5 >= 0.0) out << " top5=" << num(acc.top5);
  out << '\n';
}

// ---------------------------------------------------------------- commands

int cmd_filters(const ExperimentConfig& cfg, const fs::path& out_path, std::ostream& out) {
  const FilterBank bank(cfg.scattering);
  Container c = filterbank_container(bank);
  c.meta["experiment"] = to_json(cfg);
  write_container(out_path, c);
  const LittlewoodPaley lp = littlewood_paley(bank);
  out << "wavelets=" << cfg.scattering.J * cfg.scattering.L << " lowpass=1 arrays=" << c.arrays.size() << '\n';
  out << "lp_min=" << num(lp.lp_min) << " lp_max=" << num(lp.lp_max) << '\n';
  return kOk;
}

int cmd_lp_check(const ExperimentConfig& cfg, double band_limit, const std::string& out_path,
                 const std::string& curve_path, std::ostream& out) {
  const FilterBank bank(cfg.scattering);
  const LittlewoodPaley lp = littlewood_paley(bank, band_limit);
  const json config = to_json(cfg);
  if (!out_path.empty()) {
    Csv csv(config, {"metric", "value"});
    csv.add({"lp_min", num(lp.lp_min)});
    csv.add({"lp_max", num(lp.lp_max)});
    csv.add({"band_limit", num(band_limit)});
    csv.add({"wavelet_gain", num(bank.wavelet_gain())});
    csv.write(out_path);
  }
  if (!curve_path.empty()) {
    const int n = cfg.scattering.N;
    Csv csv(config, {"k1", "k2", "omega1", "omega2", "value"});
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b < n; ++b) {
        csv.add({num(a), num(b), num(grid_frequency(a, n)), num(grid_frequency(b, n)), num(lp.curve(a, b))});
      }
    }
    csv.write(curve_path);
  }
  out << "lp_min=" << num(lp.lp_min) << " lp_max=" << num(lp.lp_max) << '\n';
  return kOk;
}

int cmd_transform(const ExperimentConfig& cfg, const std::vector<std::string>& images, const std::string& split,
                  int limit, int jobs, const fs::path& out_path, std::ostream& out) {
  std::vector<Image> inputs;
  json meta = {{"experiment", to_json(cfg)}};
  if (!images.empty()) {
    for (const auto& p : images) inputs.push_back(load_ppm(p));
    meta["sources"] = images;
  } else {
    if (split != "train" && split != "test") throw std::invalid_argument("--split must be train or test");
    Datasets data = load_datasets(cfg);
    LabeledImageSet& set = split == "train" ? data.train : data.test;
    const std::size_t n = limit > 0 ? std::min<std::size_t>(limit, set.size()) : set.size();
    inputs.assign(set.images.begin(), set.images.begin() + static_cast<long>(n));
    meta["labels"] = std::vector<int>(set.labels.begin(), set.labels.begin() + static_cast<long>(n));
    meta["split"] = split;
  }
  const FilterBank bank(cfg.scattering);
  std::vector<ScatteringOutput> outputs(inputs.size());
  parallel_for(inputs.size(), jobs, [&](std::size_t i) { outputs[i] = scattering2d(inputs[i], bank); });
  write_container(out_path, scattering_container(outputs, cfg.scattering, meta));
  out << "records=" << outputs.size();
  if (!outputs.empty()) {
    out << " channels=" << outputs[0].channels() << " grid=" << outputs[0].height << "x" << outputs[0].width;
  }
  out << '\n';
  return kOk;
}

int cmd_train(const ExperimentConfig& cfg, const fs::path& model_path, const std::string& metrics_path,
              int validate_every, int jobs, std::ostream& out) {
  const Datasets data = load_datasets(cfg);
  const Featurizer featurize = make_featurizer(cfg);
  const FeatureSet test = featurize_all(data.test, featurize, jobs);
  const Image& probe = data.train.images.front();
  const ModelSpec spec = model_spec(cfg, probe.colors(), probe.height(), data.train.class_count);

  TrainOptions options;
  options.validation = &test;
  options.validate_every = validate_every;
  options.jobs = jobs;
  options.on_epoch = [&](const EpochMetrics& m) {
    out << "epoch " << m.epoch << " lr=" << num(m.learning_rate) << " loss=" << num(m.train_loss)
        << " train_acc=" << num(m.train_accuracy);
    if (m.validation_accuracy >= 0.0) out << " test_acc=" << num(m.validation_accuracy);
    out << '\n';
  };
  const TrainResult result = train(data.train, featurize, spec, cfg.train, options);

  write_container(model_path, model_container(result.model, {{"config", to_json(cfg)}}));
  if (!metrics_path.empty()) {
    Csv csv(to_json(cfg), {"epoch", "learning_rate", "train_loss", "train_accuracy", "test_accuracy"});
    for (const auto& m : result.metrics) {
      csv.add({num(m.epoch), num(m.learning_rate), num(m.train_loss), num(m.train_accuracy),
               m.validation_accuracy >= 0.0 ? num(m.validation_accuracy) : std::string()});
    }
    csv.write(metrics_path);
  }
  out << "parameters=" << result.model.parameter_count() << '\n';
  return kOk;
}

int cmd_eval(const Container& checkpoint, const ExperimentConfig& cfg, const std::string& out_path, int jobs,
             std::ostream& out) {
  const SleModel model = model_from_container(checkpoint);
  const Datasets data = load_datasets(cfg);
  const FeatureSet test = featurize_all(data.test, make_featurizer(cfg), jobs);
  if (test.size() > 0 && (test.features[0].rows() != model.spec.in_channels ||
                          test.features[0].cols() != model.spec.positions)) {
    throw std::invalid_argument("checkpoint input shape does not match the configured features");
  }
  const Accuracy acc = evaluate(model, test);
  if (!out_path.empty()) {
    Csv csv(to_json(cfg), {"metric", "value"});
    csv.add({"test_top1", num(acc.top1)});
    csv.add({"test_top5", num(acc.top5)});
    csv.add({"test_samples", num(static_cast<long>(test.size()))});
    if (checkpoint.meta.contains("sparsity")) csv.add({"sparsity", num(checkpoint.meta["sparsity"].get<double>())});
    csv.write(out_path);
  }
  print_accuracy(out, "test", acc);
  return kOk;
}

int cmd_analyze(const Container& checkpoint, const ExperimentConfig& cfg, const fs::path& out_dir,
                std::optional<double> sparsity, std::optional<double> epsilon, const std::string& sparse_out,
                int bins, std::ostream& out) {
  if (cfg.model != "scattering") throw std::invalid_argument("analyze needs a scattering model checkpoint");
  const SleModel model = model_from_container(checkpoint);
  const int J = cfg.scattering.J;
  const int L = cfg.scattering.L;
  const int colors = colors_of(model, cfg);

  const NormalizedView normalized = normalize_view(split_first_layer(model, J, L, colors));
  const AngularSpectrumView spectrum = angular_dft(normalized.view);
  const SpectrumReport report = omega_spectra(spectrum, bins);
  auto rel = [](double a, double b) { return b != 0.0 ? std::abs(a - b) / std::abs(b) : std::abs(a); };
  const double parseval1 = rel(report.omega1.sum(), L * normalized.view.f1.squaredNorm());
  const double parseval2 = rel(report.omega2.sum(), double(L) * L * normalized.view.f2.squaredNorm());
  const double share = low_frequency_share(report);

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create directory '" + out_dir.string() + "': " + ec.message());
  const json config = to_json(cfg);

  Csv omega1(config, {"omega1", "value"});
  for (int w = 0; w < L; ++w) omega1.add({num(w), num(report.omega1(w))});
  omega1.write(out_dir / "omega1.csv");
  Csv omega2(config, {"omega1", "omega2", "value"});
  for (int a = 0; a < L; ++a)
    for (int b = 0; b < L; ++b) omega2.add({num(a), num(b), num(report.omega2(a, b))});
  omega2.write(out_dir / "omega2.csv");
  auto write_hist = [&](const Histogram& h, const fs::path& path) {
    Csv csv(config, {"bin_lo", "bin_hi", "count"});
    const double width = h.counts.empty() ? 0.0 : (h.hi - h.lo) / static_cast<double>(h.counts.size());
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
      csv.add({num(h.lo + width * i), num(h.lo + width * (i + 1)), num(h.counts[i])});
    }
    csv.write(path);
  };
  write_hist(report.histogram1, out_dir / "histogram1.csv");
  write_hist(report.histogram2, out_dir / "histogram2.csv");

  Csv summary(config, {"metric", "value"});
  summary.add({"parseval_omega1_rel_error", num(parseval1)});
  summary.add({"parseval_omega2_rel_error", num(parseval2)});
  summary.add({"low_frequency_share", num(share)});
  summary.add({"uniform_share", num(std::min(3.0, double(L)) / L)});
  summary.add({"zero_filters", num(static_cast<long>(normalized.zero_filters.size()))});
  if (sparsity || epsilon) {
    const double eps = epsilon ? *epsilon : sparsity_threshold(model, J, L, colors, *sparsity);
    const SparsifyResult sparse = threshold_sparsify(model, J, L, colors, eps);
    summary.add({"epsilon", num(eps)});
    summary.add({"sparsity", num(sparse.sparsity)});
    if (!sparse_out.empty()) {
      json meta = checkpoint.meta;
      meta.erase("kind");
      meta.erase("spec");
      meta["sparsity"] = sparse.sparsity;
      meta["epsilon"] = eps;
      write_container(sparse_out, model_container(sparse.model, meta));
    }
    out << "epsilon=" << num(eps) << " sparsity=" << num(sparse.sparsity) << '\n';
  }
  summary.write(out_dir / "summary.csv");
  out << "low_frequency_share=" << num(share) << " parseval1=" << num(parseval1) << " parseval2=" << num(parseval2)
      << '\n';
  return kOk;
}

int cmd_covariance(const ExperimentConfig& cfg, int quarter_turns, int count, const std::vector<std::string>& images,
                   const fs::path& out_path, int jobs, std::ostream& out) {
  const FilterBank bank(cfg.scattering);
  const int n = cfg.scattering.N;
  std::vector<RealImage> planes;
  if (!images.empty()) {
    for (const auto& p : images) {
      const Image img = load_ppm(p);
      RealImage luma = RealImage::Zero(img.height(), img.width());
      for (const auto& ch : img.channels) luma += ch / static_cast<double>(img.colors());
      if (luma.rows() > n || luma.cols() > n) throw std::invalid_argument("image '" + p + "' is larger than N");
      planes.push_back(pad_reflect(luma, n));
    }
  } else {
    planes = natural_test_planes(count, n, derive_seed(cfg.train.seed, 7));
  }
  std::vector<CovarianceReport> reports(planes.size());
  parallel_for(planes.size(), jobs, [&](std::size_t i) { reports[i] = covariance_check(planes[i], bank, quarter_turns); });

  Csv csv(to_json(cfg), {"image", "quarter_turns", "order1_error", "order2_error", "order2_theta1_only_error"});
  double e1 = 0, e2 = 0, e2t = 0;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    csv.add({num(static_cast<long>(i)), num(quarter_turns), num(r.order1_error), num(r.order2_error),
             num(r.order2_theta1_only_error)});
    e1 += r.order1_error;
    e2 += r.order2_error;
    e2t += r.order2_theta1_only_error;
  }
  const double k = reports.empty() ? 1.0 : static_cast<double>(reports.size());
  csv.add({"mean", num(quarter_turns), num(e1 / k), num(e2 / k), num(e2t / k)});
  csv.write(out_path);
  out << "order1_error=" << num(e1 / k) << " order2_error=" << num(e2 / k)
      << " order2_theta1_only_error=" << num(e2t / k) << '\n';
  return kOk;
}

}  // namespace

// ------------------------------------------------------------------ config

void ExperimentConfig::validate() const {
  scattering.validate();
  train.validate();
  if (model != "scattering" && model != "mlp") throw std::invalid_argument("model must be 'scattering' or 'mlp'");
  if (dataset != "synthetic" && dataset != "cifar10") {
    throw std::invalid_argument("dataset must be 'synthetic' or 'cifar10'");
  }
  for (int w : local_widths) {
    if (w < 1) throw std::invalid_argument("local_widths entries must be positive");
  }
  for (int w : fc_widths) {
    if (w < 1) throw std::invalid_argument("fc_widths entries must be positive");
  }
  if (train_per_class < 0 || test_per_class < 0) throw std::invalid_argument("per-class counts must be >= 0");
  if (dataset == "synthetic" && (train_per_class < 1 || test_per_class < 1)) {
    throw std::invalid_argument("synthetic data needs train_per_class and test_per_class >= 1");
  }
  if (image_side < 4 || image_side > scattering.N) {
    throw std::invalid_argument("image_side must lie in [4, N]");
  }
}

json to_json(const ExperimentConfig& c) {
  json j = c.scattering;
  const json train = c.train;
  for (const auto& [k, v] : train.items()) j[k] = v;
  j["model"] = c.model;
  j["local_widths"] = c.local_widths;
  j["fc_widths"] = c.fc_widths;
  j["dataset"] = c.dataset;
  j["data_dir"] = c.data_dir;
  j["train_per_class"] = c.train_per_class;
  j["test_per_class"] = c.test_per_class;
  j["image_side"] = c.image_side;
  return j;
}

ExperimentConfig experiment_from_json(const json& j, ExperimentConfig base) {
  if (!j.is_object()) throw std::invalid_argument("experiment config must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (!known_keys().contains(k)) throw std::invalid_argument("unknown config key '" + k + "'");
  }
  try {
    ExperimentConfig c = base;
    json bank = c.scattering;
    for (const char* k : {"J", "L", "N", "morlet_sigma", "morlet_xi", "morlet_slant", "lowpass_sigma"}) {
      if (j.contains(k)) bank[k] = j[k];
    }
    // The slant default follows L, so a changed L without an explicit slant
    // takes the default for that L.
    if (j.contains("L") && !j.contains("morlet_slant")) bank.erase("morlet_slant");
    c.scattering = bank.get<FilterBankConfig>();
    from_json(j, c.train);
    c.model = j.value("model", c.model);
    c.local_widths = j.value("local_widths", c.local_widths);
    c.fc_widths = j.value("fc_widths", c.fc_widths);
    c.dataset = j.value("dataset", c.dataset);
    c.data_dir = j.value("data_dir", c.data_dir);
    c.train_per_class = j.value("train_per_class", c.train_per_class);
    c.test_per_class = j.value("test_per_class", c.test_per_class);
    c.image_side = j.value("image_side", c.image_side);
    return c;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("bad config value: ") + e.what());
  }
}

Datasets load_datasets(const ExperimentConfig& cfg) {
  const std::uint64_t seed = cfg.train.seed;
  Datasets d;
  if (cfg.dataset == "synthetic") {
    // Fixed populations for every seed; the seed picks the training subset
    // out of a pool twice its size.
    d.train = make_synthetic_textures(2 * cfg.train_per_class, cfg.image_side, derive_seed(0, 1));
    d.test = make_synthetic_textures(cfg.test_per_class, cfg.image_side, derive_seed(0, 2));
    d.train = sample_subset(d.train, cfg.train_per_class, derive_seed(seed, 3));
    return d;
  }
  CifarSplit split = load_cifar10(cfg.data_dir);
  d.train = cfg.train_per_class > 0 ? sample_subset(split.train, cfg.train_per_class, derive_seed(seed, 3))
                                    : std::move(split.train);
  // The test subset is fixed across seeds.
  d.test = cfg.test_per_class > 0 ? sample_subset(split.test, cfg.test_per_class, derive_seed(0, 4))
                                  : std::move(split.test);
  return d;
}

Featurizer make_featurizer(const ExperimentConfig& cfg) {
  if (cfg.model == "mlp") {
    return [](const Image& img) {
      Eigen::MatrixXd x(static_cast<long>(img.colors()) * img.height() * img.width(), 1);
      long k = 0;
      for (const auto& ch : img.channels)
        for (long r = 0; r < ch.rows(); ++r)
          for (long c = 0; c < ch.cols(); ++c) x(k++, 0) = ch(r, c);
      return x;
    };
  }
  auto bank = std::make_shared<const FilterBank>(cfg.scattering);
  return [bank](const Image& img) { return scattering2d(img, *bank).data; };
}

ModelSpec model_spec(const ExperimentConfig& cfg, int colors, int image_side, int class_count) {
  const int grid = (image_side + (1 << cfg.scattering.J) - 1) >> cfg.scattering.J;
  ModelSpec scat;
  scat.in_channels = static_cast<int>(channel_count(cfg.scattering.J, cfg.scattering.L, colors));
  scat.positions = grid * grid;
  scat.local_widths = cfg.local_widths;
  scat.fc_widths = cfg.fc_widths;
  scat.class_count = class_count;
  if (cfg.model == "scattering") return scat;

  const long target = init_model(scat, 0).parameter_count();
  const int inputs = colors * image_side * image_side;
  const int h = matched_mlp_width(inputs, class_count, 2, target);
  ModelSpec mlp;
  mlp.in_channels = inputs;
  mlp.positions = 1;
  mlp.fc_widths = {h, h};
  mlp.class_count = class_count;
  return mlp;
}

// -------------------------------------------------------------------- main

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Scattering transforms and shared local encoders"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "scatnet 1.0");

  std::map<std::string, Common> common;
  auto sub = [&](const std::string& name, const std::string& help) {
    CLI::App* s = app.add_subcommand(name, help);
    common[name].attach(s);
    return s;
  };

  std::string out_path, metrics_path, curve_path, model_path, split = "test", sparse_out, out_dir;
  std::vector<std::string> images;
  int limit = 0, validate_every = 0, quarter_turns = 1, count = 10, bins = 50;
  double band_limit = std::numbers::pi * 7.0 / 8.0;
  std::optional<double> sparsity, epsilon;

  auto* filters = sub("filters", "Build the filter bank and write it to a container file");
  filters->add_option("--out", out_path, "Output container")->required();

  auto* lp = sub("lp-check", "Littlewood-Paley bounds of the filter bank");
  lp->add_option("--out", out_path, "CSV summary");
  lp->add_option("--curve", curve_path, "CSV of the full Littlewood-Paley curve");
  lp->add_option("--band-limit", band_limit, "Radius (radians) of the frequency disk for the bounds");

  auto* transform = sub("transform", "Scattering transform of PPM images or a dataset split");
  transform->add_option("--out", out_path, "Output container")->required();
  transform->add_option("--image", images, "PPM input(s)");
  transform->add_option("--split", split, "Dataset split when no --image is given (train or test)");
  transform->add_option("--limit", limit, "Transform only the first n images of the split");

  auto* train_cmd = sub("train", "Train an encoder and write a checkpoint");
  train_cmd->add_option("--out", model_path, "Output checkpoint")->required();
  train_cmd->add_option("--metrics", metrics_path, "Per-epoch metrics CSV");
  train_cmd->add_option("--validate-every", validate_every, "Test-set evaluation period in epochs (0: last only)");

  auto* eval = sub("eval", "Evaluate a checkpoint on the test split");
  eval->add_option("--checkpoint", model_path, "Model checkpoint")->required();
  eval->add_option("--out", out_path, "CSV report");

  auto* analyze = sub("analyze", "Angular spectra and sparsification of the first local layer");
  analyze->add_option("--checkpoint", model_path, "Model checkpoint")->required();
  analyze->add_option("--out-dir", out_dir, "Directory for CSV reports")->required();
  auto* sp = analyze->add_option("--sparsity", sparsity, "Zero this fraction of angular Fourier coefficients");
  analyze->add_option("--epsilon", epsilon, "Zero coefficients with magnitude <= epsilon")->excludes(sp);
  analyze->add_option("--sparse-out", sparse_out, "Write the sparsified checkpoint here");
  analyze->add_option("--bins", bins, "Histogram bins")->check(CLI::PositiveNumber);

  auto* covariance = sub("covariance", "Rotation covariance errors of the scattering coefficients");
  covariance->add_option("--out", out_path, "CSV report")->required();
  covariance->add_option("--quarter-turns", quarter_turns, "Rotation in multiples of 90 degrees");
  covariance->add_option("--images", count, "Number of generated test images")->check(CLI::NonNegativeNumber);
  covariance->add_option("--image", images, "PPM input(s) instead of generated images");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, e2;
    const int code = app.exit(e, o, e2);
    out << o.str();
    err << e2.str();
    return code == 0 ? kOk : kConfigError;
  }

  try {
    CLI::App* chosen = app.get_subcommands().front();
    const std::string name = chosen->get_name();
    const Common& c = common[name];
    if (name == "eval" || name == "analyze") {
      const Container checkpoint = read_container(model_path);
      const ExperimentConfig cfg = c.resolve(checkpoint_config(checkpoint));
      if (name == "eval") return cmd_eval(checkpoint, cfg, out_path, c.jobs, out);
      return cmd_analyze(checkpoint, cfg, out_dir, sparsity, epsilon, sparse_out, bins, out);
    }
    const ExperimentConfig cfg = c.resolve(to_json(ExperimentConfig{}));
    if (name == "filters") return cmd_filters(cfg, out_path, out);
    if (name == "lp-check") return cmd_lp_check(cfg, band_limit, out_path, curve_path, out);
    if (name == "transform") return cmd_transform(cfg, images, split, limit, c.jobs, out_path, out);
    if (name == "train") return cmd_train(cfg, model_path, metrics_path, validate_every, c.jobs, out);
    if (name == "covariance") return cmd_covariance(cfg, quarter_turns, count, images, out_path, c.jobs, out);
    err << "unknown command " << name << '\n';
    return kConfigError;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << '\n';
    return kFormatError;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << '\n';
    return kIoError;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
}

}  // namespace scatnet::cli
