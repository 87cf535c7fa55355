#include "scatnet/container.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace scatnet {

namespace {

constexpr const char* kFormat = "scatnet-container";
constexpr int kVersion = 1;

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_u64(const std::string& in, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

void put_f32(std::string& out, float f) {
  const auto bits = std::bit_cast<std::uint32_t>(f);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

float get_f32(const std::string& in, std::size_t at) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return std::bit_cast<float>(bits);
}

long element_count(const std::vector<long>& shape) {
  long n = 1;
  for (long d : shape) n *= d;
  return n;
}

template <typename Derived>
ContainerArray matrix_array(std::string name, const Eigen::DenseBase<Derived>& m) {
  ContainerArray a{std::move(name), {static_cast<long>(m.rows()), static_cast<long>(m.cols())}, {}};
  a.values.reserve(m.size());
  for (long r = 0; r < m.rows(); ++r)
    for (long c = 0; c < m.cols(); ++c) a.values.push_back(static_cast<float>(m(r, c)));
  return a;
}

ContainerArray vector_array(std::string name, const Eigen::VectorXd& v) {
  ContainerArray a{std::move(name), {static_cast<long>(v.size())}, {}};
  for (double x : v) a.values.push_back(static_cast<float>(x));
  return a;
}

Eigen::MatrixXd to_matrix(const ContainerArray& a) {
  if (a.shape.size() != 2) throw FormatError("array '" + a.name + "' is not two-dimensional", 0);
  Eigen::MatrixXd m(a.shape[0], a.shape[1]);
  for (long r = 0; r < m.rows(); ++r)
    for (long c = 0; c < m.cols(); ++c) m(r, c) = a.values[r * m.cols() + c];
  return m;
}

Eigen::VectorXd to_vector(const ContainerArray& a) {
  if (a.shape.size() != 1) throw FormatError("array '" + a.name + "' is not one-dimensional", 0);
  Eigen::VectorXd v(a.shape[0]);
  for (long i = 0; i < v.size(); ++i) v(i) = a.values[i];
  return v;
}

std::string psi_name(int j, int t, int r) {
  return "psi/" + std::to_string(j) + "/" + std::to_string(t) + "/" + std::to_string(r);
}

void add_layer(Container& c, const std::string& prefix, const DenseLayer& layer,
               const BatchNormState* bn) {
  c.arrays.push_back(matrix_array(prefix + "/weight", layer.weight));
  c.arrays.push_back(vector_array(prefix + "/bias", layer.bias));
  if (bn == nullptr) return;
  c.arrays.push_back(vector_array(prefix + "/bn_gamma", bn->gamma));
  c.arrays.push_back(vector_array(prefix + "/bn_beta", bn->beta));
  c.arrays.push_back(vector_array(prefix + "/bn_running_mean", bn->running_mean));
  c.arrays.push_back(vector_array(prefix + "/bn_running_var", bn->running_var));
}

void read_layer(const Container& c, const std::string& prefix, DenseLayer& layer, BatchNormState* bn) {
  layer.weight = to_matrix(c.array(prefix + "/weight"));
  layer.bias = to_vector(c.array(prefix + "/bias"));
  if (bn == nullptr) return;
  bn->gamma = to_vector(c.array(prefix + "/bn_gamma"));
  bn->beta = to_vector(c.array(prefix + "/bn_beta"));
  bn->running_mean = to_vector(c.array(prefix + "/bn_running_mean"));
  bn->running_var = to_vector(c.array(prefix + "/bn_running_var"));
}

}  // namespace

const ContainerArray& Container::array(const std::string& name) const {
  for (const auto& a : arrays) {
    if (a.name == name) return a;
  }
  throw FormatError("container has no array named '" + name + "'", 0);
}

std::string encode_container(const Container& container) {
  nlohmann::json header;
  header["format"] = kFormat;
  header["version"] = kVersion;
  header["meta"] = container.meta.is_null() ? nlohmann::json::object() : container.meta;
  nlohmann::json table = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& a : container.arrays) {
    const long count = element_count(a.shape);
    if (count != static_cast<long>(a.values.size())) {
      throw std::invalid_argument("array '" + a.name + "' shape does not match its value count");
    }
    table.push_back({{"name", a.name}, {"shape", a.shape}, {"offset", offset}, {"count", count}});
    offset += static_cast<std::uint64_t>(count) * 4;
  }
  header["arrays"] = std::move(table);
  const std::string text = header.dump();

  std::string out;
  out.reserve(8 + text.size() + offset);
  put_u64(out, text.size());
  out += text;
  for (const auto& a : container.arrays) {
    for (float f : a.values) put_f32(out, f);
  }
  return out;
}

Container decode_container(const std::string& bytes) {
  if (bytes.size() < 8) throw FormatError("container shorter than its length prefix", 0);
  const std::uint64_t header_len = get_u64(bytes, 0);
  if (header_len > bytes.size() - 8) throw FormatError("container header runs past end of file", 0);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(8, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("container header is not valid JSON: ") + e.what(), 8);
  }
  if (!header.is_object() || header.value("format", "") != kFormat) {
    throw FormatError("not a scatnet container", 8);
  }
  if (header.value("version", 0) != kVersion) {
    throw FormatError("unsupported container version " + header["version"].dump(), 8);
  }
  const std::size_t payload = 8 + header_len;
  Container c;
  c.meta = header["meta"];
  try {
    for (const auto& entry : header.at("arrays")) {
      ContainerArray a;
      a.name = entry.at("name").get<std::string>();
      a.shape = entry.at("shape").get<std::vector<long>>();
      const auto offset = entry.at("offset").get<std::uint64_t>();
      const long count = entry.at("count").get<long>();
      if (count != element_count(a.shape) || count < 0) {
        throw FormatError("array '" + a.name + "' has inconsistent shape and count", payload + offset);
      }
      const std::uint64_t end = payload + offset + static_cast<std::uint64_t>(count) * 4;
      if (end > bytes.size()) {
        throw FormatError("array '" + a.name + "' runs past end of file", payload + offset);
      }
      a.values.resize(count);
      for (long i = 0; i < count; ++i) a.values[i] = get_f32(bytes, payload + offset + 4 * i);
      c.arrays.push_back(std::move(a));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed array table: ") + e.what(), 8);
  }
  return c;
}

void write_container(const std::filesystem::path& path, const Container& container) {
  const std::string bytes = encode_container(container);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

Container read_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return decode_container(buffer.str());
}

void to_json(nlohmann::json& j, const FilterBankConfig& c) {
  j = {{"J", c.J},
       {"L", c.L},
       {"N", c.N},
       {"morlet_sigma", c.morlet_sigma},
       {"morlet_xi", c.morlet_xi},
       {"morlet_slant", c.morlet_slant},
       {"lowpass_sigma", c.lowpass_sigma}};
}

void from_json(const nlohmann::json& j, FilterBankConfig& c) {
  FilterBankConfig d = FilterBankConfig::standard(j.value("J", c.J), j.value("L", c.L), j.value("N", c.N));
  d.morlet_sigma = j.value("morlet_sigma", d.morlet_sigma);
  d.morlet_xi = j.value("morlet_xi", d.morlet_xi);
  d.morlet_slant = j.value("morlet_slant", d.morlet_slant);
  d.lowpass_sigma = j.value("lowpass_sigma", d.lowpass_sigma);
  c = d;
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"epochs", c.epochs},
       {"batch_size", c.batch_size},
       {"lr_initial", c.lr_initial},
       {"lr_drop_factor", c.lr_drop_factor},
       {"lr_drop_epochs", c.lr_drop_epochs},
       {"momentum", c.momentum},
       {"weight_decay", c.weight_decay},
       {"seed", c.seed},
       {"crop_padding", c.crop_padding},
       {"horizontal_flip", c.horizontal_flip}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.lr_initial = j.value("lr_initial", c.lr_initial);
  c.lr_drop_factor = j.value("lr_drop_factor", c.lr_drop_factor);
  c.lr_drop_epochs = j.value("lr_drop_epochs", c.lr_drop_epochs);
  c.momentum = j.value("momentum", c.momentum);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.seed = j.value("seed", c.seed);
  c.crop_padding = j.value("crop_padding", c.crop_padding);
  c.horizontal_flip = j.value("horizontal_flip", c.horizontal_flip);
}

void to_json(nlohmann::json& j, const ModelSpec& s) {
  j = {{"in_channels", s.in_channels},
       {"positions", s.positions},
       {"local_widths", s.local_widths},
       {"fc_widths", s.fc_widths},
       {"class_count", s.class_count}};
}

void from_json(const nlohmann::json& j, ModelSpec& s) {
  s.in_channels = j.value("in_channels", s.in_channels);
  s.positions = j.value("positions", s.positions);
  s.local_widths = j.value("local_widths", s.local_widths);
  s.fc_widths = j.value("fc_widths", s.fc_widths);
  s.class_count = j.value("class_count", s.class_count);
}

void to_json(nlohmann::json& j, const ScatteringPath& p) {
  j = nlohmann::json::array({p.order, p.j1, p.theta1, p.j2, p.theta2});
}

void from_json(const nlohmann::json& j, ScatteringPath& p) {
  p = {j.at(0).get<int>(), j.at(1).get<int>(), j.at(2).get<int>(), j.at(3).get<int>(), j.at(4).get<int>()};
}

Container filterbank_container(const FilterBank& bank) {
  const auto& cfg = bank.config();
  Container c;
  c.meta = {{"kind", "filterbank"}, {"config", cfg}, {"wavelet_gain", bank.wavelet_gain()}};
  for (int j = 0; j < cfg.J; ++j) {
    for (int t = 0; t < cfg.L; ++t) {
      for (int r = 0; r <= j; ++r) c.arrays.push_back(matrix_array(psi_name(j, t, r), bank.psi(j, t, r).values));
    }
  }
  for (int r = 0; r <= cfg.J; ++r) c.arrays.push_back(matrix_array("phi/" + std::to_string(r), bank.phi(r).values));
  return c;
}

FilterBank filterbank_from_container(const Container& container) {
  if (container.meta.value("kind", "") != "filterbank") throw FormatError("container is not a filter bank", 8);
  const auto cfg = container.meta.at("config").get<FilterBankConfig>();
  std::vector<FourierFilter> wavelets;
  for (int j = 0; j < cfg.J; ++j) {
    for (int t = 0; t < cfg.L; ++t) {
      wavelets.push_back({0, to_matrix(container.array(psi_name(j, t, 0))).array()});
    }
  }
  FourierFilter lowpass{0, to_matrix(container.array("phi/0")).array()};
  return FilterBank(cfg, std::move(wavelets), std::move(lowpass));
}

Container scattering_container(const std::vector<ScatteringOutput>& outputs, const FilterBankConfig& config,
                               const nlohmann::json& extra_meta) {
  Container c;
  c.meta = extra_meta.is_object() ? extra_meta : nlohmann::json::object();
  c.meta["kind"] = "scattering";
  c.meta["config"] = config;
  c.meta["records"] = outputs.size();
  if (!outputs.empty()) {
    c.meta["paths"] = outputs.front().paths;
    c.meta["colors"] = outputs.front().colors;
  }
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    const auto& o = outputs[i];
    ContainerArray a{"record/" + std::to_string(i), {o.channels(), o.height, o.width}, {}};
    a.values.reserve(o.data.size());
    for (long ch = 0; ch < o.data.rows(); ++ch)
      for (long p = 0; p < o.data.cols(); ++p) a.values.push_back(static_cast<float>(o.data(ch, p)));
    c.arrays.push_back(std::move(a));
  }
  return c;
}

Container model_container(const SleModel& model, const nlohmann::json& extra_meta) {
  Container c;
  c.meta = extra_meta.is_object() ? extra_meta : nlohmann::json::object();
  c.meta["kind"] = "model";
  c.meta["spec"] = model.spec;
  c.meta["standardizer_epsilon"] = model.standardizer.epsilon;
  if (!model.local_bn.empty() || !model.fc_bn.empty()) {
    const auto& bn = model.local_bn.empty() ? model.fc_bn.front() : model.local_bn.front();
    c.meta["bn_epsilon"] = bn.epsilon;
    c.meta["bn_momentum"] = bn.momentum;
  }
  c.arrays.push_back(vector_array("standardizer/mean", model.standardizer.mean));
  c.arrays.push_back(vector_array("standardizer/var", model.standardizer.var));
  for (std::size_t i = 0; i < model.local.size(); ++i) {
    add_layer(c, "local/" + std::to_string(i), model.local[i], &model.local_bn[i]);
  }
  for (std::size_t i = 0; i < model.fc.size(); ++i) {
    add_layer(c, "fc/" + std::to_string(i), model.fc[i], &model.fc_bn[i]);
  }
  add_layer(c, "head", model.head, nullptr);
  return c;
}

SleModel model_from_container(const Container& container) {
  if (container.meta.value("kind", "") != "model") throw FormatError("container is not a model checkpoint", 8);
  const auto spec = container.meta.at("spec").get<ModelSpec>();
  SleModel model = init_model(spec, 0);
  model.standardizer.epsilon = container.meta.value("standardizer_epsilon", model.standardizer.epsilon);
  model.standardizer.mean = to_vector(container.array("standardizer/mean"));
  model.standardizer.var = to_vector(container.array("standardizer/var"));
  const double bn_eps = container.meta.value("bn_epsilon", 1e-5);
  const double bn_mom = container.meta.value("bn_momentum", 0.9);
  for (std::size_t i = 0; i < model.local.size(); ++i) {
    read_layer(container, "local/" + std::to_string(i), model.local[i], &model.local_bn[i]);
    model.local_bn[i].epsilon = bn_eps;
    model.local_bn[i].momentum = bn_mom;
  }
  for (std::size_t i = 0; i < model.fc.size(); ++i) {
    read_layer(container, "fc/" + std::to_string(i), model.fc[i], &model.fc_bn[i]);
    model.fc_bn[i].epsilon = bn_eps;
    model.fc_bn[i].momentum = bn_mom;
  }
  read_layer(container, "head", model.head, nullptr);
  const SleModel reference = init_model(spec, 0);
  auto same_shape = [](const DenseLayer& a, const DenseLayer& b) {
    return a.weight.rows() == b.weight.rows() && a.weight.cols() == b.weight.cols() && a.bias.size() == b.bias.size();
  };
  bool ok = same_shape(model.head, reference.head);
  for (std::size_t i = 0; i < model.local.size(); ++i) ok = ok && same_shape(model.local[i], reference.local[i]);
  for (std::size_t i = 0; i < model.fc.size(); ++i) ok = ok && same_shape(model.fc[i], reference.fc[i]);
  if (!ok) throw FormatError("checkpoint arrays do not match the recorded model spec", 8);
  return model;
}

}  // namespace scatnet
