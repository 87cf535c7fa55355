#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "scatnet/container.hpp"
#include "scatnet/data.hpp"

using namespace scatnet;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "scatnet_container_tests";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(Container, ByteLayout) {
  Container c;
  c.meta = {{"kind", "test"}};
  c.arrays.push_back({"a", {2}, {1.0f, -2.5f}});
  const std::string bytes = encode_container(c);
  std::uint64_t len = 0;
  for (int i = 0; i < 8; ++i) len |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i])) << (8 * i);
  const auto header = nlohmann::json::parse(bytes.substr(8, len));
  EXPECT_EQ(header["meta"]["kind"], "test");
  EXPECT_EQ(header["arrays"][0]["offset"], 0);
  EXPECT_EQ(header["arrays"][0]["shape"], nlohmann::json::array({2}));
  ASSERT_EQ(bytes.size(), 8 + len + 8);
  // 1.0f = 0x3F800000 little-endian.
  EXPECT_EQ(static_cast<unsigned char>(bytes[8 + len + 3]), 0x3F);
  EXPECT_EQ(static_cast<unsigned char>(bytes[8 + len + 2]), 0x80);
  const Container back = decode_container(bytes);
  EXPECT_EQ(back.array("a").values, c.arrays[0].values);
  EXPECT_THROW(back.array("missing"), FormatError);
}

TEST(Container, RejectsCorruptInput) {
  Container c;
  c.arrays.push_back({"a", {3}, {1, 2, 3}});
  std::string bytes = encode_container(c);
  EXPECT_THROW(decode_container(bytes.substr(0, bytes.size() - 1)), FormatError);
  EXPECT_THROW(decode_container(bytes.substr(0, 5)), FormatError);
  std::string garbage = bytes;
  garbage[9] = '#';
  EXPECT_THROW(decode_container(garbage), FormatError);
  EXPECT_THROW(read_container(temp_path("nope.bin")), IoError);
  EXPECT_THROW(write_container("/nonexistent_dir/x.bin", c), IoError);
  Container bad;
  bad.arrays.push_back({"a", {4}, {1}});
  EXPECT_THROW(encode_container(bad), std::invalid_argument);
}

TEST(Container, FilterBankRoundTrip) {
  const FilterBank bank(FilterBankConfig{});
  const Container c = filterbank_container(bank);
  // 16 wavelets (8 at one resolution, 8 at two) plus φ at three resolutions.
  EXPECT_EQ(c.arrays.size(), 8u * 1 + 8u * 2 + 3);
  const fs::path p = temp_path("bank.bin");
  write_container(p, c);
  const Container back = read_container(p);
  EXPECT_EQ(back.meta.at("config").get<FilterBankConfig>(), bank.config());
  const FilterBank rebuilt = filterbank_from_container(back);
  EXPECT_EQ(rebuilt.config(), bank.config());
  for (int t = 0; t < 8; ++t) {
    EXPECT_LT((rebuilt.psi(1, t, 1).values - bank.psi(1, t, 1).values).abs().maxCoeff(), 1e-6);
  }
  EXPECT_LT((rebuilt.phi(2).values - bank.phi(2).values).abs().maxCoeff(), 1e-6);
  std::ifstream a(p, std::ios::binary);
  const std::string on_disk((std::istreambuf_iterator<char>(a)), {});
  EXPECT_EQ(on_disk, encode_container(filterbank_container(FilterBank(FilterBankConfig{}))));
}

TEST(Container, ConfigJsonRoundTrip) {
  FilterBankConfig f = FilterBankConfig::standard(3, 4, 64);
  f.morlet_sigma = 0.77;
  EXPECT_EQ(nlohmann::json(f).get<FilterBankConfig>(), f);
  TrainConfig t;
  t.seed = 12345678901234ULL;
  t.lr_drop_epochs = {3, 7};
  t.horizontal_flip = false;
  EXPECT_EQ(nlohmann::json(t).get<TrainConfig>(), t);
  ModelSpec s;
  s.in_channels = 243;
  s.positions = 64;
  s.local_widths = {3, 2};
  s.fc_widths = {7};
  EXPECT_EQ(nlohmann::json(s).get<ModelSpec>(), s);
  const ScatteringPath p{2, 0, 3, 1, 7};
  EXPECT_EQ(nlohmann::json(p).get<ScatteringPath>(), p);
}

TEST(Container, ScatteringRecordsInOrder) {
  const FilterBank bank(FilterBankConfig{});
  std::vector<ScatteringOutput> outs;
  for (const auto& plane : natural_test_planes(3, 32, 1)) outs.push_back(scattering2d(Image{{plane}}, bank));
  const Container c = decode_container(encode_container(scattering_container(outs, bank.config(), {{"note", 1}})));
  EXPECT_EQ(c.meta["records"], 3);
  EXPECT_EQ(c.meta["note"], 1);
  EXPECT_EQ(c.meta["paths"].size(), 81u);
  EXPECT_EQ(c.meta["paths"][10].get<ScatteringPath>(), outs[0].paths[10]);
  for (int i = 0; i < 3; ++i) {
    const auto& a = c.array("record/" + std::to_string(i));
    EXPECT_EQ(a.shape, (std::vector<long>{81, 8, 8}));
    EXPECT_FLOAT_EQ(a.values[5 * 64 + 9], static_cast<float>(outs[i].data(5, 9)));
  }
}

TEST(Container, ModelCheckpointRoundTrip) {
  ModelSpec spec;
  spec.in_channels = 6;
  spec.positions = 3;
  spec.local_widths = {4};
  spec.fc_widths = {5};
  spec.class_count = 3;
  SleModel m = init_model(spec, 3);
  m.standardizer.mean = Eigen::VectorXd::Constant(6, 0.25);
  m.standardizer.var = Eigen::VectorXd::Constant(6, 2.0);
  m.local_bn[0].running_var(1) = 3.0;
  const Container c = decode_container(encode_container(model_container(m, {{"config", {{"J", 2}}}})));
  EXPECT_EQ(c.meta["config"]["J"], 2);
  const SleModel back = model_from_container(c);
  EXPECT_EQ(back.spec, spec);
  EXPECT_DOUBLE_EQ(back.local_bn[0].running_var(1), 3.0);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  Eigen::MatrixXd x(6, 6);
  for (long i = 0; i < x.size(); ++i) x(i) = g(rng);
  EXPECT_LT((forward(back, x, 2, Mode::Eval) - forward(m, x, 2, Mode::Eval)).cwiseAbs().maxCoeff(), 1e-5);
  EXPECT_THROW(model_from_container(filterbank_container(FilterBank(FilterBankConfig{}))), FormatError);
}
