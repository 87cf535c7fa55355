#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "scatnet/encoder.hpp"
#include "scatnet/filterbank.hpp"
#include "scatnet/scattering.hpp"

namespace scatnet {

// Container layout:
//   u64 little-endian  header length in bytes
//   header             UTF-8 JSON: {"format", "version", "meta", "arrays": [
//                        {"name", "shape", "offset", "count"}, ...]}
//   payload            little-endian float32 arrays in table order; offsets
//                      are relative to the start of the payload.

struct ContainerArray {
  std::string name;
  std::vector<long> shape;
  std::vector<float> values;
};

struct Container {
  nlohmann::json meta;
  std::vector<ContainerArray> arrays;

  const ContainerArray& array(const std::string& name) const;
};

void write_container(const std::filesystem::path& path, const Container& container);
Container read_container(const std::filesystem::path& path);

/// Serialized bytes of a container (exactly what write_container emits).
std::string encode_container(const Container& container);
Container decode_container(const std::string& bytes);

// JSON mirrors of configuration types; field names match the structs.
void to_json(nlohmann::json& j, const FilterBankConfig& c);
void from_json(const nlohmann::json& j, FilterBankConfig& c);
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
void to_json(nlohmann::json& j, const ModelSpec& s);
void from_json(const nlohmann::json& j, ModelSpec& s);
void to_json(nlohmann::json& j, const ScatteringPath& p);
void from_json(const nlohmann::json& j, ScatteringPath& p);

Container filterbank_container(const FilterBank& bank);
FilterBank filterbank_from_container(const Container& container);

/// One record per image, in input order. `extra_meta` is merged into meta.
Container scattering_container(const std::vector<ScatteringOutput>& outputs,
                               const FilterBankConfig& config, const nlohmann::json& extra_meta = {});

/// Model checkpoint. `extra_meta` typically carries the experiment config.
Container model_container(const SleModel& model, const nlohmann::json& extra_meta = {});
SleModel model_from_container(const Container& container);

}  // namespace scatnet
