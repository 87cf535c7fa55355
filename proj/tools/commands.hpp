#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "scatnet/data.hpp"
#include "scatnet/encoder.hpp"
#include "scatnet/filterbank.hpp"

namespace scatnet::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfigError = 2,
  kFormatError = 3,
  kIoError = 4,
};

/// Everything that determines an experiment. Serialized flat: filter bank
/// fields, model widths, the TrainConfig fields under their own names, and
/// dataset selection.
struct ExperimentConfig {
  FilterBankConfig scattering;
  std::string model = "scattering";  ///< "scattering" (SLE on S x) or "mlp" (raw pixels)
  std::vector<int> local_widths{128, 128, 128};
  std::vector<int> fc_widths{256, 256};
  TrainConfig train;
  std::string dataset = "synthetic";  ///< "synthetic" or "cifar10"
  std::string data_dir = "data/cifar-10-batches-bin";
  int train_per_class = 100;  ///< 0 keeps the whole CIFAR-10 training set
  int test_per_class = 100;   ///< 0 keeps the whole CIFAR-10 test set
  int image_side = 32;        ///< synthetic image side

  void validate() const;
  bool operator==(const ExperimentConfig&) const = default;
};

nlohmann::json to_json(const ExperimentConfig& config);

/// Unknown keys and ill-typed values are rejected with std::invalid_argument.
ExperimentConfig experiment_from_json(const nlohmann::json& j, ExperimentConfig base = {});

struct Datasets {
  LabeledImageSet train;
  LabeledImageSet test;
};

Datasets load_datasets(const ExperimentConfig& config);

/// Featurizer matching config.model.
Featurizer make_featurizer(const ExperimentConfig& config);

/// Model widths for config.model. The raw-pixel network gets two hidden
/// layers of equal width whose parameter count matches the scattering SLE.
ModelSpec model_spec(const ExperimentConfig& config, int colors, int image_side, int class_count);

/// Full command line (without the program name). Returns the exit code;
/// errors are reported on `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace scatnet::cli
