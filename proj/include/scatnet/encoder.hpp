#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "scatnet/data.hpp"

namespace scatnet {

struct DenseLayer {
  Eigen::MatrixXd weight;  ///< out × in
  Eigen::VectorXd bias;
};

struct BatchNormState {
  Eigen::VectorXd gamma;
  Eigen::VectorXd beta;
  Eigen::VectorXd running_mean;
  Eigen::VectorXd running_var;
  double epsilon = 1e-5;
  double momentum = 0.9;  ///< running ← momentum·running + (1 − momentum)·batch
};

/// Per-channel standardization of the encoder input.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd var;
  double epsilon = 1e-5;

  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
};

/// Architecture of a Shared Local Encoder: `local_widths` dense layers
/// applied identically at each of `positions` spatial positions, then
/// `fc_widths` fully connected layers on the flattened map, then a linear
/// classifier. Every hidden layer is dense → batch norm → ReLU.
struct ModelSpec {
  int in_channels = 0;
  int positions = 1;
  std::vector<int> local_widths;
  std::vector<int> fc_widths;
  int class_count = 10;

  bool operator==(const ModelSpec&) const = default;
};

struct SleModel {
  ModelSpec spec;
  Standardizer standardizer;
  std::vector<DenseLayer> local;
  std::vector<BatchNormState> local_bn;
  std::vector<DenseLayer> fc;
  std::vector<BatchNormState> fc_bn;
  DenseLayer head;

  long parameter_count() const;
};

/// Uniform fan-in initialization U(±1/√fan_in), zero biases, γ = 1, β = 0,
/// identity standardizer.
SleModel init_model(const ModelSpec& spec, std::uint64_t seed);

/// Trainable parameters in a fixed order (dense weights and biases, then
/// batch-norm γ and β, layer by layer). Running statistics are excluded.
std::vector<std::span<double>> parameter_views(SleModel& model);

struct Gradients {
  std::vector<Eigen::VectorXd> values;  ///< aligned with parameter_views
};

enum class Mode { Train, Eval };

/// Activations kept by a train-mode forward pass.
struct ForwardCache {
  struct Stage {
    Eigen::MatrixXd input;    ///< layer input (post standardization / ReLU)
    Eigen::MatrixXd normed;   ///< batch-normalized pre-activation
    Eigen::VectorXd mean;     ///< batch statistics
    Eigen::VectorXd var;
    Eigen::MatrixXd output;   ///< post-ReLU
  };
  int batch_size = 0;
  std::vector<Stage> local;
  std::vector<Stage> fc;
  Eigen::MatrixXd head_input;
  Eigen::MatrixXd logits;
};

/// Stacks per-sample feature maps (channels × positions) into one
/// channels × (batch·positions) matrix; sample b owns columns [bP, (b+1)P).
Eigen::MatrixXd assemble_batch(const std::vector<Eigen::MatrixXd>& samples);

/// Class logits (class_count × batch). Train mode uses batch statistics and
/// fills `cache` when given; eval mode uses running statistics.
Eigen::MatrixXd forward(const SleModel& model, const Eigen::MatrixXd& batch, int batch_size,
                        Mode mode, ForwardCache* cache = nullptr);

/// Mean softmax cross-entropy, accumulated in double.
double cross_entropy(const Eigen::MatrixXd& logits, std::span<const int> labels);

struct LossAndGradients {
  double loss = 0.0;
  Gradients gradients;
};

/// Train-mode forward plus backpropagation for every trainable parameter.
LossAndGradients loss_and_backward(const SleModel& model, const Eigen::MatrixXd& batch,
                                   std::span<const int> labels, ForwardCache* cache = nullptr);

/// Blends batch statistics from a train-mode cache into the running
/// statistics.
void update_running_stats(SleModel& model, const ForwardCache& cache);

struct TrainConfig {
  int epochs = 60;
  int batch_size = 128;
  double lr_initial = 0.1;
  double lr_drop_factor = 0.1;
  std::vector<int> lr_drop_epochs{30, 45};
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::uint64_t seed = 0;
  int crop_padding = 4;  ///< 0 disables random cropping
  bool horizontal_flip = true;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

/// lr_initial × drop_factor^(number of drop epochs ≤ epoch).
double learning_rate(const TrainConfig& config, int epoch);

struct SgdState {
  std::vector<Eigen::VectorXd> velocity;
};

/// v ← momentum·v + (g + weight_decay·w);  w ← w − lr(epoch)·v.
void sgd_step(SleModel& model, const Gradients& gradients, SgdState& state,
              const TrainConfig& config, int epoch);

/// Maps an image to an encoder input (channels × positions).
using Featurizer = std::function<Eigen::MatrixXd(const Image&)>;

/// Precomputed features, stored in single precision.
struct FeatureSet {
  std::vector<Eigen::MatrixXf> features;
  std::vector<int> labels;
  int class_count = 0;

  std::size_t size() const { return features.size(); }
};

/// `jobs` worker threads; the result does not depend on it.
FeatureSet featurize_all(const LabeledImageSet& set, const Featurizer& featurize, int jobs = 1);

/// Per-channel mean and variance over all samples and positions.
Standardizer standardize_fit(const std::vector<Eigen::MatrixXd>& samples, double epsilon = 1e-5);
Standardizer standardize_fit(const FeatureSet& set, double epsilon = 1e-5);

struct EpochMetrics {
  int epoch = 0;
  double learning_rate = 0.0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double validation_accuracy = -1.0;  ///< −1 when not evaluated
};

struct TrainOptions {
  const FeatureSet* validation = nullptr;
  int validate_every = 0;  ///< epochs between validation passes; 0 = final epoch only
  std::function<void(const EpochMetrics&)> on_epoch;
  int jobs = 1;  ///< featurization threads; results do not depend on it
};

struct TrainResult {
  SleModel model;
  std::vector<EpochMetrics> metrics;
};

/// SGD with momentum, weight decay and a stepped schedule. Images are
/// augmented (random crop and flip) before featurization every epoch.
/// Deterministic given config.seed.
TrainResult train(const LabeledImageSet& dataset, const Featurizer& featurize, ModelSpec spec,
                  const TrainConfig& config, const TrainOptions& options = {});

struct Accuracy {
  double top1 = 0.0;
  double top5 = -1.0;  ///< −1 when class_count < 5
};

/// Eval-mode accuracy; ties in the arg-max go to the lowest class index.
Accuracy evaluate(const SleModel& model, const FeatureSet& set, int batch_size = 256);

/// Eval-mode logits for a whole feature set (class_count × samples).
Eigen::MatrixXd predict_logits(const SleModel& model, const FeatureSet& set, int batch_size = 256);

/// Width h of a raw-pixel MLP (inputs → h → h → classes, batch-normed) whose
/// parameter count is closest to `target_parameters`.
int matched_mlp_width(int inputs, int classes, int hidden_layers, long target_parameters);

}  // namespace scatnet
