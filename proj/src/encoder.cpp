#include "scatnet/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "scatnet/parallel.hpp"

namespace scatnet {

namespace {

DenseLayer init_dense(int out, int in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  DenseLayer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd::Zero(out)};
  for (long i = 0; i < layer.weight.size(); ++i) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    layer.weight(i) = (2.0 * u - 1.0) * bound;
  }
  return layer;
}

BatchNormState init_bn(int width) {
  BatchNormState bn;
  bn.gamma = Eigen::VectorXd::Ones(width);
  bn.beta = Eigen::VectorXd::Zero(width);
  bn.running_mean = Eigen::VectorXd::Zero(width);
  bn.running_var = Eigen::VectorXd::Ones(width);
  return bn;
}

std::span<double> view(Eigen::MatrixXd& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }
std::span<double> view(Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

// Dense → batch norm → ReLU over the columns of `input`.
Eigen::MatrixXd hidden_stage(const DenseLayer& layer, const BatchNormState& bn,
                             const Eigen::MatrixXd& input, Mode mode, ForwardCache::Stage* stage) {
  Eigen::MatrixXd z = layer.weight * input;
  z.colwise() += layer.bias;
  Eigen::VectorXd mean, var;
  if (mode == Mode::Train) {
    mean = z.rowwise().mean();
    var = (z.colwise() - mean).array().square().rowwise().mean();
  } else {
    mean = bn.running_mean;
    var = bn.running_var;
  }
  const Eigen::ArrayXd inv_std = (var.array() + bn.epsilon).rsqrt();
  Eigen::MatrixXd normed = ((z.colwise() - mean).array().colwise() * inv_std).matrix();
  Eigen::MatrixXd out =
      ((normed.array().colwise() * bn.gamma.array()).colwise() + bn.beta.array()).cwiseMax(0.0).matrix();
  if (stage) {
    stage->input = input;
    stage->normed = std::move(normed);
    stage->mean = std::move(mean);
    stage->var = std::move(var);
    stage->output = out;
  }
  return out;
}

// Backpropagates d(output) through ReLU, batch norm (batch statistics) and
// the dense layer. Writes weight, bias, γ, β gradients into `grads` starting
// at `slot` and returns d(input).
Eigen::MatrixXd hidden_backward(const DenseLayer& layer, const BatchNormState& bn,
                                const ForwardCache::Stage& stage, Eigen::MatrixXd d_out,
                                std::vector<Eigen::VectorXd>& grads, std::size_t slot) {
  const double m = static_cast<double>(stage.normed.cols());
  d_out.array() *= (stage.output.array() > 0.0).cast<double>();
  const Eigen::VectorXd d_gamma = (d_out.array() * stage.normed.array()).rowwise().sum();
  const Eigen::VectorXd d_beta = d_out.rowwise().sum();
  const Eigen::ArrayXd inv_std = (stage.var.array() + bn.epsilon).rsqrt();
  Eigen::ArrayXXd d_normed = d_out.array().colwise() * bn.gamma.array();
  const Eigen::ArrayXd sum_d = d_normed.rowwise().sum();
  const Eigen::ArrayXd sum_dx = (d_normed * stage.normed.array()).rowwise().sum();
  Eigen::MatrixXd d_z =
      ((((d_normed * m).colwise() - sum_d) - stage.normed.array().colwise() * sum_dx).colwise() *
       (inv_std / m))
          .matrix();
  Eigen::MatrixXd d_weight = d_z * stage.input.transpose();
  grads[slot] = Eigen::Map<Eigen::VectorXd>(d_weight.data(), d_weight.size());
  grads[slot + 1] = d_z.rowwise().sum();
  grads[slot + 2] = d_gamma;
  grads[slot + 3] = d_beta;
  return layer.weight.transpose() * d_z;
}

void check_batch(const SleModel& model, const Eigen::MatrixXd& batch, int batch_size) {
  const auto& spec = model.spec;
  if (batch_size < 1 || batch.rows() != spec.in_channels ||
      batch.cols() != static_cast<long>(batch_size) * spec.positions) {
    throw std::invalid_argument("forward: batch is " + std::to_string(batch.rows()) + "x" +
                                std::to_string(batch.cols()) + ", model expects " +
                                std::to_string(spec.in_channels) + "x(" +
                                std::to_string(batch_size) + "*" + std::to_string(spec.positions) + ")");
  }
}

}  // namespace

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& x) const {
  if (mean.size() == 0) return x;
  if (mean.size() != x.rows()) throw std::invalid_argument("standardizer width mismatch");
  const Eigen::ArrayXd inv_std = (var.array() + epsilon).rsqrt();
  return ((x.colwise() - mean).array().colwise() * inv_std).matrix();
}

long SleModel::parameter_count() const {
  long count = head.weight.size() + head.bias.size();
  auto add = [&](const std::vector<DenseLayer>& layers, const std::vector<BatchNormState>& bns) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      count += layers[i].weight.size() + layers[i].bias.size() + bns[i].gamma.size() + bns[i].beta.size();
    }
  };
  add(local, local_bn);
  add(fc, fc_bn);
  return count;
}

SleModel init_model(const ModelSpec& spec, std::uint64_t seed) {
  if (spec.in_channels < 1 || spec.positions < 1 || spec.class_count < 1) {
    throw std::invalid_argument("init_model: channels, positions and classes must be positive");
  }
  Rng rng(seed);
  SleModel model;
  model.spec = spec;
  int width = spec.in_channels;
  for (int w : spec.local_widths) {
    model.local.push_back(init_dense(w, width, rng));
    model.local_bn.push_back(init_bn(w));
    width = w;
  }
  width *= spec.positions;
  for (int w : spec.fc_widths) {
    model.fc.push_back(init_dense(w, width, rng));
    model.fc_bn.push_back(init_bn(w));
    width = w;
  }
  model.head = init_dense(spec.class_count, width, rng);
  return model;
}

std::vector<std::span<double>> parameter_views(SleModel& model) {
  std::vector<std::span<double>> views;
  auto add = [&](std::vector<DenseLayer>& layers, std::vector<BatchNormState>& bns) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      views.push_back(view(layers[i].weight));
      views.push_back(view(layers[i].bias));
      views.push_back(view(bns[i].gamma));
      views.push_back(view(bns[i].beta));
    }
  };
  add(model.local, model.local_bn);
  add(model.fc, model.fc_bn);
  views.push_back(view(model.head.weight));
  views.push_back(view(model.head.bias));
  return views;
}

Eigen::MatrixXd assemble_batch(const std::vector<Eigen::MatrixXd>& samples) {
  if (samples.empty()) throw std::invalid_argument("assemble_batch: empty batch");
  const long rows = samples[0].rows();
  const long cols = samples[0].cols();
  Eigen::MatrixXd out(rows, cols * static_cast<long>(samples.size()));
  for (std::size_t b = 0; b < samples.size(); ++b) {
    if (samples[b].rows() != rows || samples[b].cols() != cols) {
      throw std::invalid_argument("assemble_batch: samples differ in shape");
    }
    out.middleCols(static_cast<long>(b) * cols, cols) = samples[b];
  }
  return out;
}

Eigen::MatrixXd forward(const SleModel& model, const Eigen::MatrixXd& batch, int batch_size,
                        Mode mode, ForwardCache* cache) {
  check_batch(model, batch, batch_size);
  if (cache) {
    cache->batch_size = batch_size;
    cache->local.assign(model.local.size(), {});
    cache->fc.assign(model.fc.size(), {});
  }
  Eigen::MatrixXd x = model.standardizer.apply(batch);
  for (std::size_t l = 0; l < model.local.size(); ++l) {
    x = hidden_stage(model.local[l], model.local_bn[l], x, mode, cache ? &cache->local[l] : nullptr);
  }
  // channels × (B·P), column-major, reshapes to (P·channels) × B with
  // flattened index p·channels + k.
  Eigen::MatrixXd h = Eigen::Map<Eigen::MatrixXd>(x.data(), x.rows() * model.spec.positions, batch_size);
  for (std::size_t l = 0; l < model.fc.size(); ++l) {
    h = hidden_stage(model.fc[l], model.fc_bn[l], h, mode, cache ? &cache->fc[l] : nullptr);
  }
  Eigen::MatrixXd logits = model.head.weight * h;
  logits.colwise() += model.head.bias;
  if (cache) {
    cache->head_input = std::move(h);
    cache->logits = logits;
  }
  return logits;
}

double cross_entropy(const Eigen::MatrixXd& logits, std::span<const int> labels) {
  if (static_cast<long>(labels.size()) != logits.cols()) {
    throw std::invalid_argument("cross_entropy: label count does not match batch");
  }
  double total = 0.0;
  for (long b = 0; b < logits.cols(); ++b) {
    const int y = labels[b];
    if (y < 0 || y >= logits.rows()) {
      throw std::invalid_argument("label " + std::to_string(y) + " outside [0, " +
                                  std::to_string(logits.rows()) + ")");
    }
    Eigen::Index arg = 0;
    const double mx = logits.col(b).maxCoeff(&arg);
    double rest = 0.0;
    for (long k = 0; k < logits.rows(); ++k) {
      if (k != arg) rest += std::exp(logits(k, b) - mx);
    }
    total += mx + std::log1p(rest) - logits(y, b);
  }
  return total / static_cast<double>(logits.cols());
}

LossAndGradients loss_and_backward(const SleModel& model, const Eigen::MatrixXd& batch,
                                   std::span<const int> labels, ForwardCache* cache) {
  ForwardCache local_cache;
  ForwardCache& fc_cache = cache ? *cache : local_cache;
  const int batch_size = static_cast<int>(labels.size());
  const Eigen::MatrixXd logits = forward(model, batch, batch_size, Mode::Train, &fc_cache);

  LossAndGradients result;
  result.loss = cross_entropy(logits, labels);

  // d loss / d logits = (softmax − onehot) / B.
  Eigen::MatrixXd d = logits;
  for (long b = 0; b < d.cols(); ++b) {
    const double mx = d.col(b).maxCoeff();
    d.col(b) = (d.col(b).array() - mx).exp().matrix();
    d.col(b) /= d.col(b).sum();
    d(labels[b], b) -= 1.0;
  }
  d /= static_cast<double>(batch_size);

  const std::size_t n_hidden = model.local.size() + model.fc.size();
  auto& grads = result.gradients.values;
  grads.resize(4 * n_hidden + 2);
  Eigen::MatrixXd d_head = d * fc_cache.head_input.transpose();
  grads[4 * n_hidden] = Eigen::Map<Eigen::VectorXd>(d_head.data(), d_head.size());
  grads[4 * n_hidden + 1] = d.rowwise().sum();
  Eigen::MatrixXd d_h = model.head.weight.transpose() * d;

  for (std::size_t l = model.fc.size(); l-- > 0;) {
    d_h = hidden_backward(model.fc[l], model.fc_bn[l], fc_cache.fc[l], std::move(d_h), grads,
                          4 * (model.local.size() + l));
  }
  if (!model.local.empty()) {
    const long width = model.local.back().weight.rows();
    Eigen::MatrixXd d_x = Eigen::Map<Eigen::MatrixXd>(d_h.data(), width,
                                                      static_cast<long>(batch_size) * model.spec.positions);
    for (std::size_t l = model.local.size(); l-- > 0;) {
      d_x = hidden_backward(model.local[l], model.local_bn[l], fc_cache.local[l], std::move(d_x), grads,
                            4 * l);
    }
  }
  return result;
}

void update_running_stats(SleModel& model, const ForwardCache& cache) {
  auto blend = [](BatchNormState& bn, const ForwardCache::Stage& stage) {
    const double m = static_cast<double>(stage.normed.cols());
    const double unbias = m > 1.0 ? m / (m - 1.0) : 1.0;
    bn.running_mean = bn.momentum * bn.running_mean + (1.0 - bn.momentum) * stage.mean;
    bn.running_var = bn.momentum * bn.running_var + (1.0 - bn.momentum) * unbias * stage.var;
  };
  for (std::size_t l = 0; l < model.local.size(); ++l) blend(model.local_bn[l], cache.local[l]);
  for (std::size_t l = 0; l < model.fc.size(); ++l) blend(model.fc_bn[l], cache.fc[l]);
}

void TrainConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (batch_size < 2) throw std::invalid_argument("batch_size must be >= 2 (batch norm)");
  if (!(lr_initial > 0.0)) throw std::invalid_argument("lr_initial must be positive");
  if (!(lr_drop_factor > 0.0)) throw std::invalid_argument("lr_drop_factor must be positive");
  for (std::size_t i = 1; i < lr_drop_epochs.size(); ++i) {
    if (lr_drop_epochs[i] <= lr_drop_epochs[i - 1]) {
      throw std::invalid_argument("lr_drop_epochs must be strictly increasing");
    }
  }
  if (momentum < 0.0 || momentum >= 1.0) throw std::invalid_argument("momentum must lie in [0, 1)");
  if (weight_decay < 0.0) throw std::invalid_argument("weight_decay must be >= 0");
  if (crop_padding < 0) throw std::invalid_argument("crop_padding must be >= 0");
}

double learning_rate(const TrainConfig& config, int epoch) {
  double lr = config.lr_initial;
  for (int drop : config.lr_drop_epochs) {
    if (epoch >= drop) lr *= config.lr_drop_factor;
  }
  return lr;
}

void sgd_step(SleModel& model, const Gradients& gradients, SgdState& state, const TrainConfig& config,
              int epoch) {
  auto params = parameter_views(model);
  if (gradients.values.size() != params.size()) {
    throw std::invalid_argument("sgd_step: gradient layout does not match the model");
  }
  if (state.velocity.empty()) {
    for (const auto& p : params) state.velocity.push_back(Eigen::VectorXd::Zero(static_cast<long>(p.size())));
  }
  const double lr = learning_rate(config, epoch);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Eigen::Map<Eigen::VectorXd> w(params[i].data(), static_cast<long>(params[i].size()));
    if (gradients.values[i].size() != w.size()) {
      throw std::invalid_argument("sgd_step: gradient shape mismatch at parameter " + std::to_string(i));
    }
    Eigen::VectorXd& v = state.velocity[i];
    v = config.momentum * v + gradients.values[i] + config.weight_decay * w;
    w -= lr * v;
  }
}

FeatureSet featurize_all(const LabeledImageSet& set, const Featurizer& featurize, int jobs) {
  FeatureSet out;
  out.class_count = set.class_count;
  out.labels = set.labels;
  out.features.resize(set.size());
  parallel_for(set.size(), jobs, [&](std::size_t i) { out.features[i] = featurize(set.images[i]).cast<float>(); });
  return out;
}

Standardizer standardize_fit(const std::vector<Eigen::MatrixXd>& samples, double epsilon) {
  if (samples.empty()) throw std::invalid_argument("standardize_fit: empty training set");
  const long channels = samples[0].rows();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(channels);
  double count = 0.0;
  for (const auto& s : samples) {
    sum += s.rowwise().sum();
    count += static_cast<double>(s.cols());
  }
  Standardizer st;
  st.epsilon = epsilon;
  st.mean = sum / count;
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(channels);
  for (const auto& s : samples) sq += (s.colwise() - st.mean).array().square().rowwise().sum().matrix();
  st.var = sq / count;
  return st;
}

Standardizer standardize_fit(const FeatureSet& set, double epsilon) {
  std::vector<Eigen::MatrixXd> samples;
  samples.reserve(set.size());
  for (const auto& f : set.features) samples.push_back(f.cast<double>());
  return standardize_fit(samples, epsilon);
}

TrainResult train(const LabeledImageSet& dataset, const Featurizer& featurize, ModelSpec spec,
                  const TrainConfig& config, const TrainOptions& options) {
  config.validate();
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
  const std::size_t n = dataset.size();

  Rng master(config.seed);
  const std::uint64_t init_seed = master();
  Rng shuffle_rng(master());
  Rng augment_rng(master());

  std::vector<Eigen::MatrixXd> clean(n);
  parallel_for(n, options.jobs, [&](std::size_t i) { clean[i] = featurize(dataset.images[i]); });
  spec.in_channels = static_cast<int>(clean[0].rows());
  spec.positions = static_cast<int>(clean[0].cols());
  spec.class_count = dataset.class_count;

  TrainResult result;
  result.model = init_model(spec, init_seed);
  result.model.standardizer = standardize_fit(clean);
  const bool augmenting = config.crop_padding > 0 || config.horizontal_flip;
  if (augmenting) clean.clear();

  SgdState sgd;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const int batch = std::min<int>(config.batch_size, static_cast<int>(n));

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_index(shuffle_rng, i)]);
    double loss_sum = 0.0;
    std::size_t correct = 0, seen = 0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t stop = std::min(n, start + batch);
      if (stop - start < 2) break;  // batch norm needs two samples
      std::vector<Eigen::MatrixXd> samples(stop - start);
      std::vector<int> labels;
      std::vector<AugmentParams> params;
      for (std::size_t k = start; k < stop; ++k) {
        labels.push_back(dataset.labels[order[k]]);
        if (augmenting) params.push_back(draw_augment(augment_rng, config.crop_padding, config.horizontal_flip));
      }
      parallel_for(stop - start, options.jobs, [&](std::size_t k) {
        const std::size_t idx = order[start + k];
        samples[k] = augmenting ? featurize(apply_augment(dataset.images[idx], config.crop_padding, params[k]))
                                : clean[idx];
      });
      ForwardCache cache;
      const LossAndGradients lg = loss_and_backward(result.model, assemble_batch(samples), labels, &cache);
      loss_sum += lg.loss * static_cast<double>(labels.size());
      for (long b = 0; b < cache.logits.cols(); ++b) {
        Eigen::Index arg = 0;
        cache.logits.col(b).maxCoeff(&arg);
        correct += (arg == labels[b]);
      }
      seen += labels.size();
      sgd_step(result.model, lg.gradients, sgd, config, epoch);
      update_running_stats(result.model, cache);
    }
    EpochMetrics m;
    m.epoch = epoch;
    m.learning_rate = learning_rate(config, epoch);
    m.train_loss = seen ? loss_sum / static_cast<double>(seen) : 0.0;
    m.train_accuracy = seen ? static_cast<double>(correct) / static_cast<double>(seen) : 0.0;
    const bool last = epoch + 1 == config.epochs;
    if (options.validation &&
        (last || (options.validate_every > 0 && (epoch + 1) % options.validate_every == 0))) {
      m.validation_accuracy = evaluate(result.model, *options.validation).top1;
    }
    result.metrics.push_back(m);
    if (options.on_epoch) options.on_epoch(m);
  }
  return result;
}

Eigen::MatrixXd predict_logits(const SleModel& model, const FeatureSet& set, int batch_size) {
  Eigen::MatrixXd logits(model.spec.class_count, static_cast<long>(set.size()));
  for (std::size_t start = 0; start < set.size(); start += batch_size) {
    const std::size_t stop = std::min(set.size(), start + batch_size);
    std::vector<Eigen::MatrixXd> samples;
    for (std::size_t k = start; k < stop; ++k) samples.push_back(set.features[k].cast<double>());
    logits.middleCols(static_cast<long>(start), static_cast<long>(stop - start)) =
        forward(model, assemble_batch(samples), static_cast<int>(stop - start), Mode::Eval);
  }
  return logits;
}

Accuracy evaluate(const SleModel& model, const FeatureSet& set, int batch_size) {
  Accuracy acc;
  if (set.size() == 0) return acc;
  const Eigen::MatrixXd logits = predict_logits(model, set, batch_size);
  std::size_t top1 = 0, top5 = 0;
  for (long b = 0; b < logits.cols(); ++b) {
    const int y = set.labels[b];
    // Rank of the true class with ties broken toward lower indices.
    int rank = 0;
    for (long k = 0; k < logits.rows(); ++k) {
      if (logits(k, b) > logits(y, b) || (logits(k, b) == logits(y, b) && k < y)) ++rank;
    }
    top1 += rank == 0;
    top5 += rank < 5;
  }
  const double n = static_cast<double>(logits.cols());
  acc.top1 = static_cast<double>(top1) / n;
  if (model.spec.class_count >= 5) acc.top5 = static_cast<double>(top5) / n;
  return acc;
}

int matched_mlp_width(int inputs, int classes, int hidden_layers, long target_parameters) {
  if (hidden_layers < 1) throw std::invalid_argument("matched_mlp_width: need a hidden layer");
  auto count = [&](long h) {
    long p = inputs * h + 3 * h;                         // first layer + bias + γ, β
    p += (hidden_layers - 1) * (h * h + 3 * h);          // further hidden layers
    return p + classes * h + classes;                    // classifier
  };
  long best = 1;
  for (long h = 1; h < 1'000'000; ++h) {
    if (std::labs(count(h) - target_parameters) < std::labs(count(best) - target_parameters)) best = h;
    if (count(h) > target_parameters) break;
  }
  return static_cast<int>(best);
}

}  // namespace scatnet
