// Copyright 2026 The rotconv Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "rotconv/harness/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <string>
#include <variant>

#include "rotconv/io/accounting.hpp"
#include "rotconv/nn/random.hpp"

namespace rotconv::harness {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("train config: " + what);
}

// Weight buffer of a convolution-like record (what the L1 term sees).
template <typename T>
std::vector<T>* conv_weights(io::Layer<T>& layer) {
  return std::visit(Overloaded{
                        [](nn::DenseConvLayer<T>& l) { return &l.weights; },
                        [](rotate::RotateLayer<T>& l) { return &l.weights; },
                        [](io::AiConvLayer<T>& l) { return &l.dense.weights; },
                        [](auto&) -> std::vector<T>* { return nullptr; },
                    },
                    layer);
}

// Distinct per-epoch shuffle seed derived from the run seed.
std::uint64_t epoch_seed(std::uint64_t seed, std::size_t epoch) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (epoch + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

nn::Tensor4<float> gather(const Dataset& data, std::span<const std::size_t> idx,
                          std::vector<std::int32_t>& labels) {
  nn::Shape4 shape = data.images.shape();
  shape.n = idx.size();
  nn::Tensor4<float> batch(shape);
  labels.resize(idx.size());
  for (std::size_t b = 0; b < idx.size(); ++b) {
    const auto src = data.images.item(idx[b]);
    std::copy(src.begin(), src.end(), batch.item(b).begin());
    labels[b] = data.labels[idx[b]];
  }
  return batch;
}

std::size_t output_classes(const io::Model& model) {
  if (model.layers.empty() ||
      !std::holds_alternative<nn::LinearLayer<float>>(model.layers.back())) {
    throw io::ModelError("model does not end in a linear classifier");
  }
  return std::get<nn::LinearLayer<float>>(model.layers.back()).out_features;
}

}  // namespace

void TrainConfig::validate() const {
  require(batch_size >= 2, "batch_size must be at least 2");
  require(lr > 0.0 && std::isfinite(lr), "lr must be positive");
  for (double m : milestones) require(m > 0.0 && m < 1.0, "milestones must lie in (0, 1)");
  require(std::is_sorted(milestones.begin(), milestones.end()), "milestones must be ascending");
  require(momentum >= 0.0 && momentum < 1.0, "momentum must lie in [0, 1)");
  require(weight_decay >= 0.0, "weight_decay must be non-negative");
  require(lambda >= 0.0 && std::isfinite(lambda), "lambda must be non-negative");
  require(k >= 1 && k <= 9, "k must lie in 1..9");
  require(threshold >= 0.0, "threshold must be non-negative");
  require(epsilon > 0.0, "epsilon must be positive");
  require(!angle_lr || *angle_lr > 0.0, "angle_lr must be positive");
  method_config().rotate.validate();
}

MethodConfig TrainConfig::method_config() const {
  MethodConfig m;
  m.rotate.epsilon = epsilon;
  m.rotate.angle_lr = angle_lr;
  m.rotate.init = angle_init;
  m.rotate.fixed_angles = fixed_angles;
  m.ai.k = k;
  m.ai.threshold = threshold;
  m.ai.l1_lambda = lambda;
  m.ai.layers = layers;
  m.seed = seed;
  return m;
}

nn::SgdConfig TrainConfig::sgd() const {
  nn::SgdConfig s;
  s.lr = lr;
  s.momentum = momentum;
  s.weight_decay = weight_decay;
  s.nesterov = true;
  return s;
}

double lr_at_epoch(const TrainConfig& cfg, std::size_t epoch) {
  double divisor = 1.0;
  for (double m : cfg.milestones) {
    if (static_cast<double>(epoch) >= m * static_cast<double>(cfg.epochs)) divisor *= 10.0;
  }
  return cfg.lr / divisor;
}

void MetricsLog::write_csv(std::ostream& out) const {
  out << "epoch,loss,test_acc,lr\n";
  char buf[128];
  for (const EpochMetrics& e : epochs) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g,", e.epoch, e.loss);
    out << buf;
    if (e.test_acc) {
      std::snprintf(buf, sizeof buf, "%.6f", *e.test_acc);
      out << buf;
    }
    std::snprintf(buf, sizeof buf, ",%.9g\n", e.lr);
    out << buf;
  }
}

void prepare_model(io::Model& model, const TrainConfig& cfg) {
  cfg.validate();
  apply_method(model, cfg.method, cfg.layers, cfg.method_config());
}

template <typename T>
Objective<T> objective(Network<T>& net, io::ModelT<T>& model, const nn::Tensor4<T>& input,
                       std::span<const std::int32_t> labels, double lambda,
                       const std::vector<std::size_t>& l1_convs, bool need_input_grad) {
  const auto logits = net.forward(input, nn::Mode::kTrain);
  const auto xent = nn::softmax_xent(logits, labels);
  Objective<T> obj;
  obj.task_loss = xent.loss;
  obj.loss = xent.loss;
  obj.grads = net.backward(nn::softmax_xent_backward(xent.probabilities, labels), need_input_grad);
  if (lambda > 0.0) {
    const auto records = io::conv_records(model);
    for (std::size_t c : l1_convs) {
      if (c >= records.size()) continue;
      const std::size_t rec = records[c];
      const std::vector<T>* w = conv_weights(model.layers[rec]);
      double l1 = 0.0;
      for (T v : *w) l1 += std::abs(static_cast<double>(v));
      obj.loss += lambda * l1;
      nn::add_l1_subgradient(std::span<const T>(*w), lambda,
                             std::span<T>(obj.grads.records[rec].weights));
    }
  }
  return obj;
}

MetricsLog train(io::Model& model, const Dataset& train_set, const Dataset* test_set,
                 const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  train_set.validate();
  if (output_classes(model) != train_set.num_classes) {
    throw DataError("model predicts " + std::to_string(output_classes(model)) +
                    " classes, training data has " + std::to_string(train_set.num_classes));
  }
  MetricsLog log;
  if (cfg.epochs == 0) return log;

  Network<float> net(model);
  nn::OptimState<float> opt(cfg.sgd());
  const rotate::RotateConfig rot = cfg.method_config().rotate;
  ai::AiPruneConfig ai_cfg = cfg.method_config().ai;
  const std::size_t n = train_set.size();
  std::vector<std::size_t> order(n);
  std::vector<std::int32_t> labels;
  std::size_t iteration = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_at_epoch(cfg, epoch);
    const double angle_lr = cfg.angle_lr.value_or(cfg.lr) * (lr / cfg.lr);
    opt.set_lr(lr);
    std::iota(order.begin(), order.end(), std::size_t{0});
    nn::Rng rng(epoch_seed(cfg.seed, epoch));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, n - start);
      if (count < 2) break;  // batch statistics need two samples
      const auto batch = gather(train_set, std::span(order).subspan(start, count), labels);
      auto diverged = [&](const std::string& what) {
        char buf[96];
        std::snprintf(buf, sizeof buf, " at epoch %zu, iteration %zu (lr %g)", epoch, iteration,
                      lr);
        return DivergenceError(what + buf);
      };
      Objective<float> obj;
      try {
        obj = objective(net, model, batch, labels, cfg.lambda, cfg.layers);
      } catch (const NonFiniteError& e) {
        throw diverged(e.what());
      }
      if (!std::isfinite(obj.loss)) {
        throw diverged("objective became " + std::to_string(obj.loss));
      }
      loss_sum += obj.loss * static_cast<double>(count);
      seen += count;

      try {
        for (std::size_t rec = 0; rec < model.layers.size(); ++rec) {
          RecordGrads<float>& g = obj.grads.records[rec];
          auto sgd = [&](std::size_t kind, std::vector<float>& p, const std::vector<float>& gp) {
            if (!p.empty()) opt.step(rec * 3 + kind, std::span(p), std::span<const float>(gp));
          };
          std::visit(Overloaded{
                         [&](nn::DenseConvLayer<float>& l) {
                           sgd(0, l.weights, g.weights);
                           sgd(1, l.bias, g.bias);
                         },
                         [&](rotate::RotateLayer<float>& l) {
                           sgd(0, l.weights, g.weights);
                           for (std::size_t s = 0; s < l.angles.size(); ++s) {
                             const double last = l.angles[s];
                             const double raw = -angle_lr * static_cast<double>(g.angles[s]);
                             const double next = rotate::angle_step(last, raw, rot);
                             l.angles[s] = rotate::store_angle<float>(next);
                             if (hooks.on_angle_update) {
                               const auto b = rotate::angle_bounds(last, rot.epsilon);
                               hooks.on_angle_update({rec, s, last, raw, b.lo, b.hi, l.angles[s]});
                             }
                           }
                         },
                         [&](io::AiConvLayer<float>& l) {
                           sgd(0, l.dense.weights, g.weights);
                           sgd(1, l.dense.bias, g.bias);
                           ai_cfg.k = l.state.k;
                           l.state = ai::ai_prune_step(l.dense, ai_cfg);
                         },
                         [&](nn::BatchNormLayer<float>& l) {
                           sgd(0, l.gamma, g.weights);
                           sgd(1, l.beta, g.bias);
                         },
                         [&](nn::LinearLayer<float>& l) {
                           sgd(0, l.weights, g.weights);
                           sgd(1, l.bias, g.bias);
                         },
                     },
                     model.layers[rec]);
        }
      } catch (const NonFiniteError& e) {
        throw diverged(e.what());
      }
      if (hooks.on_iteration) hooks.on_iteration(iteration, model);
      ++iteration;
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.loss = seen > 0 ? loss_sum / static_cast<double>(seen) : 0.0;
    m.lr = lr;
    if (test_set != nullptr) m.test_acc = evaluate(model, *test_set);
    for (const auto& layer : model.layers) {
      m.stored_reals.push_back(io::parameter_counts(layer).stored_reals);
    }
    log.epochs.push_back(std::move(m));
  }
  return log;
}

std::vector<std::int32_t> predict(const io::Model& model, const nn::Tensor4<float>& images,
                                  std::size_t batch_size) {
  io::Model copy = model;  // eval-mode forward needs a mutable model
  Network<float> net(copy);
  const std::size_t n = images.n();
  std::vector<std::int32_t> out(n);
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t count = std::min(batch_size, n - start);
    nn::Shape4 shape = images.shape();
    shape.n = count;
    nn::Tensor4<float> batch(shape);
    std::copy_n(images.data() + start * shape.item(), count * shape.item(), batch.data());
    const auto logits = net.forward(batch, nn::Mode::kEval);
    const std::size_t classes = logits.c();
    for (std::size_t b = 0; b < count; ++b) {
      const auto row = logits.item(b);
      out[start + b] = static_cast<std::int32_t>(
          std::max_element(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(classes)) -
          row.begin());
    }
  }
  return out;
}

std::vector<std::vector<std::size_t>> confusion_matrix(const io::Model& model,
                                                       const Dataset& data) {
  data.validate();
  const std::size_t classes = output_classes(model);
  if (classes != data.num_classes) {
    throw DataError("model predicts " + std::to_string(classes) + " classes, data has " +
                    std::to_string(data.num_classes));
  }
  std::vector<std::vector<std::size_t>> cm(classes, std::vector<std::size_t>(classes, 0));
  const auto pred = predict(model, data.images);
  for (std::size_t i = 0; i < data.size(); ++i) {
    ++cm[static_cast<std::size_t>(data.labels[i])][static_cast<std::size_t>(pred[i])];
  }
  return cm;
}

double evaluate(const io::Model& model, const Dataset& data) {
  const auto cm = confusion_matrix(model, data);
  if (data.size() == 0) return 0.0;
  std::size_t correct = 0;
  for (std::size_t c = 0; c < cm.size(); ++c) correct += cm[c][c];
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

double alive_fraction(const io::Model& model) {
  std::size_t alive = 0;
  std::size_t total = 0;
  for (const auto& layer : model.layers) {
    if (const auto* l = std::get_if<io::AiConvLayer<float>>(&layer)) {
      alive += l->state.alive_count();
      total += l->state.out_channels * l->state.in_channels;
    }
  }
  return total == 0 ? 1.0 : static_cast<double>(alive) / static_cast<double>(total);
}

template Objective<float> objective(Network<float>&, io::ModelT<float>&, const nn::Tensor4<float>&,
                                    std::span<const std::int32_t>, double,
                                    const std::vector<std::size_t>&, bool);
template Objective<double> objective(Network<double>&, io::ModelT<double>&,
                                     const nn::Tensor4<double>&, std::span<const std::int32_t>,
                                     double, const std::vector<std::size_t>&, bool);

}  // namespace rotconv::harness
