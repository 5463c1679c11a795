#include "gres2net/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "gres2net/error.hpp"

namespace gres2net {

TrainConfig TrainConfig::defaults_for(Task task) {
  TrainConfig c;
  c.batch_size = task == Task::classification ? 32 : 64;
  return c;
}

void TrainConfig::validate() const {
  if (!(lr0 > 0.0)) throw ConfigError(fmt::format("train.lr0 must be > 0, got {}", lr0));
  if (!(decay_factor > 0.0 && decay_factor <= 1.0)) {
    throw ConfigError(fmt::format("train.decay_factor must be in (0, 1], got {}", decay_factor));
  }
  if (decay_every == 0) throw ConfigError("train.decay_every must be >= 1");
  if (batch_size == 0) throw ConfigError("train.batch_size must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError(fmt::format("train.dropout {} outside [0, 1)", dropout));
  if (eval_repeats == 0) throw ConfigError("train.eval_repeats must be >= 1");
}

double lr_at_epoch(const TrainConfig& config, std::size_t epoch) {
  return config.lr0 * std::pow(config.decay_factor, static_cast<double>(epoch / config.decay_every));
}

Var cross_entropy_loss(Var logits, std::span<const int> labels) {
  const Tensor3& z = logits.value();
  if (z.time() != 1 || z.batch() != labels.size()) {
    throw ShapeError(fmt::format("cross_entropy: logits {} do not match {} labels", z.shape().str(), labels.size()));
  }
  const std::size_t batch = z.batch(), classes = z.channels();
  Tensor3 probs({batch, classes, 1});
  double total = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    if (labels[b] < 0 || static_cast<std::size_t>(labels[b]) >= classes) {
      throw std::out_of_range(fmt::format("cross_entropy: label {} outside [0, {})", labels[b], classes));
    }
    double peak = z(b, 0, 0);
    for (std::size_t c = 1; c < classes; ++c) peak = std::max(peak, z(b, c, 0));
    double denom = 0.0;
    for (std::size_t c = 0; c < classes; ++c) denom += std::exp(z(b, c, 0) - peak);
    for (std::size_t c = 0; c < classes; ++c) probs(b, c, 0) = std::exp(z(b, c, 0) - peak) / denom;
    total += peak + std::log(denom) - z(b, static_cast<std::size_t>(labels[b]), 0);
  }
  std::vector<int> owned(labels.begin(), labels.end());
  const Var ins[] = {logits};
  return logits.tape().record(
      "cross_entropy", Tensor3::scalar(total / static_cast<double>(batch)), ins,
      [logits, probs = std::move(probs), owned = std::move(owned)](Tape& tape, Var, const Tensor3& g) {
        Tensor3& gz = tape.grad_buffer(logits);
        const double seed = g.values()[0] / static_cast<double>(owned.size());
        for (std::size_t b = 0; b < owned.size(); ++b) {
          for (std::size_t c = 0; c < gz.channels(); ++c) {
            const double onehot = static_cast<int>(c) == owned[b] ? 1.0 : 0.0;
            gz(b, c, 0) += seed * (probs(b, c, 0) - onehot);
          }
        }
      });
}

Var mse_loss(Var pred, const Tensor3& target) {
  require_same_shape(pred.value(), target, "mse_loss");
  const auto p = pred.value().values();
  const auto t = target.values();
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) total += (p[i] - t[i]) * (p[i] - t[i]);
  const double count = static_cast<double>(p.size());
  const Var ins[] = {pred};
  return pred.tape().record("mse", Tensor3::scalar(total / count), ins,
                            [pred, target, count](Tape& tape, Var, const Tensor3& g) {
                              auto gp = tape.grad_buffer(pred).values();
                              const auto pv = tape.value(pred).values();
                              const auto tv = target.values();
                              const double seed = g.values()[0] * 2.0 / count;
                              for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += seed * (pv[i] - tv[i]);
                            });
}

void adam_step(AdamState& state, std::span<Parameter* const> params, std::span<const Tensor3> grads, double lr) {
  if (params.size() != grads.size()) {
    throw ShapeError(fmt::format("adam: {} parameters but {} gradients", params.size(), grads.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    require_same_shape(params[i]->value, grads[i], "adam gradient");
    if (!grads[i].all_finite()) {
      throw NonFiniteError(fmt::format("adam: non-finite gradient for '{}', step aborted", params[i]->name));
    }
  }
  if (state.m.empty()) {
    for (const Parameter* p : params) {
      state.m.emplace_back(p->value.shape());
      state.v.emplace_back(p->value.shape());
    }
  } else if (state.m.size() != params.size()) {
    throw ShapeError(fmt::format("adam: state tracks {} parameters, got {}", state.m.size(), params.size()));
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correct1 = 1.0 - std::pow(state.beta1, t);
  const double correct2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i]->value.values();
    auto m = state.m[i].values();
    auto v = state.v[i].values();
    const auto g = grads[i].values();
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * g[k];
      v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * g[k] * g[k];
      const double m_hat = m[k] / correct1;
      const double v_hat = v[k] / correct2;
      w[k] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

bool metric_improves(Task task, double candidate, double best) {
  return task == Task::classification ? candidate > best : candidate < best;
}

Tensor3 make_batch(const std::vector<Sample>& samples, std::span<const std::size_t> indices) {
  if (indices.empty()) throw ShapeError("make_batch: empty batch");
  const std::size_t channels = samples[indices[0]].input.channels();
  std::size_t time = 0;
  for (std::size_t i : indices) {
    if (samples[i].input.channels() != channels) {
      throw ShapeError(fmt::format("make_batch: sample {} has {} channels, expected {}", i,
                                   samples[i].input.channels(), channels));
    }
    time = std::max(time, samples[i].input.time());
  }
  Tensor3 batch({indices.size(), channels, time});
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const Tensor3& in = samples[indices[b]].input;
    for (std::size_t c = 0; c < channels; ++c) {
      std::copy_n(in.data() + in.index(0, c, 0), in.time(), batch.data() + batch.index(b, c, 0));
    }
  }
  return batch;
}

namespace {

Tensor3 target_batch(const std::vector<Sample>& samples, std::span<const std::size_t> indices, std::size_t horizon) {
  Tensor3 t({indices.size(), horizon, 1});
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const auto& target = samples[indices[b]].target;
    if (target.size() != horizon) {
      throw ShapeError(fmt::format("sample {} has {} targets, model predicts {}", indices[b], target.size(), horizon));
    }
    for (std::size_t h = 0; h < horizon; ++h) t(b, h, 0) = target[h];
  }
  return t;
}

std::vector<int> label_batch(const std::vector<Sample>& samples, std::span<const std::size_t> indices) {
  std::vector<int> labels;
  labels.reserve(indices.size());
  for (std::size_t i : indices) labels.push_back(samples[i].label);
  return labels;
}

Var batch_loss(Var out, const DatasetSplit& split, const std::vector<Sample>& samples,
               std::span<const std::size_t> indices) {
  if (split.task == Task::classification) {
    const std::vector<int> labels = label_batch(samples, indices);
    return cross_entropy_loss(out, labels);
  }
  return mse_loss(out, target_batch(samples, indices, split.horizon));
}

double denormalize(double v, const ChannelStats& stats) {
  return stats.empty() ? v : v * stats.scale[0] + stats.mean[0];
}

}  // namespace

namespace {

struct PassResult {
  Predictions predictions;
  double loss = 0.0;
};

PassResult eval_pass(Model& model, const std::vector<Sample>& samples, const DatasetSplit& split,
                     std::size_t batch_size) {
  if (samples.empty()) throw DataError("evaluation needs at least one sample");
  PassResult r;
  Rng unused(0);
  double loss_sum = 0.0;
  std::vector<std::size_t> idx;
  // Batches never mix lengths, so no padding reaches the pooled features and
  // results do not depend on the batch size.
  for (std::size_t lo = 0; lo < samples.size(); lo += idx.size()) {
    idx.clear();
    const std::size_t len = samples[lo].input.time();
    for (std::size_t i = lo; i < std::min(samples.size(), lo + batch_size) && samples[i].input.time() == len; ++i) {
      idx.push_back(i);
    }
    Tape tape;
    const Var out = model.forward(tape, tape.constant(make_batch(samples, idx)), Mode::eval, unused);
    loss_sum += batch_loss(out, split, samples, idx).value().item() * static_cast<double>(idx.size());
    const Tensor3& o = out.value();
    for (std::size_t b = 0; b < idx.size(); ++b) {
      Tensor3 row({1, o.channels(), 1});
      for (std::size_t c = 0; c < o.channels(); ++c) row(0, c, 0) = o(b, c, 0);
      if (split.task == Task::classification) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < o.channels(); ++c) {
          if (o(b, c, 0) > o(b, best, 0)) best = c;
        }
        r.predictions.labels.push_back(static_cast<int>(best));
      } else {
        const auto& target = samples[idx[b]].target;
        for (std::size_t h = 0; h < o.channels(); ++h) {
          r.predictions.series.y_true.push_back(denormalize(target[h], split.target_stats));
          r.predictions.series.y_pred.push_back(denormalize(o(b, h, 0), split.target_stats));
        }
      }
      r.predictions.outputs.push_back(std::move(row));
    }
  }
  r.loss = loss_sum / static_cast<double>(samples.size());
  return r;
}

}  // namespace

Predictions predict(Model& model, const std::vector<Sample>& samples, const DatasetSplit& split,
                    std::size_t batch_size) {
  return eval_pass(model, samples, split, batch_size).predictions;
}

MetricRecord evaluate(Model& model, const std::vector<Sample>& samples, const DatasetSplit& split,
                      std::size_t batch_size) {
  PassResult pass = eval_pass(model, samples, split, batch_size);
  MetricRecord m;
  m.loss = pass.loss;
  if (split.task == Task::classification) {
    std::vector<int> truth;
    for (const auto& s : samples) truth.push_back(s.label);
    m.accuracy = accuracy(pass.predictions.labels, truth);
  } else {
    const EvalSeries& e = pass.predictions.series;
    m.rmse = rmse(e);
    m.mae = mae(e);
    try {
      m.mape = mape(e);
    } catch (const std::invalid_argument&) {
      m.mape.reset();
    }
    try {
      m.r2 = r_squared(e);
    } catch (const std::invalid_argument&) {
      m.r2 = std::nan("");
    }
  }
  return m;
}

MetricRecord average(std::span<const MetricRecord> records) {
  if (records.empty()) throw std::invalid_argument("average of zero metric records");
  MetricRecord mean;
  CompensatedSum loss, acc, r, a, p, r2;
  bool have_mape = true;
  for (const auto& m : records) {
    loss.add(m.loss);
    acc.add(m.accuracy);
    r.add(m.rmse);
    a.add(m.mae);
    r2.add(m.r2);
    if (m.mape) {
      p.add(*m.mape);
    } else {
      have_mape = false;
    }
  }
  const double n = static_cast<double>(records.size());
  mean.loss = loss.value() / n;
  mean.accuracy = acc.value() / n;
  mean.rmse = r.value() / n;
  mean.mae = a.value() / n;
  mean.r2 = r2.value() / n;
  if (have_mape) mean.mape = p.value() / n;
  return mean;
}

RepeatedEval evaluate_repeated(Model& model, const std::vector<Sample>& samples, const DatasetSplit& split,
                               std::size_t batch_size, std::size_t repeats) {
  if (repeats == 0) throw std::invalid_argument("evaluate_repeated: repeats must be >= 1");
  RepeatedEval out;
  for (std::size_t i = 0; i < repeats; ++i) out.records.push_back(evaluate(model, samples, split, batch_size));
  out.mean = average(out.records);
  return out;
}

TrainResult train_model(Model& model, const DatasetSplit& data, const TrainConfig& config, const TrainState* resume,
                        const EpochCallback& on_epoch) {
  config.validate();
  if (data.train.empty()) throw DataError("training partition is empty");
  if (data.validation.empty()) throw DataError("validation partition is empty");
  if (data.input_channels() != model.spec().input_channels) {
    throw DataError(fmt::format("data has {} channels, model expects {}", data.input_channels(),
                                model.spec().input_channels));
  }

  TrainResult result;
  TrainState& st = result.state;
  Rng rng(derive_seed(config.seed, 2));
  if (resume != nullptr) {
    st = *resume;
    rng.restore(st.rng_state);
  }
  result.best_params = st.best_params.empty() ? model.snapshot() : st.best_params;

  const auto& params = model.parameters();
  std::vector<std::size_t> order(data.train.size());
  for (std::size_t epoch = st.next_epoch; epoch < config.epochs; ++epoch) {
    const double lr = lr_at_epoch(config, epoch);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    for (std::size_t lo = 0; lo < order.size(); lo += config.batch_size) {
      const std::span<const std::size_t> idx(order.data() + lo, std::min(config.batch_size, order.size() - lo));
      Tape tape;
      const Var out = model.forward(tape, tape.constant(make_batch(data.train, idx)), Mode::train, rng);
      const Var loss = batch_loss(out, data, data.train, idx);
      const double value = loss.value().item();
      if (!std::isfinite(value)) {
        throw NonFiniteError(fmt::format("training diverged: loss {} at epoch {}, batch starting at {}", value, epoch,
                                         lo / config.batch_size));
      }
      loss_sum += value * static_cast<double>(idx.size());
      tape.backward(loss);
      adam_step(st.adam, params, tape.grads(params), lr);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.train_metric = evaluate(model, data.train, data, config.batch_size).headline(data.task);
    const MetricRecord val = evaluate(model, data.validation, data, config.batch_size);
    rec.val_loss = val.loss;
    rec.val_metric = val.headline(data.task);
    result.history.push_back(rec);

    if (!st.best_metric || metric_improves(data.task, rec.val_metric, *st.best_metric)) {
      st.best_metric = rec.val_metric;
      st.best_epoch = epoch;
      st.best_params = model.snapshot();
      result.best_params = st.best_params;
    }
    st.next_epoch = epoch + 1;
    if (on_epoch) on_epoch(rec);
  }
  st.rng_state = rng.state();
  result.best_metric = st.best_metric;
  result.best_epoch = st.best_epoch;
  return result;
}

}  // namespace gres2net
