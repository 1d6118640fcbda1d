#include "visrec/training.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "visrec/errors.hpp"
#include "visrec/parallel.hpp"
#include "visrec/rng.hpp"

using nlohmann::json;

namespace visrec {

namespace {

// rng stream tags
constexpr uint64_t kStreamShuffle = 1;
constexpr uint64_t kStreamAugment = 2;

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0)) throw ConfigError("learning_rate must be > 0");
  if (!(momentum >= 0 && momentum < 1))
    throw ConfigError("momentum must be in [0,1)");
  if (!(adam_beta1 >= 0 && adam_beta1 < 1) ||
      !(adam_beta2 >= 0 && adam_beta2 < 1)) {
    throw ConfigError("adam betas must be in [0,1)");
  }
  if (!(adam_epsilon > 0)) throw ConfigError("adam_epsilon must be > 0");
  if (batch_size < 2)
    throw ConfigError("batch_size must be >= 2 (batch norm constraint)");
  if (!(lambda >= 0)) throw ConfigError("lambda must be >= 0");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (top_k < 0) throw ConfigError("top_k must be >= 0");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  augment.validate();
}

template <typename T>
void sgd_momentum_step(T* weights, const T* grads, size_t n,
                       SgdMomentumState<T>& state, double lr,
                       double momentum) {
  if (state.velocity.size() != n) state.velocity.assign(n, T(0));
  T* v = state.velocity.data();
  const T m = static_cast<T>(momentum);
  const T step = static_cast<T>(lr);
  for (size_t i = 0; i < n; ++i) {
    v[i] = m * v[i] - step * grads[i];
    weights[i] += v[i];
  }
}

template <typename T>
void adam_step(T* weights, const T* grads, size_t n, AdamState<T>& state,
               double lr, double beta1, double beta2, double epsilon) {
  if (state.m.size() != n) {
    state.m.assign(n, T(0));
    state.v.assign(n, T(0));
    state.t = 0;
  }
  ++state.t;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  const T b1 = static_cast<T>(beta1);
  const T b2 = static_cast<T>(beta2);
  T* m = state.m.data();
  T* v = state.v.data();
  for (size_t i = 0; i < n; ++i) {
    m[i] = b1 * m[i] + (T(1) - b1) * grads[i];
    v[i] = b2 * v[i] + (T(1) - b2) * grads[i] * grads[i];
    double mhat = static_cast<double>(m[i]) / bc1;
    double vhat = static_cast<double>(v[i]) / bc2;
    weights[i] -=
        static_cast<T>(lr * mhat / (std::sqrt(vhat) + epsilon));
  }
}

template void sgd_momentum_step<float>(float*, const float*, size_t,
                                       SgdMomentumState<float>&, double,
                                       double);
template void sgd_momentum_step<double>(double*, const double*, size_t,
                                        SgdMomentumState<double>&, double,
                                        double);
template void adam_step<float>(float*, const float*, size_t,
                               AdamState<float>&, double, double, double,
                               double);
template void adam_step<double>(double*, const double*, size_t,
                                AdamState<double>&, double, double, double,
                                double);

std::vector<int> argmax_rows(const float* probs, int n, int num_classes) {
  std::vector<int> preds(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const float* row = probs + static_cast<int64_t>(i) * num_classes;
    int best = 0;
    for (int j = 1; j < num_classes; ++j) {
      if (row[j] > row[best]) best = j;
    }
    preds[static_cast<size_t>(i)] = best;
  }
  return preds;
}

double accuracy(const std::vector<int>& labels,
                const std::vector<int>& preds) {
  if (labels.empty() || labels.size() != preds.size()) {
    throw DataError("accuracy: need equal-length, nonempty label lists");
  }
  int64_t hits = 0;
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == preds[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double top_k_accuracy(const std::vector<int>& labels, const float* probs,
                      int n, int num_classes, int k) {
  if (k < 1 || k > num_classes) {
    throw DataError("top_k_accuracy: K must be in [1, num_classes]");
  }
  if (n < 1 || static_cast<int>(labels.size()) != n) {
    throw DataError("top_k_accuracy: labels/rows mismatch");
  }
  int64_t hits = 0;
  std::vector<int> order(static_cast<size_t>(num_classes));
  for (int i = 0; i < n; ++i) {
    const float* row = probs + static_cast<int64_t>(i) * num_classes;
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + k, order.end(),
                      [row](int a, int b) {
                        if (row[a] != row[b]) return row[a] > row[b];
                        return a < b;
                      });
    for (int j = 0; j < k; ++j) {
      if (order[static_cast<size_t>(j)] == labels[static_cast<size_t>(i)]) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

double cross_entropy(const float* probs, int n, int num_classes,
                     const std::vector<int>& labels) {
  if (n < 1 || static_cast<int>(labels.size()) != n) {
    throw DataError("cross_entropy: labels/rows mismatch");
  }
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    int label = labels[static_cast<size_t>(i)];
    if (label < 0 || label >= num_classes) {
      throw DataError("cross_entropy: label out of range");
    }
    double p = probs[static_cast<int64_t>(i) * num_classes + label];
    total += -std::log(std::max(p, 1e-12));
  }
  return total / n;
}

namespace {

int resolve_top_k(int requested, int num_classes) {
  if (requested > 0) {
    if (requested > num_classes) {
      throw ConfigError("top_k exceeds the number of classes");
    }
    return requested;
  }
  return std::min(5, num_classes);
}

struct ProbsAndLabels {
  std::vector<float> probs;
  std::vector<int> labels;
};

ProbsAndLabels infer_dataset(const Network<float>& net, const Dataset& ds,
                             int batch_size, int threads) {
  const ModelSpec& spec = net.spec();
  const int n = static_cast<int>(ds.size());
  const int k = net.num_classes();
  const int64_t px =
      static_cast<int64_t>(spec.input_h) * spec.input_w * spec.input_c;
  ProbsAndLabels out;
  out.probs.resize(static_cast<size_t>(n) * k);
  out.labels.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    out.labels[static_cast<size_t>(i)] = ds.samples[static_cast<size_t>(i)].label;
  }
  const int num_batches = (n + batch_size - 1) / batch_size;
  parallel_for(num_batches, threads, [&](int64_t b) {
    int lo = static_cast<int>(b) * batch_size;
    int hi = std::min(n, lo + batch_size);
    std::vector<float> batch(static_cast<size_t>(hi - lo) * px);
    for (int i = lo; i < hi; ++i) {
      write_model_input(ds.samples[static_cast<size_t>(i)].image, spec,
                        batch.data() + static_cast<int64_t>(i - lo) * px);
    }
    auto res = net.forward_infer(batch.data(), hi - lo);
    std::copy(res.probs.begin(), res.probs.end(),
              out.probs.begin() + static_cast<int64_t>(lo) * k);
  });
  return out;
}

}  // namespace

EvalReport evaluate(const Network<float>& net, const Dataset& ds,
                    int batch_size, int top_k, int threads) {
  if (ds.samples.empty()) throw DataError("evaluate: empty dataset");
  if (ds.class_names != net.spec().class_names) {
    throw DataError("evaluate: dataset classes do not match the model");
  }
  const int n = static_cast<int>(ds.size());
  const int k_classes = net.num_classes();
  const int k = resolve_top_k(top_k, k_classes);
  auto inferred = infer_dataset(net, ds, batch_size, threads);

  EvalReport report;
  report.k = k;
  std::vector<int> preds = argmax_rows(inferred.probs.data(), n, k_classes);
  report.accuracy = accuracy(inferred.labels, preds);
  report.top_k_accuracy =
      top_k_accuracy(inferred.labels, inferred.probs.data(), n, k_classes, k);
  report.mean_loss =
      cross_entropy(inferred.probs.data(), n, k_classes, inferred.labels);
  report.confusion.assign(
      static_cast<size_t>(k_classes),
      std::vector<int64_t>(static_cast<size_t>(k_classes), 0));
  for (int i = 0; i < n; ++i) {
    report.confusion[static_cast<size_t>(inferred.labels[static_cast<size_t>(i)])]
                    [static_cast<size_t>(preds[static_cast<size_t>(i)])]++;
  }
  return report;
}

TrainHistory train(Network<float>& net, const Dataset& train_set,
                   const Dataset& val_set, const TrainConfig& cfg) {
  cfg.validate();
  if (train_set.samples.empty() || val_set.samples.empty()) {
    throw DataError("train: empty dataset");
  }
  if (train_set.class_names != net.spec().class_names ||
      val_set.class_names != net.spec().class_names) {
    throw DataError("train: dataset classes do not match the model");
  }
  if (train_set.size() < 2) {
    throw DataError("train: need at least 2 training samples");
  }

  const ModelSpec& spec = net.spec();
  const int n = static_cast<int>(train_set.size());
  const int64_t px =
      static_cast<int64_t>(spec.input_h) * spec.input_w * spec.input_c;
  const int k = resolve_top_k(cfg.top_k, net.num_classes());

  SgdMomentumState<float> sgd_state;
  AdamState<float> adam_state;

  TrainHistory history;
  history.top_k = k;
  EarlyStopper stopper(cfg.patience);
  std::vector<float> best_params = net.params();
  std::vector<float> best_running = net.running();
  int best_epoch = 0;

  // per-epoch augmented copy of the training images
  std::vector<std::vector<float>> staged(static_cast<size_t>(n));

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    parallel_for(n, cfg.threads, [&](int64_t i) {
      const LabeledSample& s = train_set.samples[static_cast<size_t>(i)];
      if (cfg.augment_enabled) {
        Rng rng(hash_combine(cfg.seed, kStreamAugment,
                             static_cast<uint64_t>(epoch),
                             static_cast<uint64_t>(i)));
        staged[static_cast<size_t>(i)] =
            to_model_input(augment(s.image, cfg.augment, rng), spec);
      } else {
        staged[static_cast<size_t>(i)] = to_model_input(s.image, spec);
      }
    });

    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(
        hash_combine(cfg.seed, kStreamShuffle, static_cast<uint64_t>(epoch)));
    shuffle(order, shuffle_rng);

    // batch boundaries; a trailing single sample joins the previous batch
    std::vector<std::pair<int, int>> batches;
    for (int lo = 0; lo < n; lo += cfg.batch_size) {
      int hi = std::min(n, lo + cfg.batch_size);
      batches.emplace_back(lo, hi);
    }
    if (batches.size() > 1 &&
        batches.back().second - batches.back().first < 2) {
      batches[batches.size() - 2].second = n;
      batches.pop_back();
    }

    double epoch_loss = 0.0;
    std::vector<float> batch_buf;
    std::vector<int> batch_labels;
    for (auto [lo, hi] : batches) {
      const int bn = hi - lo;
      batch_buf.resize(static_cast<size_t>(bn) * px);
      batch_labels.resize(static_cast<size_t>(bn));
      for (int i = 0; i < bn; ++i) {
        int src = order[static_cast<size_t>(lo + i)];
        std::copy(staged[static_cast<size_t>(src)].begin(),
                  staged[static_cast<size_t>(src)].end(),
                  batch_buf.begin() + static_cast<int64_t>(i) * px);
        batch_labels[static_cast<size_t>(i)] =
            train_set.samples[static_cast<size_t>(src)].label;
      }
      auto res = net.train_step(batch_buf.data(), bn, batch_labels, cfg.lambda);
      epoch_loss += res.loss * bn;
      if (cfg.optimizer == Optimizer::sgd_momentum) {
        sgd_momentum_step(net.params().data(), res.grads.data(),
                          net.params().size(), sgd_state, cfg.learning_rate,
                          cfg.momentum);
      } else {
        adam_step(net.params().data(), res.grads.data(), net.params().size(),
                  adam_state, cfg.learning_rate, cfg.adam_beta1,
                  cfg.adam_beta2, cfg.adam_epsilon);
      }
    }

    EvalReport val = evaluate(net, val_set, cfg.batch_size, k, cfg.threads);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_loss / n;
    rec.val_loss = val.mean_loss;
    rec.val_accuracy = val.accuracy;
    rec.val_top_k = val.top_k_accuracy;
    history.epochs.push_back(rec);

    bool stop = stopper.observe(val.mean_loss);
    if (stopper.improved()) {
      best_params = net.params();
      best_running = net.running();
      best_epoch = epoch;
    }
    if (stop) {
      history.stop_reason = "early_stopping";
      break;
    }
  }
  if (history.stop_reason.empty()) history.stop_reason = "max_epochs";
  history.best_epoch = best_epoch;
  net.params() = std::move(best_params);
  net.running() = std::move(best_running);
  return history;
}

void warm_start(Network<float>& net, const Checkpoint& donor) {
  std::string diff;
  if (!net.spec().body_equal(donor.spec, &diff)) {
    throw DataError("warm_start: body architecture mismatch at " + diff);
  }
  const size_t body_count = net.head_offset();
  std::copy_n(donor.params.begin(), body_count, net.params().begin());
  if (donor.running.size() != net.running().size()) {
    throw DataError("warm_start: batch-norm state size mismatch");
  }
  net.running() = donor.running;
  if (donor.spec.num_classes() == net.num_classes()) {
    std::copy(donor.params.begin() + static_cast<int64_t>(body_count),
              donor.params.end(),
              net.params().begin() + static_cast<int64_t>(body_count));
  }
}

void save_history(const TrainHistory& history, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path);
  for (const EpochRecord& r : history.epochs) {
    json j;
    j["epoch"] = r.epoch;
    j["train_loss"] = r.train_loss;
    j["val_loss"] = r.val_loss;
    j["val_accuracy"] = r.val_accuracy;
    j["val_top_k"] = r.val_top_k;
    out << j.dump() << "\n";
  }
  if (!out) throw DataError("write failed: " + path);
}

TrainHistory load_history(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open: " + path);
  TrainHistory history;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": bad history record: " + e.what());
    }
    EpochRecord r;
    r.epoch = j.at("epoch").get<int>();
    r.train_loss = j.at("train_loss").get<double>();
    r.val_loss = j.at("val_loss").get<double>();
    r.val_accuracy = j.at("val_accuracy").get<double>();
    r.val_top_k = j.at("val_top_k").get<double>();
    history.epochs.push_back(r);
  }
  for (size_t i = 0; i < history.epochs.size(); ++i) {
    if (history.epochs[i].epoch != static_cast<int>(i) + 1) {
      throw DataError(path + ": epochs are not contiguous from 1");
    }
  }
  double best = std::numeric_limits<double>::infinity();
  for (const EpochRecord& r : history.epochs) {
    if (r.val_loss < best) {
      best = r.val_loss;
      history.best_epoch = r.epoch;
    }
  }
  return history;
}

}  // namespace visrec
