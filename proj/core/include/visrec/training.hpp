#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "visrec/augment.hpp"
#include "visrec/checkpoint.hpp"
#include "visrec/dataset.hpp"
#include "visrec/network.hpp"

namespace visrec {

enum class Optimizer { sgd_momentum, adam };

struct TrainConfig {
  Optimizer optimizer = Optimizer::sgd_momentum;
  double learning_rate = 0.01;
  double momentum = 0.9;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int batch_size = 64;
  double lambda = 0.0005;  // L2 coefficient
  int max_epochs = 50;
  int patience = 3;
  uint64_t seed = 0;
  int top_k = 0;  // 0 = min(5, num_classes)
  bool augment_enabled = true;
  AugmentConfig augment;
  int threads = 1;

  void validate() const;  // throws ConfigError
};

// v <- momentum * v - lr * g;  w <- w + v
template <typename T>
struct SgdMomentumState {
  std::vector<T> velocity;
};

template <typename T>
void sgd_momentum_step(T* weights, const T* grads, size_t n,
                       SgdMomentumState<T>& state, double lr, double momentum);

// ADAM with bias correction (beta1/beta2/epsilon as published defaults).
template <typename T>
struct AdamState {
  std::vector<T> m, v;
  int64_t t = 0;
};

template <typename T>
void adam_step(T* weights, const T* grads, size_t n, AdamState<T>& state,
               double lr, double beta1, double beta2, double epsilon);

// argmax per row, ties resolved to the lowest class index
std::vector<int> argmax_rows(const float* probs, int n, int num_classes);

double accuracy(const std::vector<int>& labels, const std::vector<int>& preds);

// true label among the K highest probabilities (ties by lower class index)
double top_k_accuracy(const std::vector<int>& labels, const float* probs,
                      int n, int num_classes, int k);

// mean over rows of -log(p[label]), probabilities floored at 1e-12
double cross_entropy(const float* probs, int n, int num_classes,
                     const std::vector<int>& labels);

struct EvalReport {
  double accuracy = 0;
  double top_k_accuracy = 0;
  int k = 1;
  double mean_loss = 0;
  std::vector<std::vector<int64_t>> confusion;  // [true][predicted]
};

EvalReport evaluate(const Network<float>& net, const Dataset& ds,
                    int batch_size, int top_k, int threads = 1);

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0;
  double val_loss = 0;
  double val_accuracy = 0;
  double val_top_k = 0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;  // 1-based index into epochs
  std::string stop_reason;
  int top_k = 1;
};

// Stops after `patience` consecutive epochs without a strict improvement of
// the monitored loss.
class EarlyStopper {
 public:
  explicit EarlyStopper(int patience) : patience_(patience) {}
  // Returns true when training should stop after this epoch.
  bool observe(double loss) {
    ++epoch_;
    if (loss < best_) {
      best_ = loss;
      best_epoch_ = epoch_;
      bad_ = 0;
    } else {
      ++bad_;
    }
    return bad_ >= patience_;
  }
  bool improved() const { return bad_ == 0; }
  int best_epoch() const { return best_epoch_; }
  double best() const { return best_; }

 private:
  int patience_;
  int epoch_ = 0;
  int best_epoch_ = 0;
  int bad_ = 0;
  double best_ = std::numeric_limits<double>::infinity();
};

// Minibatch training with per-epoch re-augmentation, early stopping on
// validation loss and best-epoch weight restoration. The model is left at
// the best-validation-loss weights.
TrainHistory train(Network<float>& net, const Dataset& train_set,
                   const Dataset& val_set, const TrainConfig& cfg);

// Copies body weights and batch-norm state from a donor checkpoint; the head
// is copied only when the class counts match, otherwise the model keeps its
// fresh initialization. Body architectures must match exactly.
void warm_start(Network<float>& net, const Checkpoint& donor);

// History file: JSON lines, one record per epoch with keys
// epoch, train_loss, val_loss, val_accuracy, val_top_k.
void save_history(const TrainHistory& history, const std::string& path);
TrainHistory load_history(const std::string& path);

}  // namespace visrec
