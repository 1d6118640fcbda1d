#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "visrec/image.hpp"
#include "visrec/ops.hpp"

namespace visrec {

enum class LayerKind {
  conv,
  batchnorm,
  relu,
  maxpool,
  globalavgpool,
  dense,
  softmax
};

const char* layer_kind_name(LayerKind kind);
LayerKind layer_kind_from_name(const std::string& name);

struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  int kernel = 0;
  int stride = 1;
  int padding = 0;
  int out_channels = 0;
  int units = 0;
  double epsilon = 1e-5;
  double momentum = 0.9;

  bool operator==(const LayerSpec&) const = default;

  static LayerSpec conv2d(int kernel, int stride, int padding, int channels);
  static LayerSpec batchnorm(double epsilon = 1e-5, double momentum = 0.9);
  static LayerSpec relu();
  static LayerSpec maxpool(int kernel, int stride);
  static LayerSpec globalavgpool();
};

// The feature body is the layer stack below; the classifier head (one dense
// layer into a softmax over class_names) is implicit and always last, so it
// can be detached for feature extraction.
struct ModelSpec {
  std::string profile = "custom";
  int input_h = 64;
  int input_w = 64;
  int input_c = 3;
  std::vector<LayerSpec> body;
  std::vector<std::string> class_names;

  int num_classes() const { return static_cast<int>(class_names.size()); }
  bool body_equal(const ModelSpec& other, std::string* first_diff) const;
};

// Bundled architectures. "minibn" is the default desk-scale profile
// (feature width 64); "paper1024" produces 1024-wide features.
ModelSpec make_profile(const std::string& name, int input_h, int input_w,
                       std::vector<std::string> class_names);

enum class Mode { train, infer };

template <typename T>
class Network {
 public:
  Network(const ModelSpec& spec, uint64_t init_seed);

  const ModelSpec& spec() const { return spec_; }
  int feature_dim() const { return feature_dim_; }
  int num_classes() const { return spec_.num_classes(); }

  // Flat trainable parameter store; body weights first, head weights last.
  std::vector<T>& params() { return params_; }
  const std::vector<T>& params() const { return params_; }
  size_t head_offset() const { return head_offset_; }

  // Batch-norm running statistics (mean then variance per layer).
  std::vector<T>& running() { return running_; }
  const std::vector<T>& running() const { return running_; }

  struct ForwardResult {
    std::vector<T> features;  // n x feature_dim
    std::vector<T> probs;     // n x num_classes
  };

  // Train mode normalizes by batch statistics and folds them into the
  // running estimates; infer mode uses the stored running statistics.
  ForwardResult forward(const T* batch, int n, Mode mode);

  // Head-free embedding; equals forward(...,infer).features and never
  // touches the head weights.
  std::vector<T> extract_features(const T* batch, int n) const;

  ForwardResult forward_infer(const T* batch, int n) const;

  struct BackwardResult {
    double loss = 0;       // data loss + lambda * l2
    double data_loss = 0;  // mean cross entropy
    std::vector<T> grads;  // aligned with params()
  };

  // Exact analytic gradients of mean cross-entropy + lambda * ||W||^2 with
  // batch-statistics normalization. Does not update running statistics.
  BackwardResult backward(const T* batch, int n, const std::vector<int>& labels,
                          double lambda) const;

  // backward() plus the running-statistics EMA update of a train-mode
  // forward pass; one optimizer step uses exactly one of these.
  BackwardResult train_step(const T* batch, int n,
                            const std::vector<int>& labels, double lambda);

  // Same objective value backward() differentiates; used by the finite
  // difference tests.
  double loss(const T* batch, int n, const std::vector<int>& labels,
              double lambda) const;

  // Sum of squares over regularized parameters (conv/dense weights and
  // biases; batch-norm gamma/beta excluded).
  double l2_sum() const;

  void init_weights(uint64_t seed);

  struct ParamSegment {
    LayerKind kind;
    size_t offset = 0;
    size_t count = 0;
    bool head = false;
    bool regularized = false;
  };
  const std::vector<ParamSegment>& param_segments() const { return segments_; }

 private:
  struct LayerInfo {
    LayerSpec spec;
    ops::TensorShape in_shape;   // per-sample (n = 1)
    ops::TensorShape out_shape;  // per-sample (n = 1)
    size_t param_offset = 0;
    size_t param_count = 0;
    size_t running_offset = 0;  // BN layers only
  };

  struct Workspace {
    std::vector<std::vector<T>> acts;
    std::vector<std::vector<int64_t>> pool_argmax;
    std::vector<ops::BnCache<T>> bn_caches;
    std::vector<T> logits;
    std::vector<T> probs;
  };

  void run_body(const T* batch, int n, Mode mode, T* mutable_running,
                Workspace& ws) const;
  void run_head(const std::vector<T>& features, int n, Workspace& ws) const;
  BackwardResult backward_impl(const T* batch, int n,
                               const std::vector<int>& labels, double lambda,
                               T* mutable_running) const;

  ModelSpec spec_;
  std::vector<LayerInfo> layers_;
  std::vector<ParamSegment> segments_;
  size_t head_offset_ = 0;
  int feature_dim_ = 0;
  std::vector<T> params_;
  std::vector<T> running_;
};

extern template class Network<float>;
extern template class Network<double>;

// Resizes/broadcasts an image to the model input spec and writes it as one
// row of a batch tensor.
void write_model_input(const Image& img, const ModelSpec& spec, float* out);

std::vector<float> to_model_input(const Image& img, const ModelSpec& spec);

}  // namespace visrec
