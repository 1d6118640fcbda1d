#include "visrec/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "visrec/errors.hpp"
#include "visrec/rng.hpp"

namespace visrec {

const char* layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv: return "conv";
    case LayerKind::batchnorm: return "batchnorm";
    case LayerKind::relu: return "relu";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::globalavgpool: return "globalavgpool";
    case LayerKind::dense: return "dense";
    case LayerKind::softmax: return "softmax";
  }
  return "?";
}

LayerKind layer_kind_from_name(const std::string& name) {
  for (LayerKind k : {LayerKind::conv, LayerKind::batchnorm, LayerKind::relu,
                      LayerKind::maxpool, LayerKind::globalavgpool,
                      LayerKind::dense, LayerKind::softmax}) {
    if (name == layer_kind_name(k)) return k;
  }
  throw DataError("unknown layer kind '" + name + "'");
}

LayerSpec LayerSpec::conv2d(int kernel, int stride, int padding,
                            int channels) {
  LayerSpec s;
  s.kind = LayerKind::conv;
  s.kernel = kernel;
  s.stride = stride;
  s.padding = padding;
  s.out_channels = channels;
  return s;
}

LayerSpec LayerSpec::batchnorm(double epsilon, double momentum) {
  LayerSpec s;
  s.kind = LayerKind::batchnorm;
  s.epsilon = epsilon;
  s.momentum = momentum;
  return s;
}

LayerSpec LayerSpec::relu() {
  LayerSpec s;
  s.kind = LayerKind::relu;
  return s;
}

LayerSpec LayerSpec::maxpool(int kernel, int stride) {
  LayerSpec s;
  s.kind = LayerKind::maxpool;
  s.kernel = kernel;
  s.stride = stride;
  return s;
}

LayerSpec LayerSpec::globalavgpool() {
  LayerSpec s;
  s.kind = LayerKind::globalavgpool;
  return s;
}

bool ModelSpec::body_equal(const ModelSpec& other,
                           std::string* first_diff) const {
  if (input_h != other.input_h || input_w != other.input_w ||
      input_c != other.input_c) {
    if (first_diff) *first_diff = "input shape";
    return false;
  }
  size_t n = std::min(body.size(), other.body.size());
  for (size_t i = 0; i < n; ++i) {
    if (!(body[i] == other.body[i])) {
      if (first_diff) {
        *first_diff = "layer " + std::to_string(i) + " (" +
                      layer_kind_name(body[i].kind) + " vs " +
                      layer_kind_name(other.body[i].kind) + ")";
      }
      return false;
    }
  }
  if (body.size() != other.body.size()) {
    if (first_diff) {
      *first_diff = "layer count " + std::to_string(body.size()) + " vs " +
                    std::to_string(other.body.size());
    }
    return false;
  }
  return true;
}

ModelSpec make_profile(const std::string& name, int input_h, int input_w,
                       std::vector<std::string> class_names) {
  ModelSpec spec;
  spec.profile = name;
  spec.input_h = input_h;
  spec.input_w = input_w;
  spec.input_c = 3;
  spec.class_names = std::move(class_names);
  auto block = [&](int channels, bool pool) {
    spec.body.push_back(LayerSpec::conv2d(3, 1, 1, channels));
    spec.body.push_back(LayerSpec::batchnorm());
    spec.body.push_back(LayerSpec::relu());
    if (pool) spec.body.push_back(LayerSpec::maxpool(2, 2));
  };
  if (name == "minibn") {
    block(16, true);
    block(16, true);
    block(16, true);
    block(64, false);
    spec.body.push_back(LayerSpec::globalavgpool());
  } else if (name == "paper1024") {
    block(32, true);
    block(64, true);
    block(128, true);
    block(1024, false);
    spec.body.push_back(LayerSpec::globalavgpool());
  } else {
    throw ConfigError("unknown model profile '" + name +
                      "' (expected minibn or paper1024)");
  }
  return spec;
}

template <typename T>
Network<T>::Network(const ModelSpec& spec, uint64_t init_seed) : spec_(spec) {
  if (spec_.class_names.empty()) {
    throw ConfigError("model needs at least one class");
  }
  if (spec_.input_h < 1 || spec_.input_w < 1 ||
      (spec_.input_c != 1 && spec_.input_c != 3)) {
    throw ConfigError("bad model input shape");
  }
  ops::TensorShape shape{1, spec_.input_h, spec_.input_w, spec_.input_c};
  size_t param_pos = 0;
  size_t running_pos = 0;
  for (const LayerSpec& ls : spec_.body) {
    LayerInfo info;
    info.spec = ls;
    info.in_shape = shape;
    switch (ls.kind) {
      case LayerKind::conv: {
        if (ls.kernel < 1 || ls.stride < 1 || ls.padding < 0 ||
            ls.out_channels < 1) {
          throw ConfigError("bad conv layer parameters");
        }
        shape = ops::conv2d_out_shape(shape, ls.kernel, ls.stride, ls.padding,
                                      ls.out_channels);
        info.param_offset = param_pos;
        info.param_count = static_cast<size_t>(ls.kernel) * ls.kernel *
                               info.in_shape.c * ls.out_channels +
                           ls.out_channels;
        break;
      }
      case LayerKind::batchnorm: {
        if (ls.epsilon <= 0) throw ConfigError("batchnorm epsilon must be > 0");
        info.param_offset = param_pos;
        info.param_count = 2 * static_cast<size_t>(shape.c);
        info.running_offset = running_pos;
        running_pos += 2 * static_cast<size_t>(shape.c);
        break;
      }
      case LayerKind::relu:
        break;
      case LayerKind::maxpool: {
        if (ls.kernel < 1 || ls.stride < 1) {
          throw ConfigError("bad maxpool layer parameters");
        }
        shape = ops::pool_out_shape(shape, ls.kernel, ls.stride);
        break;
      }
      case LayerKind::globalavgpool: {
        shape = {1, 1, 1, shape.c};
        break;
      }
      case LayerKind::dense:
      case LayerKind::softmax:
        throw ConfigError(
            "dense/softmax belong to the classifier head, not the body");
    }
    info.out_shape = shape;
    param_pos += info.param_count;
    if (info.param_count > 0) {
      segments_.push_back({ls.kind, info.param_offset, info.param_count,
                           false, ls.kind == LayerKind::conv});
    }
    layers_.push_back(info);
  }
  feature_dim_ = shape.h * shape.w * shape.c;
  head_offset_ = param_pos;
  size_t head_count =
      static_cast<size_t>(feature_dim_) * spec_.num_classes() +
      spec_.num_classes();
  segments_.push_back(
      {LayerKind::dense, head_offset_, head_count, true, true});
  params_.assign(param_pos + head_count, T(0));
  running_.assign(running_pos, T(0));
  init_weights(init_seed);
}

template <typename T>
void Network<T>::init_weights(uint64_t seed) {
  Rng rng(seed);
  size_t li = 0;
  for (const LayerInfo& info : layers_) {
    (void)li;
    if (info.spec.kind == LayerKind::conv) {
      size_t kernel_count = info.param_count -
                            static_cast<size_t>(info.spec.out_channels);
      double fan_in = static_cast<double>(info.spec.kernel) *
                      info.spec.kernel * info.in_shape.c;
      double limit = std::sqrt(6.0 / fan_in);
      T* w = params_.data() + info.param_offset;
      for (size_t i = 0; i < kernel_count; ++i) {
        w[i] = static_cast<T>(rng.uniform(-limit, limit));
      }
      for (size_t i = kernel_count; i < info.param_count; ++i) w[i] = T(0);
    } else if (info.spec.kind == LayerKind::batchnorm) {
      T* w = params_.data() + info.param_offset;
      size_t c = info.param_count / 2;
      for (size_t i = 0; i < c; ++i) w[i] = T(1);          // gamma
      for (size_t i = c; i < 2 * c; ++i) w[i] = T(0);      // beta
      T* r = running_.data() + info.running_offset;
      for (size_t i = 0; i < c; ++i) r[i] = T(0);          // running mean
      for (size_t i = c; i < 2 * c; ++i) r[i] = T(1);      // running var
    }
  }
  // head
  {
    double limit = std::sqrt(6.0 / feature_dim_);
    T* w = params_.data() + head_offset_;
    size_t wcount = static_cast<size_t>(feature_dim_) * spec_.num_classes();
    for (size_t i = 0; i < wcount; ++i) {
      w[i] = static_cast<T>(rng.uniform(-limit, limit));
    }
    for (size_t i = wcount; i < wcount + spec_.num_classes(); ++i) w[i] = T(0);
  }
}

template <typename T>
void Network<T>::run_body(const T* batch, int n, Mode mode,
                          T* mutable_running, Workspace& ws) const {
  ws.acts.resize(layers_.size());
  ws.pool_argmax.assign(layers_.size(), {});
  ws.bn_caches.assign(layers_.size(), {});
  const T* cur = batch;
  for (size_t i = 0; i < layers_.size(); ++i) {
    const LayerInfo& info = layers_[i];
    ops::TensorShape is = info.in_shape;
    is.n = n;
    ops::TensorShape os = info.out_shape;
    os.n = n;
    ws.acts[i].resize(static_cast<size_t>(os.count()));
    T* out = ws.acts[i].data();
    const T* w = params_.data() + info.param_offset;
    switch (info.spec.kind) {
      case LayerKind::conv: {
        const T* bias = w + info.param_count - info.spec.out_channels;
        ops::conv2d_forward(cur, is, w, info.spec.kernel, info.spec.stride,
                            info.spec.padding, info.spec.out_channels, bias,
                            out);
        break;
      }
      case LayerKind::batchnorm: {
        const T* gamma = w;
        const T* beta = w + info.param_count / 2;
        size_t c = info.param_count / 2;
        if (mode == Mode::train) {
          T* rm = mutable_running ? mutable_running + info.running_offset
                                  : nullptr;
          T* rv = rm ? rm + c : nullptr;
          ops::batchnorm_forward_train(cur, is, gamma, beta, out,
                                       ws.bn_caches[i], rm, rv,
                                       info.spec.momentum, info.spec.epsilon,
                                       mutable_running != nullptr);
        } else {
          const T* rm = running_.data() + info.running_offset;
          ops::batchnorm_forward_infer(cur, is, gamma, beta, rm, rm + c,
                                       info.spec.epsilon, out);
        }
        break;
      }
      case LayerKind::relu:
        ops::relu_forward(cur, is.count(), out);
        break;
      case LayerKind::maxpool: {
        ws.pool_argmax[i].resize(static_cast<size_t>(os.count()));
        ops::maxpool_forward(cur, is, info.spec.kernel, info.spec.stride, out,
                             ws.pool_argmax[i].data());
        break;
      }
      case LayerKind::globalavgpool:
        ops::global_avg_pool_forward(cur, is, out);
        break;
      default:
        throw ConfigError("unexpected layer kind in body");
    }
    cur = out;
  }
}

template <typename T>
void Network<T>::run_head(const std::vector<T>& features, int n,
                          Workspace& ws) const {
  const int k = spec_.num_classes();
  ws.logits.resize(static_cast<size_t>(n) * k);
  ws.probs.resize(static_cast<size_t>(n) * k);
  const T* w = params_.data() + head_offset_;
  const T* bias = w + static_cast<size_t>(feature_dim_) * k;
  ops::dense_forward(features.data(), n, feature_dim_, w, bias, k,
                     ws.logits.data());
  ops::softmax_rows(ws.logits.data(), n, k, ws.probs.data());
}

template <typename T>
typename Network<T>::ForwardResult Network<T>::forward(const T* batch, int n,
                                                       Mode mode) {
  Workspace ws;
  run_body(batch, n, mode,
           mode == Mode::train ? running_.data() : nullptr, ws);
  ForwardResult res;
  res.features = std::move(ws.acts.back());
  run_head(res.features, n, ws);
  res.probs = std::move(ws.probs);
  return res;
}

template <typename T>
typename Network<T>::ForwardResult Network<T>::forward_infer(const T* batch,
                                                             int n) const {
  Workspace ws;
  run_body(batch, n, Mode::infer, nullptr, ws);
  ForwardResult res;
  res.features = std::move(ws.acts.back());
  run_head(res.features, n, ws);
  res.probs = std::move(ws.probs);
  return res;
}

template <typename T>
std::vector<T> Network<T>::extract_features(const T* batch, int n) const {
  Workspace ws;
  run_body(batch, n, Mode::infer, nullptr, ws);
  return std::move(ws.acts.back());
}

namespace {

template <typename T>
double mean_cross_entropy(const std::vector<T>& probs, int n, int k,
                          const std::vector<int>& labels) {
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    double p = static_cast<double>(probs[static_cast<size_t>(i) * k +
                                         labels[static_cast<size_t>(i)]]);
    total += -std::log(std::max(p, 1e-12));
  }
  return total / n;
}

}  // namespace

template <typename T>
double Network<T>::loss(const T* batch, int n, const std::vector<int>& labels,
                        double lambda) const {
  Workspace ws;
  run_body(batch, n, Mode::train, nullptr, ws);
  run_head(ws.acts.back(), n, ws);
  return mean_cross_entropy(ws.probs, n, spec_.num_classes(), labels) +
         lambda * l2_sum();
}

template <typename T>
typename Network<T>::BackwardResult Network<T>::backward(
    const T* batch, int n, const std::vector<int>& labels,
    double lambda) const {
  return backward_impl(batch, n, labels, lambda, nullptr);
}

template <typename T>
typename Network<T>::BackwardResult Network<T>::train_step(
    const T* batch, int n, const std::vector<int>& labels, double lambda) {
  return backward_impl(batch, n, labels, lambda, running_.data());
}

template <typename T>
typename Network<T>::BackwardResult Network<T>::backward_impl(
    const T* batch, int n, const std::vector<int>& labels, double lambda,
    T* mutable_running) const {
  const int k = spec_.num_classes();
  if (static_cast<int>(labels.size()) != n) {
    throw DataError("backward: labels/batch size mismatch");
  }
  for (int label : labels) {
    if (label < 0 || label >= k) throw DataError("backward: label out of range");
  }
  Workspace ws;
  run_body(batch, n, Mode::train, mutable_running, ws);
  run_head(ws.acts.back(), n, ws);

  BackwardResult res;
  res.data_loss = mean_cross_entropy(ws.probs, n, k, labels);
  res.grads.assign(params_.size(), T(0));

  // combined softmax + cross-entropy gradient on the logits
  std::vector<T> d_logits(static_cast<size_t>(n) * k);
  const T inv_n = T(1) / static_cast<T>(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < k; ++j) {
      T p = ws.probs[static_cast<size_t>(i) * k + j];
      T y = (j == labels[static_cast<size_t>(i)]) ? T(1) : T(0);
      d_logits[static_cast<size_t>(i) * k + j] = (p - y) * inv_n;
    }
  }

  // head
  std::vector<T> d_features(static_cast<size_t>(n) * feature_dim_, T(0));
  {
    const T* w = params_.data() + head_offset_;
    T* dw = res.grads.data() + head_offset_;
    T* db = dw + static_cast<size_t>(feature_dim_) * k;
    ops::dense_backward(ws.acts.back().data(), n, feature_dim_, w, k,
                        d_logits.data(), d_features.data(), dw, db);
  }

  // body, in reverse
  std::vector<T> d_next = std::move(d_features);
  for (size_t idx = layers_.size(); idx-- > 0;) {
    const LayerInfo& info = layers_[idx];
    ops::TensorShape is = info.in_shape;
    is.n = n;
    ops::TensorShape os = info.out_shape;
    os.n = n;
    const T* input =
        idx == 0 ? batch : ws.acts[idx - 1].data();
    std::vector<T> d_input(static_cast<size_t>(is.count()), T(0));
    const T* w = params_.data() + info.param_offset;
    T* dw = res.grads.data() + info.param_offset;
    switch (info.spec.kind) {
      case LayerKind::conv: {
        T* d_bias = dw + info.param_count - info.spec.out_channels;
        ops::conv2d_backward(input, is, w, info.spec.kernel, info.spec.stride,
                             info.spec.padding, info.spec.out_channels,
                             d_next.data(), d_input.data(), dw, d_bias);
        break;
      }
      case LayerKind::batchnorm: {
        size_t c = info.param_count / 2;
        ops::batchnorm_backward(is, w, ws.bn_caches[idx], d_next.data(),
                                d_input.data(), dw, dw + c);
        break;
      }
      case LayerKind::relu:
        ops::relu_backward(input, d_next.data(), is.count(), d_input.data());
        break;
      case LayerKind::maxpool:
        ops::maxpool_backward(os, ws.pool_argmax[idx].data(), d_next.data(),
                              d_input.data());
        break;
      case LayerKind::globalavgpool:
        ops::global_avg_pool_backward(is, d_next.data(), d_input.data());
        break;
      default:
        throw ConfigError("unexpected layer kind in body");
    }
    d_next = std::move(d_input);
  }

  // L2 term over regularized segments
  double l2 = 0.0;
  if (lambda != 0.0) {
    for (const ParamSegment& seg : segments_) {
      if (!seg.regularized) continue;
      const T* w = params_.data() + seg.offset;
      T* g = res.grads.data() + seg.offset;
      for (size_t i = 0; i < seg.count; ++i) {
        l2 += static_cast<double>(w[i]) * w[i];
        g[i] += static_cast<T>(2.0 * lambda * w[i]);
      }
    }
  }
  res.loss = res.data_loss + lambda * l2;
  return res;
}

template <typename T>
double Network<T>::l2_sum() const {
  double l2 = 0.0;
  for (const ParamSegment& seg : segments_) {
    if (!seg.regularized) continue;
    const T* w = params_.data() + seg.offset;
    for (size_t i = 0; i < seg.count; ++i) {
      l2 += static_cast<double>(w[i]) * w[i];
    }
  }
  return l2;
}

template class Network<float>;
template class Network<double>;

void write_model_input(const Image& img, const ModelSpec& spec, float* out) {
  const Image* src = &img;
  Image tmp;
  if (img.channels != spec.input_c) {
    tmp = broadcast_channels(img, spec.input_c);
    src = &tmp;
  }
  if (src->height != spec.input_h || src->width != spec.input_w) {
    tmp = resize_bilinear(*src, spec.input_h, spec.input_w);
    src = &tmp;
  }
  std::memcpy(out, src->data.data(), src->data.size() * sizeof(float));
}

std::vector<float> to_model_input(const Image& img, const ModelSpec& spec) {
  std::vector<float> out(static_cast<size_t>(spec.input_h) * spec.input_w *
                         spec.input_c);
  write_model_input(img, spec, out.data());
  return out;
}

}  // namespace visrec
