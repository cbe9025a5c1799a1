#include "artdet/network.hpp"

#include <cmath>

#include "artdet/errors.hpp"

namespace artdet {

NetworkSpec NetworkSpec::toy() {
  NetworkSpec s;
  s.profile = "toy";
  s.backbone = {LayerSpec::conv("conv1", 16, 5, 1, 2), LayerSpec::relu("relu1"),
                LayerSpec::maxpool("pool1", 2, 2),
                LayerSpec::conv("conv2", 32, 3, 1, 1), LayerSpec::relu("relu2"),
                LayerSpec::maxpool("pool2", 2, 2)};
  s.head = {LayerSpec::fc("fc6", 128), LayerSpec::relu("relu6"),
            LayerSpec::dropout("drop6", 0.75), LayerSpec::fc("fc7", 128),
            LayerSpec::relu("relu7"), LayerSpec::dropout("drop7", 0.75)};
  s.pool = RoiPoolConfig{6, 6, 0.25};
  s.init = InitScheme::msra;
  return s;
}

NetworkSpec NetworkSpec::small() {
  NetworkSpec s;
  s.profile = "small";
  s.backbone = {LayerSpec::conv("conv1", 32, 5, 1, 2), LayerSpec::relu("relu1"),
                LayerSpec::maxpool("pool1", 2, 2),
                LayerSpec::conv("conv2", 64, 3, 1, 1), LayerSpec::relu("relu2"),
                LayerSpec::maxpool("pool2", 2, 2),
                LayerSpec::conv("conv3", 64, 3, 1, 1), LayerSpec::relu("relu3"),
                LayerSpec::maxpool("pool3", 2, 2),
                LayerSpec::conv("conv4", 128, 3, 1, 1),
                LayerSpec::relu("relu4")};
  s.head = {LayerSpec::fc("fc6", 512), LayerSpec::relu("relu6"),
            LayerSpec::dropout("drop6", 0.5), LayerSpec::fc("fc7", 512),
            LayerSpec::relu("relu7"), LayerSpec::dropout("drop7", 0.5)};
  s.pool = RoiPoolConfig{6, 6, 0.125};
  s.init = InitScheme::msra;
  return s;
}

NetworkSpec NetworkSpec::from_profile(const std::string& name) {
  if (name == "toy") return toy();
  if (name == "small") return small();
  throw ConfigError("unknown network profile '" + name +
                    "' (expected toy or small)");
}

std::string to_string(InitScheme scheme) {
  return scheme == InitScheme::msra ? "msra" : "gaussian";
}

InitScheme init_scheme_from_string(const std::string& s) {
  if (s == "msra") return InitScheme::msra;
  if (s == "gaussian") return InitScheme::gaussian;
  throw ConfigError("unknown init scheme '" + s + "'");
}

void NetworkSpec::validate() const {
  if (input_channels <= 0) throw ConfigError("input_channels must be > 0");
  for (const auto& l : backbone) {
    l.validate();
    const auto k = l.kind();
    if (k != LayerKind::conv && k != LayerKind::relu &&
        k != LayerKind::maxpool) {
      throw ConfigError("layer '" + l.name + "' (" + to_string(k) +
                        ") is not allowed in the backbone");
    }
  }
  for (const auto& l : head) {
    l.validate();
    const auto k = l.kind();
    if (k != LayerKind::fc && k != LayerKind::relu &&
        k != LayerKind::dropout) {
      throw ConfigError("layer '" + l.name + "' (" + to_string(k) +
                        ") is not allowed in the head");
    }
  }
  if (num_conv_layers() == 0) {
    throw ConfigError("backbone needs at least one conv layer");
  }
  pool.validate();
  if (!(init_std > 0) || !(bbox_init_std > 0)) {
    throw ConfigError("init std must be positive");
  }
}

int NetworkSpec::num_conv_layers() const {
  int n = 0;
  for (const auto& l : backbone) n += l.kind() == LayerKind::conv;
  return n;
}

int NetworkSpec::feature_stride() const {
  int s = 1;
  for (const auto& l : backbone) {
    if (const auto* c = std::get_if<ConvParams>(&l.hyper)) s *= c->stride;
    if (const auto* p = std::get_if<MaxPoolParams>(&l.hyper)) s *= p->stride;
  }
  return s;
}

int NetworkSpec::feature_channels() const {
  int c = input_channels;
  for (const auto& l : backbone) {
    if (const auto* p = std::get_if<ConvParams>(&l.hyper)) c = p->out_channels;
  }
  return c;
}

template <typename T>
const LayerSpec& Network<T>::score_spec() {
  static const LayerSpec s = LayerSpec::fc("cls_score", 2);
  return s;
}

template <typename T>
const LayerSpec& Network<T>::bbox_spec() {
  static const LayerSpec s = LayerSpec::fc("bbox_pred", 4);
  return s;
}

template <typename T>
Network<T>::Network(NetworkSpec spec, std::uint64_t seed)
    : spec_(std::move(spec)), rng_(seed) {
  spec_.validate();
  init_params(seed);
}

template <typename T>
void Network<T>::init_params(std::uint64_t seed) {
  std::mt19937_64 init_rng(seed ^ 0x9e3779b97f4a7c15ULL);
  const auto make = [&](const LayerSpec& l, const Shape& in, double std_dev) {
    LayerParams<T> p;
    p.weight = BasicTensor<T>(l.weight_shape(in));
    p.bias = BasicTensor<T>(l.bias_shape());
    std::normal_distribution<double> normal(0.0, std_dev);
    for (auto& v : p.weight.data()) v = static_cast<T>(normal(init_rng));
    return p;
  };
  const auto hidden_std = [&](const Shape& w) {
    if (spec_.init == InitScheme::msra) {
      const double fan_in = static_cast<double>(w.c) * w.h * w.w;
      return std::sqrt(2.0 / fan_in);
    }
    return spec_.init_std;
  };

  Shape in{1, spec_.input_channels, 1, 1};
  for (const auto& l : spec_.backbone) {
    if (l.has_params()) {
      backbone_params_.push_back(make(l, in, hidden_std(l.weight_shape(in))));
      in.c = std::get<ConvParams>(l.hyper).out_channels;
    } else {
      backbone_params_.emplace_back();
    }
  }
  Shape feat{1, spec_.feature_channels() * spec_.pool.grid_h * spec_.pool.grid_w,
             1, 1};
  for (const auto& l : spec_.head) {
    if (l.has_params()) {
      head_params_.push_back(make(l, feat, hidden_std(l.weight_shape(feat))));
      feat.c = std::get<FcParams>(l.hyper).out_dims;
    } else {
      head_params_.emplace_back();
    }
  }
  score_params_ = make(score_spec(), feat, spec_.init_std);
  bbox_params_ = make(bbox_spec(), feat, spec_.bbox_init_std);

  const auto zeros_like = [](const std::vector<LayerParams<T>>& src) {
    std::vector<LayerParams<T>> out(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) {
      out[i].weight = BasicTensor<T>(src[i].weight.shape());
      out[i].bias = BasicTensor<T>(src[i].bias.shape());
    }
    return out;
  };
  backbone_grads_ = zeros_like(backbone_params_);
  backbone_vel_ = zeros_like(backbone_params_);
  head_grads_ = zeros_like(head_params_);
  head_vel_ = zeros_like(head_params_);
  score_grads_ = zeros_like({score_params_})[0];
  score_vel_ = zeros_like({score_params_})[0];
  bbox_grads_ = zeros_like({bbox_params_})[0];
  bbox_vel_ = zeros_like({bbox_params_})[0];
  backbone_cache_.resize(spec_.backbone.size());
  head_cache_.resize(spec_.head.size());
}

template <typename T>
void Network<T>::freeze_conv_layers(int count) {
  const int total = spec_.num_conv_layers();
  if (count < 0 || count > total) {
    throw ConfigError("fixed layers F=" + std::to_string(count) +
                      " outside [0, " + std::to_string(total) + "]");
  }
  int seen = 0;
  for (auto& l : spec_.backbone) {
    if (l.kind() == LayerKind::conv) {
      l.frozen = seen < count;
      ++seen;
    }
  }
}

template <typename T>
int Network<T>::frozen_conv_layers() const {
  int n = 0;
  for (const auto& l : spec_.backbone) {
    n += l.kind() == LayerKind::conv && l.frozen;
  }
  return n;
}

template <typename T>
BasicTensor<T> Network<T>::forward_backbone(const BasicTensor<T>& image,
                                            bool training) {
  if (image.shape().n != 1 || image.shape().c != spec_.input_channels) {
    throw ConfigError("backbone expects a (1," +
                      std::to_string(spec_.input_channels) +
                      ",H,W) image, got " + image.shape().str());
  }
  ++backbone_invocations_.value;
  BasicTensor<T> x = image;
  for (std::size_t i = 0; i < spec_.backbone.size(); ++i) {
    x = layer_forward(spec_.backbone[i], backbone_params_[i], x, training,
                      training ? &backbone_cache_[i] : nullptr, &rng_);
  }
  return x;
}

template <typename T>
HeadOutput<T> Network<T>::forward_head(const BasicTensor<T>& pooled,
                                       bool training) {
  BasicTensor<T> x = pooled;
  for (std::size_t i = 0; i < spec_.head.size(); ++i) {
    x = layer_forward(spec_.head[i], head_params_[i], x, training,
                      training ? &head_cache_[i] : nullptr, &rng_);
  }
  HeadOutput<T> out;
  out.scores = layer_forward(score_spec(), score_params_, x, training,
                             training ? &score_cache_ : nullptr, &rng_);
  out.bbox = layer_forward(bbox_spec(), bbox_params_, x, training,
                           training ? &bbox_cache_ : nullptr, &rng_);
  return out;
}

template <typename T>
BasicTensor<T> Network<T>::infer_backbone(const BasicTensor<T>& image) const {
  if (image.shape().n != 1 || image.shape().c != spec_.input_channels) {
    throw ConfigError("backbone expects a (1," +
                      std::to_string(spec_.input_channels) +
                      ",H,W) image, got " + image.shape().str());
  }
  ++backbone_invocations_.value;
  BasicTensor<T> x = image;
  for (std::size_t i = 0; i < spec_.backbone.size(); ++i) {
    x = layer_forward<T>(spec_.backbone[i], backbone_params_[i], x, false,
                         nullptr, nullptr);
  }
  return x;
}

template <typename T>
HeadOutput<T> Network<T>::infer_head(const BasicTensor<T>& pooled) const {
  BasicTensor<T> x = pooled;
  for (std::size_t i = 0; i < spec_.head.size(); ++i) {
    x = layer_forward<T>(spec_.head[i], head_params_[i], x, false, nullptr,
                         nullptr);
  }
  return {layer_forward<T>(score_spec(), score_params_, x, false, nullptr,
                           nullptr),
          layer_forward<T>(bbox_spec(), bbox_params_, x, false, nullptr,
                           nullptr)};
}

template <typename T>
BasicTensor<T> Network<T>::backward_head(const BasicTensor<T>& score_grad,
                                         const BasicTensor<T>& bbox_grad) {
  BasicTensor<T> g = layer_backward(score_spec(), score_params_, score_cache_,
                                    score_grad, &score_grads_);
  const BasicTensor<T> gb = layer_backward(bbox_spec(), bbox_params_,
                                           bbox_cache_, bbox_grad, &bbox_grads_);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += gb[i];
  for (std::size_t i = spec_.head.size(); i-- > 0;) {
    g = layer_backward(spec_.head[i], head_params_[i], head_cache_[i], g,
                       spec_.head[i].has_params() ? &head_grads_[i] : nullptr);
  }
  return g;
}

template <typename T>
BasicTensor<T> Network<T>::backward_backbone(const BasicTensor<T>& feature_grad,
                                             bool need_image_grad) {
  // Layers below the first trainable one need no backward pass unless the
  // caller wants the image gradient.
  std::size_t stop = 0;
  if (!need_image_grad) {
    stop = spec_.backbone.size();
    for (std::size_t i = 0; i < spec_.backbone.size(); ++i) {
      if (spec_.backbone[i].has_params() && !spec_.backbone[i].frozen) {
        stop = i;
        break;
      }
    }
  }
  BasicTensor<T> g = feature_grad;
  for (std::size_t i = spec_.backbone.size(); i-- > stop;) {
    const LayerSpec& l = spec_.backbone[i];
    const bool want_params = l.has_params() && !l.frozen;
    g = layer_backward(l, backbone_params_[i], backbone_cache_[i], g,
                       want_params ? &backbone_grads_[i] : nullptr,
                       need_image_grad || i > stop);
  }
  return need_image_grad ? g : BasicTensor<T>{};
}

template <typename T>
void sgd_update(LayerParams<T>& params, const LayerParams<T>& grads,
                LayerParams<T>& velocity, double learning_rate,
                double momentum) {
  const auto step = [&](BasicTensor<T>& w, const BasicTensor<T>& g,
                        BasicTensor<T>& v) {
    if (w.shape() != g.shape() || w.shape() != v.shape()) {
      throw ConfigError("sgd: gradient shape " + g.shape().str() +
                        " does not match parameter shape " + w.shape().str());
    }
    const T mu = static_cast<T>(momentum);
    const T lr = static_cast<T>(learning_rate);
    for (std::size_t i = 0; i < w.size(); ++i) {
      v[i] = mu * v[i] - lr * g[i];
      w[i] += v[i];
    }
  };
  step(params.weight, grads.weight, velocity.weight);
  step(params.bias, grads.bias, velocity.bias);
}

template <typename T>
std::vector<typename Network<T>::ParamSlot> Network<T>::param_slots() {
  std::vector<ParamSlot> slots;
  for (std::size_t i = 0; i < spec_.backbone.size(); ++i) {
    if (spec_.backbone[i].has_params()) {
      slots.push_back({&spec_.backbone[i], &backbone_params_[i],
                       &backbone_grads_[i], &backbone_vel_[i]});
    }
  }
  for (std::size_t i = 0; i < spec_.head.size(); ++i) {
    if (spec_.head[i].has_params()) {
      slots.push_back({&spec_.head[i], &head_params_[i], &head_grads_[i],
                       &head_vel_[i]});
    }
  }
  slots.push_back({&score_spec(), &score_params_, &score_grads_, &score_vel_});
  slots.push_back({&bbox_spec(), &bbox_params_, &bbox_grads_, &bbox_vel_});
  return slots;
}

template <typename T>
std::vector<typename Network<T>::ConstParamSlot> Network<T>::param_slots()
    const {
  std::vector<ConstParamSlot> out;
  for (const auto& s : const_cast<Network<T>*>(this)->param_slots()) {
    out.push_back({s.spec, s.params});
  }
  return out;
}

template <typename T>
void Network<T>::sgd_step(double learning_rate, double momentum) {
  for (auto& s : param_slots()) {
    if (s.spec->frozen) continue;
    sgd_update(*s.params, *s.grads, *s.velocity, learning_rate, momentum);
  }
}

template <typename T>
void Network<T>::zero_grads() {
  for (auto& s : param_slots()) {
    s.grads->weight.fill(T{0});
    s.grads->bias.fill(T{0});
  }
}

template <typename T>
bool Network<T>::all_params_finite() const {
  const auto ok = [](const LayerParams<T>& p) {
    return p.weight.all_finite() && p.bias.all_finite();
  };
  for (const auto& p : backbone_params_) if (!ok(p)) return false;
  for (const auto& p : head_params_) if (!ok(p)) return false;
  return ok(score_params_) && ok(bbox_params_);
}

template class Network<float>;
template class Network<double>;
template void sgd_update(LayerParams<float>&, const LayerParams<float>&,
                         LayerParams<float>&, double, double);
template void sgd_update(LayerParams<double>&, const LayerParams<double>&,
                         LayerParams<double>&, double, double);

}  // namespace artdet
