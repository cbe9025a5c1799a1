#pragma once

#include <atomic>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "artdet/layers.hpp"
#include "artdet/roi_pool.hpp"
#include "artdet/tensor.hpp"

namespace artdet {

enum class InitScheme {
  gaussian,  // N(0, init_std) everywhere
  msra,      // N(0, sqrt(2 / fan_in)) for conv and hidden fc layers
};

// Architecture of the two-stage detector: a convolutional backbone applied
// once per image, ROI pooling, and a fully connected head that ends in a
// two-way score projection and a four-value box projection.
struct NetworkSpec {
  std::string profile = "custom";
  int input_channels = 3;
  std::vector<LayerSpec> backbone;  // conv / relu / maxpool
  std::vector<LayerSpec> head;      // fc / relu / dropout
  RoiPoolConfig pool;
  InitScheme init = InitScheme::gaussian;
  double init_std = 0.01;
  double bbox_init_std = 0.001;

  // 2 conv layers, 6x6 ROI pool, 2 fc layers; feature stride 4.
  static NetworkSpec toy();
  // 4 conv layers, 6x6 ROI pool, 2 wider fc layers; feature stride 8.
  static NetworkSpec small();
  static NetworkSpec from_profile(const std::string& name);

  void validate() const;
  [[nodiscard]] int num_conv_layers() const;
  // Product of conv and pool strides in the backbone.
  [[nodiscard]] int feature_stride() const;
  // Channels produced by the last backbone layer.
  [[nodiscard]] int feature_channels() const;

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

std::string to_string(InitScheme scheme);
InitScheme init_scheme_from_string(const std::string& s);

template <typename T>
struct HeadOutput {
  BasicTensor<T> scores;  // (N,2,1,1) logits: background, person
  BasicTensor<T> bbox;    // (N,4,1,1) deltas
};

template <typename T>
class Network {
 public:
  Network(NetworkSpec spec, std::uint64_t seed);

  [[nodiscard]] const NetworkSpec& spec() const { return spec_; }

  // Marks the first `count` conv layers of the backbone frozen.
  void freeze_conv_layers(int count);
  [[nodiscard]] int frozen_conv_layers() const;

  // image: (1,C,H,W). Caches activations when training.
  BasicTensor<T> forward_backbone(const BasicTensor<T>& image, bool training);
  HeadOutput<T> forward_head(const BasicTensor<T>& pooled, bool training);

  // Inference-only passes; no caches, no dropout, safe to share across
  // threads.
  BasicTensor<T> infer_backbone(const BasicTensor<T>& image) const;
  HeadOutput<T> infer_head(const BasicTensor<T>& pooled) const;

  // Backpropagates the loss gradients through the head; stores parameter
  // gradients and returns the gradient w.r.t. the pooled features.
  BasicTensor<T> backward_head(const BasicTensor<T>& score_grad,
                               const BasicTensor<T>& bbox_grad);
  // Backpropagates a feature-map gradient through the backbone. Returns the
  // image gradient when requested (used by gradient checks).
  BasicTensor<T> backward_backbone(const BasicTensor<T>& feature_grad,
                                   bool need_image_grad = false);

  // Momentum SGD on every non-frozen layer: v <- mu*v - lr*g; w <- w + v.
  void sgd_step(double learning_rate, double momentum);
  void zero_grads();

  // Parameter views in a fixed order: backbone, head, score, bbox.
  struct ParamSlot {
    const LayerSpec* spec;
    LayerParams<T>* params;
    LayerParams<T>* grads;
    LayerParams<T>* velocity;
  };
  std::vector<ParamSlot> param_slots();
  struct ConstParamSlot {
    const LayerSpec* spec;
    const LayerParams<T>* params;
  };
  std::vector<ConstParamSlot> param_slots() const;

  std::vector<LayerParams<T>>& backbone_params() { return backbone_params_; }
  std::vector<LayerParams<T>>& head_params() { return head_params_; }
  LayerParams<T>& score_params() { return score_params_; }
  LayerParams<T>& bbox_params() { return bbox_params_; }
  const std::vector<LayerParams<T>>& backbone_params() const {
    return backbone_params_;
  }
  const std::vector<LayerParams<T>>& head_params() const {
    return head_params_;
  }
  const LayerParams<T>& score_params() const { return score_params_; }
  const LayerParams<T>& bbox_params() const { return bbox_params_; }

  std::mt19937_64& rng() { return rng_; }
  const std::mt19937_64& rng() const { return rng_; }

  // Number of backbone forward passes since construction.
  [[nodiscard]] std::uint64_t backbone_invocations() const {
    return backbone_invocations_.value.load();
  }

  [[nodiscard]] bool all_params_finite() const;

  static const LayerSpec& score_spec();
  static const LayerSpec& bbox_spec();

 private:
  void init_params(std::uint64_t seed);

  NetworkSpec spec_;
  std::mt19937_64 rng_;
  std::vector<LayerParams<T>> backbone_params_, backbone_grads_, backbone_vel_;
  std::vector<LayerParams<T>> head_params_, head_grads_, head_vel_;
  LayerParams<T> score_params_, score_grads_, score_vel_;
  LayerParams<T> bbox_params_, bbox_grads_, bbox_vel_;
  std::vector<LayerCache<T>> backbone_cache_, head_cache_;
  LayerCache<T> score_cache_, bbox_cache_;
  struct Counter {
    std::atomic<std::uint64_t> value{0};
    Counter() = default;
    Counter(const Counter& o) : value(o.value.load()) {}
    Counter& operator=(const Counter& o) {
      value = o.value.load();
      return *this;
    }
  };
  mutable Counter backbone_invocations_;
};

// Plain momentum update of one layer; exposed for unit tests.
template <typename T>
void sgd_update(LayerParams<T>& params, const LayerParams<T>& grads,
                LayerParams<T>& velocity, double learning_rate,
                double momentum);

}  // namespace artdet
