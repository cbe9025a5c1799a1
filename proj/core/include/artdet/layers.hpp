#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "artdet/tensor.hpp"

namespace artdet {

enum class LayerKind { conv, relu, maxpool, fc, dropout };

std::string to_string(LayerKind kind);

struct ConvParams {
  int out_channels = 0;
  int kernel = 0;
  int stride = 1;
  int pad = 0;
  friend bool operator==(const ConvParams&, const ConvParams&) = default;
};
struct ReluParams {
  friend bool operator==(const ReluParams&, const ReluParams&) = default;
};
struct MaxPoolParams {
  int window = 0;
  int stride = 0;
  friend bool operator==(const MaxPoolParams&, const MaxPoolParams&) = default;
};
struct FcParams {
  int out_dims = 0;
  friend bool operator==(const FcParams&, const FcParams&) = default;
};
struct DropoutParams {
  double keep_prob = 1.0;
  friend bool operator==(const DropoutParams&, const DropoutParams&) = default;
};

using LayerHyper =
    std::variant<ConvParams, ReluParams, MaxPoolParams, FcParams, DropoutParams>;

// One layer of the network: its kind, hyperparameters and freezing flag.
struct LayerSpec {
  std::string name;
  LayerHyper hyper;
  bool frozen = false;

  static LayerSpec conv(std::string name, int out_channels, int kernel,
                        int stride = 1, int pad = 0);
  static LayerSpec relu(std::string name);
  static LayerSpec maxpool(std::string name, int window, int stride);
  static LayerSpec fc(std::string name, int out_dims);
  static LayerSpec dropout(std::string name, double keep_prob);

  [[nodiscard]] LayerKind kind() const;
  [[nodiscard]] bool has_params() const;

  // Throws ConfigError naming the layer on bad hyperparameters.
  void validate() const;
  // Output extents for a given input; throws ConfigError naming the layer
  // when the input cannot feed this layer.
  [[nodiscard]] Shape output_shape(const Shape& in) const;
  // Weight and bias extents for a given input shape (empty for parameterless
  // layers).
  [[nodiscard]] Shape weight_shape(const Shape& in) const;
  [[nodiscard]] Shape bias_shape() const;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

template <typename T>
struct LayerParams {
  BasicTensor<T> weight;
  BasicTensor<T> bias;
};

// State retained by a forward pass for the matching backward pass.
template <typename T>
struct LayerCache {
  bool valid = false;
  BasicTensor<T> input;
  std::vector<std::int32_t> argmax;  // maxpool
  std::vector<T> mask;               // dropout, already scaled by 1/keep
};

template <typename T>
BasicTensor<T> layer_forward(const LayerSpec& spec, const LayerParams<T>& params,
                             const BasicTensor<T>& input, bool training,
                             LayerCache<T>* cache, std::mt19937_64* rng);

// Returns the input gradient (empty when need_input_grad is false) and
// writes parameter gradients into *param_grads when the layer has any.
template <typename T>
BasicTensor<T> layer_backward(const LayerSpec& spec,
                              const LayerParams<T>& params,
                              const LayerCache<T>& cache,
                              const BasicTensor<T>& upstream,
                              LayerParams<T>* param_grads,
                              bool need_input_grad = true);

}  // namespace artdet
