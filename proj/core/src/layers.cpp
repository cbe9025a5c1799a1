#include "artdet/layers.hpp"

#include <Eigen/Core>
#include <limits>

namespace artdet {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

[[noreturn]] void shape_error(const LayerSpec& spec, const std::string& what) {
  throw ConfigError("layer '" + spec.name + "' (" + to_string(spec.kind()) +
                    "): " + what);
}

int conv_out_extent(int in, int kernel, int stride, int pad) {
  return (in + 2 * pad - kernel) / stride + 1;
}

// Unfolds one image (C x H x W) into a (C*k*k) x (Ho*Wo) column matrix.
template <typename T>
void im2col(const T* img, int channels, int height, int width, int kernel,
            int stride, int pad, int out_h, int out_w, T* cols) {
  const int plane = out_h * out_w;
  for (int c = 0; c < channels; ++c) {
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        T* row = cols + ((c * kernel + ky) * kernel + kx) * plane;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky;
          T* dst = row + oy * out_w;
          if (iy < 0 || iy >= height) {
            std::fill(dst, dst + out_w, T{0});
            continue;
          }
          const T* src = img + (c * height + iy) * width;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + kx;
            dst[ox] = (ix >= 0 && ix < width) ? src[ix] : T{0};
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* cols, int channels, int height, int width, int kernel,
            int stride, int pad, int out_h, int out_w, T* img) {
  const int plane = out_h * out_w;
  for (int c = 0; c < channels; ++c) {
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        const T* row = cols + ((c * kernel + ky) * kernel + kx) * plane;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= height) continue;
          T* dst = img + (c * height + iy) * width;
          const T* src = row + oy * out_w;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < width) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

template <typename T>
void require_params(const LayerSpec& spec, const LayerParams<T>& params,
                    const Shape& in) {
  if (params.weight.shape() != spec.weight_shape(in) ||
      params.bias.shape() != spec.bias_shape()) {
    shape_error(spec, "parameter shape " + params.weight.shape().str() +
                          " does not match expected " +
                          spec.weight_shape(in).str());
  }
}

template <typename T>
BasicTensor<T> conv_forward(const LayerSpec& spec, const ConvParams& p,
                            const LayerParams<T>& params,
                            const BasicTensor<T>& in) {
  const Shape is = in.shape();
  const Shape os = spec.output_shape(is);
  require_params(spec, params, is);
  const int k_rows = is.c * p.kernel * p.kernel;
  const int plane = os.h * os.w;
  BasicTensor<T> out(os);
  std::vector<T> cols(static_cast<std::size_t>(k_rows) * plane);
  ConstMatMap<T> weight(params.weight.data().data(), os.c, k_rows);
  for (int n = 0; n < is.n; ++n) {
    im2col(in.plane(n, 0), is.c, is.h, is.w, p.kernel, p.stride, p.pad, os.h,
           os.w, cols.data());
    ConstMatMap<T> col_mat(cols.data(), k_rows, plane);
    MatMap<T> out_mat(out.plane(n, 0), os.c, plane);
    out_mat.noalias() = weight * col_mat;
    for (int c = 0; c < os.c; ++c) {
      out_mat.row(c).array() += params.bias[c];
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> conv_backward(const LayerSpec& spec, const ConvParams& p,
                             const LayerParams<T>& params,
                             const BasicTensor<T>& in,
                             const BasicTensor<T>& upstream,
                             LayerParams<T>* grads, bool need_input_grad) {
  const Shape is = in.shape();
  const Shape os = spec.output_shape(is);
  if (upstream.shape() != os) {
    shape_error(spec, "upstream gradient shape " + upstream.shape().str() +
                          " != output shape " + os.str());
  }
  const int k_rows = is.c * p.kernel * p.kernel;
  const int plane = os.h * os.w;
  std::vector<T> cols(static_cast<std::size_t>(k_rows) * plane);
  ConstMatMap<T> weight(params.weight.data().data(), os.c, k_rows);

  BasicTensor<T> in_grad;
  if (need_input_grad) in_grad = BasicTensor<T>(is);
  if (grads) {
    grads->weight = BasicTensor<T>(params.weight.shape());
    grads->bias = BasicTensor<T>(params.bias.shape());
  }
  for (int n = 0; n < is.n; ++n) {
    ConstMatMap<T> up_mat(upstream.plane(n, 0), os.c, plane);
    if (grads) {
      im2col(in.plane(n, 0), is.c, is.h, is.w, p.kernel, p.stride, p.pad,
             os.h, os.w, cols.data());
      ConstMatMap<T> col_mat(cols.data(), k_rows, plane);
      MatMap<T> gw(grads->weight.data().data(), os.c, k_rows);
      gw.noalias() += up_mat * col_mat.transpose();
      for (int c = 0; c < os.c; ++c) grads->bias[c] += up_mat.row(c).sum();
    }
    if (need_input_grad) {
      MatMap<T> col_grad(cols.data(), k_rows, plane);
      col_grad.noalias() = weight.transpose() * up_mat;
      col2im(cols.data(), is.c, is.h, is.w, p.kernel, p.stride, p.pad, os.h,
             os.w, in_grad.plane(n, 0));
    }
  }
  return in_grad;
}

template <typename T>
BasicTensor<T> fc_forward(const LayerSpec& spec, const LayerParams<T>& params,
                          const BasicTensor<T>& in) {
  const Shape is = in.shape();
  const Shape os = spec.output_shape(is);
  require_params(spec, params, is);
  const int in_dims = static_cast<int>(is.item_size());
  BasicTensor<T> out(os);
  ConstMatMap<T> x(in.data().data(), is.n, in_dims);
  ConstMatMap<T> weight(params.weight.data().data(), os.c, in_dims);
  MatMap<T> y(out.data().data(), is.n, os.c);
  y.noalias() = x * weight.transpose();
  for (int i = 0; i < is.n; ++i) {
    for (int o = 0; o < os.c; ++o) y(i, o) += params.bias[o];
  }
  return out;
}

template <typename T>
BasicTensor<T> fc_backward(const LayerSpec& spec, const LayerParams<T>& params,
                           const BasicTensor<T>& in,
                           const BasicTensor<T>& upstream,
                           LayerParams<T>* grads, bool need_input_grad) {
  const Shape is = in.shape();
  const Shape os = spec.output_shape(is);
  if (upstream.shape() != os) {
    shape_error(spec, "upstream gradient shape " + upstream.shape().str() +
                          " != output shape " + os.str());
  }
  const int in_dims = static_cast<int>(is.item_size());
  ConstMatMap<T> x(in.data().data(), is.n, in_dims);
  ConstMatMap<T> weight(params.weight.data().data(), os.c, in_dims);
  ConstMatMap<T> dy(upstream.data().data(), is.n, os.c);
  if (grads) {
    grads->weight = BasicTensor<T>(params.weight.shape());
    grads->bias = BasicTensor<T>(params.bias.shape());
    MatMap<T> gw(grads->weight.data().data(), os.c, in_dims);
    gw.noalias() = dy.transpose() * x;
    for (int o = 0; o < os.c; ++o) grads->bias[o] = dy.col(o).sum();
  }
  BasicTensor<T> in_grad;
  if (need_input_grad) {
    in_grad = BasicTensor<T>(is);
    MatMap<T> dx(in_grad.data().data(), is.n, in_dims);
    dx.noalias() = dy * weight;
  }
  return in_grad;
}

template <typename T>
BasicTensor<T> maxpool_forward(const LayerSpec& spec, const MaxPoolParams& p,
                               const BasicTensor<T>& in,
                               LayerCache<T>* cache) {
  const Shape is = in.shape();
  const Shape os = spec.output_shape(is);
  BasicTensor<T> out(os);
  std::vector<std::int32_t> argmax(os.size());
  std::size_t o = 0;
  for (int n = 0; n < os.n; ++n) {
    for (int c = 0; c < os.c; ++c) {
      const T* src = in.plane(n, c);
      const auto plane_base =
          static_cast<std::int32_t>((static_cast<std::size_t>(n) * is.c + c) *
                                    is.h * is.w);
      for (int oy = 0; oy < os.h; ++oy) {
        for (int ox = 0; ox < os.w; ++ox, ++o) {
          T best = -std::numeric_limits<T>::infinity();
          int best_idx = -1;
          for (int ky = 0; ky < p.window; ++ky) {
            const int iy = oy * p.stride + ky;
            for (int kx = 0; kx < p.window; ++kx) {
              const int idx = iy * is.w + ox * p.stride + kx;
              if (best_idx < 0 || src[idx] > best) {
                best = src[idx];
                best_idx = idx;
              }
            }
          }
          out[o] = best;
          argmax[o] = plane_base + best_idx;
        }
      }
    }
  }
  if (cache) cache->argmax = std::move(argmax);
  return out;
}

}  // namespace

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv: return "conv";
    case LayerKind::relu: return "relu";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::fc: return "fc";
    case LayerKind::dropout: return "dropout";
  }
  return "unknown";
}

LayerSpec LayerSpec::conv(std::string name, int out_channels, int kernel,
                          int stride, int pad) {
  return {std::move(name), ConvParams{out_channels, kernel, stride, pad}};
}
LayerSpec LayerSpec::relu(std::string name) {
  return {std::move(name), ReluParams{}};
}
LayerSpec LayerSpec::maxpool(std::string name, int window, int stride) {
  return {std::move(name), MaxPoolParams{window, stride}};
}
LayerSpec LayerSpec::fc(std::string name, int out_dims) {
  return {std::move(name), FcParams{out_dims}};
}
LayerSpec LayerSpec::dropout(std::string name, double keep_prob) {
  return {std::move(name), DropoutParams{keep_prob}};
}

LayerKind LayerSpec::kind() const {
  return std::visit(
      Overloaded{[](const ConvParams&) { return LayerKind::conv; },
                 [](const ReluParams&) { return LayerKind::relu; },
                 [](const MaxPoolParams&) { return LayerKind::maxpool; },
                 [](const FcParams&) { return LayerKind::fc; },
                 [](const DropoutParams&) { return LayerKind::dropout; }},
      hyper);
}

bool LayerSpec::has_params() const {
  const auto k = kind();
  return k == LayerKind::conv || k == LayerKind::fc;
}

void LayerSpec::validate() const {
  std::visit(
      Overloaded{
          [&](const ConvParams& p) {
            if (p.out_channels <= 0 || p.kernel <= 0 || p.stride <= 0) {
              shape_error(*this, "out-channels, kernel and stride must be > 0");
            }
            if (p.pad < 0) shape_error(*this, "pad must be >= 0");
          },
          [](const ReluParams&) {},
          [&](const MaxPoolParams& p) {
            if (p.window <= 0 || p.stride <= 0) {
              shape_error(*this, "window and stride must be > 0");
            }
          },
          [&](const FcParams& p) {
            if (p.out_dims <= 0) shape_error(*this, "out-dims must be > 0");
          },
          [&](const DropoutParams& p) {
            if (!(p.keep_prob > 0.0 && p.keep_prob <= 1.0)) {
              shape_error(*this, "keep-probability must lie in (0, 1]");
            }
          }},
      hyper);
}

Shape LayerSpec::output_shape(const Shape& in) const {
  validate();
  if (in.n <= 0 || in.c <= 0 || in.h <= 0 || in.w <= 0) {
    shape_error(*this, "empty input " + in.str());
  }
  return std::visit(
      Overloaded{
          [&](const ConvParams& p) {
            const int oh = conv_out_extent(in.h, p.kernel, p.stride, p.pad);
            const int ow = conv_out_extent(in.w, p.kernel, p.stride, p.pad);
            if (in.h + 2 * p.pad < p.kernel || in.w + 2 * p.pad < p.kernel) {
              shape_error(*this, "kernel larger than padded input " + in.str());
            }
            return Shape{in.n, p.out_channels, oh, ow};
          },
          [&](const ReluParams&) { return in; },
          [&](const MaxPoolParams& p) {
            if (in.h < p.window || in.w < p.window) {
              shape_error(*this, "window larger than input " + in.str());
            }
            return Shape{in.n, in.c, (in.h - p.window) / p.stride + 1,
                         (in.w - p.window) / p.stride + 1};
          },
          [&](const FcParams& p) { return Shape{in.n, p.out_dims, 1, 1}; },
          [&](const DropoutParams&) { return in; }},
      hyper);
}

Shape LayerSpec::weight_shape(const Shape& in) const {
  if (const auto* c = std::get_if<ConvParams>(&hyper)) {
    return {c->out_channels, in.c, c->kernel, c->kernel};
  }
  if (const auto* f = std::get_if<FcParams>(&hyper)) {
    return {f->out_dims, static_cast<int>(in.item_size()), 1, 1};
  }
  return {};
}

Shape LayerSpec::bias_shape() const {
  if (const auto* c = std::get_if<ConvParams>(&hyper)) {
    return {1, c->out_channels, 1, 1};
  }
  if (const auto* f = std::get_if<FcParams>(&hyper)) {
    return {1, f->out_dims, 1, 1};
  }
  return {};
}

template <typename T>
BasicTensor<T> layer_forward(const LayerSpec& spec, const LayerParams<T>& params,
                             const BasicTensor<T>& input, bool training,
                             LayerCache<T>* cache, std::mt19937_64* rng) {
  (void)spec.output_shape(input.shape());
  if (cache) {
    *cache = LayerCache<T>{};
    cache->input = input;
  }
  BasicTensor<T> out = std::visit(
      Overloaded{
          [&](const ConvParams& p) {
            return conv_forward(spec, p, params, input);
          },
          [&](const ReluParams&) {
            BasicTensor<T> o = input;
            for (auto& v : o.data()) v = v > T{0} ? v : T{0};
            return o;
          },
          [&](const MaxPoolParams& p) {
            return maxpool_forward(spec, p, input, cache);
          },
          [&](const FcParams&) { return fc_forward(spec, params, input); },
          [&](const DropoutParams& p) {
            BasicTensor<T> o = input;
            if (!training || p.keep_prob >= 1.0) return o;
            if (!rng) shape_error(spec, "training-mode dropout needs an rng");
            std::bernoulli_distribution keep(p.keep_prob);
            const T scale = static_cast<T>(1.0 / p.keep_prob);
            std::vector<T> mask(o.size());
            for (std::size_t i = 0; i < o.size(); ++i) {
              mask[i] = keep(*rng) ? scale : T{0};
              o[i] *= mask[i];
            }
            if (cache) cache->mask = std::move(mask);
            return o;
          }},
      spec.hyper);
  if (cache) cache->valid = true;
  return out;
}

template <typename T>
BasicTensor<T> layer_backward(const LayerSpec& spec,
                              const LayerParams<T>& params,
                              const LayerCache<T>& cache,
                              const BasicTensor<T>& upstream,
                              LayerParams<T>* param_grads,
                              bool need_input_grad) {
  if (!cache.valid) {
    throw UsageError("layer '" + spec.name +
                     "': backward called before forward");
  }
  const BasicTensor<T>& in = cache.input;
  const Shape os = spec.output_shape(in.shape());
  if (upstream.shape() != os) {
    shape_error(spec, "upstream gradient shape " + upstream.shape().str() +
                          " != output shape " + os.str());
  }
  return std::visit(
      Overloaded{
          [&](const ConvParams& p) {
            return conv_backward(spec, p, params, in, upstream, param_grads,
                                 need_input_grad);
          },
          [&](const ReluParams&) {
            BasicTensor<T> g(in.shape());
            for (std::size_t i = 0; i < g.size(); ++i) {
              g[i] = in[i] > T{0} ? upstream[i] : T{0};
            }
            return g;
          },
          [&](const MaxPoolParams&) {
            BasicTensor<T> g(in.shape());
            for (std::size_t i = 0; i < upstream.size(); ++i) {
              g[static_cast<std::size_t>(cache.argmax[i])] += upstream[i];
            }
            return g;
          },
          [&](const FcParams&) {
            return fc_backward(spec, params, in, upstream, param_grads,
                               need_input_grad);
          },
          [&](const DropoutParams&) {
            BasicTensor<T> g = upstream;
            if (!cache.mask.empty()) {
              for (std::size_t i = 0; i < g.size(); ++i) g[i] *= cache.mask[i];
            }
            return g;
          }},
      spec.hyper);
}

template BasicTensor<float> layer_forward(const LayerSpec&,
                                          const LayerParams<float>&,
                                          const BasicTensor<float>&, bool,
                                          LayerCache<float>*, std::mt19937_64*);
template BasicTensor<double> layer_forward(const LayerSpec&,
                                           const LayerParams<double>&,
                                           const BasicTensor<double>&, bool,
                                           LayerCache<double>*,
                                           std::mt19937_64*);
template BasicTensor<float> layer_backward(const LayerSpec&,
                                           const LayerParams<float>&,
                                           const LayerCache<float>&,
                                           const BasicTensor<float>&,
                                           LayerParams<float>*, bool);
template BasicTensor<double> layer_backward(const LayerSpec&,
                                            const LayerParams<double>&,
                                            const LayerCache<double>&,
                                            const BasicTensor<double>&,
                                            LayerParams<double>*, bool);

}  // namespace artdet
