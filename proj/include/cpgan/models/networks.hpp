#pragma once

// Condition encoder E(top) -> y, generator G(z, y) -> bottom image, and
// discriminator D(x, y) -> probability. All operate on batches:
//   top, x: N x C x S x S      y: N x c_dim      z: N x z_dim      D out: N x 1

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "cpgan/autodiff.hpp"
#include "cpgan/util/random.hpp"

namespace cpgan::models {

using ad::Tensor;

struct ModelConfig {
  std::size_t image_size = 48;
  std::size_t channels = 3;
  std::size_t z_dim = 128;
  std::size_t c_dim = 64;
  // Generator: dense -> gen_channels[0] @ seed x seed, a 3x3 stride-1 transposed
  // conv to gen_channels[1] @ (seed + 2), then stride-2 stages doubling the grid.
  std::size_t seed_size = 4;
  std::vector<std::size_t> gen_channels{64, 32, 16, 8};
  // Encoder / discriminator: stride-2 4x4 convs, each halving the grid.
  std::vector<std::size_t> enc_channels{8, 16, 32};
  std::vector<std::size_t> disc_channels{8, 16, 32};
  std::size_t disc_join_channels = 32;  // 1x1 conv after y is appended as planes
  // Weights ~ N(0, gain^2 * 2 / ((1 + leaky_slope^2) * fan_in)). A fixed small
  // std shrinks the signal at every layer of an unnormalized stack.
  double init_gain = 1.0;
  double leaky_slope = 0.2;

  bool operator==(const ModelConfig&) const = default;

  /// Throws ConfigError when the layer stacks cannot produce image_size.
  void validate() const {
    auto fail = [](const std::string& why) { throw ConfigError("model config: " + why); };
    if (image_size == 0 || channels == 0 || z_dim == 0 || c_dim == 0 || seed_size == 0)
      fail("sizes must be positive");
    if (gen_channels.size() < 2) fail("gen_channels needs at least two entries");
    if (((seed_size + 2) << (gen_channels.size() - 1)) != image_size)
      fail("(seed_size + 2) * 2^(len(gen_channels) - 1) must equal image_size");
    for (const auto* stack : {&enc_channels, &disc_channels}) {
      if (stack->empty()) fail("conv stacks must be nonempty");
      if (image_size % (std::size_t{1} << stack->size()) != 0)
        fail("image_size must be divisible by 2^(conv stack depth)");
    }
    if (init_gain <= 0) fail("init_gain must be positive");
  }

  std::size_t enc_grid() const { return image_size >> enc_channels.size(); }
  std::size_t disc_grid() const { return image_size >> disc_channels.size(); }
};

/// A tiny 8 x 8 configuration for finite-difference tests.
inline ModelConfig tiny_config(std::size_t channels = 2) {
  ModelConfig c;
  c.image_size = 8;
  c.channels = channels;
  c.z_dim = 3;
  c.c_dim = 2;
  c.seed_size = 2;
  c.gen_channels = {3, 2};
  c.enc_channels = {2, 2};
  c.disc_channels = {2, 2};
  c.disc_join_channels = 2;
  c.init_gain = 1.0;
  return c;
}

template <typename Real>
struct Layer {
  Tensor<Real> w, b;
};

namespace detail {

template <typename Real>
Tensor<Real> gaussian(ad::Shape shape, util::Rng& rng, double std) {
  std::vector<Real> v(ad::numel(shape));
  for (auto& x : v) x = static_cast<Real>(std * util::normal01(rng));
  return Tensor<Real>::from(std::move(shape), std::move(v), true);
}

/// fan_in: inputs summed into one output (per kernel tap hit, for transposed convs).
template <typename Real>
Layer<Real> make_layer(ad::Shape wshape, std::size_t bias, std::size_t fan_in, util::Rng& rng,
                       const ModelConfig& cfg) {
  const double std = cfg.init_gain * std::sqrt(2.0 / ((1.0 + cfg.leaky_slope * cfg.leaky_slope) * fan_in));
  return {gaussian<Real>(std::move(wshape), rng, std), Tensor<Real>::zeros({bias}, true)};
}

template <typename Real, typename F>
void visit_layers(std::vector<Layer<Real>>& layers, const std::string& prefix, F&& f) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    f(prefix + std::to_string(i) + ".w", layers[i].w);
    f(prefix + std::to_string(i) + ".b", layers[i].b);
  }
}

template <typename Real>
Tensor<Real> conv(const Tensor<Real>& x, const Layer<Real>& l, std::size_t stride, std::size_t pad) {
  return ad::add_bias(ad::conv2d(x, l.w, ad::ConvGeometry{stride, pad}), l.b);
}

template <typename Real>
Tensor<Real> tconv(const Tensor<Real>& x, const Layer<Real>& l, std::size_t stride, std::size_t pad) {
  return ad::add_bias(ad::conv_transpose2d(x, l.w, ad::ConvGeometry{stride, pad}), l.b);
}

template <typename Real>
Tensor<Real> dense(const Tensor<Real>& x, const Layer<Real>& l) {
  return ad::add_bias(ad::matmul(x, l.w), l.b);
}

template <typename Real>
Tensor<Real> flatten(const Tensor<Real>& x) {
  return ad::reshape(x, {x.dim(0), x.size() / x.dim(0)});
}

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

}  // namespace detail

/// Shared shape of every network's parameter set: named tensors visited in a fixed order.
template <typename Real, typename Self>
struct ParamsBase {
  /// f(name, Tensor&) over every parameter, in a stable order.
  template <typename F>
  void for_each(F&& f) {
    static_cast<Self*>(this)->visit(f);
  }
  template <typename F>
  void for_each(F&& f) const {
    const_cast<Self*>(static_cast<const Self*>(this))->visit(f);
  }

  std::vector<Tensor<Real>> tensors() const {
    std::vector<Tensor<Real>> out;
    for_each([&](const std::string&, const Tensor<Real>& t) { out.push_back(t); });
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for_each([&](const std::string&, const Tensor<Real>& t) { n += t.size(); });
    return n;
  }

  /// Same values, no gradient tracking: used when this network is a constant.
  Self detached() const {
    Self copy = *static_cast<const Self*>(this);
    copy.for_each([](const std::string&, Tensor<Real>& t) { t = t.detach(); });
    return copy;
  }

  /// Independent storage (deep copy) with gradient tracking.
  Self cloned() const {
    Self copy = *static_cast<const Self*>(this);
    copy.for_each([](const std::string&, Tensor<Real>& t) { t = t.clone(true); });
    return copy;
  }
};

template <typename Real>
struct EncoderParams : ParamsBase<Real, EncoderParams<Real>> {
  std::vector<Layer<Real>> convs;
  Layer<Real> head;

  static EncoderParams init(const ModelConfig& cfg, util::Rng& rng) {
    EncoderParams p;
    std::size_t in = cfg.channels;
    for (std::size_t out : cfg.enc_channels) {
      p.convs.push_back(detail::make_layer<Real>({out, in, 4, 4}, out, in * 16, rng, cfg));
      in = out;
    }
    const std::size_t g = cfg.enc_grid();
    p.head = detail::make_layer<Real>({in * g * g, cfg.c_dim}, cfg.c_dim, in * g * g, rng, cfg);
    return p;
  }

  template <typename F>
  void visit(F&& f) {
    detail::visit_layers(convs, "encoder.conv", f);
    f("encoder.head.w", head.w);
    f("encoder.head.b", head.b);
  }
};

template <typename Real>
struct GeneratorParams : ParamsBase<Real, GeneratorParams<Real>> {
  Layer<Real> project;
  std::vector<Layer<Real>> ups;  // transposed-conv weights (Cin, Cout, k, k)

  static GeneratorParams init(const ModelConfig& cfg, util::Rng& rng) {
    GeneratorParams p;
    const auto& ch = cfg.gen_channels;
    const std::size_t seed_units = ch[0] * cfg.seed_size * cfg.seed_size;
    p.project = detail::make_layer<Real>({cfg.z_dim + cfg.c_dim, seed_units}, seed_units, cfg.z_dim + cfg.c_dim,
                                         rng, cfg);
    p.ups.push_back(detail::make_layer<Real>({ch[0], ch[1], 3, 3}, ch[1], ch[0] * 9, rng, cfg));
    for (std::size_t i = 1; i < ch.size(); ++i) {
      const std::size_t out = i + 1 < ch.size() ? ch[i + 1] : cfg.channels;
      p.ups.push_back(detail::make_layer<Real>({ch[i], out, 4, 4}, out, ch[i] * 4, rng, cfg));  // 2x2 taps per output
    }
    return p;
  }

  template <typename F>
  void visit(F&& f) {
    f("generator.project.w", project.w);
    f("generator.project.b", project.b);
    detail::visit_layers(ups, "generator.up", f);
  }
};

template <typename Real>
struct DiscriminatorParams : ParamsBase<Real, DiscriminatorParams<Real>> {
  std::vector<Layer<Real>> convs;
  Layer<Real> join;  // 1x1 conv over [features, y planes]
  Layer<Real> head;

  static DiscriminatorParams init(const ModelConfig& cfg, util::Rng& rng) {
    DiscriminatorParams p;
    std::size_t in = cfg.channels;
    for (std::size_t out : cfg.disc_channels) {
      p.convs.push_back(detail::make_layer<Real>({out, in, 4, 4}, out, in * 16, rng, cfg));
      in = out;
    }
    const std::size_t j = cfg.disc_join_channels, g = cfg.disc_grid();
    p.join = detail::make_layer<Real>({j, in + cfg.c_dim, 1, 1}, j, in + cfg.c_dim, rng, cfg);
    p.head = detail::make_layer<Real>({j * g * g, 1}, 1, j * g * g, rng, cfg);
    return p;
  }

  template <typename F>
  void visit(F&& f) {
    detail::visit_layers(convs, "discriminator.conv", f);
    f("discriminator.join.w", join.w);
    f("discriminator.join.b", join.b);
    f("discriminator.head.w", head.w);
    f("discriminator.head.b", head.b);
  }
};

/// All three networks, initialized from independent streams of one seed.
template <typename Real>
struct GanParams {
  EncoderParams<Real> encoder;
  GeneratorParams<Real> generator;
  DiscriminatorParams<Real> discriminator;

  static GanParams init(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    util::Rng re = util::make_rng(seed, 0xe0), rg = util::make_rng(seed, 0x90), rd = util::make_rng(seed, 0xd0);
    return {EncoderParams<Real>::init(cfg, re), GeneratorParams<Real>::init(cfg, rg),
            DiscriminatorParams<Real>::init(cfg, rd)};
  }

  template <typename F>
  void for_each(F&& f) {
    encoder.for_each(f);
    generator.for_each(f);
    discriminator.for_each(f);
  }
  template <typename F>
  void for_each(F&& f) const {
    encoder.for_each(f);
    generator.for_each(f);
    discriminator.for_each(f);
  }
};

/// top (N, C, S, S) -> y (N, c_dim). Linear output.
template <typename Real>
Tensor<Real> encode_condition(const Tensor<Real>& top, const EncoderParams<Real>& p, const ModelConfig& cfg) {
  detail::require(top.rank() == 4 && top.dim(1) == cfg.channels && top.dim(2) == cfg.image_size &&
                      top.dim(3) == cfg.image_size,
                  "encode_condition: expected N x " + std::to_string(cfg.channels) + " x " +
                      std::to_string(cfg.image_size) + " x " + std::to_string(cfg.image_size) +
                      ", got " + ad::to_string(top.shape()));
  const Real slope = static_cast<Real>(cfg.leaky_slope);
  Tensor<Real> h = top;
  for (const auto& l : p.convs) h = ad::leaky_relu(detail::conv(h, l, 2, 1), slope);
  return detail::dense(detail::flatten(h), p.head);
}

/// (z, y) -> image in [-1, 1].
template <typename Real>
Tensor<Real> generate(const Tensor<Real>& z, const Tensor<Real>& y, const GeneratorParams<Real>& p,
                      const ModelConfig& cfg) {
  detail::require(z.rank() == 2 && z.dim(1) == cfg.z_dim,
                  "generate: z must be N x " + std::to_string(cfg.z_dim) + ", got " + ad::to_string(z.shape()));
  detail::require(y.rank() == 2 && y.dim(1) == cfg.c_dim && y.dim(0) == z.dim(0),
                  "generate: y must be N x " + std::to_string(cfg.c_dim) + ", got " + ad::to_string(y.shape()));
  const Real slope = static_cast<Real>(cfg.leaky_slope);
  const std::size_t n = z.dim(0), s = cfg.seed_size;
  Tensor<Real> h = ad::leaky_relu(detail::dense(ad::concat<Real>({z, y}, 1), p.project), slope);
  h = ad::reshape(h, {n, cfg.gen_channels[0], s, s});
  for (std::size_t i = 0; i < p.ups.size(); ++i) {
    const bool first = i == 0, last = i + 1 == p.ups.size();
    h = detail::tconv(h, p.ups[i], first ? 1 : 2, first ? 0 : 1);
    h = last ? ad::tanh(h) : ad::leaky_relu(h, slope);
  }
  return h;
}

/// Logit of D(x | y), shape (N, 1). y joins the conv features as constant planes.
template <typename Real>
Tensor<Real> discriminator_logit(const Tensor<Real>& x, const Tensor<Real>& y,
                                 const DiscriminatorParams<Real>& p, const ModelConfig& cfg) {
  detail::require(x.rank() == 4 && x.dim(1) == cfg.channels && x.dim(2) == cfg.image_size &&
                      x.dim(3) == cfg.image_size,
                  "discriminate: bad image shape " + ad::to_string(x.shape()));
  detail::require(y.rank() == 2 && y.dim(0) == x.dim(0) && y.dim(1) == cfg.c_dim,
                  "discriminate: bad condition shape " + ad::to_string(y.shape()));
  const Real slope = static_cast<Real>(cfg.leaky_slope);
  Tensor<Real> h = x;
  for (const auto& l : p.convs) h = ad::leaky_relu(detail::conv(h, l, 2, 1), slope);
  const std::size_t n = x.dim(0), g = cfg.disc_grid();
  const auto planes = ad::broadcast_to(ad::reshape(y, {n, cfg.c_dim, 1, 1}), {n, cfg.c_dim, g, g});
  h = ad::leaky_relu(detail::conv(ad::concat<Real>({h, planes}, 1), p.join, 1, 0), slope);
  return detail::dense(detail::flatten(h), p.head);
}

/// D(x | y) in (0, 1), shape (N, 1).
template <typename Real>
Tensor<Real> discriminate(const Tensor<Real>& x, const Tensor<Real>& y, const DiscriminatorParams<Real>& p,
                          const ModelConfig& cfg) {
  return ad::sigmoid(discriminator_logit(x, y, p, cfg));
}

/// Standard-normal noise batch (N, z_dim).
template <typename Real>
Tensor<Real> sample_noise(std::size_t n, std::size_t z_dim, util::Rng& rng) {
  std::vector<Real> v(n * z_dim);
  for (auto& x : v) x = static_cast<Real>(util::normal01(rng));
  return Tensor<Real>::from({n, z_dim}, std::move(v));
}

}  // namespace cpgan::models
