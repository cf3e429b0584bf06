#pragma once

// Checkpoint file, little-endian throughout:
//   "CPGANCKP"  u32 version  u64 config_hash  u32 real_bytes  u32 block_count
//   block_count x { u32 name_len, name, u8 kind, u64 payload_len, payload }
// kinds: 0 tensor {u32 rank, u64 dims[rank], values}, 1 u64, 2 text.
// Blocks hold every parameter by name, Adam moments ("adam.<net>.m.<param>",
// "adam.<net>.v.<param>"), Adam step counts, epoch and step counters, RNG states
// and the training config JSON the hash was computed from.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cpgan/data/ppm.hpp"
#include "cpgan/models/networks.hpp"
#include "cpgan/train/config.hpp"

namespace cpgan::train {

inline constexpr char kCheckpointMagic[8] = {'C', 'P', 'G', 'A', 'N', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename Real>
struct Checkpoint {
  TrainConfig config;
  models::GanParams<Real> params;
  ad::OptimizerState<Real> opt_encoder, opt_generator, opt_discriminator;
  std::uint64_t epoch = 0;  // completed epochs
  std::uint64_t step = 0;   // completed batches
  std::string noise_rng, beta_rng;

  std::uint64_t config_hash() const { return train::config_hash(config); }
};

/// Freshly initialized parameters, zero moments and seeded RNGs.
template <typename Real>
Checkpoint<Real> initial_checkpoint(const TrainConfig& config) {
  config.validate();
  Checkpoint<Real> c;
  c.config = config;
  c.params = models::GanParams<Real>::init(config.model, config.seed);
  c.opt_encoder = ad::OptimizerState<Real>::for_params(c.params.encoder.tensors(), config.adam);
  c.opt_generator = ad::OptimizerState<Real>::for_params(c.params.generator.tensors(), config.adam);
  c.opt_discriminator = ad::OptimizerState<Real>::for_params(c.params.discriminator.tensors(), config.adam);
  c.noise_rng = util::save_state(util::make_rng(config.seed, 0x2015e));
  c.beta_rng = util::save_state(util::make_rng(config.seed, config.rlf.beta_stream));
  return c;
}

namespace detail {

enum class BlockKind : std::uint8_t { Tensor = 0, U64 = 1, Text = 2 };

template <typename T>
void put(std::string& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = sizeof(T); i-- > 0;) out.push_back(static_cast<char>(b[i]));
  } else {
    out.append(reinterpret_cast<const char*>(&v), sizeof(T));
  }
}

class Reader {
 public:
  Reader(std::string_view bytes, std::string origin) : bytes_(bytes), origin_(std::move(origin)) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
      unsigned char b[sizeof(T)];
      for (std::size_t i = 0; i < sizeof(T); ++i) b[sizeof(T) - 1 - i] = static_cast<unsigned char>(bytes_[pos_ + i]);
      std::memcpy(&v, b, sizeof(T));
    } else {
      std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    }
    pos_ += sizeof(T);
    return v;
  }

  std::string_view take(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }
  [[noreturn]] void fail(const std::string& why) const { throw FormatError(origin_ + ": " + why); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) fail("truncated checkpoint");
  }
  std::string_view bytes_;
  std::string origin_;
  std::size_t pos_ = 0;
};

struct Block {
  BlockKind kind;
  std::string_view payload;
};

template <typename Real>
void put_block(std::string& out, std::uint32_t& count, const std::string& name, BlockKind kind,
               const std::string& payload) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
  out += name;
  put<std::uint8_t>(out, static_cast<std::uint8_t>(kind));
  put<std::uint64_t>(out, payload.size());
  out += payload;
  ++count;
}

template <typename Real>
std::string tensor_payload(const ad::Tensor<Real>& t) {
  std::string p;
  put<std::uint32_t>(p, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) put<std::uint64_t>(p, d);
  for (Real v : t.values()) put<Real>(p, v);
  return p;
}

template <typename Real>
void read_tensor_into(const Block& b, const std::string& name, ad::Tensor<Real>& t, const std::string& origin) {
  if (b.kind != BlockKind::Tensor) throw FormatError(origin + ": block " + name + " is not a tensor");
  Reader r(b.payload, origin + " block " + name);
  const auto rank = r.get<std::uint32_t>();
  ad::Shape shape(rank);
  for (auto& d : shape) d = static_cast<std::size_t>(r.get<std::uint64_t>());
  if (shape != t.shape())
    throw FormatError(origin + ": block " + name + " has shape " + ad::to_string(shape) + ", expected " +
                      ad::to_string(t.shape()));
  auto values = t.mutable_values();
  for (auto& v : values) v = r.get<Real>();
  if (!r.done()) r.fail("trailing bytes");
  ad::check_finite<Real>("checkpoint " + name, values);
}

// Visits (name, tensor) for every tensor block in file order.
template <typename Real, typename F>
void visit_tensors(Checkpoint<Real>& c, F&& f) {
  c.params.for_each([&](const std::string& n, ad::Tensor<Real>& t) { f(n, t); });
  auto moments = [&](const char* net, auto& params, ad::OptimizerState<Real>& s) {
    std::size_t i = 0;
    params.for_each([&](const std::string& n, ad::Tensor<Real>&) {
      f(std::string("adam.") + net + ".m." + n, s.first_moment[i]);
      f(std::string("adam.") + net + ".v." + n, s.second_moment[i]);
      ++i;
    });
  };
  moments("encoder", c.params.encoder, c.opt_encoder);
  moments("generator", c.params.generator, c.opt_generator);
  moments("discriminator", c.params.discriminator, c.opt_discriminator);
}

}  // namespace detail

template <typename Real>
std::string encode_checkpoint(const Checkpoint<Real>& checkpoint) {
  auto& c = const_cast<Checkpoint<Real>&>(checkpoint);  // visited read-only
  std::string body;
  std::uint32_t count = 0;
  using detail::BlockKind;
  detail::visit_tensors(c, [&](const std::string& name, ad::Tensor<Real>& t) {
    detail::put_block<Real>(body, count, name, BlockKind::Tensor, detail::tensor_payload(t));
  });
  auto u64 = [&](const std::string& name, std::uint64_t v) {
    std::string p;
    detail::put<std::uint64_t>(p, v);
    detail::put_block<Real>(body, count, name, BlockKind::U64, p);
  };
  u64("adam.encoder.step", c.opt_encoder.step);
  u64("adam.generator.step", c.opt_generator.step);
  u64("adam.discriminator.step", c.opt_discriminator.step);
  u64("train.epoch", c.epoch);
  u64("train.step", c.step);
  detail::put_block<Real>(body, count, "rng.noise", BlockKind::Text, c.noise_rng);
  detail::put_block<Real>(body, count, "rng.beta", BlockKind::Text, c.beta_rng);
  detail::put_block<Real>(body, count, "config", BlockKind::Text, canonical_json(c.config));

  std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
  detail::put<std::uint32_t>(out, kCheckpointVersion);
  detail::put<std::uint64_t>(out, c.config_hash());
  detail::put<std::uint32_t>(out, sizeof(Real));
  detail::put<std::uint32_t>(out, count);
  return out + body;
}

/// Parses a checkpoint written with the same precision. Nothing partial is returned.
template <typename Real>
Checkpoint<Real> decode_checkpoint(std::string_view bytes, const std::string& origin = "checkpoint") {
  detail::Reader r(bytes, origin);
  if (r.take(sizeof kCheckpointMagic) != std::string_view(kCheckpointMagic, sizeof kCheckpointMagic))
    r.fail("not a checkpoint (bad magic)");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    r.fail("unsupported checkpoint version " + std::to_string(version) + " (expected " +
           std::to_string(kCheckpointVersion) + ")");
  const auto hash = r.get<std::uint64_t>();
  const auto real_bytes = r.get<std::uint32_t>();
  if (real_bytes != sizeof(Real))
    r.fail("stored with " + std::to_string(8 * real_bytes) + "-bit reals, loading as " +
           std::to_string(8 * sizeof(Real)) + "-bit");
  const auto count = r.get<std::uint32_t>();
  std::map<std::string, detail::Block, std::less<>> blocks;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name(r.take(r.get<std::uint32_t>()));
    const auto kind = static_cast<detail::BlockKind>(r.get<std::uint8_t>());
    const auto payload = r.take(static_cast<std::size_t>(r.get<std::uint64_t>()));
    if (!blocks.emplace(std::move(name), detail::Block{kind, payload}).second) r.fail("duplicate block");
  }
  if (!r.done()) r.fail("trailing bytes after the last block");

  auto block = [&](const std::string& name, detail::BlockKind kind) -> std::string_view {
    auto it = blocks.find(name);
    if (it == blocks.end()) r.fail("missing block " + name);
    if (it->second.kind != kind) r.fail("block " + name + " has the wrong kind");
    return it->second.payload;
  };
  auto u64 = [&](const std::string& name) {
    detail::Reader br(block(name, detail::BlockKind::U64), origin + " block " + name);
    const auto v = br.get<std::uint64_t>();
    if (!br.done()) br.fail("trailing bytes");
    return v;
  };

  nlohmann::json config_json;
  try {
    config_json = nlohmann::json::parse(block("config", detail::BlockKind::Text));
  } catch (const nlohmann::json::exception& e) {
    r.fail(std::string("config block: ") + e.what());
  }
  Checkpoint<Real> c = initial_checkpoint<Real>(train_config_from_json(config_json));
  if (c.config_hash() != hash) r.fail("config hash does not match the stored config");
  std::size_t tensor_blocks = 0;
  detail::visit_tensors(c, [&](const std::string& name, ad::Tensor<Real>& t) {
    auto it = blocks.find(name);
    if (it == blocks.end()) r.fail("missing block " + name);
    detail::read_tensor_into(it->second, name, t, origin);
    ++tensor_blocks;
  });
  c.opt_encoder.step = u64("adam.encoder.step");
  c.opt_generator.step = u64("adam.generator.step");
  c.opt_discriminator.step = u64("adam.discriminator.step");
  c.epoch = u64("train.epoch");
  c.step = u64("train.step");
  c.noise_rng = std::string(block("rng.noise", detail::BlockKind::Text));
  c.beta_rng = std::string(block("rng.beta", detail::BlockKind::Text));
  for (const auto* state : {&c.noise_rng, &c.beta_rng}) {
    util::Rng probe;
    try {
      util::load_state(probe, *state);
    } catch (const FormatError&) {
      r.fail("corrupt RNG state");
    }
  }
  if (blocks.size() != tensor_blocks + 8) r.fail("unexpected extra blocks");
  return c;
}

template <typename Real>
void save_checkpoint(const Checkpoint<Real>& c, const std::filesystem::path& path) {
  data::write_file(path, encode_checkpoint(c));
}

template <typename Real>
Checkpoint<Real> load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint<Real>(data::read_file(path), path.string());
}

/// Real size recorded in a checkpoint header (4 or 8), for choosing the load precision.
inline std::uint32_t checkpoint_real_bytes(const std::filesystem::path& path) {
  const std::string bytes = data::read_file(path);
  detail::Reader r(bytes, path.string());
  if (r.take(sizeof kCheckpointMagic) != std::string_view(kCheckpointMagic, sizeof kCheckpointMagic))
    r.fail("not a checkpoint (bad magic)");
  r.get<std::uint32_t>();
  r.get<std::uint64_t>();
  return r.get<std::uint32_t>();
}

}  // namespace cpgan::train
