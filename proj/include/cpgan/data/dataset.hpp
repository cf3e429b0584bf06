#pragma once

// On-disk dataset: one directory holding manifest.json plus one P6 file per image.
//
// manifest.json schema (format "cpgan-dataset", format_version 1):
//   count       number of samples (> 0)
//   seed        master seed the samples were drawn from
//   geometry    {channels, height, width}
//   synthesis   SynthConfig fields
//   samples     [{id, top, top_fnv1a, bottom, bottom_fnv1a, attributes{...}}]
// File names are relative to the directory; hashes are FNV-1a 64 of the file bytes in hex.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "cpgan/data/ppm.hpp"
#include "cpgan/data/synth.hpp"
#include "cpgan/util/hash.hpp"

namespace cpgan::data {

inline constexpr const char* kDatasetFormat = "cpgan-dataset";
inline constexpr int kDatasetVersion = 1;
inline constexpr const char* kManifestName = "manifest.json";

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(
    SynthConfig, image_size, supersample, pose_bins, pose_min_deg, pose_max_deg, pose_jitter_deg,
    leg_spread_deg, leg_width_min, leg_width_max, top_tilt_ratio, luminance_min, luminance_max,
    saturation_min, saturation_max, hue_offset, hue_noise, stripe_probability, stripe_freq_min,
    stripe_freq_max, stripe_depth)

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(SampleAttributes, pose_deg, pose_bin, leg_width, top_hue,
                                   top_saturation, top_luminance, bottom_hue, bottom_saturation,
                                   bottom_luminance, top_rgb, bottom_rgb, top_stripe_freq,
                                   stripe_freq)

struct SampleRecord {
  std::size_t id = 0;
  std::string top_file, bottom_file;
  std::string top_hash, bottom_hash;
  SampleAttributes attributes;
};

struct DatasetManifest {
  int format_version = kDatasetVersion;
  std::uint64_t seed = 0;
  std::size_t channels = 3, height = 0, width = 0;
  SynthConfig synthesis;
  std::vector<SampleRecord> samples;

  std::size_t count() const { return samples.size(); }
};

/// Manifest plus decoded images, indexed by sample id.
struct Dataset {
  DatasetManifest manifest;
  std::vector<Image> tops, bottoms;

  std::size_t size() const { return tops.size(); }
};

inline nlohmann::json to_json(const DatasetManifest& m) {
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& s : m.samples)
    samples.push_back({{"id", s.id},
                       {"top", s.top_file},
                       {"top_fnv1a", s.top_hash},
                       {"bottom", s.bottom_file},
                       {"bottom_fnv1a", s.bottom_hash},
                       {"attributes", s.attributes}});
  return {{"format", kDatasetFormat},
          {"format_version", m.format_version},
          {"count", m.samples.size()},
          {"seed", m.seed},
          {"geometry", {{"channels", m.channels}, {"height", m.height}, {"width", m.width}}},
          {"synthesis", m.synthesis},
          {"samples", std::move(samples)}};
}

inline DatasetManifest manifest_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != kDatasetFormat) throw FormatError("manifest: unknown format");
    DatasetManifest m;
    m.format_version = j.at("format_version").get<int>();
    if (m.format_version != kDatasetVersion)
      throw FormatError("manifest: unsupported format_version " + std::to_string(m.format_version));
    m.seed = j.at("seed").get<std::uint64_t>();
    const auto& g = j.at("geometry");
    m.channels = g.at("channels").get<std::size_t>();
    m.height = g.at("height").get<std::size_t>();
    m.width = g.at("width").get<std::size_t>();
    m.synthesis = j.at("synthesis").get<SynthConfig>();
    for (const auto& s : j.at("samples"))
      m.samples.push_back({s.at("id").get<std::size_t>(), s.at("top").get<std::string>(),
                           s.at("bottom").get<std::string>(), s.at("top_fnv1a").get<std::string>(),
                           s.at("bottom_fnv1a").get<std::string>(),
                           s.at("attributes").get<SampleAttributes>()});
    if (m.samples.empty() || j.at("count").get<std::size_t>() != m.samples.size())
      throw FormatError("manifest: count does not match the sample list");
    for (std::size_t i = 0; i < m.samples.size(); ++i)
      if (m.samples[i].id != i) throw FormatError("manifest: sample ids must be 0..count-1 in order");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
}

inline std::string sample_file_name(const char* kind, std::size_t id) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s_%06zu.ppm", kind, id);
  return buf;
}

/// Renders `count` pairs into `dir` (created if needed) and writes the manifest.
inline DatasetManifest synth_generate(std::size_t count, std::uint64_t seed,
                                      const std::filesystem::path& dir, const SynthConfig& cfg = {}) {
  if (count == 0) throw ArgumentError("synth_generate: count must be positive");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw IoError("synth_generate: cannot create output directory " + dir.string());
  DatasetManifest m;
  m.seed = seed;
  m.height = m.width = cfg.image_size;
  m.synthesis = cfg;
  for (std::size_t i = 0; i < count; ++i) {
    const PairedSample s = synth_sample(seed, i, cfg);
    SampleRecord r{i, sample_file_name("top", i), sample_file_name("bottom", i), {}, {}, s.attributes};
    const std::string top = encode_ppm(s.top), bottom = encode_ppm(s.bottom);
    write_file(dir / r.top_file, top);
    write_file(dir / r.bottom_file, bottom);
    r.top_hash = util::hex64(util::fnv1a(top));
    r.bottom_hash = util::hex64(util::fnv1a(bottom));
    m.samples.push_back(std::move(r));
  }
  write_file(dir / kManifestName, to_json(m).dump(1) + "\n");
  return m;
}

inline DatasetManifest read_manifest(const std::filesystem::path& dir) {
  const std::string text = read_file(dir / kManifestName);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
  return manifest_from_json(j);
}

/// Loads and verifies every file against its recorded hash and the declared geometry.
inline Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset d;
  d.manifest = read_manifest(dir);
  auto load = [&](const std::string& name, const std::string& hash) {
    const std::string bytes = read_file(dir / name);
    if (util::hex64(util::fnv1a(bytes)) != hash) throw FormatError("dataset: hash mismatch for " + name);
    Image img = decode_ppm(bytes, name);
    if (img.height != d.manifest.height || img.width != d.manifest.width)
      throw FormatError("dataset: " + name + " does not match the manifest geometry");
    return img;
  };
  for (const auto& s : d.manifest.samples) {
    d.tops.push_back(load(s.top_file, s.top_hash));
    d.bottoms.push_back(load(s.bottom_file, s.bottom_hash));
  }
  return d;
}

}  // namespace cpgan::data
