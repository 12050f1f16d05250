#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "globenet/tensor.hpp"

namespace globenet {

/// Rectangular lat/lon window mapped onto [0,1]^2. Defaults span 0-80N, 100-250E.
struct GeoDomain {
  double lat_min = 0.0;
  double lat_span = 80.0;
  double lon_min = 100.0;
  double lon_span = 150.0;

  void validate() const;
};

/// (lat, lon) pair: degrees or normalized units depending on context.
using Point = std::array<double, 2>;

Point normalize_coords(double lat, double lon, const GeoDomain& domain = {});
Point denormalize_coords(double lat_n, double lon_n, const GeoDomain& domain = {});

/// One best-track fix.
struct TrackRecord {
  std::string timestamp;  // YYYY-MM-DDTHH:MMZ
  std::string storm_id;
  double lat = 0.0;
  double lon = 0.0;
};

/// Reads `timestamp,storm_id,lat,lon` CSV. Throws FormatError with the line number.
std::vector<TrackRecord> parse_best_track(std::istream& in);

struct ManifestEntry {
  std::string image_path;
  TrackRecord track;
};

/// Reads `image_path,timestamp,storm_id,lat,lon` CSV.
std::vector<ManifestEntry> parse_manifest(std::istream& in);
std::string format_manifest(std::span<const ManifestEntry> entries);

/// Histogram equalization of one (H,W) channel through its empirical CDF over
/// `levels` equal-width bins. Output in [0,1]; a constant channel maps to 0.
Tensor cdf_equalize(const Tensor& channel, int levels = 256);
/// Applies cdf_equalize to every channel of an (H,W,C) image.
Tensor equalize_channels(const Tensor& image, int levels = 256);

// GNI image container: "GNI1", u32 LE H, W, C, then f32 LE values in (h,w,c) order.
std::string encode_image(const Tensor& image);
Tensor decode_image(std::string_view bytes);
void write_image(const std::filesystem::path& path, const Tensor& image);
Tensor read_image(const std::filesystem::path& path);

struct Sample {
  Tensor image;  // (H,W,C), values in [0,1]
  Point target{};  // normalized (lat, lon)
  std::string storm_id;
  std::string timestamp;
  std::string image_path;
};

struct Dataset {
  std::vector<Sample> samples;
  GeoDomain domain;
  std::size_t height = 0, width = 0, channels = 0;
  std::string source;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  /// Same metadata, subset of samples in the given order.
  Dataset subset(std::span<const std::size_t> indices) const;
  void validate() const;
};

/// Stacks the listed samples into an (N,H,W,C) batch and an (N,2) target tensor.
std::pair<Tensor, Tensor> make_batch(const Dataset& ds, std::span<const std::size_t> indices);
/// (N,2) targets of every sample, in order.
Tensor targets_of(const Dataset& ds);

// Pixel grid convention: row 0 is the domain's northern edge, column 0 its
// western edge; pixel centres span the domain corner to corner.
Point normalized_to_pixel(Point target, std::size_t height, std::size_t width);
Point pixel_to_normalized(double row, double col, std::size_t height, std::size_t width);

struct SynthConfig {
  std::size_t count = 64;
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t channels = 4;
  std::uint64_t seed = 0;
  double noise_level = 0.05;
  GeoDomain domain{};
};

/// Synthetic cyclone imagery: a Gaussian vortex with a two-arm logarithmic
/// spiral centred on a target drawn uniformly in [0.1,0.9]^2, per-band scale,
/// additive uniform noise, clamped to [0,1] and rounded to f32.
Dataset synth_generate(const SynthConfig& cfg);

/// Writes images/NNNNNN.gni plus manifest.csv under `dir`.
void write_dataset(const std::filesystem::path& dir, const Dataset& ds);

struct LoadOptions {
  GeoDomain domain{};
  int equalize_levels = 0;  // 0 disables histogram equalization
};

/// Loads manifest.csv and its images from `dir`.
Dataset load_dataset(const std::filesystem::path& dir, const LoadOptions& options = {});

}  // namespace globenet
