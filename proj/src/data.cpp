#include "globenet/data.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numbers>
#include <set>
#include <sstream>

#include "globenet/io.hpp"
#include "globenet/random.hpp"

namespace globenet {

namespace {

constexpr std::string_view kImageMagic = "GNI1";
constexpr std::string_view kTrackHeader = "timestamp,storm_id,lat,lon";
constexpr std::string_view kManifestHeader = "image_path,timestamp,storm_id,lat,lon";

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    fields.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

std::string_view strip_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

[[noreturn]] void line_error(std::size_t line, const std::string& msg) {
  throw FormatError("line " + std::to_string(line) + ": " + msg);
}

bool digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

int to_int(std::string_view s) {
  int v = 0;
  std::from_chars(s.data(), s.data() + s.size(), v);
  return v;
}

// YYYY-MM-DDTHH:MMZ
void check_timestamp(std::string_view ts, std::size_t line) {
  const bool shape = ts.size() == 17 && digits(ts.substr(0, 4)) && ts[4] == '-' &&
                     digits(ts.substr(5, 2)) && ts[7] == '-' && digits(ts.substr(8, 2)) &&
                     ts[10] == 'T' && digits(ts.substr(11, 2)) && ts[13] == ':' &&
                     digits(ts.substr(14, 2)) && ts[16] == 'Z';
  if (!shape) line_error(line, "timestamp must look like YYYY-MM-DDTHH:MMZ, got '" + std::string(ts) + "'");
  using namespace std::chrono;
  const year_month_day ymd{year{to_int(ts.substr(0, 4))}, month{static_cast<unsigned>(to_int(ts.substr(5, 2)))},
                           day{static_cast<unsigned>(to_int(ts.substr(8, 2)))}};
  if (!ymd.ok() || to_int(ts.substr(11, 2)) > 23 || to_int(ts.substr(14, 2)) > 59) {
    line_error(line, "timestamp is not a valid UTC time: '" + std::string(ts) + "'");
  }
}

/// Decimal degrees with at most one fractional digit.
double parse_degrees(std::string_view s, const char* what, std::size_t line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    line_error(line, std::string("cannot parse ") + what + " '" + std::string(s) + "'");
  }
  const std::size_t dot = s.find('.');
  if (dot != std::string_view::npos && s.size() - dot - 1 > 1) {
    line_error(line, std::string(what) + " has more than one fractional digit: '" + std::string(s) + "'");
  }
  return v;
}

TrackRecord parse_track_fields(std::span<const std::string_view> f, std::size_t line) {
  check_timestamp(f[0], line);
  if (f[1].empty()) line_error(line, "empty storm_id");
  TrackRecord r{std::string(f[0]), std::string(f[1]), parse_degrees(f[2], "lat", line),
                parse_degrees(f[3], "lon", line)};
  if (r.lat < -90.0 || r.lat > 90.0) line_error(line, "lat out of range [-90, 90]: " + std::string(f[2]));
  if (r.lon < 0.0 || r.lon >= 360.0) line_error(line, "lon out of range [0, 360): " + std::string(f[3]));
  return r;
}

/// Calls row(fields, line_number) for every data line after checking the header.
template <typename Row>
void read_csv(std::istream& in, std::string_view header, std::size_t columns, Row&& row) {
  std::string text;
  std::size_t line = 0;
  bool seen_header = false;
  while (std::getline(in, text)) {
    ++line;
    const std::string_view l = strip_cr(text);
    if (!seen_header) {
      if (l != header) line_error(line, "expected header '" + std::string(header) + "'");
      seen_header = true;
      continue;
    }
    if (l.empty()) continue;
    const auto fields = split_csv(l);
    if (fields.size() != columns) {
      line_error(line, "expected " + std::to_string(columns) + " fields, got " + std::to_string(fields.size()));
    }
    row(fields, line);
  }
  if (!seen_header) throw FormatError("line 1: missing header '" + std::string(header) + "'");
}

std::string format_degrees(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// Coordinates

void GeoDomain::validate() const {
  if (!(lat_span > 0.0) || !(lon_span > 0.0)) throw ValueError("domain spans must be > 0");
  if (lat_min < -90.0 || lat_min + lat_span > 90.0) throw ValueError("domain latitude outside [-90, 90]");
  if (lon_min < 0.0 || lon_min >= 360.0 || lon_min + lon_span > 360.0) {
    throw ValueError("domain longitude must satisfy 0 <= lon_min and lon_min + lon_span <= 360");
  }
}

Point normalize_coords(double lat, double lon, const GeoDomain& d) {
  d.validate();
  const Point p{(lat - d.lat_min) / d.lat_span, (lon - d.lon_min) / d.lon_span};
  if (!(p[0] >= 0.0 && p[0] <= 1.0 && p[1] >= 0.0 && p[1] <= 1.0)) {
    throw ValueError("point (" + std::to_string(lat) + ", " + std::to_string(lon) + ") lies outside the domain");
  }
  return p;
}

Point denormalize_coords(double lat_n, double lon_n, const GeoDomain& d) {
  d.validate();
  if (!(lat_n >= 0.0 && lat_n <= 1.0 && lon_n >= 0.0 && lon_n <= 1.0)) {
    throw ValueError("normalized coordinates must lie in [0,1]");
  }
  return {d.lat_min + lat_n * d.lat_span, d.lon_min + lon_n * d.lon_span};
}

// ---------------------------------------------------------------------------
// CSV

std::vector<TrackRecord> parse_best_track(std::istream& in) {
  std::vector<TrackRecord> out;
  std::set<std::pair<std::string, std::string>> keys;
  read_csv(in, kTrackHeader, 4, [&](std::span<const std::string_view> f, std::size_t line) {
    TrackRecord r = parse_track_fields(f, line);
    if (!keys.emplace(r.storm_id, r.timestamp).second) {
      line_error(line, "duplicate fix for storm " + r.storm_id + " at " + r.timestamp);
    }
    out.push_back(std::move(r));
  });
  return out;
}

std::vector<ManifestEntry> parse_manifest(std::istream& in) {
  std::vector<ManifestEntry> out;
  std::set<std::pair<std::string, std::string>> keys;
  read_csv(in, kManifestHeader, 5, [&](std::span<const std::string_view> f, std::size_t line) {
    if (f[0].empty()) line_error(line, "empty image_path");
    ManifestEntry e{std::string(f[0]), parse_track_fields(f.subspan(1), line)};
    if (!keys.emplace(e.track.storm_id, e.track.timestamp).second) {
      line_error(line, "duplicate fix for storm " + e.track.storm_id + " at " + e.track.timestamp);
    }
    out.push_back(std::move(e));
  });
  return out;
}

std::string format_manifest(std::span<const ManifestEntry> entries) {
  std::string out(kManifestHeader);
  out += '\n';
  for (const ManifestEntry& e : entries) {
    out += e.image_path + ',' + e.track.timestamp + ',' + e.track.storm_id + ',' +
           format_degrees(e.track.lat) + ',' + format_degrees(e.track.lon) + '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Equalization

Tensor cdf_equalize(const Tensor& channel, int levels) {
  if (channel.rank() != 2) throw ShapeError("cdf_equalize expects an (H,W) channel");
  if (levels < 2) throw ValueError("cdf_equalize needs at least 2 levels");
  const auto values = channel.values();
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  Tensor out(channel.shape());
  if (!(hi > lo)) return out;

  const auto nlev = static_cast<std::size_t>(levels);
  std::vector<std::size_t> bin(values.size());
  std::vector<std::size_t> counts(nlev, 0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double t = (values[i] - lo) / (hi - lo) * static_cast<double>(levels);
    bin[i] = std::min(nlev - 1, static_cast<std::size_t>(std::floor(t)));
    ++counts[bin[i]];
  }
  std::vector<double> cdf(nlev);
  std::size_t running = 0;
  for (std::size_t b = 0; b < nlev; ++b) {
    running += counts[b];
    cdf[b] = static_cast<double>(running) / static_cast<double>(values.size());
  }
  const double f_min = cdf[bin[static_cast<std::size_t>(lo_it - values.begin())]];
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i] = (cdf[bin[i]] - f_min) / (1.0 - f_min);
  }
  return out;
}

Tensor equalize_channels(const Tensor& image, int levels) {
  if (image.rank() != 3) throw ShapeError("equalize_channels expects an (H,W,C) image");
  const std::size_t h = image.dim(0), w = image.dim(1), c = image.dim(2);
  Tensor out(image.shape());
  Tensor plane(Shape{h, w});
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t i = 0; i < h * w; ++i) plane[i] = image[i * c + k];
    const Tensor eq = cdf_equalize(plane, levels);
    for (std::size_t i = 0; i < h * w; ++i) out[i * c + k] = eq[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// GNI images

std::string encode_image(const Tensor& image) {
  if (image.rank() != 3) throw ShapeError("GNI images are (H,W,C), got " + image.shape().to_string());
  std::string out(kImageMagic);
  for (std::size_t d : image.shape().dims()) io::put_u32(out, static_cast<std::uint32_t>(d));
  for (double v : image.values()) {
    if (!(v >= 0.0 && v <= 1.0)) throw ValueError("GNI pixel values must lie in [0,1]");
    io::put_f32(out, static_cast<float>(v));
  }
  return out;
}

Tensor decode_image(std::string_view bytes) {
  io::ByteReader in(bytes);
  if (in.take(4, "magic") != kImageMagic) throw FormatError("not a GNI image (bad magic)");
  const std::size_t h = in.u32("height"), w = in.u32("width"), c = in.u32("channels");
  if (h == 0 || w == 0 || c == 0) throw FormatError("GNI header has a zero extent");
  const std::size_t n = h * w * c;
  if (in.remaining() != n * 4) {
    throw FormatError("GNI payload holds " + std::to_string(in.remaining() / 4) + " values, header says " +
                      std::to_string(n) + " (truncated or extent mismatch)");
  }
  std::vector<double> v(n);
  for (double& x : v) {
    x = in.f32("pixel");
    if (!(x >= 0.0 && x <= 1.0)) throw FormatError("GNI pixel value outside [0,1]");
  }
  return Tensor(Shape{h, w, c}, std::move(v));
}

void write_image(const std::filesystem::path& path, const Tensor& image) {
  io::write_file_atomic(path, encode_image(image));
}

Tensor read_image(const std::filesystem::path& path) { return decode_image(io::read_file(path)); }

// ---------------------------------------------------------------------------
// Datasets

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.domain = domain;
  out.height = height;
  out.width = width;
  out.channels = channels;
  out.source = source;
  out.samples.reserve(indices.size());
  for (std::size_t i : indices) out.samples.push_back(samples.at(i));
  return out;
}

void Dataset::validate() const {
  for (const Sample& s : samples) {
    if (s.image.rank() != 3 || s.image.dim(0) != height || s.image.dim(1) != width ||
        s.image.dim(2) != channels) {
      throw ShapeError("sample image " + s.image.shape().to_string() + " does not match dataset dims");
    }
    if (!(s.target[0] >= 0.0 && s.target[0] <= 1.0 && s.target[1] >= 0.0 && s.target[1] <= 1.0)) {
      throw ValueError("sample target outside [0,1]^2");
    }
  }
}

std::pair<Tensor, Tensor> make_batch(const Dataset& ds, std::span<const std::size_t> indices) {
  if (indices.empty()) throw ShapeError("empty batch");
  const std::size_t per = ds.height * ds.width * ds.channels;
  Tensor images(Shape{indices.size(), ds.height, ds.width, ds.channels});
  Tensor targets(Shape{indices.size(), 2});
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const Sample& s = ds.samples.at(indices[b]);
    if (s.image.size() != per) throw ShapeError("sample image does not match dataset dims");
    std::copy(s.image.data(), s.image.data() + per, images.mutable_data() + b * per);
    targets[2 * b] = s.target[0];
    targets[2 * b + 1] = s.target[1];
  }
  return {std::move(images), std::move(targets)};
}

Tensor targets_of(const Dataset& ds) {
  if (ds.empty()) throw ShapeError("dataset is empty");
  Tensor t(Shape{ds.size(), 2});
  for (std::size_t i = 0; i < ds.size(); ++i) {
    t[2 * i] = ds.samples[i].target[0];
    t[2 * i + 1] = ds.samples[i].target[1];
  }
  return t;
}

Point normalized_to_pixel(Point target, std::size_t height, std::size_t width) {
  return {(1.0 - target[0]) * static_cast<double>(height - 1), target[1] * static_cast<double>(width - 1)};
}

Point pixel_to_normalized(double row, double col, std::size_t height, std::size_t width) {
  return {1.0 - row / static_cast<double>(height - 1), col / static_cast<double>(width - 1)};
}

// ---------------------------------------------------------------------------
// Synthetic generator

namespace {

std::string synth_timestamp(std::size_t index) {
  using namespace std::chrono;
  const sys_days start{year{2011} / April / 1};
  const auto t = time_point_cast<minutes>(sys_time<minutes>(start) + hours(6 * static_cast<long>(index)));
  const auto day = floor<days>(t);
  const year_month_day ymd{day};
  const hh_mm_ss hms{t - day};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()));
  return buf;
}

double quantize_tenth(double v) { return std::round(v * 10.0) / 10.0; }

}  // namespace

Dataset synth_generate(const SynthConfig& cfg) {
  if (cfg.count < 1) throw ValueError("synthetic dataset needs count >= 1");
  if (cfg.height < 16 || cfg.width < 16) throw ValueError("synthetic images need H, W >= 16");
  if (cfg.channels < 1) throw ValueError("synthetic images need at least one channel");
  if (!(cfg.noise_level >= 0.0) || !std::isfinite(cfg.noise_level)) throw ValueError("noise level must be >= 0");
  cfg.domain.validate();

  Dataset ds;
  ds.domain = cfg.domain;
  ds.height = cfg.height;
  ds.width = cfg.width;
  ds.channels = cfg.channels;
  ds.source = "synthetic";
  ds.samples.resize(cfg.count);

  const double min_side = static_cast<double>(std::min(cfg.height, cfg.width));
  for (std::size_t i = 0; i < cfg.count; ++i) {
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i >> 32)};
    Rng rng(seq);

    // Target on the 0.1 degree grid so the manifest reproduces it exactly.
    const GeoDomain& d = cfg.domain;
    const double lat = quantize_tenth(d.lat_min + uniform(rng, 0.1, 0.9) * d.lat_span);
    const double lon = quantize_tenth(d.lon_min + uniform(rng, 0.1, 0.9) * d.lon_span);
    const Point target{(lat - d.lat_min) / d.lat_span, (lon - d.lon_min) / d.lon_span};

    const double sigma = uniform(rng, 0.06, 0.15) * min_side;
    const double phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const double tightness = uniform(rng, 0.8, 1.6);
    std::vector<double> band_scale(cfg.channels);
    for (double& s : band_scale) s = uniform(rng, 0.7, 1.0);

    const Point centre = normalized_to_pixel(target, cfg.height, cfg.width);
    Tensor image(Shape{cfg.height, cfg.width, cfg.channels});
    double* px = image.mutable_data();
    for (std::size_t y = 0; y < cfg.height; ++y) {
      for (std::size_t x = 0; x < cfg.width; ++x) {
        const double dy = static_cast<double>(y) - centre[0];
        const double dx = static_cast<double>(x) - centre[1];
        const double r = std::hypot(dy, dx);
        const double envelope = std::exp(-r * r / (2.0 * sigma * sigma));
        const double arm = std::atan2(dy, dx) - tightness * std::log1p(r / (0.25 * sigma));
        const double spiral = 0.5 * (1.0 + std::cos(2.0 * arm + phase));
        const double base = envelope * (0.65 + 0.35 * spiral);
        for (std::size_t c = 0; c < cfg.channels; ++c, ++px) {
          double v = band_scale[c] * base;
          if (cfg.noise_level > 0.0) v += uniform(rng, -cfg.noise_level, cfg.noise_level);
          *px = static_cast<double>(static_cast<float>(std::clamp(v, 0.0, 1.0)));
        }
      }
    }

    Sample& s = ds.samples[i];
    s.image = std::move(image);
    s.target = target;
    char id[32];
    std::snprintf(id, sizeof id, "SY%04zu", i / 10);
    s.storm_id = id;
    s.timestamp = synth_timestamp(i);
    char path[32];
    std::snprintf(path, sizeof path, "images/%06zu.gni", i);
    s.image_path = path;
  }
  return ds;
}

void write_dataset(const std::filesystem::path& dir, const Dataset& ds) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "images", ec);
  if (ec) throw IoError("cannot create directory " + (dir / "images").string());
  std::vector<ManifestEntry> entries;
  entries.reserve(ds.size());
  for (const Sample& s : ds.samples) {
    write_image(dir / s.image_path, s.image);
    const Point deg = denormalize_coords(s.target[0], s.target[1], ds.domain);
    entries.push_back({s.image_path, {s.timestamp, s.storm_id, quantize_tenth(deg[0]), quantize_tenth(deg[1])}});
  }
  io::write_file_atomic(dir / "manifest.csv", format_manifest(entries));
}

Dataset load_dataset(const std::filesystem::path& dir, const LoadOptions& options) {
  const std::filesystem::path manifest = dir / "manifest.csv";
  std::istringstream text(io::read_file(manifest));
  std::vector<ManifestEntry> entries;
  try {
    entries = parse_manifest(text);
  } catch (const FormatError& e) {
    throw FormatError(manifest.string() + ": " + e.what());
  }
  if (entries.empty()) throw FormatError(manifest.string() + ": manifest lists no images");

  Dataset ds;
  ds.domain = options.domain;
  ds.source = dir.string();
  for (const ManifestEntry& e : entries) {
    Sample s;
    try {
      s.image = read_image(dir / e.image_path);
    } catch (const FormatError& err) {
      throw FormatError((dir / e.image_path).string() + ": " + err.what());
    }
    if (options.equalize_levels > 0) s.image = equalize_channels(s.image, options.equalize_levels);
    s.target = normalize_coords(e.track.lat, e.track.lon, options.domain);
    s.storm_id = e.track.storm_id;
    s.timestamp = e.track.timestamp;
    s.image_path = e.image_path;
    if (ds.samples.empty()) {
      ds.height = s.image.dim(0);
      ds.width = s.image.dim(1);
      ds.channels = s.image.dim(2);
    }
    ds.samples.push_back(std::move(s));
  }
  ds.validate();
  return ds;
}

}  // namespace globenet
