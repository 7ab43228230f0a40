#include "oodbench/nifti.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <memory>

#include "oodbench/error.hpp"

namespace oodbench::nifti {

namespace fs = std::filesystem;

namespace {

// Byte offsets within the 348-byte NIfTI-1 header.
namespace off {
constexpr std::size_t sizeof_hdr = 0;
constexpr std::size_t regular = 38;
constexpr std::size_t dim = 40;
constexpr std::size_t datatype = 70;
constexpr std::size_t bitpix = 72;
constexpr std::size_t pixdim = 76;
constexpr std::size_t vox_offset = 108;
constexpr std::size_t scl_slope = 112;
constexpr std::size_t scl_inter = 116;
constexpr std::size_t xyzt_units = 123;
constexpr std::size_t descrip = 148;
constexpr std::size_t qform_code = 252;
constexpr std::size_t sform_code = 254;
constexpr std::size_t quatern_b = 256;
constexpr std::size_t qoffset_x = 268;
constexpr std::size_t srow_x = 280;
constexpr std::size_t magic = 344;
}  // namespace off

constexpr std::uint8_t kUnitsMm = 2;

using RawHeader = std::array<unsigned char, kHeaderSize>;

template <typename T>
T byteswap(T v) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  std::reverse(b, b + sizeof(T));
  std::memcpy(&v, b, sizeof(T));
  return v;
}

template <typename T>
T get(const RawHeader& raw, std::size_t offset, bool swap) {
  T v;
  std::memcpy(&v, raw.data() + offset, sizeof(T));
  return swap ? byteswap(v) : v;
}

template <typename T>
void put(RawHeader& raw, std::size_t offset, T v) {
  std::memcpy(raw.data() + offset, &v, sizeof(T));
}

struct GzCloser {
  void operator()(gzFile f) const noexcept { gzclose(f); }
};
using GzHandle = std::unique_ptr<gzFile_s, GzCloser>;

GzHandle open_for_read(const fs::path& path) {
  gzFile f = gzopen(path.c_str(), "rb");
  if (!f) throw Error(Errc::io, "cannot open " + path.string());
  gzbuffer(f, 1 << 17);
  return GzHandle(f);
}

void read_exact(gzFile f, void* dst, std::size_t bytes, const fs::path& path) {
  auto* out = static_cast<unsigned char*>(dst);
  while (bytes > 0) {
    const unsigned chunk = static_cast<unsigned>(std::min<std::size_t>(bytes, 1u << 30));
    const int got = gzread(f, out, chunk);
    if (got <= 0) throw Error(Errc::io, "truncated file " + path.string());
    out += got;
    bytes -= static_cast<std::size_t>(got);
  }
}

std::size_t bytes_per_voxel(std::int16_t datatype) {
  switch (datatype) {
    case static_cast<std::int16_t>(Datatype::uint8): return 1;
    case static_cast<std::int16_t>(Datatype::int16): return 2;
    case static_cast<std::int16_t>(Datatype::float32): return 4;
    default:
      throw Error(Errc::unsupported_datatype, "NIfTI datatype code " + std::to_string(datatype) +
                                                  " (supported: 2 uint8, 4 int16, 16 float32)");
  }
}

Header parse_header(const RawHeader& raw, const fs::path& path) {
  Header h;
  const auto size_native = get<std::int32_t>(raw, off::sizeof_hdr, false);
  if (size_native == kHeaderSize) {
    h.byte_swapped = false;
  } else if (byteswap(size_native) == kHeaderSize) {
    h.byte_swapped = true;
  } else {
    throw Error(Errc::format, path.string() + ": sizeof_hdr is not 348");
  }
  const bool sw = h.byte_swapped;
  std::memcpy(h.magic.data(), raw.data() + off::magic, 4);
  if (std::memcmp(h.magic.data(), "n+1\0", 4) != 0) {
    throw Error(Errc::format, path.string() + ": magic is not \"n+1\" (single-file NIfTI-1 required)");
  }
  for (std::size_t i = 0; i < 8; ++i) {
    h.dim[i] = get<std::int16_t>(raw, off::dim + 2 * i, sw);
    h.pixdim[i] = get<float>(raw, off::pixdim + 4 * i, sw);
  }
  h.datatype = get<std::int16_t>(raw, off::datatype, sw);
  h.bitpix = get<std::int16_t>(raw, off::bitpix, sw);
  h.vox_offset = get<float>(raw, off::vox_offset, sw);
  h.scl_slope = get<float>(raw, off::scl_slope, sw);
  h.scl_inter = get<float>(raw, off::scl_inter, sw);
  h.xyzt_units = raw[off::xyzt_units];

  auto& o = h.orientation;
  o.qform_code = get<std::int16_t>(raw, off::qform_code, sw);
  o.sform_code = get<std::int16_t>(raw, off::sform_code, sw);
  o.qfac = h.pixdim[0];
  for (std::size_t i = 0; i < 3; ++i) {
    o.quatern[i] = get<float>(raw, off::quatern_b + 4 * i, sw);
    o.qoffset[i] = get<float>(raw, off::qoffset_x + 4 * i, sw);
    for (std::size_t j = 0; j < 4; ++j) o.srow[i][j] = get<float>(raw, off::srow_x + 16 * i + 4 * j, sw);
  }

  if (h.dim[0] < 1 || h.dim[0] > 7) throw Error(Errc::format, path.string() + ": dim[0] out of range");
  for (int i = 1; i <= h.dim[0]; ++i) {
    if (h.dim[i] < 1) throw Error(Errc::format, path.string() + ": non-positive dimension");
  }
  bytes_per_voxel(h.datatype);
  if (h.vox_offset < static_cast<float>(kVoxOffset)) {
    throw Error(Errc::format, path.string() + ": vox_offset below 352");
  }
  return h;
}

Header read_header_from(gzFile f, const fs::path& path) {
  RawHeader raw{};
  read_exact(f, raw.data(), raw.size(), path);
  return parse_header(raw, path);
}

Grid grid_of(const Header& h) {
  auto extent = [&](int i) { return i <= h.dim[0] ? static_cast<std::size_t>(h.dim[i]) : std::size_t{1}; };
  auto space = [&](int i) {
    const double s = std::abs(static_cast<double>(h.pixdim[i]));
    return (i <= h.dim[0] && std::isfinite(s) && s > 0.0) ? s : 1.0;
  };
  Grid g = make_grid({extent(1), extent(2), extent(3)}, {space(1), space(2), space(3)});
  g.orientation = h.orientation;
  return g;
}

RawHeader build_header(const Grid& grid, std::size_t frames, Datatype type) {
  RawHeader raw{};
  const auto& s = grid.shape;
  const std::size_t limit = std::numeric_limits<std::int16_t>::max();
  if (s.nx > limit || s.ny > limit || s.nz > limit || frames > limit) {
    throw Error(Errc::parameter, "volume extent exceeds the NIfTI-1 int16 dimension limit");
  }
  put<std::int32_t>(raw, off::sizeof_hdr, kHeaderSize);
  raw[off::regular] = 'r';
  const std::int16_t ndim = frames > 1 ? 4 : 3;
  const std::array<std::int16_t, 8> dim{ndim,
                                        static_cast<std::int16_t>(s.nx),
                                        static_cast<std::int16_t>(s.ny),
                                        static_cast<std::int16_t>(s.nz),
                                        static_cast<std::int16_t>(frames > 1 ? frames : 1),
                                        1, 1, 1};
  const auto& o = grid.orientation;
  const std::array<float, 8> pixdim{o.qfac == 0.0f ? 1.0f : o.qfac,
                                    static_cast<float>(grid.spacing.sx),
                                    static_cast<float>(grid.spacing.sy),
                                    static_cast<float>(grid.spacing.sz),
                                    1.0f, 1.0f, 1.0f, 1.0f};
  for (std::size_t i = 0; i < 8; ++i) {
    put(raw, off::dim + 2 * i, dim[i]);
    put(raw, off::pixdim + 4 * i, pixdim[i]);
  }
  const auto code = static_cast<std::int16_t>(type);
  put(raw, off::datatype, code);
  put(raw, off::bitpix, static_cast<std::int16_t>(8 * bytes_per_voxel(code)));
  put(raw, off::vox_offset, static_cast<float>(kVoxOffset));
  put(raw, off::scl_slope, 1.0f);
  put(raw, off::scl_inter, 0.0f);
  raw[off::xyzt_units] = kUnitsMm;
  static constexpr char kDescrip[] = "oodbench";
  std::memcpy(raw.data() + off::descrip, kDescrip, sizeof kDescrip - 1);
  put(raw, off::qform_code, o.qform_code);
  put(raw, off::sform_code, o.sform_code);
  for (std::size_t i = 0; i < 3; ++i) {
    put(raw, off::quatern_b + 4 * i, o.quatern[i]);
    put(raw, off::qoffset_x + 4 * i, o.qoffset[i]);
    for (std::size_t j = 0; j < 4; ++j) put(raw, off::srow_x + 16 * i + 4 * j, o.srow[i][j]);
  }
  std::memcpy(raw.data() + off::magic, "n+1\0", 4);
  return raw;
}

void write_bytes(const fs::path& path, const RawHeader& header, std::span<const unsigned char> payload,
                 bool gzip) {
  static constexpr std::array<unsigned char, 4> kNoExtension{0, 0, 0, 0};
  if (gzip) {
    gzFile f = gzopen(path.c_str(), "wb6");
    if (!f) throw Error(Errc::io, "cannot write " + path.string());
    GzHandle guard(f);
    auto put_chunk = [&](const unsigned char* p, std::size_t n) {
      while (n > 0) {
        const unsigned chunk = static_cast<unsigned>(std::min<std::size_t>(n, 1u << 30));
        if (gzwrite(f, p, chunk) != static_cast<int>(chunk)) throw Error(Errc::io, "write failed: " + path.string());
        p += chunk;
        n -= chunk;
      }
    };
    put_chunk(header.data(), header.size());
    put_chunk(kNoExtension.data(), kNoExtension.size());
    put_chunk(payload.data(), payload.size());
    if (gzclose(guard.release()) != Z_OK) throw Error(Errc::io, "write failed: " + path.string());
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(header.data()), static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(kNoExtension.data()), 4);
  out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  if (!out) throw Error(Errc::io, "write failed: " + path.string());
}

void write_float32(const Grid& grid, std::size_t frames, std::span<const double> values, const fs::path& path,
                   bool gzip) {
  std::vector<unsigned char> payload(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto f = static_cast<float>(values[i]);
    std::memcpy(payload.data() + 4 * i, &f, 4);
  }
  write_bytes(path, build_header(grid, frames, Datatype::float32), payload, gzip);
}

}  // namespace

std::size_t Header::frames() const noexcept {
  std::size_t n = 1;
  for (int i = 4; i <= dim[0]; ++i) n *= static_cast<std::size_t>(dim[i]);
  return n;
}

bool wants_gzip(const fs::path& path) { return path.extension() == ".gz"; }

Header read_header(const fs::path& path) {
  auto f = open_for_read(path);
  return read_header_from(f.get(), path);
}

Image read_image(const fs::path& path) {
  auto f = open_for_read(path);
  Image img;
  img.header = read_header_from(f.get(), path);
  const Header& h = img.header;
  img.grid = grid_of(h);
  img.frames = h.frames();

  // Skip the extension block (if any) up to vox_offset.
  const auto skip = static_cast<std::size_t>(h.vox_offset) - static_cast<std::size_t>(kHeaderSize);
  std::vector<unsigned char> scratch(skip);
  read_exact(f.get(), scratch.data(), skip, path);

  const std::size_t count = img.grid.voxels() * img.frames;
  const std::size_t width = bytes_per_voxel(h.datatype);
  std::vector<unsigned char> payload(count * width);
  read_exact(f.get(), payload.data(), payload.size(), path);

  double slope = static_cast<double>(h.scl_slope);
  double inter = static_cast<double>(h.scl_inter);
  if (slope == 0.0 || !std::isfinite(slope)) {
    slope = 1.0;
    inter = 0.0;
  }
  if (!std::isfinite(inter)) inter = 0.0;

  img.values.resize(count);
  const bool sw = h.byte_swapped;
  const unsigned char* p = payload.data();
  for (std::size_t i = 0; i < count; ++i, p += width) {
    double raw = 0.0;
    switch (static_cast<Datatype>(h.datatype)) {
      case Datatype::uint8: raw = *p; break;
      case Datatype::int16: {
        std::int16_t v;
        std::memcpy(&v, p, 2);
        raw = sw ? byteswap(v) : v;
        break;
      }
      case Datatype::float32: {
        float v;
        std::memcpy(&v, p, 4);
        raw = sw ? byteswap(v) : v;
        break;
      }
    }
    const double value = raw * slope + inter;
    if (!std::isfinite(value)) throw Error(Errc::data, path.string() + ": non-finite voxel value");
    img.values[i] = value;
  }
  return img;
}

ScalarVolume read_scalar(const fs::path& path) {
  Image img = read_image(path);
  if (img.frames != 1) throw Error(Errc::shape, path.string() + ": expected a 3D volume");
  return ScalarVolume(img.grid, std::move(img.values));
}

LabelVolume read_labels(const fs::path& path, int num_classes) {
  Image img = read_image(path);
  if (img.frames != 1) throw Error(Errc::shape, path.string() + ": expected a 3D label volume");
  std::vector<std::uint16_t> labels(img.values.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double v = img.values[i];
    if (v < 0.0 || v != std::floor(v) || v >= num_classes) {
      throw Error(Errc::data, path.string() + ": label value outside {0..C-1}");
    }
    labels[i] = static_cast<std::uint16_t>(v);
  }
  return LabelVolume(img.grid, std::move(labels), num_classes);
}

namespace {

ProbVolume finalize_prob(const Grid& grid, int classes, std::vector<double> probs, const std::string& what) {
  constexpr double kRenormTolerance = 1e-3;
  const std::size_t n = grid.voxels();
  for (std::size_t v = 0; v < n; ++v) {
    double sum = 0.0;
    for (int c = 0; c < classes; ++c) {
      const double p = probs[c * n + v];
      if (p < 0.0) throw Error(Errc::invalid_probability, what + ": negative probability");
      sum += p;
    }
    if (std::abs(sum - 1.0) > kRenormTolerance) {
      throw Error(Errc::invalid_probability,
                  what + ": per-voxel sum " + std::to_string(sum) + " deviates from 1 by more than 1e-3");
    }
    if (sum != 1.0) {
      for (int c = 0; c < classes; ++c) probs[c * n + v] = std::min(1.0, probs[c * n + v] / sum);
    }
  }
  ProbVolume p(grid, classes, std::move(probs));
  if (auto bad = validate(p)) throw Error(Errc::invalid_probability, what + ": " + bad->message);
  return p;
}

}  // namespace

ProbVolume read_prob(const fs::path& path) {
  Image img = read_image(path);
  if (img.header.dim[0] != 4 || img.frames < 2) {
    throw Error(Errc::shape, path.string() + ": expected a 4D probability volume with >= 2 classes");
  }
  return finalize_prob(img.grid, static_cast<int>(img.frames), std::move(img.values), path.string());
}

ProbVolume read_prob(std::span<const fs::path> class_paths) {
  if (class_paths.size() == 1) return read_prob(class_paths.front());
  if (class_paths.empty()) throw Error(Errc::parameter, "no probability files given");
  std::vector<double> probs;
  Grid grid;
  for (std::size_t c = 0; c < class_paths.size(); ++c) {
    ScalarVolume v = read_scalar(class_paths[c]);
    if (c == 0) {
      grid = v.grid();
      probs.reserve(grid.voxels() * class_paths.size());
    } else if (v.shape() != grid.shape) {
      throw Error(Errc::shape, "class file " + class_paths[c].string() + " differs in shape from " +
                                   class_paths[0].string());
    }
    probs.insert(probs.end(), v.data().begin(), v.data().end());
  }
  return finalize_prob(grid, static_cast<int>(class_paths.size()), std::move(probs), class_paths[0].string());
}

std::vector<ScalarVolume> read_channels(const fs::path& path) {
  Image img = read_image(path);
  const std::size_t n = img.grid.voxels();
  std::vector<ScalarVolume> channels;
  channels.reserve(img.frames);
  for (std::size_t c = 0; c < img.frames; ++c) {
    channels.emplace_back(img.grid, std::vector<double>(img.values.begin() + c * n, img.values.begin() + (c + 1) * n));
  }
  return channels;
}

void write_scalar(const ScalarVolume& v, const fs::path& path, bool gzip) {
  write_float32(v.grid(), 1, v.data(), path, gzip);
}

void write_labels(const LabelVolume& v, const fs::path& path, bool gzip) {
  const bool narrow = v.num_classes() <= 256;
  const Datatype type = narrow ? Datatype::uint8 : Datatype::int16;
  std::vector<unsigned char> payload(v.size() * (narrow ? 1 : 2));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (narrow) {
      payload[i] = static_cast<unsigned char>(v[i]);
    } else {
      const auto s = static_cast<std::int16_t>(v[i]);
      std::memcpy(payload.data() + 2 * i, &s, 2);
    }
  }
  write_bytes(path, build_header(v.grid(), 1, type), payload, gzip);
}

void write_prob(const ProbVolume& p, const fs::path& path, bool gzip) {
  write_float32(p.grid(), static_cast<std::size_t>(p.num_classes()), p.probs(), path, gzip);
}

void write_channels(std::span<const ScalarVolume> channels, const fs::path& path, bool gzip) {
  if (channels.empty()) throw Error(Errc::parameter, "no channels to write");
  const Grid& grid = channels.front().grid();
  std::vector<double> all;
  all.reserve(grid.voxels() * channels.size());
  for (const auto& c : channels) {
    if (c.shape() != grid.shape) throw Error(Errc::shape, "feature channels differ in shape");
    all.insert(all.end(), c.data().begin(), c.data().end());
  }
  write_float32(grid, channels.size(), all, path, gzip);
}

}  // namespace oodbench::nifti
