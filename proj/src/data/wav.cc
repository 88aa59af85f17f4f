// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dronese/data/wav.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "dronese/numerics/errors.h"

namespace dronese {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

static_assert(std::endian::native == std::endian::little,
              "wav I/O assumes a little-endian host");

template <typename T>
T read_le(const std::string& buf, std::size_t at) {
  T v;
  std::memcpy(&v, buf.data() + at, sizeof(T));
  return v;
}

template <typename T>
void write_le(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

struct Parsed {
  WavInfo info;
  std::size_t data_offset = 0;
};

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("wav: cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::size_t sample_width(WavEncoding e) {
  switch (e) {
    case WavEncoding::kPcm16: return 2;
    case WavEncoding::kFloat32: return 4;
    case WavEncoding::kFloat64: return 8;
  }
  return 0;
}

Parsed parse(const std::string& buf, const std::filesystem::path& path) {
  const std::string name = path.string();
  if (buf.size() < 12 || buf.compare(0, 4, "RIFF") != 0 ||
      buf.compare(8, 4, "WAVE") != 0) {
    throw DataError("wav: " + name + " is not a RIFF/WAVE file");
  }
  Parsed p;
  bool have_fmt = false, have_data = false;
  std::uint16_t format = 0, bits = 0;
  std::size_t data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const std::string id = buf.substr(pos, 4);
    const std::size_t size = read_le<std::uint32_t>(buf, pos + 4);
    const std::size_t body = pos + 8;
    if (id == "fmt ") {
      if (size < 16 || body + size > buf.size()) {
        throw DataError("wav: " + name + " has a truncated fmt chunk");
      }
      format = read_le<std::uint16_t>(buf, body);
      p.info.channels = read_le<std::uint16_t>(buf, body + 2);
      p.info.sample_rate = read_le<std::uint32_t>(buf, body + 4);
      bits = read_le<std::uint16_t>(buf, body + 14);
      if (format == kFormatExtensible) {
        if (size < 26) throw DataError("wav: " + name + " has a short extensible fmt");
        format = read_le<std::uint16_t>(buf, body + 24);
      }
      have_fmt = true;
    } else if (id == "data") {
      p.data_offset = body;
      data_size = std::min(size, buf.size() - body);
      have_data = true;
      if (have_fmt) break;
    }
    pos = body + size + (size & 1u);
  }
  if (!have_fmt || !have_data) {
    throw DataError("wav: " + name + " lacks a fmt or data chunk");
  }
  if (format == kFormatPcm && bits == 16) {
    p.info.encoding = WavEncoding::kPcm16;
  } else if (format == kFormatFloat && bits == 32) {
    p.info.encoding = WavEncoding::kFloat32;
  } else if (format == kFormatFloat && bits == 64) {
    p.info.encoding = WavEncoding::kFloat64;
  } else {
    throw DataError("wav: " + name + " uses format " + std::to_string(format) +
                    " with " + std::to_string(bits) +
                    " bits; supported are 16-bit PCM and 32/64-bit float");
  }
  if (p.info.channels == 0) throw DataError("wav: " + name + " declares 0 channels");
  p.info.frames = data_size / (sample_width(p.info.encoding) * p.info.channels);
  return p;
}

}  // namespace

WavInfo read_wav_info(const std::filesystem::path& path) {
  return parse(slurp(path), path).info;
}

std::vector<double> load_wav(const std::filesystem::path& path,
                             std::uint32_t expected_rate) {
  const std::string buf = slurp(path);
  const Parsed p = parse(buf, path);
  if (p.info.channels != 1) {
    throw DataError("wav: " + path.string() + " has " +
                    std::to_string(p.info.channels) + " channels; mono required");
  }
  if (p.info.sample_rate != expected_rate) {
    throw DataError("wav: sample rate mismatch in " + path.string() + ": file is " +
                    std::to_string(p.info.sample_rate) + " Hz, expected " +
                    std::to_string(expected_rate) + " Hz");
  }
  std::vector<double> out(p.info.frames);
  const std::size_t w = sample_width(p.info.encoding);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::size_t at = p.data_offset + i * w;
    switch (p.info.encoding) {
      case WavEncoding::kPcm16:
        out[i] = double(read_le<std::int16_t>(buf, at)) / 32768.0;
        break;
      case WavEncoding::kFloat32:
        out[i] = double(read_le<float>(buf, at));
        break;
      case WavEncoding::kFloat64:
        out[i] = read_le<double>(buf, at);
        break;
    }
  }
  return out;
}

void save_wav(const std::filesystem::path& path, const std::vector<double>& wave,
              std::uint32_t sample_rate, WavEncoding encoding) {
  const std::size_t w = sample_width(encoding);
  const std::size_t data_bytes = wave.size() * w;
  if (data_bytes > 0xFFFFFFFFull - 36) throw DataError("wav: signal too long for RIFF");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("wav: cannot write " + path.string());
  out.write("RIFF", 4);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(36 + data_bytes));
  out.write("WAVEfmt ", 8);
  write_le<std::uint32_t>(out, 16);
  write_le<std::uint16_t>(out, encoding == WavEncoding::kPcm16 ? kFormatPcm : kFormatFloat);
  write_le<std::uint16_t>(out, 1);
  write_le<std::uint32_t>(out, sample_rate);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(sample_rate * w));
  write_le<std::uint16_t>(out, static_cast<std::uint16_t>(w));
  write_le<std::uint16_t>(out, static_cast<std::uint16_t>(8 * w));
  out.write("data", 4);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(data_bytes));
  for (double v : wave) {
    switch (encoding) {
      case WavEncoding::kPcm16: {
        const double s = std::clamp(std::nearbyint(v * 32768.0), -32768.0, 32767.0);
        write_le<std::int16_t>(out, static_cast<std::int16_t>(s));
        break;
      }
      case WavEncoding::kFloat32:
        write_le<float>(out, static_cast<float>(v));
        break;
      case WavEncoding::kFloat64:
        write_le<double>(out, v);
        break;
    }
  }
  if (!out) throw DataError("wav: write failed for " + path.string());
}

}  // namespace dronese
