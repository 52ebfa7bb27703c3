#include "ivdoa/wav.hpp"

#include <cstring>
#include <fstream>

namespace ivdoa {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint16_t get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

WavData read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw WavError("cannot open WAV file: " + path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(buf.data());
  if (buf.size() < 12 || std::memcmp(p, "RIFF", 4) != 0 || std::memcmp(p + 8, "WAVE", 4) != 0)
    throw WavError("not a RIFF/WAVE file: " + path);

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::size_t data_pos = 0, data_len = 0;
  std::size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const std::uint32_t chunk_len = get_u32(p + pos + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(p + pos, "fmt ", 4) == 0) {
      if (chunk_len < 16 || body + 16 > buf.size()) throw WavError("truncated fmt chunk");
      format = get_u16(p + body);
      channels = get_u16(p + body + 2);
      rate = get_u32(p + body + 4);
      bits = get_u16(p + body + 14);
      if (format == 0xFFFE && chunk_len >= 40)  // extensible: subformat GUID leads with the tag
        format = get_u16(p + body + 24);
    } else if (std::memcmp(p + pos, "data", 4) == 0) {
      data_pos = body;
      data_len = std::min<std::size_t>(chunk_len, buf.size() - body);
    }
    pos = body + chunk_len + (chunk_len & 1);
  }
  if (channels == 0 || rate == 0) throw WavError("missing fmt chunk: " + path);
  if (data_pos == 0) throw WavError("missing data chunk: " + path);

  const std::size_t bytes_per_sample = bits / 8;
  if (bytes_per_sample == 0) throw WavError("bad bits per sample");
  const std::size_t total = data_len / (bytes_per_sample * channels);

  WavData out;
  out.sample_rate = rate;
  out.channels.assign(channels, std::vector<double>(total));
  const unsigned char* d = p + data_pos;
  for (std::size_t i = 0; i < total; ++i) {
    for (std::uint16_t c = 0; c < channels; ++c) {
      const unsigned char* s = d + (i * channels + c) * bytes_per_sample;
      double v = 0.0;
      if (format == kFormatPcm && bits == 16) {
        v = static_cast<std::int16_t>(get_u16(s)) / 32768.0;
      } else if (format == kFormatPcm && bits == 24) {
        std::int32_t raw = (s[0] << 8) | (s[1] << 16) | (static_cast<std::int32_t>(s[2]) << 24);
        v = (raw >> 8) / 8388608.0;
      } else if (format == kFormatPcm && bits == 32) {
        v = static_cast<std::int32_t>(get_u32(s)) / 2147483648.0;
      } else if (format == kFormatFloat && bits == 32) {
        float f;
        std::uint32_t raw = get_u32(s);
        std::memcpy(&f, &raw, 4);
        v = f;
      } else if (format == kFormatFloat && bits == 64) {
        double f;
        std::uint64_t raw = get_u32(s) | (static_cast<std::uint64_t>(get_u32(s + 4)) << 32);
        std::memcpy(&f, &raw, 8);
        v = f;
      } else {
        throw WavError("unsupported WAV encoding (format " + std::to_string(format) + ", " +
                       std::to_string(bits) + " bits)");
      }
      out.channels[c][i] = v;
    }
  }
  return out;
}

void write_wav(const std::string& path, const WavData& data) {
  if (data.channels.empty()) throw WavError("write_wav: no channels");
  const std::size_t frames = data.num_frames();
  for (const auto& ch : data.channels)
    if (ch.size() != frames) throw WavError("write_wav: ragged channels");
  const auto channels = static_cast<std::uint16_t>(data.channels.size());
  const auto rate = static_cast<std::uint32_t>(data.sample_rate);

  std::string out;
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(frames * channels * 4);
  out.reserve(44 + data_bytes);
  out.append("RIFF");
  put_u32(out, 36 + data_bytes);
  out.append("WAVE");
  out.append("fmt ");
  put_u32(out, 16);
  put_u16(out, kFormatFloat);
  put_u16(out, channels);
  put_u32(out, rate);
  put_u32(out, rate * channels * 4);
  put_u16(out, static_cast<std::uint16_t>(channels * 4));
  put_u16(out, 32);
  out.append("data");
  put_u32(out, data_bytes);
  for (std::size_t i = 0; i < frames; ++i) {
    for (std::uint16_t c = 0; c < channels; ++c) {
      const float f = static_cast<float>(data.channels[c][i]);
      std::uint32_t raw;
      std::memcpy(&raw, &f, 4);
      put_u32(out, raw);
    }
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw WavError("cannot write WAV file: " + path);
  os.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!os) throw WavError("short write: " + path);
}

}  // namespace ivdoa
