#include "ps/audio_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "ps/error.hpp"

namespace ps {

namespace {

constexpr double kGateDb = 35.0;        // frame is active within this of peak
constexpr double kSilenceFloorRms = 1e-6;

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return b[0] | (b[1] << 8) | (b[2] << 16) | (std::uint32_t(b[3]) << 24);
}

std::uint16_t read_u16(std::istream& in) {
  unsigned char b[2];
  in.read(reinterpret_cast<char*>(b), 2);
  return b[0] | (b[1] << 8);
}

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<char*>(b), 4);
}

void write_u16(std::ostream& out, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff)};
  out.write(reinterpret_cast<char*>(b), 2);
}

}  // namespace

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open wav file: " + path.string());

  char tag[4];
  in.read(tag, 4);
  if (!in || std::memcmp(tag, "RIFF", 4) != 0)
    throw DataError("malformed wav header (no RIFF): " + path.string());
  read_u32(in);  // riff size, unchecked
  in.read(tag, 4);
  if (!in || std::memcmp(tag, "WAVE", 4) != 0)
    throw DataError("malformed wav header (no WAVE): " + path.string());

  bool have_fmt = false;
  int channels = 0, bits = 0, rate = 0, format = 0;
  std::vector<char> data;

  while (in.read(tag, 4)) {
    std::uint32_t size = read_u32(in);
    if (!in) break;
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      if (size < 16) throw DataError("malformed fmt chunk: " + path.string());
      format = read_u16(in);
      channels = read_u16(in);
      rate = static_cast<int>(read_u32(in));
      read_u32(in);  // byte rate
      read_u16(in);  // block align
      bits = read_u16(in);
      in.seekg(size - 16, std::ios::cur);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      data.resize(size);
      in.read(data.data(), size);
      if (static_cast<std::uint32_t>(in.gcount()) != size)
        throw DataError("truncated data chunk: " + path.string());
    } else {
      in.seekg(size + (size & 1), std::ios::cur);
    }
    if (size & 1 && std::memcmp(tag, "data", 4) == 0) in.seekg(1, std::ios::cur);
  }

  if (!have_fmt) throw DataError("missing fmt chunk: " + path.string());
  if (format != 1)
    throw DataError("unsupported codec (PCM only): " + path.string());
  if (channels != 1)
    throw DataError("multi-channel unsupported: " + path.string());
  if (bits != 16)
    throw DataError("unsupported bit depth (16-bit only): " + path.string());
  if (rate <= 0) throw DataError("invalid sample rate: " + path.string());
  if (data.size() < 2) throw DataError("empty data chunk: " + path.string());

  Waveform w;
  w.sample_rate_hz = rate;
  const std::size_t n = data.size() / 2;
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::int16_t v = static_cast<std::int16_t>(
        static_cast<unsigned char>(data[2 * i]) |
        (static_cast<unsigned char>(data[2 * i + 1]) << 8));
    w.samples[i] = v / 32768.0;
  }
  return w;
}

void write_wav(const Waveform& w, const std::filesystem::path& path) {
  if (w.samples.empty()) throw DataError("refusing to write empty waveform");
  if (w.sample_rate_hz <= 0) throw DataError("invalid sample rate");

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write wav file: " + path.string());

  const std::uint32_t data_bytes = static_cast<std::uint32_t>(w.samples.size() * 2);
  out.write("RIFF", 4);
  write_u32(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  write_u32(out, 16);
  write_u16(out, 1);  // PCM
  write_u16(out, 1);  // mono
  write_u32(out, static_cast<std::uint32_t>(w.sample_rate_hz));
  write_u32(out, static_cast<std::uint32_t>(w.sample_rate_hz * 2));
  write_u16(out, 2);
  write_u16(out, 16);
  out.write("data", 4);
  write_u32(out, data_bytes);
  for (double s : w.samples) {
    long v = std::lround(s * 32768.0);
    v = std::clamp(v, -32768L, 32767L);
    write_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(v)));
  }
  if (!out) throw DataError("write failed: " + path.string());
}

double active_speech_level_db(const Waveform& w) {
  if (w.samples.empty()) throw DataError("no active speech: empty waveform");
  const std::size_t frame = static_cast<std::size_t>(w.sample_rate_hz / 100);
  if (frame == 0) throw DataError("sample rate too low for 10 ms framing");

  struct FrameStat {
    std::size_t begin, len;
    double rms;
  };
  std::vector<FrameStat> stats;
  double peak_rms = 0.0;
  for (std::size_t begin = 0; begin < w.samples.size(); begin += frame) {
    const std::size_t len = std::min(frame, w.samples.size() - begin);
    double e = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      const double s = w.samples[begin + i];
      e += s * s;
    }
    const double rms = std::sqrt(e / len);
    stats.push_back({begin, len, rms});
    peak_rms = std::max(peak_rms, rms);
  }

  const double gate = std::max(peak_rms * std::pow(10.0, -kGateDb / 20.0),
                               kSilenceFloorRms);
  double energy = 0.0;
  std::size_t count = 0;
  for (const auto& f : stats) {
    if (f.rms <= gate) continue;
    for (std::size_t i = 0; i < f.len; ++i) {
      const double s = w.samples[f.begin + i];
      energy += s * s;
    }
    count += f.len;
  }
  if (count == 0) throw DataError("no active speech");
  return 20.0 * std::log10(std::sqrt(energy / count));
}

NormalizeResult normalize_level(const Waveform& w, double target_dbov) {
  const double level = active_speech_level_db(w);
  const double gain = std::pow(10.0, (target_dbov - level) / 20.0);

  NormalizeResult r;
  r.gain = gain;
  r.wav.sample_rate_hz = w.sample_rate_hz;
  r.wav.samples.resize(w.samples.size());
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    double s = w.samples[i] * gain;
    if (s > 1.0 || s < -1.0) {
      r.clipped = true;
      s = std::clamp(s, -1.0, 1.0);
    }
    r.wav.samples[i] = s;
  }
  return r;
}

}  // namespace ps
