#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "ps/audio_io.hpp"
#include "ps/error.hpp"
#include "ps/waveform.hpp"

namespace fs = std::filesystem;
using ps::Waveform;

namespace {

fs::path tmp_file(const std::string& name) {
  auto dir = fs::temp_directory_path() / "ps_audio_io_test";
  fs::create_directories(dir);
  return dir / name;
}

void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u16(std::vector<std::uint8_t>& b, std::uint16_t v) {
  b.push_back(static_cast<std::uint8_t>(v));
  b.push_back(static_cast<std::uint8_t>(v >> 8));
}
void put_tag(std::vector<std::uint8_t>& b, const char* t) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(t[i]));
}

// Hand-rolled WAV writer so the reader can be tested against arbitrary
// channel counts, bit depths and chunk layouts.
fs::path craft_wav(const std::string& name, int channels, int bits, int rate,
                   const std::vector<std::int32_t>& frames,
                   bool junk_before_fmt = false) {
  std::vector<std::uint8_t> data;
  for (std::int32_t s : frames) {
    for (int i = 0; i < bits / 8; ++i)
      data.push_back(static_cast<std::uint8_t>(s >> (8 * i)));
  }
  std::vector<std::uint8_t> body;
  if (junk_before_fmt) {
    put_tag(body, "LIST");
    put_u32(body, 4);
    put_tag(body, "INFO");
  }
  put_tag(body, "fmt ");
  put_u32(body, 16);
  put_u16(body, 1);  // PCM
  put_u16(body, static_cast<std::uint16_t>(channels));
  put_u32(body, static_cast<std::uint32_t>(rate));
  put_u32(body, static_cast<std::uint32_t>(rate * channels * bits / 8));
  put_u16(body, static_cast<std::uint16_t>(channels * bits / 8));
  put_u16(body, static_cast<std::uint16_t>(bits));
  put_tag(body, "data");
  put_u32(body, static_cast<std::uint32_t>(data.size()));
  body.insert(body.end(), data.begin(), data.end());
  if (body.size() % 2) body.push_back(0);

  std::vector<std::uint8_t> file;
  put_tag(file, "RIFF");
  put_u32(file, static_cast<std::uint32_t>(4 + body.size()));
  put_tag(file, "WAVE");
  file.insert(file.end(), body.begin(), body.end());

  auto path = tmp_file(name);
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(file.data()),
            static_cast<std::streamsize>(file.size()));
  return path;
}

Waveform sine(double amp, double freq, double dur_s, int sr = 16000) {
  Waveform w;
  w.sample_rate_hz = sr;
  w.samples.resize(static_cast<std::size_t>(dur_s * sr));
  for (std::size_t i = 0; i < w.samples.size(); ++i)
    w.samples[i] = amp * std::sin(2.0 * M_PI * freq * i / sr);
  return w;
}

}  // namespace

TEST_CASE("wav round trip stays within one quantization step") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> amp(-0.9, 0.9);
  std::uniform_int_distribution<std::size_t> len(1, 5000);
  for (int trial = 0; trial < 100; ++trial) {
    Waveform w;
    w.samples.resize(len(rng));
    for (auto& s : w.samples) s = amp(rng);
    auto path = tmp_file("roundtrip.wav");
    ps::write_wav(w, path);
    auto r = ps::read_wav(path);
    REQUIRE(r.sample_rate_hz == w.sample_rate_hz);
    REQUIRE(r.samples.size() == w.samples.size());
    for (std::size_t i = 0; i < w.samples.size(); ++i)
      CHECK(std::abs(r.samples[i] - w.samples[i]) <= 1.0 / 32768.0);
  }
}

TEST_CASE("encode is round-half-away from zero with clamping") {
  // Oracle: the 16-bit word for sample x must be clamp(lround(x*32768)).
  Waveform w;
  w.samples = {0.5, -0.5, 1.0, -1.0, 1.0 / 65536.0, -1.0 / 65536.0, 0.0, 0.9999};
  auto path = tmp_file("encode.wav");
  ps::write_wav(w, path);
  std::ifstream in(path, std::ios::binary);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  // canonical layout: data starts at offset 44
  REQUIRE(bytes.size() == 44 + 2 * w.samples.size());
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    std::int16_t got = static_cast<std::int16_t>(
        static_cast<std::uint8_t>(bytes[44 + 2 * i]) |
        (static_cast<std::uint8_t>(bytes[45 + 2 * i]) << 8));
    long want = std::lround(w.samples[i] * 32768.0);
    want = std::min(32767L, std::max(-32768L, want));
    CHECK(got == static_cast<std::int16_t>(want));
  }
}

TEST_CASE("reader maps int16 extremes and tolerates leading junk chunks") {
  auto path = craft_wav("extremes.wav", 1, 16, 16000, {-32768, 32767, 0, 16384},
                        /*junk_before_fmt=*/true);
  auto w = ps::read_wav(path);
  REQUIRE(w.samples.size() == 4);
  CHECK(w.samples[0] == doctest::Approx(-1.0));
  CHECK(w.samples[1] == doctest::Approx(32767.0 / 32768.0));
  CHECK(w.samples[2] == 0.0);
  CHECK(w.samples[3] == doctest::Approx(0.5));
  CHECK(w.sample_rate_hz == 16000);
}

TEST_CASE("reader rejects unsupported containers") {
  CHECK_THROWS_AS(ps::read_wav(craft_wav("stereo.wav", 2, 16, 16000, {0, 0})),
                  ps::DataError);
  CHECK_THROWS_AS(ps::read_wav(craft_wav("eight.wav", 1, 8, 16000, {0})),
                  ps::DataError);
  CHECK_THROWS_AS(ps::read_wav(tmp_file("missing.wav")), ps::DataError);
  auto garbage = tmp_file("garbage.wav");
  std::ofstream(garbage, std::ios::binary) << "not a riff file";
  CHECK_THROWS_AS(ps::read_wav(garbage), ps::DataError);
}

TEST_CASE("active speech level of a full-scale square wave is 0 dBov") {
  Waveform w;
  w.samples.resize(16000);
  for (std::size_t i = 0; i < w.samples.size(); ++i)
    w.samples[i] = (i / 40) % 2 ? 1.0 : -1.0;
  CHECK(ps::active_speech_level_db(w) == doctest::Approx(0.0).epsilon(0.01));
}

TEST_CASE("active speech level ignores silent gaps") {
  // Half the file silent, half a sine of amplitude A: level must still be
  // 20*log10(A/sqrt(2)), not diluted by the silence.
  const double a = 0.25;
  Waveform w = sine(a, 440.0, 0.5);
  w.samples.resize(16000, 0.0);  // second half silent
  const double want = 20.0 * std::log10(a / std::sqrt(2.0));
  CHECK(ps::active_speech_level_db(w) == doctest::Approx(want).epsilon(0.01));
}

TEST_CASE("active speech level throws on silence") {
  Waveform w;
  w.samples.assign(16000, 0.0);
  CHECK_THROWS_AS(ps::active_speech_level_db(w), ps::DataError);
  Waveform empty;
  CHECK_THROWS_AS(ps::active_speech_level_db(empty), ps::DataError);
}

TEST_CASE("normalize_level hits the target level") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> amp(0.01, 0.6);
  for (int t = 0; t < 20; ++t) {
    Waveform w = sine(amp(rng), 300.0, 0.7);
    auto res = ps::normalize_level(w, -26.0);
    CHECK(ps::active_speech_level_db(res.wav) ==
          doctest::Approx(-26.0).epsilon(0.01));
    CHECK_FALSE(res.clipped);
    // The gain actually applied must match level arithmetic.
    const double lvl = ps::active_speech_level_db(w);
    CHECK(res.gain == doctest::Approx(std::pow(10.0, (-26.0 - lvl) / 20.0)));
  }
}

TEST_CASE("normalize_level is idempotent") {
  Waveform w = sine(0.3, 200.0, 0.6);
  auto once = ps::normalize_level(w);
  auto twice = ps::normalize_level(once.wav);
  CHECK(twice.gain == doctest::Approx(1.0).epsilon(1e-9));
  for (std::size_t i = 0; i < w.samples.size(); ++i)
    CHECK(twice.wav.samples[i] == doctest::Approx(once.wav.samples[i]));
}

TEST_CASE("normalize_level flags clipping when the gain overflows") {
  // Very quiet signal pushed to a loud target must clip at +-1.
  Waveform w = sine(0.001, 250.0, 0.5);
  auto res = ps::normalize_level(w, -1.0);
  CHECK(res.clipped);
  double mx = 0.0;
  for (double s : res.wav.samples) mx = std::max(mx, std::abs(s));
  CHECK(mx <= 1.0);
  CHECK(mx == doctest::Approx(1.0));
}

TEST_CASE("normalize_level rejects silence") {
  Waveform w;
  w.samples.assign(8000, 0.0);
  CHECK_THROWS_AS(ps::normalize_level(w), ps::DataError);
}
