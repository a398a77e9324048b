#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "ps/error.hpp"
#include "ps/vad.hpp"
#include "test_util.hpp"

using ps::FrameDecisions;
using ps::Waveform;

namespace {

FrameDecisions flags(std::initializer_list<int> f) {
  FrameDecisions d;
  for (int v : f) d.flags.push_back(static_cast<std::uint8_t>(v));
  return d;
}

Waveform burst_signal(std::mt19937_64& rng, double dur_s,
                      const std::vector<std::pair<double, double>>& bursts) {
  Waveform w;
  w.samples.assign(static_cast<std::size_t>(dur_s * 16000), 0.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (auto [t0, t1] : bursts) {
    double lp = 0.0;
    const auto a = static_cast<std::size_t>(t0 * 16000);
    const auto b = std::min(w.samples.size(), static_cast<std::size_t>(t1 * 16000));
    for (std::size_t i = a; i < b; ++i) {
      const double t = static_cast<double>(i - a) / 16000.0;
      lp = 0.95 * lp + 0.05 * noise(rng);
      double v = 0.0;
      for (int h = 1; h <= 4; ++h)
        v += std::sin(2.0 * M_PI * 140.0 * h * t) / h;
      w.samples[i] = 0.25 * (v + 2.0 * lp);
    }
  }
  return w;
}

}  // namespace

TEST_CASE("all detectors reject pure silence") {
  Waveform w;
  w.samples.assign(16000, 0.0);
  for (auto* fn : {ps::vad_energy, ps::vad_zero_crossing, ps::vad_spectral_entropy}) {
    auto d = fn(w);
    CHECK(d.size() == 100);  // 10 ms frames over 1 s
    for (auto f : d.flags) CHECK(f == 0);
  }
}

TEST_CASE("energy detector accepts a sustained loud tone") {
  Waveform w;
  w.samples.resize(16000);
  for (std::size_t i = 0; i < w.samples.size(); ++i)
    w.samples[i] = 0.5 * std::sin(2.0 * M_PI * 220.0 * i / 16000.0);
  auto d = ps::vad_energy(w);
  std::size_t on = 0;
  for (auto f : d.flags) on += f;
  CHECK(on == d.size());
}

TEST_CASE("majority vote implements the 2-of-3 rule") {
  auto d1 = flags({1, 1, 1, 0, 0, 0, 1, 0});
  auto d2 = flags({1, 1, 0, 1, 0, 0, 0, 1});
  auto d3 = flags({1, 0, 0, 0, 1, 0, 1, 1});
  auto v = ps::majority_vote(d1, d2, d3);
  // (1,1,1)=1 (1,1,0)=1 (1,0,0)=0 (0,1,0)=0 (0,0,1)=0 (0,0,0)=0 (1,0,1)=1 (0,1,1)=1
  CHECK(v.flags == std::vector<std::uint8_t>{1, 1, 0, 0, 0, 0, 1, 1});
}

TEST_CASE("majority vote requires equal lengths") {
  CHECK_THROWS_AS(ps::majority_vote(flags({1, 0}), flags({1}), flags({1, 0})),
                  ps::DataError);
}

TEST_CASE("vote is monotone: flipping one detector frame to speech never clears the vote") {
  std::mt19937_64 rng(5);
  std::bernoulli_distribution bit(0.5);
  for (int trial = 0; trial < 50; ++trial) {
    FrameDecisions d[3];
    for (auto& dd : d)
      for (int i = 0; i < 40; ++i) dd.flags.push_back(bit(rng));
    auto base = ps::majority_vote(d[0], d[1], d[2]);
    const int which = static_cast<int>(rng() % 3);
    const int frame = static_cast<int>(rng() % 40);
    d[which].flags[frame] = 1;
    auto bumped = ps::majority_vote(d[0], d[1], d[2]);
    for (int i = 0; i < 40; ++i) CHECK(bumped.flags[i] >= base.flags[i]);
  }
}

TEST_CASE("detectors localize burst edges within two frames") {
  std::mt19937_64 rng(6);
  // bursts at [0.30, 0.70) and [1.10, 1.50) seconds -> frames [30,70) [110,150)
  auto w = burst_signal(rng, 2.0, {{0.30, 0.70}, {1.10, 1.50}});
  auto check_edges = [&](const FrameDecisions& d) {
    REQUIRE(d.size() == 200);
    auto on = [&](int f) { return d.flags[static_cast<std::size_t>(f)] != 0; };
    // Deep interior of each burst must be speech.
    for (int f : {35, 50, 64, 115, 130, 144}) CHECK(on(f));
    // Deep silence must be non-speech.
    for (int f : {0, 10, 25, 80, 95, 105, 160, 190}) CHECK_FALSE(on(f));
    // Transitions happen within +-2 frames of the true edges.
    for (int edge : {30, 70, 110, 150}) {
      bool seen_off = false, seen_on = false;
      for (int f = edge - 3; f <= edge + 2; ++f) {
        (on(f) ? seen_on : seen_off) = true;
      }
      CHECK(seen_on);
      CHECK(seen_off);
    }
  };
  check_edges(ps::vad_energy(w));
  check_edges(ps::vad_zero_crossing(w));
  check_edges(ps::vad_spectral_entropy(w));
  check_edges(ps::majority_vote(ps::vad_energy(w), ps::vad_zero_crossing(w),
                                ps::vad_spectral_entropy(w)));
}

TEST_CASE("decisions_to_segments merges short gaps and drops short runs") {
  FrameDecisions d;
  d.flags.assign(100, 0);
  // Run A: frames 10..29 with a 3-frame gap at 20..22 (30 ms -> bridged).
  for (int f = 10; f < 30; ++f) d.flags[f] = 1;
  for (int f = 20; f < 23; ++f) d.flags[f] = 0;
  // Run B: frames 40..45 (60 ms < 100 ms minimum -> dropped).
  for (int f = 40; f < 46; ++f) d.flags[f] = 1;
  // Run C: frames 60..79 with a 5-frame gap (50 ms -> NOT bridged); the two
  // halves are 8 and 7 frames, both under the minimum -> dropped.
  for (int f = 60; f < 68; ++f) d.flags[f] = 1;
  for (int f = 73; f < 80; ++f) d.flags[f] = 1;
  auto segs = ps::decisions_to_segments(d, 16000, 16000);
  REQUIRE(segs.size() == 1);
  CHECK(segs[0].start_sample == 10 * 160);
  CHECK(segs[0].end_sample == 30 * 160);
}

TEST_CASE("decisions_to_segments clips the final frame to the waveform") {
  FrameDecisions d;
  d.flags.assign(20, 1);
  auto segs = ps::decisions_to_segments(d, 16000, 3100);  // 19.375 frames
  REQUIRE(segs.size() == 1);
  CHECK(segs[0].start_sample == 0);
  CHECK(segs[0].end_sample == 3100);
}

TEST_CASE("decisions_to_segments on empty input") {
  FrameDecisions d;
  CHECK(ps::decisions_to_segments(d, 16000, 0).empty());
}

TEST_CASE("segments are disjoint, ordered and frame aligned on real-ish audio") {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 10; ++t) {
    auto w = ps::testutil::synth_speech(rng, 1.5);
    auto vote = ps::majority_vote(ps::vad_energy(w), ps::vad_zero_crossing(w),
                                  ps::vad_spectral_entropy(w));
    auto segs = ps::decisions_to_segments(vote, 16000, w.samples.size());
    CHECK(!segs.empty());  // synthetic speech always contains bursts
    std::size_t prev_end = 0;
    bool first = true;
    for (const auto& s : segs) {
      CHECK(s.start_sample < s.end_sample);
      if (!first) CHECK(s.start_sample > prev_end);
      CHECK(s.start_sample % 160 == 0);
      CHECK(s.length() >= 16000 / 10);  // >= 100 ms
      CHECK(s.end_sample <= w.samples.size());
      prev_end = s.end_sample;
      first = false;
    }
  }
}

TEST_CASE("vad_debug_dump lists one line per frame") {
  auto d1 = flags({1, 0});
  auto d2 = flags({0, 0});
  auto d3 = flags({1, 1});
  auto v = ps::majority_vote(d1, d2, d3);
  auto dump = ps::vad_debug_dump(d1, d2, d3, v);
  std::istringstream in(dump);
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "0\t1 0 1 1");
  REQUIRE(std::getline(in, line));
  CHECK(line == "1\t0 0 1 0");
  CHECK_FALSE(std::getline(in, line));
}
