#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "ps/error.hpp"
#include "ps/metrics.hpp"

using namespace ps;

namespace {

// Brute-force oracle: count FAR/FRR at every midpoint threshold by direct
// enumeration, then linearly interpolate the crossing. Implements the same
// definition as the library but with no shared code (O(n^2) counting).
double eer_oracle(std::vector<double> bona, std::vector<double> spoof) {
  std::vector<double> all = bona;
  all.insert(all.end(), spoof.begin(), spoof.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());

  std::vector<double> thr;
  thr.push_back(all.front() - 1.0);
  for (std::size_t i = 0; i + 1 < all.size(); ++i)
    thr.push_back((all[i] + all[i + 1]) / 2.0);
  thr.push_back(all.back() + 1.0);

  auto rates = [&](double t) {
    std::size_t fa = 0, fr = 0;
    for (double s : spoof)
      if (s >= t) ++fa;
    for (double s : bona)
      if (s < t) ++fr;
    return std::pair<double, double>{static_cast<double>(fa) / spoof.size(),
                                     static_cast<double>(fr) / bona.size()};
  };

  auto [pf, pr] = rates(thr[0]);
  if (pf == pr) return pf;
  for (std::size_t i = 1; i < thr.size(); ++i) {
    auto [f, r] = rates(thr[i]);
    if (f == r) return f;
    const double pd = pf - pr, d = f - r;
    if (pd > 0.0 && d < 0.0) {
      const double t = pd / (pd - d);
      return pr + t * (r - pr);
    }
    pf = f;
    pr = r;
  }
  return -1.0;  // unreachable for valid inputs
}

ScoredTrial make_trial(const std::string& id, bool spoof_utt,
                       std::vector<double> s20, std::vector<std::uint8_t> y20,
                       double utt, std::vector<std::string> methods = {},
                       int ratio_level = 0) {
  ScoredTrial t;
  t.trial_id = id;
  t.labels.utterance_spoof = spoof_utt;
  t.labels.labels[0] = std::move(y20);
  t.scores.seg[0] = std::move(s20);
  for (int k = 1; k < kNumResolutions; ++k) {
    const auto& f = t.labels.labels[k - 1];
    auto& c = t.labels.labels[k];
    c.resize((f.size() + 1) / 2);
    for (std::size_t i = 0; i < c.size(); ++i) {
      c[i] = f[2 * i];
      if (2 * i + 1 < f.size()) c[i] |= f[2 * i + 1];
    }
    t.scores.seg[k].assign(c.size(), 0.0);
  }
  t.scores.utt = utt;
  t.methods = std::move(methods);
  t.ratio_level = ratio_level;
  return t;
}

}  // namespace

TEST_CASE("eer extremes") {
  // Perfect separation -> exactly 0; perfect inversion -> exactly 1.
  CHECK(eer({2.0, 3.0, 4.0}, {-1.0, 0.0, 1.0}).eer == 0.0);
  CHECK(eer({-1.0, 0.0}, {1.0, 2.0}).eer == 1.0);
  // Identical distributions -> 0.5 crossing.
  CHECK(eer({0.0, 1.0}, {0.0, 1.0}).eer == doctest::Approx(0.5));
  CHECK_THROWS_AS(eer({}, {1.0}), DataError);
  CHECK_THROWS_AS(eer({1.0}, {}), DataError);
}

TEST_CASE("eer hand-worked example") {
  // bona {1,3}, spoof {0,2}: at thr between 1 and 2 FAR = FRR = 0.5.
  auto r = eer({1.0, 3.0}, {0.0, 2.0});
  CHECK(r.eer == doctest::Approx(0.5));
  // Threshold should sit in the crossing region.
  CHECK(r.threshold > 0.0);
  CHECK(r.threshold < 3.0);
}

TEST_CASE("eer matches the brute-force oracle on random score sets") {
  std::mt19937_64 rng(71);
  std::uniform_int_distribution<std::size_t> n_dist(1, 500);
  std::normal_distribution<double> bona_dist(0.6, 1.0), spoof_dist(-0.6, 1.0);
  std::uniform_int_distribution<int> coarse(0, 6);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> bona(n_dist(rng)), spoof(n_dist(rng));
    const bool quantized = trial % 3 == 0;  // force heavy ties sometimes
    for (auto& v : bona) v = quantized ? coarse(rng) * 0.5 : bona_dist(rng);
    for (auto& v : spoof) v = quantized ? coarse(rng) * 0.5 - 1.0 : spoof_dist(rng);
    const double got = eer(bona, spoof).eer;
    const double want = eer_oracle(bona, spoof);
    CHECK(std::abs(got - want) <= 1e-9);
    CHECK(got >= 0.0);
    CHECK(got <= 1.0);
  }
}

TEST_CASE("eer is invariant under strictly monotone score transforms") {
  std::mt19937_64 rng(72);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> bona(40), spoof(40);
    for (auto& v : bona) v = g(rng) + 0.8;
    for (auto& v : spoof) v = g(rng) - 0.8;
    const double base = eer(bona, spoof).eer;
    auto warp = [](double x) { return std::tanh(x) * 3.0 + x / 7.0; };
    for (auto& v : bona) v = warp(v);
    for (auto& v : spoof) v = warp(v);
    CHECK(eer(bona, spoof).eer == doctest::Approx(base).epsilon(1e-9));
  }
}

TEST_CASE("swapping the class lists mirrors the error rate") {
  std::mt19937_64 rng(73);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> bona(60), spoof(60);
  for (auto& v : bona) v = g(rng) + 1.0;
  for (auto& v : spoof) v = g(rng) - 1.0;
  const double e1 = eer(bona, spoof).eer;
  // Negating scores and swapping roles describes the same detector run
  // backwards.
  for (auto& v : bona) v = -v;
  for (auto& v : spoof) v = -v;
  const double e2 = eer(spoof, bona).eer;
  CHECK(e2 == doctest::Approx(e1).epsilon(1e-9));
}

TEST_CASE("segment_eer pools positions across trials") {
  std::vector<ScoredTrial> set;
  set.push_back(make_trial("a", true, {2.0, -2.0}, {0, 1}, 1.0));
  set.push_back(make_trial("b", false, {3.0, 1.0}, {0, 0}, 2.0));
  // bona scores {2,3,1}, spoof {-2}: separable -> 0.
  CHECK(segment_eer(set, 0) == 0.0);

  // Same data must give the same answer regardless of trial order.
  std::swap(set[0], set[1]);
  CHECK(segment_eer(set, 0) == 0.0);

  set[0].scores.seg[0].pop_back();
  CHECK_THROWS_AS(segment_eer(set, 0), DataError);
}

TEST_CASE("utterance_eer uses the utterance-level label and score") {
  std::vector<ScoredTrial> set;
  set.push_back(make_trial("a", false, {0.0}, {0}, 2.0));
  set.push_back(make_trial("b", false, {0.0}, {0}, 1.5));
  set.push_back(make_trial("c", true, {0.0}, {0}, -1.0));
  set.push_back(make_trial("d", true, {0.0}, {0}, 0.0));
  CHECK(utterance_eer(set) == 0.0);
  set[2].scores.utt = 5.0;  // one inversion among 2v2
  CHECK(utterance_eer(set) == doctest::Approx(0.5));
}

TEST_CASE("leave_one_out drops trials containing the method") {
  std::vector<ScoredTrial> set;
  set.push_back(make_trial("b1", false, {2.0, 3.0}, {0, 0}, 2.0));
  // Method A1 trials score adversarially (spoof above bona).
  set.push_back(make_trial("s1", true, {4.0, 5.0}, {1, 1}, -1.0, {"A1"}));
  // Method A2 trials are easy.
  set.push_back(make_trial("s2", true, {-3.0, -4.0}, {1, 1}, -1.0, {"A2"}));

  auto r = leave_one_out(set, "A1", 0);
  CHECK(r.full_eer > 0.0);
  CHECK(r.loo_eer == 0.0);  // removing the hard method perfects the set
  CHECK(r.delta == doctest::Approx(r.loo_eer - r.full_eer));
  CHECK(r.delta < 0.0);

  // A method absent from the set removes nothing: delta is exactly zero.
  auto none = leave_one_out(set, "A9", 0);
  CHECK(none.delta == 0.0);
  CHECK(none.full_eer == none.loo_eer);

  // Dropping every spoof trial empties a class.
  std::vector<ScoredTrial> tiny;
  tiny.push_back(make_trial("b", false, {1.0}, {0}, 1.0));
  tiny.push_back(make_trial("s", true, {0.0}, {1}, 0.0, {"A1"}));
  CHECK_THROWS_AS(leave_one_out(tiny, "A1", 0), DataError);
}

TEST_CASE("boundary_breakdown matches a brute-force interval oracle") {
  std::mt19937_64 rng(74);
  std::normal_distribution<double> g(0.0, 1.0);
  std::bernoulli_distribution bit(0.5);
  for (int k : {0, 2, 5}) {
    std::vector<ScoredTrial> set;
    std::array<std::vector<double>, 4> oracle_spoof;
    std::vector<double> oracle_bona;
    const std::size_t span = static_cast<std::size_t>(16000 / 50) << k;
    for (int t = 0; t < 200; ++t) {
      const std::size_t n = 1 + rng() % 12;
      std::vector<double> s(n);
      std::vector<std::uint8_t> y(n);
      for (std::size_t i = 0; i < n; ++i) {
        y[i] = bit(rng);
        s[i] = g(rng) + (y[i] ? -0.5 : 0.5);
      }
      ScoredTrial trial;
      trial.trial_id = "t" + std::to_string(t);
      trial.scores.seg[k] = s;
      trial.labels.labels[k] = y;
      const std::size_t n_boundaries = rng() % 6;
      for (std::size_t b = 0; b < n_boundaries; ++b)
        trial.boundaries.push_back(rng() % (n * span));
      std::sort(trial.boundaries.begin(), trial.boundaries.end());
      set.push_back(trial);

      for (std::size_t i = 0; i < n; ++i) {
        if (!y[i]) {
          oracle_bona.push_back(s[i]);
          continue;
        }
        std::size_t count = 0;
        for (std::size_t b : trial.boundaries)
          if (b >= i * span && b < (i + 1) * span) ++count;
        oracle_spoof[std::min<std::size_t>(count, 3)].push_back(s[i]);
      }
    }
    auto got = boundary_breakdown(set, k);
    for (int bucket = 0; bucket < 4; ++bucket) {
      if (oracle_spoof[static_cast<std::size_t>(bucket)].empty()) {
        CHECK_FALSE(got[static_cast<std::size_t>(bucket)].has_value());
      } else {
        REQUIRE(got[static_cast<std::size_t>(bucket)].has_value());
        CHECK(*got[static_cast<std::size_t>(bucket)] ==
              doctest::Approx(eer_oracle(oracle_bona,
                                         oracle_spoof[static_cast<std::size_t>(bucket)]))
                  .epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("boundary_breakdown bucket edges") {
  // One spoof segment at 640 ms (k=5, span 10240) holding both junctions of
  // an interior substitution lands in bucket 2; a boundary-free spoof
  // segment lands in bucket 0.
  ScoredTrial t;
  t.trial_id = "x";
  t.scores.seg[5] = {-1.0, -0.5, 3.0};
  t.labels.labels[5] = {1, 1, 0};
  t.boundaries = {100, 9000};  // both inside segment 0
  auto got = boundary_breakdown({t}, 5);
  REQUIRE(got[2].has_value());
  REQUIRE(got[0].has_value());
  CHECK_FALSE(got[1].has_value());
  CHECK_FALSE(got[3].has_value());
  CHECK(*got[2] == 0.0);  // -1.0 vs bona 3.0
  CHECK(*got[0] == 0.0);

  // Four boundaries in one segment saturate at the >=3 bucket.
  t.boundaries = {100, 200, 300, 400};
  got = boundary_breakdown({t}, 5);
  REQUIRE(got[3].has_value());
  CHECK_FALSE(got[2].has_value());
}

TEST_CASE("ratio_group_eer groups spoof trials by level against all bona fide") {
  std::vector<ScoredTrial> set;
  for (int i = 0; i < 6; ++i)
    set.push_back(make_trial("b" + std::to_string(i), false, {0.0}, {0},
                             2.0 + 0.1 * i));
  // Level 1: easy (low scores). Level 8: adversarial (high scores).
  for (int i = 0; i < 4; ++i)
    set.push_back(make_trial("s1" + std::to_string(i), true, {0.0}, {1},
                             -1.0 - 0.1 * i, {"A1"}, 1));
  for (int i = 0; i < 4; ++i)
    set.push_back(make_trial("s8" + std::to_string(i), true, {0.0}, {1},
                             5.0 + 0.1 * i, {"A1"}, 8));

  auto rows = ratio_group_eer(set);
  REQUIRE(rows.size() == 2);  // empty levels omitted
  CHECK(rows[0].level == 1);
  CHECK(rows[0].eer == 0.0);
  CHECK(rows[0].n_spoof == 4);
  CHECK(rows[1].level == 8);
  CHECK(rows[1].eer == 1.0);

  // Equalization subsamples every level to the smallest population.
  set.push_back(make_trial("s1x", true, {0.0}, {1}, -2.0, {"A1"}, 1));
  auto eq = ratio_group_eer(set, 99);
  REQUIRE(eq.size() == 2);
  CHECK(eq[0].n_spoof == 4);
  CHECK(eq[1].n_spoof == 4);
  // And it is deterministic in the seed.
  auto eq2 = ratio_group_eer(set, 99);
  CHECK(eq[0].eer == eq2[0].eer);
  CHECK(eq[1].eer == eq2[1].eer);

  std::vector<ScoredTrial> no_bona;
  no_bona.push_back(make_trial("s", true, {0.0}, {1}, 0.0, {"A1"}, 3));
  CHECK_THROWS_AS(ratio_group_eer(no_bona), DataError);
}
