#include "ps/cli.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <set>
#include <thread>

#include "ps/audio_io.hpp"
#include "ps/backend.hpp"
#include "ps/error.hpp"
#include "ps/features.hpp"
#include "ps/forge.hpp"
#include "ps/formats.hpp"
#include "ps/labeling.hpp"
#include "ps/metrics.hpp"
#include "ps/train.hpp"
#include "ps/vad.hpp"

namespace ps {

namespace fs = std::filesystem;

namespace {

void parallel_for(std::size_t n, int jobs,
                  const std::function<void(std::size_t)>& fn) {
  if (jobs <= 0) jobs = static_cast<int>(std::thread::hardware_concurrency());
  if (jobs < 1) jobs = 1;
  jobs = static_cast<int>(std::min<std::size_t>(jobs, n));
  if (jobs <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex err_mutex;
  std::exception_ptr first_error;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> threads;
  for (int t = 0; t < jobs; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::string fmt6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

FileHeader make_header(const RunConfig& cfg) {
  return {cfg.hash(), cfg.seed};
}

struct LoadedPool {
  UtterancePool pool;
  std::vector<std::string> vad_dumps;  // parallel to entries, may be empty
};

LoadedPool load_pool(const RunConfig& cfg) {
  const std::string pool_path = cfg.get("pool", "");
  if (pool_path.empty()) throw UsageError("forge: missing pool list (--pool)");
  const auto specs = read_pool_list(pool_path);
  if (specs.empty()) throw DataError("empty pool list: " + pool_path);

  const double target_dbov = cfg.get_num("target_dbov", -26.0);
  const int min_seg_ms = static_cast<int>(cfg.get_int("min_seg_ms", 100));
  const int merge_gap_ms = static_cast<int>(cfg.get_int("merge_gap_ms", 30));
  const bool want_dump = cfg.get_int("vad_debug", 0) != 0;

  LoadedPool out;
  out.pool.entries.resize(specs.size());
  if (want_dump) out.vad_dumps.resize(specs.size());
  parallel_for(specs.size(), cfg.jobs, [&](std::size_t i) {
    const auto& spec = specs[i];
    PoolEntry e;
    e.utterance_id = spec.utterance_id;
    e.speaker_id = spec.speaker_id;
    e.cls = spec.cls;
    e.method_id = spec.method_id;
    auto norm = normalize_level(read_wav(spec.wav_path), target_dbov);
    e.wav = std::move(norm.wav);
    e.clipped = norm.clipped;
    const auto d1 = vad_energy(e.wav);
    const auto d2 = vad_zero_crossing(e.wav);
    const auto d3 = vad_spectral_entropy(e.wav);
    const auto vote = majority_vote(d1, d2, d3);
    e.segments = decisions_to_segments(vote, e.wav.sample_rate_hz, e.wav.size(),
                                       min_seg_ms, merge_gap_ms);
    for (auto& seg : e.segments) seg.label = e.cls;
    if (want_dump) out.vad_dumps[i] = vad_debug_dump(d1, d2, d3, vote);
    out.pool.entries[i] = std::move(e);
  });
  out.pool.validate();
  return out;
}

std::string trial_name(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%06zu", prefix, i);
  return buf;
}

Matrix features_for(const Waveform& w, const LfccConfig& lfcc_cfg) {
  const FeatureSequence f = lfcc(w, lfcc_cfg);
  Matrix m(f.n_frames, f.dim);
  m.d = f.data;
  return m;
}

LfccConfig lfcc_config_from(const RunConfig& cfg) {
  LfccConfig c;
  c.window = static_cast<int>(cfg.get_int("lfcc_window", 512));
  c.hop = static_cast<int>(cfg.get_int("lfcc_hop", 320));
  c.n_filters = static_cast<int>(cfg.get_int("lfcc_filters", 20));
  c.n_ceps = static_cast<int>(cfg.get_int("lfcc_ceps", 20));
  c.with_deltas = cfg.get_int("lfcc_deltas", 1) != 0;
  return c;
}

Strategy strategy_from(const RunConfig& cfg) {
  const std::string s = cfg.get("strategy", "multi");
  if (s == "multi") return Strategy::multi();
  if (s == "utterance") return Strategy::utterance_only();
  if (s.rfind("single:", 0) == 0) {
    const int ms = std::stoi(s.substr(7));
    for (int k = 0; k < kNumResolutions; ++k)
      if (kResolutionsMs[k] == ms) return Strategy::single(k);
    throw UsageError("unknown resolution in strategy: " + s);
  }
  throw UsageError("unknown strategy: " + s);
}

}  // namespace

RunConfig RunConfig::load(const fs::path& path) {
  RunConfig cfg;
  if (path.empty()) return cfg;
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file: " + path.string());
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError("malformed config line: " + line);
    cfg.kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return cfg;
}

void RunConfig::merge_override(const std::string& key, const std::string& value) {
  kv[key] = value;
}

std::string RunConfig::get(const std::string& key, const std::string& fallback) const {
  const auto it = kv.find(key);
  return it == kv.end() ? fallback : it->second;
}

double RunConfig::get_num(const std::string& key, double fallback) const {
  const auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  try {
    return std::stod(it->second);
  } catch (const std::exception&) {
    throw UsageError("config key '" + key + "' is not a number: " + it->second);
  }
}

long RunConfig::get_int(const std::string& key, long fallback) const {
  const auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  try {
    return std::stol(it->second);
  } catch (const std::exception&) {
    throw UsageError("config key '" + key + "' is not an integer: " + it->second);
  }
}

std::uint64_t RunConfig::hash() const {
  std::string canon;
  for (const auto& [k, v] : kv) canon += k + "=" + v + "\n";
  canon += "seed=" + std::to_string(seed) + "\n";
  return fnv1a_hash(canon);
}

int cmd_forge(const RunConfig& cfg) {
  if (cfg.out_dir.empty()) throw UsageError("forge: missing --out");
  const std::size_t count = static_cast<std::size_t>(cfg.get_int("count", 100));
  const std::size_t bona_count =
      static_cast<std::size_t>(cfg.get_int("bonafide_count", 0));
  const double overgen = cfg.get_num("overgen", 2.0);

  ForgeParams fp;
  fp.dur_tolerance = cfg.get_num("dur_tolerance", 0.2);
  fp.xfade_ms = cfg.get_num("xfade_ms", 10.0);
  fp.search_ms = cfg.get_num("search_ms", 40.0);
  fp.n_sub_min = static_cast<int>(cfg.get_int("n_sub_min", 1));
  fp.n_sub_max = static_cast<int>(cfg.get_int("n_sub_max", 3));

  auto loaded = load_pool(cfg);
  const auto& pool = loaded.pool;

  const std::size_t n_raw =
      std::max<std::size_t>(count, static_cast<std::size_t>(
                                       std::ceil(overgen * double(count))));
  std::vector<std::optional<ForgedTrial>> raw(n_raw);
  std::mutex msg_mutex;
  std::string first_failure;
  parallel_for(n_raw, cfg.jobs, [&](std::size_t i) {
    const std::string id = trial_name("PS", i);
    auto rng = trial_rng(cfg.seed, id);
    const auto& target = pool.entries[i % pool.entries.size()];
    std::uniform_int_distribution<int> nsub(fp.n_sub_min, fp.n_sub_max);
    try {
      raw[i] = forge_trial(pool, target, nsub(rng), rng, fp, id);
    } catch (const DataError& e) {
      std::lock_guard<std::mutex> lock(msg_mutex);
      if (first_failure.empty()) first_failure = e.what();
    }
  });

  std::vector<ForgedTrial> forged;
  for (auto& t : raw)
    if (t) forged.push_back(std::move(*t));
  if (forged.size() < count) {
    throw DataError(first_failure.empty()
                        ? "not enough forgeable trials"
                        : first_failure + " (forged " +
                              std::to_string(forged.size()) + " of " +
                              std::to_string(count) + ")");
  }

  std::mt19937_64 rng(cfg.seed);
  std::vector<ForgedTrial> trials = balance_sample(std::move(forged), count, rng);

  if (bona_count > 0) {
    std::vector<const PoolEntry*> bona;
    for (const auto& e : pool.entries)
      if (e.cls == SampleClass::kBonaFide) bona.push_back(&e);
    if (bona.empty()) throw DataError("no bona fide entries for bonafide_count");
    std::shuffle(bona.begin(), bona.end(), rng);
    for (std::size_t i = 0; i < bona_count; ++i) {
      const auto* src = bona[i % bona.size()];
      ForgedTrial t;
      t.trial_id = trial_name("BF", i);
      t.target_utterance = src->utterance_id;
      t.wav = src->wav;
      t.clipped = src->clipped;
      t.prov.mask.assign(src->wav.size(),
                         static_cast<std::uint8_t>(SampleClass::kBonaFide));
      t.intra_ratio = 0.0;
      t.ratio_level = 0;
      trials.push_back(std::move(t));
    }
  }
  std::sort(trials.begin(), trials.end(),
            [](const ForgedTrial& a, const ForgedTrial& b) {
              return a.trial_id < b.trial_id;
            });

  fs::create_directories(cfg.out_dir / "wav");
  fs::create_directories(cfg.out_dir / "masks");
  const FileHeader header = make_header(cfg);
  write_manifest(cfg.out_dir / "manifest.tsv", trials, header);
  parallel_for(trials.size(), cfg.jobs, [&](std::size_t i) {
    const auto& t = trials[i];
    write_wav(t.wav, cfg.out_dir / "wav" / (t.trial_id + ".wav"));
    write_mask(cfg.out_dir / "masks" / (t.trial_id + ".mask"), t.prov, header);
  });

  if (!loaded.vad_dumps.empty()) {
    fs::create_directories(cfg.out_dir / "vad");
    for (std::size_t i = 0; i < pool.entries.size(); ++i) {
      std::ofstream out(cfg.out_dir / "vad" /
                        (pool.entries[i].utterance_id + ".txt"));
      out << header_line("vad", header) << '\n' << loaded.vad_dumps[i];
    }
  }
  return 0;
}

int cmd_label(const RunConfig& cfg) {
  const fs::path data = cfg.get("data", "");
  if (data.empty()) throw UsageError("label: missing --data (forge output dir)");
  if (cfg.out_dir.empty()) throw UsageError("label: missing --out");
  const int sr = static_cast<int>(cfg.get_int("sample_rate", 16000));

  const auto manifest = read_manifest(data / "manifest.tsv");
  std::vector<std::pair<std::string, MultiResLabels>> labels(manifest.size());
  parallel_for(manifest.size(), cfg.jobs, [&](std::size_t i) {
    Provenance p;
    p.mask = read_mask(data / "masks" / (manifest[i].trial_id + ".mask"));
    labels[i] = {manifest[i].trial_id, build_multires(p, sr)};
    const bool spoof = labels[i].second.utterance_spoof;
    if (spoof != (manifest[i].cls == SampleClass::kSpoof))
      throw InternalError("label/manifest class disagreement for trial " +
                          manifest[i].trial_id);
  });
  write_labels(cfg.out_dir, labels, make_header(cfg));
  return 0;
}

int cmd_train(const RunConfig& cfg) {
  const fs::path data = cfg.get("data", "");
  const fs::path labels_path = cfg.get("labels", "");
  if (data.empty()) throw UsageError("train: missing --data");
  if (labels_path.empty()) throw UsageError("train: missing --labels");
  if (cfg.out_dir.empty()) throw UsageError("train: missing --out");

  const auto manifest = read_manifest(data / "manifest.tsv");
  if (manifest.empty()) throw DataError("train: empty manifest");
  const auto label_list = read_labels(labels_path);
  std::map<std::string, const MultiResLabels*> label_map;
  for (const auto& [id, l] : label_list) label_map[id] = &l;

  const LfccConfig lfcc_cfg = lfcc_config_from(cfg);
  const Strategy strategy = strategy_from(cfg);

  std::vector<TrainSample> samples(manifest.size());
  parallel_for(manifest.size(), cfg.jobs, [&](std::size_t i) {
    const auto& id = manifest[i].trial_id;
    const auto it = label_map.find(id);
    if (it == label_map.end())
      throw DataError("train: no labels for trial " + id);
    const Waveform w = read_wav(data / "wav" / (id + ".wav"));
    samples[i].feats = features_for(w, lfcc_cfg);
    samples[i].labels = align_labels(*it->second, samples[i].feats.rows);
  });

  BackendConfig bcfg;
  bcfg.dim = samples[0].feats.cols;
  bcfg.n_blocks = static_cast<int>(cfg.get_int("n_blocks", 5));
  bcfg.t_kernel_taps = static_cast<int>(cfg.get_int("t_kernel_taps", 15));
  BackendParams params = BackendParams::init(bcfg, cfg.seed);

  TrainConfig tc;
  tc.epochs = static_cast<int>(cfg.get_int("epochs", 50));
  tc.lr = cfg.get_num("lr", 1e-5);
  tc.lr_halve_every = static_cast<int>(cfg.get_int("lr_halve_every", 10));
  tc.seed = cfg.seed;

  const auto log = train(samples, params, tc, strategy);

  fs::create_directories(cfg.out_dir);
  const FileHeader header = make_header(cfg);
  save_checkpoint(cfg.out_dir / "checkpoint.bin", params, header);
  std::ofstream out(cfg.out_dir / "loss_log.txt");
  out << header_line("losslog", header) << '\n';
  for (const auto& e : log)
    out << e.epoch << '\t' << fmt6(e.mean_loss) << '\t' << fmt6(e.lr) << '\n';
  return 0;
}

int cmd_score(const RunConfig& cfg) {
  const fs::path data = cfg.get("data", "");
  const fs::path ckpt = cfg.get("ckpt", "");
  if (data.empty()) throw UsageError("score: missing --data");
  if (ckpt.empty()) throw UsageError("score: missing --ckpt");
  if (cfg.out_dir.empty()) throw UsageError("score: missing --out");

  const auto manifest = read_manifest(data / "manifest.tsv");
  BackendParams params = load_checkpoint(ckpt);
  const LfccConfig lfcc_cfg = lfcc_config_from(cfg);

  std::vector<std::pair<std::string, ScoreSet>> scores(manifest.size());
  parallel_for(manifest.size(), cfg.jobs, [&](std::size_t i) {
    const auto& id = manifest[i].trial_id;
    const Waveform w = read_wav(data / "wav" / (id + ".wav"));
    scores[i] = {id, forward(features_for(w, lfcc_cfg), params)};
  });
  write_scores(cfg.out_dir, scores, make_header(cfg));
  return 0;
}

int cmd_eval(const RunConfig& cfg) {
  const fs::path scores_path = cfg.get("scores", "");
  const fs::path labels_path = cfg.get("labels", "");
  const fs::path data = cfg.get("data", "");
  if (scores_path.empty()) throw UsageError("eval: missing --scores");
  if (labels_path.empty()) throw UsageError("eval: missing --labels");
  if (cfg.out_dir.empty()) throw UsageError("eval: missing --out");
  const int sr = static_cast<int>(cfg.get_int("sample_rate", 16000));

  const auto score_list = read_scores(scores_path);
  const auto label_list = read_labels(labels_path);
  std::map<std::string, const MultiResLabels*> label_map;
  for (const auto& [id, l] : label_list) label_map[id] = &l;

  std::map<std::string, ManifestEntry> manifest_map;
  if (!data.empty())
    for (auto& e : read_manifest(data / "manifest.tsv"))
      manifest_map[e.trial_id] = std::move(e);

  std::vector<ScoredTrial> set;
  for (const auto& [id, s] : score_list) {
    const auto it = label_map.find(id);
    if (it == label_map.end()) throw DataError("eval: no labels for trial " + id);
    ScoredTrial t;
    t.trial_id = id;
    t.scores = s;
    t.labels = align_labels(*it->second, s.seg[0].size());
    t.sample_rate_hz = sr;
    if (!manifest_map.empty()) {
      const auto m = manifest_map.find(id);
      if (m == manifest_map.end())
        throw DataError("eval: trial missing from manifest: " + id);
      t.methods = m->second.methods;
      t.boundaries = m->second.boundaries;
      t.ratio_level = m->second.ratio_level;
    }
    set.push_back(std::move(t));
  }
  if (set.empty()) throw DataError("eval: empty score file");

  fs::create_directories(cfg.out_dir);
  const FileHeader header = make_header(cfg);
  std::ofstream tsv(cfg.out_dir / "report.tsv");
  std::ofstream txt(cfg.out_dir / "report.txt");
  tsv << header_line("report", header) << '\n';
  txt << header_line("report", header) << '\n';

  const double utt = utterance_eer(set);
  tsv << "utterance_eer\t-\t" << fmt6(utt) << '\n';
  txt << "\nEER\n  utterance: " << fmt6(utt) << '\n';
  for (int k = 0; k < kNumResolutions; ++k) {
    const double e = segment_eer(set, k);
    tsv << "segment_eer\t" << kResolutionsMs[k] << '\t' << fmt6(e) << '\n';
    txt << "  " << kResolutionsMs[k] << " ms: " << fmt6(e) << '\n';
  }

  if (!manifest_map.empty()) {
    txt << "\nBoundary-count breakdown (bucket: EER)\n";
    for (int k = 0; k < kNumResolutions; ++k) {
      const auto buckets = boundary_breakdown(set, k);
      txt << "  " << kResolutionsMs[k] << " ms:";
      static const char* names[4] = {"0", "1", "2", "3+"};
      for (int b = 0; b < 4; ++b) {
        if (!buckets[b]) continue;
        tsv << "boundary_eer\t" << kResolutionsMs[k] << ':' << names[b] << '\t'
            << fmt6(*buckets[b]) << '\n';
        txt << ' ' << names[b] << '=' << fmt6(*buckets[b]);
      }
      txt << '\n';
    }

    const int loo_ms = static_cast<int>(cfg.get_int("loo_res_ms", 20));
    int loo_k = -1;
    for (int k = 0; k < kNumResolutions; ++k)
      if (kResolutionsMs[k] == loo_ms) loo_k = k;
    if (loo_k < 0) throw UsageError("eval: invalid loo_res_ms");
    std::set<std::string> methods;
    for (const auto& t : set)
      for (const auto& m : t.methods) methods.insert(m);
    txt << "\nLeave-one-out at " << loo_ms << " ms (method: loo EER, delta)\n";
    for (const auto& m : methods) {
      try {
        const auto r = leave_one_out(set, m, loo_k);
        tsv << "loo_eer\t" << m << ':' << loo_ms << '\t' << fmt6(r.loo_eer) << '\n';
        tsv << "loo_delta\t" << m << ':' << loo_ms << '\t' << fmt6(r.delta) << '\n';
        txt << "  " << m << ": " << fmt6(r.loo_eer) << ", " << fmt6(r.delta) << '\n';
      } catch (const DataError&) {
        tsv << "loo_eer\t" << m << ':' << loo_ms << "\tNA\n";
        txt << "  " << m << ": NA (exclusion empties a class)\n";
      }
    }

    std::optional<std::uint64_t> eq;
    if (cfg.get_int("ratio_equalize", 0) != 0) eq = cfg.seed;
    const auto rows = ratio_group_eer(set, eq);
    txt << "\nUtterance EER per intra-ratio level\n";
    for (const auto& r : rows) {
      tsv << "ratio_eer\t" << r.level << '\t' << fmt6(r.eer) << '\n';
      txt << "  level " << r.level << ": " << fmt6(r.eer) << " (n=" << r.n_spoof
          << ")\n";
    }
  }
  return 0;
}

int run_cli(const std::vector<std::string>& args) {
  static const char* kUsage =
      "usage: partialspoof <forge|label|train|score|eval> [options]\n"
      "common options:\n"
      "  --config FILE   key=value config file\n"
      "  --seed N        RNG seed (default 0)\n"
      "  --out PATH      output file or directory\n"
      "  --jobs N        worker threads (default: logical cores)\n"
      "  --set KEY=VAL   override any config key\n"
      "shortcut options map to config keys of the same name, e.g.\n"
      "  --pool --data --labels --ckpt --scores --count --epochs --lr --strategy\n";

  try {
    if (args.empty()) throw UsageError("missing subcommand");
    const std::string sub = args[0];
    if (sub == "-h" || sub == "--help") {
      std::cout << kUsage;
      return 0;
    }

    fs::path config_path;
    std::vector<std::pair<std::string, std::string>> overrides;
    for (std::size_t i = 1; i < args.size(); ++i) {
      const std::string& a = args[i];
      auto need_value = [&]() -> const std::string& {
        if (i + 1 >= args.size()) throw UsageError("missing value for " + a);
        return args[++i];
      };
      if (a == "--config") {
        config_path = need_value();
      } else if (a == "--set") {
        const std::string& kvp = need_value();
        const auto eq = kvp.find('=');
        if (eq == std::string::npos)
          throw UsageError("--set expects KEY=VALUE, got: " + kvp);
        overrides.emplace_back(kvp.substr(0, eq), kvp.substr(eq + 1));
      } else if (a.rfind("--", 0) == 0) {
        overrides.emplace_back(a.substr(2), need_value());
      } else {
        throw UsageError("unexpected argument: " + a);
      }
    }

    RunConfig cfg = RunConfig::load(config_path);
    for (const auto& [k, v] : overrides) cfg.merge_override(k, v);
    cfg.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 0));
    cfg.out_dir = cfg.get("out", "");
    cfg.jobs = static_cast<int>(cfg.get_int("jobs", 0));

    if (sub == "forge") return cmd_forge(cfg);
    if (sub == "label") return cmd_label(cfg);
    if (sub == "train") return cmd_train(cfg);
    if (sub == "score") return cmd_score(cfg);
    if (sub == "eval") return cmd_eval(cfg);
    throw UsageError("unknown subcommand: " + sub);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n" << kUsage;
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace ps
