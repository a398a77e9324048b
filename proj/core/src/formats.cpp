#include "ps/formats.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ps/error.hpp"

namespace ps {

namespace {

const char* class_name(SampleClass c) {
  return c == SampleClass::kSpoof ? "spoof" : "bonafide";
}

SampleClass parse_class(const std::string& s) {
  if (s == "spoof") return SampleClass::kSpoof;
  if (s == "bonafide") return SampleClass::kBonaFide;
  throw DataError("unknown class token: " + s);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::string fmt6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path.string());
  return in;
}

void write_raw(std::ostream& out, const void* p, std::size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void read_raw(std::istream& in, void* p, std::size_t n) {
  in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n)
    throw DataError("truncated binary file");
}

template <typename T>
void write_le(std::ostream& out, T v) {
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));  // little-endian host assumed
  write_raw(out, buf, sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
  unsigned char buf[sizeof(T)];
  read_raw(in, buf, sizeof(T));
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

}  // namespace

std::uint64_t fnv1a_hash(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string header_line(const std::string& kind, const FileHeader& h,
                        const std::string& extra) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(h.config_hash));
  std::string line = "#partialspoof-" + kind + " v1 ";
  if (!extra.empty()) line += extra + " ";
  line += "tool=" + std::string(kToolVersion) + " config=" + buf +
          " seed=" + std::to_string(h.seed);
  return line;
}

void write_manifest(const std::filesystem::path& path,
                    const std::vector<ForgedTrial>& trials, const FileHeader& h) {
  auto out = open_out(path);
  out << header_line("manifest", h) << '\n';
  for (const auto& t : trials) {
    const bool spoof_utt = t.intra_ratio > 0.0;
    out << t.trial_id << '\t' << t.target_utterance << '\t'
        << class_name(spoof_utt ? SampleClass::kSpoof : SampleClass::kBonaFide)
        << '\t' << fmt6(t.intra_ratio) << '\t' << t.ratio_level << '\t';
    if (t.prov.boundaries.empty()) {
      out << '-';
    } else {
      for (std::size_t i = 0; i < t.prov.boundaries.size(); ++i)
        out << (i ? "," : "") << t.prov.boundaries[i];
    }
    out << '\t';
    if (t.prov.methods.empty()) {
      out << '-';
    } else {
      bool first = true;
      for (const auto& m : t.prov.methods) {
        out << (first ? "" : ",") << m;
        first = false;
      }
    }
    out << '\t';
    if (t.prov.substitution_log.empty()) {
      out << '-';
    } else {
      for (std::size_t i = 0; i < t.prov.substitution_log.size(); ++i) {
        const auto& s = t.prov.substitution_log[i];
        out << (i ? ";" : "") << s.target_start << '-' << s.target_end << '='
            << s.source_utterance << ':' << s.source_start << '-' << s.source_end;
      }
    }
    out << '\t' << (t.clipped ? "clip" : "-") << '\n';
  }
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<ManifestEntry> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto f = split(line, '\t');
    if (f.size() != 9) throw DataError("malformed manifest line: " + line);
    ManifestEntry e;
    e.trial_id = f[0];
    e.target_utterance = f[1];
    e.cls = parse_class(f[2]);
    e.intra_ratio = std::stod(f[3]);
    e.ratio_level = std::stoi(f[4]);
    if (f[5] != "-")
      for (const auto& tok : split(f[5], ','))
        e.boundaries.push_back(std::stoull(tok));
    if (f[6] != "-") e.methods = split(f[6], ',');
    if (f[7] != "-") {
      for (const auto& tok : split(f[7], ';')) {
        SpanSubstitution s;
        const auto eq = tok.find('=');
        const auto colon = tok.rfind(':');
        if (eq == std::string::npos || colon == std::string::npos || colon < eq)
          throw DataError("malformed substitution log: " + tok);
        const auto tgt = split(tok.substr(0, eq), '-');
        const auto src = split(tok.substr(colon + 1), '-');
        if (tgt.size() != 2 || src.size() != 2)
          throw DataError("malformed substitution log: " + tok);
        s.target_start = std::stoull(tgt[0]);
        s.target_end = std::stoull(tgt[1]);
        s.source_utterance = tok.substr(eq + 1, colon - eq - 1);
        s.source_start = std::stoull(src[0]);
        s.source_end = std::stoull(src[1]);
        e.substitutions.push_back(std::move(s));
      }
    }
    e.clipped = f[8] == "clip";
    out.push_back(std::move(e));
  }
  return out;
}

void write_mask(const std::filesystem::path& path, const Provenance& prov,
                const FileHeader& h) {
  auto out = open_out(path);
  out << header_line("mask", h) << '\n';
  std::size_t start = 0;
  for (std::size_t i = 1; i <= prov.mask.size(); ++i) {
    if (i == prov.mask.size() || prov.mask[i] != prov.mask[start]) {
      out << start << '\t' << i << '\t'
          << class_name(static_cast<SampleClass>(prov.mask[start])) << '\n';
      start = i;
    }
  }
}

std::vector<std::uint8_t> read_mask(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<std::uint8_t> mask;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto f = split(line, '\t');
    if (f.size() != 3) throw DataError("malformed mask line: " + line);
    const std::size_t begin = std::stoull(f[0]);
    const std::size_t end = std::stoull(f[1]);
    if (begin != mask.size() || end <= begin)
      throw DataError("non-contiguous mask runs: " + line);
    mask.resize(end, static_cast<std::uint8_t>(parse_class(f[2])));
  }
  if (mask.empty()) throw DataError("empty mask file: " + path.string());
  return mask;
}

void write_labels(
    const std::filesystem::path& path,
    const std::vector<std::pair<std::string, MultiResLabels>>& labels,
    const FileHeader& h) {
  auto out = open_out(path);
  out << header_line("labels", h, "polarity=1-is-spoof") << '\n';
  for (const auto& [id, l] : labels) {
    out << id << '\t' << (l.utterance_spoof ? 1 : 0);
    for (int k = 0; k < kNumResolutions; ++k) {
      out << '\t' << kResolutionsMs[k] << '=';
      for (auto v : l.labels[k]) out << (v ? '1' : '0');
    }
    out << '\n';
  }
}

std::vector<std::pair<std::string, MultiResLabels>> read_labels(
    const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<std::pair<std::string, MultiResLabels>> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto f = split(line, '\t');
    if (f.size() != 2 + kNumResolutions)
      throw DataError("malformed label line: " + line);
    MultiResLabels l;
    l.utterance_spoof = f[1] == "1";
    for (int k = 0; k < kNumResolutions; ++k) {
      const auto& field = f[2 + k];
      const std::string prefix = std::to_string(kResolutionsMs[k]) + "=";
      if (field.rfind(prefix, 0) != 0)
        throw DataError("malformed label field: " + field);
      for (std::size_t i = prefix.size(); i < field.size(); ++i)
        l.labels[k].push_back(field[i] == '1');
    }
    out.emplace_back(f[0], std::move(l));
  }
  return out;
}

void write_feature_cache(const std::filesystem::path& path,
                         const FeatureSequence& f) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write feature cache: " + path.string());
  out.write("PSFEAT01", 8);
  write_le<std::uint32_t>(out, 1);
  write_le<std::uint64_t>(out, f.n_frames);
  write_le<std::uint64_t>(out, f.dim);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(f.frame_shift_ms));
  for (double v : f.data) write_le<float>(out, static_cast<float>(v));
}

FeatureSequence read_feature_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open feature cache: " + path.string());
  char magic[8];
  read_raw(in, magic, 8);
  if (std::memcmp(magic, "PSFEAT01", 8) != 0)
    throw DataError("bad feature cache magic: " + path.string());
  if (read_le<std::uint32_t>(in) != 1)
    throw DataError("unsupported feature cache version");
  FeatureSequence f;
  f.n_frames = read_le<std::uint64_t>(in);
  f.dim = read_le<std::uint64_t>(in);
  f.frame_shift_ms = static_cast<int>(read_le<std::uint32_t>(in));
  f.data.resize(f.n_frames * f.dim);
  for (auto& v : f.data) v = read_le<float>(in);
  return f;
}

void save_checkpoint(const std::filesystem::path& path, BackendParams& params,
                     const FileHeader& h) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path.string());
  out.write("PSCKPT01", 8);
  write_le<std::uint32_t>(out, 1);
  write_le<std::uint64_t>(out, h.config_hash);
  write_le<std::uint64_t>(out, h.seed);
  write_le<std::uint64_t>(out, params.cfg.dim);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.cfg.n_blocks));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.cfg.t_kernel_taps));

  std::uint32_t count = 0;
  params.for_each([&](const std::string&, Tensor&) { ++count; });
  write_le<std::uint32_t>(out, count);
  params.for_each([&](const std::string& name, Tensor& t) {
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_le<std::uint64_t>(out, t.v.rows);
    write_le<std::uint64_t>(out, t.v.cols);
    for (double v : t.v.d) write_le<double>(out, v);
  });
  if (!out) throw DataError("checkpoint write failed: " + path.string());
}

BackendParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path.string());
  char magic[8];
  read_raw(in, magic, 8);
  if (std::memcmp(magic, "PSCKPT01", 8) != 0)
    throw DataError("bad checkpoint magic: " + path.string());
  if (read_le<std::uint32_t>(in) != 1)
    throw DataError("unsupported checkpoint version");
  read_le<std::uint64_t>(in);  // config hash
  read_le<std::uint64_t>(in);  // seed

  BackendConfig cfg;
  cfg.dim = read_le<std::uint64_t>(in);
  cfg.n_blocks = static_cast<int>(read_le<std::uint32_t>(in));
  cfg.t_kernel_taps = static_cast<int>(read_le<std::uint32_t>(in));
  BackendParams params = BackendParams::init(cfg, 0);

  const std::uint32_t count = read_le<std::uint32_t>(in);
  std::uint32_t loaded = 0;
  params.for_each([&](const std::string& name, Tensor& t) {
    const std::uint32_t len = read_le<std::uint32_t>(in);
    std::string stored(len, '\0');
    read_raw(in, stored.data(), len);
    if (stored != name)
      throw DataError("checkpoint tensor order mismatch: " + stored);
    const std::uint64_t rows = read_le<std::uint64_t>(in);
    const std::uint64_t cols = read_le<std::uint64_t>(in);
    if (rows != t.v.rows || cols != t.v.cols)
      throw DataError("checkpoint shape mismatch for " + name);
    for (auto& v : t.v.d) v = read_le<double>(in);
    ++loaded;
  });
  if (loaded != count) throw DataError("checkpoint tensor count mismatch");
  return params;
}

void write_scores(const std::filesystem::path& path,
                  const std::vector<std::pair<std::string, ScoreSet>>& scores,
                  const FileHeader& h) {
  auto out = open_out(path);
  out << header_line("scores", h) << '\n';
  for (const auto& [id, s] : scores) {
    out << id << '\t' << fmt6(s.utt);
    for (int k = 0; k < kNumResolutions; ++k) {
      out << '\t' << kResolutionsMs[k] << '=';
      for (std::size_t i = 0; i < s.seg[k].size(); ++i)
        out << (i ? "," : "") << fmt6(s.seg[k][i]);
    }
    out << '\n';
  }
}

std::vector<std::pair<std::string, ScoreSet>> read_scores(
    const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<std::pair<std::string, ScoreSet>> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto f = split(line, '\t');
    if (f.size() != 2 + kNumResolutions)
      throw DataError("malformed score line: " + line);
    ScoreSet s;
    s.utt = std::stod(f[1]);
    for (int k = 0; k < kNumResolutions; ++k) {
      const auto& field = f[2 + k];
      const std::string prefix = std::to_string(kResolutionsMs[k]) + "=";
      if (field.rfind(prefix, 0) != 0)
        throw DataError("malformed score field: " + field);
      const std::string body = field.substr(prefix.size());
      if (!body.empty())
        for (const auto& tok : split(body, ',')) s.seg[k].push_back(std::stod(tok));
    }
    out.emplace_back(f[0], std::move(s));
  }
  return out;
}

std::vector<PoolSpecEntry> read_pool_list(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<PoolSpecEntry> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto f = split(line, '\t');
    if (f.size() != 5) throw DataError("malformed pool list line: " + line);
    PoolSpecEntry e;
    e.utterance_id = f[0];
    e.speaker_id = f[1];
    e.cls = parse_class(f[2]);
    e.method_id = f[3];
    e.wav_path = f[4];
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace ps
