#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "ps/backend.hpp"
#include "ps/features.hpp"
#include "ps/forge.hpp"
#include "ps/labeling.hpp"

namespace ps {

inline constexpr const char* kToolVersion = "0.1.0";

struct FileHeader {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
};

std::uint64_t fnv1a_hash(const std::string& s);

// "#partialspoof-<kind> v1 [extra ]tool=<ver> config=<hex> seed=<n>"
std::string header_line(const std::string& kind, const FileHeader& h,
                        const std::string& extra = "");

// ---- forge manifest + mask sidecars -------------------------------------

struct ManifestEntry {
  std::string trial_id;
  std::string target_utterance;
  SampleClass cls = SampleClass::kBonaFide;  // utterance-level class
  double intra_ratio = 0.0;
  int ratio_level = 0;
  std::vector<std::size_t> boundaries;
  std::vector<std::string> methods;
  std::vector<SpanSubstitution> substitutions;
  bool clipped = false;
};

void write_manifest(const std::filesystem::path& path,
                    const std::vector<ForgedTrial>& trials, const FileHeader& h);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

// Run-length encoded per-sample class mask.
void write_mask(const std::filesystem::path& path, const Provenance& prov,
                const FileHeader& h);
std::vector<std::uint8_t> read_mask(const std::filesystem::path& path);

// ---- label file ----------------------------------------------------------

void write_labels(
    const std::filesystem::path& path,
    const std::vector<std::pair<std::string, MultiResLabels>>& labels,
    const FileHeader& h);
std::vector<std::pair<std::string, MultiResLabels>> read_labels(
    const std::filesystem::path& path);

// ---- feature cache (binary) ----------------------------------------------

void write_feature_cache(const std::filesystem::path& path,
                         const FeatureSequence& f);
FeatureSequence read_feature_cache(const std::filesystem::path& path);

// ---- parameter checkpoint (binary) ----------------------------------------

void save_checkpoint(const std::filesystem::path& path, BackendParams& params,
                     const FileHeader& h);
BackendParams load_checkpoint(const std::filesystem::path& path);

// ---- score file ------------------------------------------------------------

void write_scores(const std::filesystem::path& path,
                  const std::vector<std::pair<std::string, ScoreSet>>& scores,
                  const FileHeader& h);
std::vector<std::pair<std::string, ScoreSet>> read_scores(
    const std::filesystem::path& path);

// ---- pool list input -------------------------------------------------------

struct PoolSpecEntry {
  std::string utterance_id;
  std::string speaker_id;
  SampleClass cls = SampleClass::kBonaFide;
  std::string method_id = "-";
  std::filesystem::path wav_path;
};

// TSV: utterance_id speaker_id {bonafide|spoof} method_id wav_path
std::vector<PoolSpecEntry> read_pool_list(const std::filesystem::path& path);

}  // namespace ps
