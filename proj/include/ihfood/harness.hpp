#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ihfood/detectors.hpp"
#include "ihfood/metrics.hpp"
#include "ihfood/preprocess.hpp"
#include "ihfood/score_table.hpp"
#include "ihfood/synth.hpp"

namespace ihfood {

struct CaseEntry {
  std::string case_id;
  std::filesystem::path path;                     // image volume
  std::optional<std::filesystem::path> prediction;  // foreground probability map
  std::vector<std::filesystem::path> predictions;   // K maps for ensemble uncertainty
  std::optional<double> volume;                     // precomputed predicted volume
};

struct SyntheticSpec {
  CorruptionKind kind = CorruptionKind::local_noise;
  std::vector<int> severities;
  std::uint64_t seed = 0;
};

struct OodSet {
  std::string name;
  std::vector<CaseEntry> entries;        // file-backed set
  std::optional<SyntheticSpec> synthetic;  // or corruptions of id_test
};

struct ChallengeManifest {
  std::string name;
  PreprocessConfig modality;
  std::map<std::string, std::vector<std::string>> groups;
  std::vector<CaseEntry> id_train;
  std::vector<CaseEntry> id_test;
  std::vector<OodSet> ood_sets;
  std::string volume_unit = "mm3";  // or "voxels"
};

// Parses and validates a manifest. Relative paths resolve against the
// manifest's directory. Schema problems raise FormatError naming the field;
// every missing file is collected into a single IoError.
ChallengeManifest load_manifest(const std::filesystem::path& path);
ChallengeManifest parse_manifest(const nlohmann::json& j,
                                 const std::filesystem::path& base_dir = {},
                                 bool check_files = true);
nlohmann::json to_json(const ChallengeManifest& m);
void save_manifest(const ChallengeManifest& m, const std::filesystem::path& path);

// One evaluated OOD set; synthetic sets expand into one variant per severity.
struct OodVariant {
  std::size_t set_index = 0;
  std::string name;
  std::optional<int> severity;
  std::string label() const;
};
std::vector<OodVariant> expand_ood_sets(const ChallengeManifest& m);

// Case key under which a synthetic OOD case appears in score tables.
std::string synthetic_case_id(std::string_view case_id, CorruptionKind kind, int severity);

enum class DetectorKind { ihf_mah, ihf_nn, volume_predictor, entropy, uncertainty, external };

std::string_view to_string(DetectorKind kind) noexcept;
// Accepts both the CLI spellings (ihf-mah, volume) and the enum names.
DetectorKind detector_kind_from_string(std::string_view name);

struct DetectorSpec {
  DetectorKind kind = DetectorKind::ihf_nn;
  std::size_t m = kDefaultBins;
  std::optional<double> v = kDefaultVariance;
  double ridge = kDefaultRidge;
  std::vector<std::filesystem::path> score_files;  // external only
  double tpr_target = 0.95;
  std::string method_name;  // defaults to the kind's name

  std::string name() const;
};

struct RunOptions {
  unsigned jobs = 0;  // 0 = hardware concurrency
  CorruptionParams corruption;
  // Called once per case as it is read: stage is "fit" or "score".
  std::function<void(std::string_view stage, std::string_view case_id)> observer;
};

struct ChallengeResult {
  std::string challenge;
  std::string ood_set;
  std::optional<int> severity;
  std::string method;
  MetricResult metric;
  ScoreTable id_scores;
  ScoreTable ood_scores;

  std::string label() const;
};

std::vector<ChallengeResult> run_challenge(const ChallengeManifest& manifest,
                                           const DetectorSpec& detector,
                                           const RunOptions& options = {});

// Fit on id_train only, as run_challenge does. Useful for the CLI.
IhfDetector fit_manifest_ihf(const ChallengeManifest& manifest, const DetectorSpec& detector,
                             const RunOptions& options = {});
VolumePredictor fit_manifest_volume(const ChallengeManifest& manifest,
                                    const RunOptions& options = {});

struct SweepRow {
  std::size_t m = 0;
  std::optional<double> v;
  std::string ood_set;
  double fpr = 0.0;
  double auroc = 0.0;
  std::string error;  // non-empty when the cell failed
};

// One fit and evaluation per (m, v) cell; failures are recorded per cell.
// Preprocessing runs once per case regardless of the grid size.
std::vector<SweepRow> sweep_hyperparameters(const ChallengeManifest& manifest,
                                            DetectorKind detector,
                                            const std::vector<std::size_t>& m_list,
                                            const std::vector<std::optional<double>>& v_list,
                                            double ridge = kDefaultRidge,
                                            const RunOptions& options = {});
std::string sweep_to_csv(const std::vector<SweepRow>& rows);

nlohmann::json to_json(const ChallengeResult& r);
ChallengeResult challenge_result_from_json(const nlohmann::json& j);
nlohmann::json results_to_json(const std::vector<ChallengeResult>& results);
std::vector<ChallengeResult> results_from_json(const nlohmann::json& j);

enum class ReportFormat { csv, json, markdown, svg };
ReportFormat report_format_from_string(std::string_view name);

// Challenge x method matrices of FPR and AUROC with per-method means over all
// rows and over each declared group; markdown bolds every row-best value.
std::string report(const std::vector<ChallengeResult>& results, ReportFormat format,
                   const std::map<std::string, std::vector<std::string>>& groups = {});

struct Correlation {
  std::string method;
  double coefficient = 0.0;
};

// Fechner correlation of each method's per-challenge FPR (or AUROC) vector
// with the reference method's vector.
std::vector<Correlation> correlate_methods(const std::vector<ChallengeResult>& results,
                                           const std::string& reference_method,
                                           bool use_auroc = false);

// Writes `count` seeded phantoms (and their probability maps) into `dir` and
// returns a manifest over them: the first n_train cases form id_train, the
// rest id_test, and one synthetic OOD set per requested kind. With
// predictions, each case also gets a probability map and three jittered
// ensemble members so the prediction-based detectors can run.
ChallengeManifest make_phantom_benchmark(const std::filesystem::path& dir, std::size_t n_train,
                                         std::size_t n_test, std::uint64_t seed,
                                         const std::vector<CorruptionKind>& kinds,
                                         const std::vector<int>& severities, std::size_t size = 64,
                                         bool with_predictions = false);

}  // namespace ihfood
