#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "ihfood/detectors.hpp"
#include "ihfood/errors.hpp"
#include "ihfood/harness.hpp"
#include "ihfood/parallel.hpp"
#include "ihfood/preprocess.hpp"
#include "ihfood/rng.hpp"
#include "ihfood/score_table.hpp"
#include "ihfood/synth.hpp"
#include "ihfood/volume.hpp"

namespace ihfood::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Options {
  std::string log_level = "warn";
  unsigned jobs = 0;
  std::string manifest;
  std::string detector = "ihf-nn";
  std::size_t m = kDefaultBins;
  std::string v = "0.9999";
  double ridge = kDefaultRidge;
  std::vector<std::string> scores;
  std::string method_name;
  std::string corrupt;
  std::string out;
  std::string format = "markdown";
  bool strict = false;
  std::uint64_t seed = 0;
  std::string model;
  std::string modality;
  std::vector<std::string> inputs;
  double tpr = 0.95;
  std::string m_list = "150";
  std::string v_list = "0.9999";
  std::string correlate;
  bool use_auroc = false;
  std::size_t n_train = 40;
  std::size_t n_test = 20;
  std::size_t size = 64;
  std::string kinds = "kspace_spikes,anisotropy,ghosting";
  std::string severities = "1,2,3,4,5";
  bool predictions = false;

  // Set after parsing.
  bool seed_given = false;
  bool m_given = false;
  bool detector_given = false;
};

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  if (out.empty()) throw PreconditionError("empty list '" + text + "'");
  return out;
}

template <typename T>
T parse_number(const std::string& text, const std::string& what) {
  T value{};
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw PreconditionError("invalid " + what + " '" + text + "'");
  }
  return value;
}

// "none" disables PCA.
std::optional<double> parse_variance(const std::string& text) {
  if (text == "none") return std::nullopt;
  const auto v = parse_number<double>(text, "--v value");
  if (!(v > 0.0 && v <= 1.0)) throw PreconditionError("--v must lie in (0, 1] or be 'none'");
  return v;
}

PreprocessConfig modality_preset(const std::string& name) {
  if (name == "ct") return PreprocessConfig::ct();
  if (name == "mri") return PreprocessConfig::mri();
  throw PreconditionError("unknown modality '" + name + "' (expected ct or mri)");
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

// Guards the "never mutate inputs" rule for commands that write files.
void refuse_overwrite(const fs::path& dest, const fs::path& input) {
  std::error_code ec;
  if (fs::exists(dest) && fs::equivalent(dest, input, ec)) {
    throw IoError("refusing to overwrite input " + input.string());
  }
}

ChallengeManifest manifest_from(const Options& o) {
  if (o.manifest.empty()) throw PreconditionError("--manifest is required");
  auto m = load_manifest(o.manifest);
  if (o.seed_given) {
    for (auto& set : m.ood_sets) {
      if (set.synthetic) set.synthetic->seed = o.seed;
    }
  }
  return m;
}

json variance_json(const std::optional<double>& v) { return v ? json(*v) : json("none"); }

void summary(std::ostream& out, const json& j) { out << j.dump() << '\n'; }

int cmd_preprocess(const Options& o, std::ostream& out) {
  PreprocessConfig cfg;
  if (!o.modality.empty()) {
    cfg = modality_preset(o.modality);
  } else if (!o.manifest.empty()) {
    cfg = load_manifest(o.manifest).modality;
  } else {
    throw PreconditionError("preprocess needs --modality or --manifest");
  }
  const fs::path dir = o.out;
  fs::create_directories(dir);
  std::set<std::string> used;
  std::size_t written = 0;
  json skipped = json::array();
  for (const auto& input : o.inputs) {
    try {
      const fs::path in = input;
      const Volume v = load_volume(in);
      const fs::path dest = dir / (in.stem().string() + ".json");
      if (!used.insert(dest.string()).second) {
        throw DataError("two inputs map to the same output " + dest.string());
      }
      refuse_overwrite(dest, in);
      save_volume(preprocess(v, cfg), dest);
      ++written;
      spdlog::info("preprocessed {} -> {}", input, dest.string());
    } catch (const Error& e) {
      if (o.strict) throw;
      spdlog::warn("skipping {}: {}", input, e.what());
      skipped.push_back(input);
    }
  }
  summary(out, {{"command", "preprocess"},
                {"modality", to_json(cfg)},
                {"inputs", o.inputs.size()},
                {"written", written},
                {"skipped", skipped},
                {"strict", o.strict},
                {"out", o.out}});
  return kOk;
}

int cmd_fit(const Options& o, std::ostream& out) {
  const auto manifest = manifest_from(o);
  DetectorSpec spec;
  spec.kind = detector_kind_from_string(o.detector);
  spec.m = o.m;
  spec.v = parse_variance(o.v);
  spec.ridge = o.ridge;
  RunOptions ro;
  ro.jobs = o.jobs;
  json model;
  json info = {{"command", "fit"},   {"manifest", o.manifest}, {"detector", to_string(spec.kind)},
               {"jobs", o.jobs},     {"out", o.out},           {"n_train", manifest.id_train.size()}};
  if (spec.kind == DetectorKind::ihf_mah || spec.kind == DetectorKind::ihf_nn) {
    const auto d = fit_manifest_ihf(manifest, spec, ro);
    model = to_json(d);
    model["detector"] = to_string(spec.kind);
    info["m"] = spec.m;
    info["v"] = variance_json(spec.v);
    info["ridge"] = spec.ridge;
    info["dim"] = d.dim();
  } else if (spec.kind == DetectorKind::volume_predictor) {
    model = to_json(fit_manifest_volume(manifest, ro));
    model["volume_unit"] = manifest.volume_unit;
    info["volume_unit"] = manifest.volume_unit;
  } else {
    throw PreconditionError("detector '" + o.detector + "' has nothing to fit");
  }
  write_text(o.out, model.dump());
  summary(out, info);
  return kOk;
}

struct ScoreCase {
  std::string key;
  const CaseEntry* entry = nullptr;  // manifest mode
  fs::path path;                     // positional mode
  std::optional<CorruptionSpec> corruption;
};

int cmd_score(const Options& o, std::ostream& out) {
  if (o.manifest.empty() == o.inputs.empty()) {
    throw PreconditionError("score needs either --manifest or input files, not both");
  }
  if (!o.corrupt.empty() && !o.manifest.empty()) {
    throw PreconditionError("--corrupt applies to input files; manifests declare synthetic sets");
  }

  json model;
  if (!o.model.empty()) model = read_json(o.model);
  DetectorKind kind;
  if (o.detector_given) {
    kind = detector_kind_from_string(o.detector);
  } else if (model.is_object() && model.contains("detector")) {
    kind = detector_kind_from_string(model.at("detector").get<std::string>());
  } else if (model.is_object() && model.value("type", std::string()) == "volume") {
    kind = DetectorKind::volume_predictor;
  } else {
    throw PreconditionError("pass --detector (or a --model that records one)");
  }
  const bool ihf = kind == DetectorKind::ihf_mah || kind == DetectorKind::ihf_nn;
  if (kind == DetectorKind::external) throw PreconditionError("external scores need no scoring");
  if ((ihf || kind == DetectorKind::volume_predictor) && o.model.empty()) {
    throw PreconditionError("detector '" + std::string(to_string(kind)) + "' needs --model");
  }

  std::optional<IhfDetector> det;
  std::optional<VolumePredictor> predictor;
  std::string unit = "mm3";
  if (ihf) {
    det = ihf_from_json(model);
    if (o.m_given && o.m != det->m) {
      throw FitError("dimension mismatch: model histograms have m=" + std::to_string(det->m) +
                     " bins but --m " + std::to_string(o.m) + " was requested");
    }
  } else if (kind == DetectorKind::volume_predictor) {
    predictor = volume_predictor_from_json(model);
    unit = model.value("volume_unit", unit);
  }

  std::optional<CorruptionSpec> cspec;
  if (!o.corrupt.empty()) {
    cspec = parse_corruption_spec(o.corrupt);
    if (o.seed_given) cspec->seed = o.seed;
    if (!ihf) throw PreconditionError("--corrupt only applies to IHF detectors");
  }

  std::optional<ChallengeManifest> manifest;
  std::vector<ScoreCase> cases;
  std::set<std::string> keys;
  auto add = [&](ScoreCase c) {
    if (keys.insert(c.key).second) cases.push_back(std::move(c));
  };
  if (!o.inputs.empty()) {
    if (kind == DetectorKind::uncertainty) {
      throw PreconditionError("the uncertainty detector needs a manifest with ensemble maps");
    }
    for (const auto& input : o.inputs) {
      ScoreCase c;
      c.path = input;
      const std::string stem = c.path.stem().string();
      c.key = stem;
      if (cspec) {
        c.key = synthetic_case_id(stem, cspec->kind, cspec->severity);
        c.corruption = CorruptionSpec{cspec->kind, cspec->severity, derive_case_seed(cspec->seed, stem)};
      }
      if (!keys.insert(c.key).second) throw DataError("duplicate case id '" + c.key + "'");
      cases.push_back(std::move(c));
    }
  } else {
    manifest = manifest_from(o);
    if (unit == "mm3" && !model.contains("volume_unit")) unit = manifest->volume_unit;
    for (const auto& e : manifest->id_test) add({e.case_id, &e, {}, std::nullopt});
    for (const auto& set : manifest->ood_sets) {
      if (!set.synthetic) {
        for (const auto& e : set.entries) add({e.case_id, &e, {}, std::nullopt});
        continue;
      }
      if (!ihf) {
        spdlog::warn("skipping synthetic set '{}': detector scores prediction maps", set.name);
        continue;
      }
      for (int s : set.synthetic->severities) {
        for (const auto& e : manifest->id_test) {
          add({synthetic_case_id(e.case_id, set.synthetic->kind, s), &e, {},
               CorruptionSpec{set.synthetic->kind, s, derive_case_seed(set.synthetic->seed, e.case_id)}});
        }
      }
    }
  }

  auto prediction_of = [](const ScoreCase& c) -> fs::path {
    if (!c.entry) return c.path;
    if (!c.entry->prediction) {
      throw PreconditionError("case '" + c.entry->case_id + "' lacks a 'prediction' map");
    }
    return *c.entry->prediction;
  };
  std::vector<double> values(cases.size());
  parallel_for(cases.size(), o.jobs, [&](std::size_t i) {
    const ScoreCase& c = cases[i];
    switch (kind) {
      case DetectorKind::ihf_mah:
      case DetectorKind::ihf_nn: {
        Volume x = load_volume(c.entry ? c.entry->path : c.path);
        if (c.corruption) x = corrupt(preprocess(x, det->preprocess_cfg), *c.corruption);
        values[i] = kind == DetectorKind::ihf_mah ? score_mahalanobis(*det, x) : score_nn(*det, x);
        break;
      }
      case DetectorKind::volume_predictor: {
        double vol;
        if (c.entry && c.entry->volume) {
          vol = *c.entry->volume;
        } else {
          const Volume p = load_volume(prediction_of(c));
          vol = unit == "voxels" ? static_cast<double>(predicted_voxels(p)) : predicted_volume_mm3(p);
        }
        values[i] = predictor->score(vol);
        break;
      }
      case DetectorKind::entropy:
        values[i] = entropy_score(load_volume(prediction_of(c)));
        break;
      case DetectorKind::uncertainty: {
        if (c.entry->predictions.size() < 2) {
          throw PreconditionError("case '" + c.entry->case_id + "' needs at least 2 'predictions'");
        }
        std::vector<Volume> maps;
        for (const auto& p : c.entry->predictions) maps.push_back(load_volume(p));
        values[i] = uncertainty_score(maps);
        break;
      }
      case DetectorKind::external:
        break;
    }
  });
  ScoreTable table;
  for (std::size_t i = 0; i < cases.size(); ++i) table.add(cases[i].key, values[i]);
  write_score_table(table, o.out);

  json info = {{"command", "score"},      {"detector", to_string(kind)}, {"model", o.model},
               {"manifest", o.manifest},  {"cases", table.size()},       {"jobs", o.jobs},
               {"out", o.out}};
  if (det) info["m"] = det->m;
  if (cspec) info["corrupt"] = format_corruption_spec(*cspec);
  if (o.seed_given) info["seed"] = o.seed;
  summary(out, info);
  return kOk;
}

int cmd_corrupt(const Options& o, std::ostream& out) {
  if (o.inputs.size() != 1) throw PreconditionError("corrupt takes exactly one input volume");
  if (o.corrupt.empty()) throw PreconditionError("--corrupt kind=..,severity=..[,seed=..] is required");
  auto spec = parse_corruption_spec(o.corrupt);
  if (o.seed_given) spec.seed = o.seed;
  const fs::path in = o.inputs.front();
  Volume v = load_volume(in);
  if (!o.modality.empty()) {
    v = preprocess(v, modality_preset(o.modality));
  } else {
    const auto [lo, hi] = std::minmax_element(v.data().begin(), v.data().end());
    if (*lo < 0.0f || *hi > 1.0f) {
      throw DataError(in.string() + " is not preprocessed to [0, 1]; pass --modality");
    }
  }
  CorruptionDiagnostics diag;
  const Volume result = corrupt(v, spec, {}, &diag);
  const fs::path dest = o.out;
  refuse_overwrite(dest, in);
  if (dest.has_parent_path()) fs::create_directories(dest.parent_path());
  save_volume(result, dest, dest.extension() == ".nii" ? VolumeFormat::nifti1 : VolumeFormat::rvol);
  json info = {{"command", "corrupt"}, {"input", in.string()},
               {"corrupt", format_corruption_spec(spec)}, {"seed", spec.seed},
               {"modality", o.modality.empty() ? json(nullptr) : json(o.modality)},
               {"out", o.out}};
  if (diag.axis >= 0) info["axis"] = diag.axis;
  if (!diag.local_transform.empty()) info["local_transform"] = diag.local_transform;
  summary(out, info);
  return kOk;
}

int cmd_eval(const Options& o, std::ostream& out) {
  const auto manifest = manifest_from(o);
  DetectorSpec spec;
  spec.kind = detector_kind_from_string(o.detector);
  spec.m = o.m;
  spec.v = parse_variance(o.v);
  spec.ridge = o.ridge;
  spec.tpr_target = o.tpr;
  spec.method_name = o.method_name;
  for (const auto& s : o.scores) spec.score_files.emplace_back(s);
  if (spec.kind != DetectorKind::external && !spec.score_files.empty()) {
    throw PreconditionError("--scores only applies to --detector external");
  }
  RunOptions ro;
  ro.jobs = o.jobs;
  const auto results = run_challenge(manifest, spec, ro);
  write_text(o.out, results_to_json(results).dump(2));

  json rows = json::array();
  for (const auto& r : results) {
    rows.push_back({{"ood_set", r.label()},
                    {"fpr_at_tpr95", r.metric.fpr_at_tpr95},
                    {"auroc", r.metric.auroc},
                    {"n_id", r.metric.n_id},
                    {"n_ood", r.metric.n_ood}});
  }
  json info = {{"command", "eval"},      {"manifest", o.manifest}, {"detector", to_string(spec.kind)},
               {"method", spec.name()},  {"tpr", spec.tpr_target}, {"jobs", o.jobs},
               {"out", o.out},           {"results", rows}};
  if (spec.kind == DetectorKind::ihf_mah || spec.kind == DetectorKind::ihf_nn) {
    info["m"] = spec.m;
    info["v"] = variance_json(spec.v);
    info["ridge"] = spec.ridge;
  }
  if (!o.scores.empty()) info["scores"] = o.scores;
  json seeds = json::object();
  for (const auto& set : manifest.ood_sets) {
    if (set.synthetic) seeds[set.name] = set.synthetic->seed;
  }
  if (!seeds.empty()) info["seeds"] = seeds;
  summary(out, info);
  return kOk;
}

int cmd_sweep(const Options& o, std::ostream& out) {
  const auto manifest = manifest_from(o);
  const auto kind = detector_kind_from_string(o.detector);
  if (kind != DetectorKind::ihf_mah && kind != DetectorKind::ihf_nn) {
    throw PreconditionError("sweep supports ihf-mah and ihf-nn");
  }
  std::vector<std::size_t> ms;
  for (const auto& s : split_list(o.m_list)) ms.push_back(parse_number<std::size_t>(s, "--m value"));
  std::vector<std::optional<double>> vs;
  for (const auto& s : split_list(o.v_list)) vs.push_back(parse_variance(s));
  RunOptions ro;
  ro.jobs = o.jobs;
  const auto rows = sweep_hyperparameters(manifest, kind, ms, vs, o.ridge, ro);
  write_text(o.out, sweep_to_csv(rows));
  std::size_t failed = 0;
  for (const auto& r : rows) failed += !r.error.empty();
  json vjson = json::array();
  for (const auto& v : vs) vjson.push_back(variance_json(v));
  summary(out, {{"command", "sweep"}, {"manifest", o.manifest}, {"detector", to_string(kind)},
                {"m", ms}, {"v", vjson}, {"ridge", o.ridge}, {"jobs", o.jobs},
                {"rows", rows.size()}, {"failed", failed}, {"out", o.out}});
  return kOk;
}

int cmd_report(const Options& o, std::ostream& out) {
  std::vector<ChallengeResult> results;
  for (const auto& input : o.inputs) {
    auto part = results_from_json(read_json(input));
    results.insert(results.end(), part.begin(), part.end());
  }
  if (results.empty()) throw DataError("no results to report");
  std::map<std::string, std::vector<std::string>> groups;
  if (!o.manifest.empty()) {
    groups = parse_manifest(read_json(o.manifest), fs::path(o.manifest).parent_path(), false).groups;
  }
  std::string text;
  if (!o.correlate.empty()) {
    text = "method,coefficient\n";
    for (const auto& c : correlate_methods(results, o.correlate, o.use_auroc)) {
      text += c.method + "," + format_double(c.coefficient) + "\n";
    }
  } else {
    text = report(results, report_format_from_string(o.format), groups);
  }
  write_text(o.out, text);
  json info = {{"command", "report"}, {"inputs", o.inputs},   {"results", results.size()},
               {"format", o.correlate.empty() ? o.format : std::string("csv")},
               {"out", o.out}};
  if (!o.correlate.empty()) {
    info["correlate"] = o.correlate;
    info["metric"] = o.use_auroc ? "auroc" : "fpr_at_tpr95";
  }
  summary(out, info);
  return kOk;
}

int cmd_phantoms(const Options& o, std::ostream& out) {
  std::vector<CorruptionKind> kinds;
  for (const auto& k : split_list(o.kinds)) kinds.push_back(corruption_kind_from_string(k));
  std::vector<int> sevs;
  for (const auto& s : split_list(o.severities)) {
    sevs.push_back(parse_number<int>(s, "severity"));
    CorruptionSpec{kinds.front(), sevs.back(), 0}.validate();
  }
  const fs::path dir = o.out;
  const auto manifest =
      make_phantom_benchmark(dir, o.n_train, o.n_test, o.seed, kinds, sevs, o.size, o.predictions);
  save_manifest(manifest, dir / "manifest.json");
  summary(out, {{"command", "phantoms"}, {"out", o.out}, {"manifest", (dir / "manifest.json").string()},
                {"n_train", o.n_train}, {"n_test", o.n_test}, {"size", o.size}, {"seed", o.seed},
                {"kinds", split_list(o.kinds)}, {"severities", sevs}, {"predictions", o.predictions}});
  return kOk;
}

// Rejects bad --v values at parse time, before any file is read.
const CLI::Validator kVariance(
    [](std::string& text) -> std::string {
      try {
        for (const auto& item : split_list(text)) parse_variance(item);
      } catch (const Error& e) {
        return e.what();
      }
      return {};
    },
    "VARIANCE");

const CLI::Validator kSizeList(
    [](std::string& text) -> std::string {
      try {
        for (const auto& item : split_list(text)) {
          if (parse_number<std::size_t>(item, "--m value") == 0) return "--m values must be positive";
        }
      } catch (const Error& e) {
        return e.what();
      }
      return {};
    },
    "SIZES");

const CLI::Validator kCorruption(
    [](std::string& text) -> std::string {
      try {
        parse_corruption_spec(text);
      } catch (const Error& e) {
        return e.what();
      }
      return {};
    },
    "SPEC");

const std::map<std::string, spdlog::level::level_enum> kLevels{
    {"trace", spdlog::level::trace}, {"debug", spdlog::level::debug},
    {"info", spdlog::level::info},   {"warn", spdlog::level::warn},
    {"error", spdlog::level::err},   {"off", spdlog::level::off}};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Intensity histogram OOD detection toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--log-level", o.log_level, "trace, debug, info, warn, error or off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  auto jobs = [&](CLI::App* c) {
    c->add_option("--jobs", o.jobs, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  };
  auto ihf_params = [&](CLI::App* c) {
    c->add_option("--m", o.m, "Histogram bins")->check(CLI::Range(std::size_t{1}, std::size_t{100000}));
    c->add_option("--v", o.v, "PCA explained variance in (0, 1], or 'none'")->check(kVariance);
    c->add_option("--ridge", o.ridge, "Relative covariance ridge")->check(CLI::NonNegativeNumber);
  };
  const std::vector<std::string> detectors{"ihf-mah", "ihf-nn", "volume", "entropy", "uncertainty",
                                           "external"};

  auto* pre = app.add_subcommand("preprocess", "Resample, clip and rescale volumes");
  pre->add_option("inputs", o.inputs, "Input volumes (.nii or .json)")->required();
  pre->add_option("--modality", o.modality, "ct or mri")->check(CLI::IsMember({"ct", "mri"}));
  pre->add_option("--manifest", o.manifest, "Take the modality from this manifest");
  pre->add_option("--out", o.out, "Output directory")->required();
  pre->add_flag("--strict", o.strict, "Fail on the first unreadable input");

  auto* fit = app.add_subcommand("fit", "Fit a detector on a manifest's id_train cases");
  fit->add_option("--manifest", o.manifest)->required();
  fit->add_option("--detector", o.detector)->check(CLI::IsMember({"ihf-mah", "ihf-nn", "volume"}));
  ihf_params(fit);
  fit->add_option("--out", o.out, "Model JSON")->required();
  fit->add_option("--seed", o.seed, "Recorded for reproducibility");
  jobs(fit);

  auto* score = app.add_subcommand("score", "Score volumes or a manifest's test cases");
  score->add_option("inputs", o.inputs, "Volumes (IHF) or probability maps");
  score->add_option("--manifest", o.manifest);
  score->add_option("--model", o.model, "Model JSON written by fit");
  auto* score_det = score->add_option("--detector", o.detector)->check(CLI::IsMember(detectors));
  auto* score_m = score->add_option("--m", o.m, "Expected histogram bins of the model");
  score->add_option("--corrupt", o.corrupt, "kind=..,severity=..,seed=.. applied to each input")
      ->check(kCorruption);
  score->add_option("--seed", o.seed, "Overrides corruption seeds");
  score->add_option("--out", o.out, "Score CSV")->required();
  jobs(score);

  auto* cor = app.add_subcommand("corrupt", "Apply one synthetic corruption");
  cor->add_option("input", o.inputs, "Input volume")->required();
  cor->add_option("--corrupt", o.corrupt, "kind=..,severity=..,seed=..")->required()->check(kCorruption);
  cor->add_option("--seed", o.seed, "Overrides the spec seed");
  cor->add_option("--modality", o.modality, "Preprocess the input first (ct or mri)")
      ->check(CLI::IsMember({"ct", "mri"}));
  cor->add_option("--out", o.out, "Output volume (.json or .nii)")->required();

  auto* ev = app.add_subcommand("eval", "Run a detector over a challenge manifest");
  ev->add_option("--manifest", o.manifest)->required();
  ev->add_option("--detector", o.detector)->check(CLI::IsMember(detectors));
  ihf_params(ev);
  ev->add_option("--scores", o.scores, "External score CSVs (repeatable)");
  ev->add_option("--method-name", o.method_name, "Column name for external scores");
  ev->add_option("--tpr", o.tpr, "TPR target in (0, 1]")->check(CLI::Range(1e-12, 1.0));
  ev->add_option("--seed", o.seed, "Overrides synthetic OOD seeds");
  ev->add_option("--out", o.out, "Results JSON")->required();
  jobs(ev);

  auto* sw = app.add_subcommand("sweep", "Grid over histogram bins and PCA variance");
  sw->add_option("--manifest", o.manifest)->required();
  sw->add_option("--detector", o.detector)->check(CLI::IsMember({"ihf-mah", "ihf-nn"}));
  sw->add_option("--m", o.m_list, "Comma-separated bin counts")->check(kSizeList);
  sw->add_option("--v", o.v_list, "Comma-separated variances or 'none'")->check(kVariance);
  sw->add_option("--ridge", o.ridge)->check(CLI::NonNegativeNumber);
  sw->add_option("--seed", o.seed, "Overrides synthetic OOD seeds");
  sw->add_option("--out", o.out, "Long-format CSV")->required();
  jobs(sw);

  auto* rep = app.add_subcommand("report", "Tabulate results JSON files");
  rep->add_option("inputs", o.inputs, "Results JSON files")->required();
  rep->add_option("--format", o.format)->check(CLI::IsMember({"csv", "json", "markdown", "md", "svg"}));
  rep->add_option("--manifest", o.manifest, "Manifest declaring groups");
  rep->add_option("--correlate", o.correlate, "Reference method for Fechner correlations");
  rep->add_flag("--use-auroc", o.use_auroc, "Correlate AUROC instead of FPR");
  rep->add_option("--out", o.out)->required();

  auto* ph = app.add_subcommand("phantoms", "Write a seeded phantom benchmark and its manifest");
  ph->add_option("--out", o.out, "Output directory")->required();
  ph->add_option("--n-train", o.n_train)->check(CLI::PositiveNumber);
  ph->add_option("--n-test", o.n_test)->check(CLI::PositiveNumber);
  ph->add_option("--size", o.size, "Edge length in voxels")->check(CLI::Range(4, 512));
  ph->add_option("--seed", o.seed);
  ph->add_option("--kinds", o.kinds, "Comma-separated corruption kinds");
  ph->add_option("--severities", o.severities);
  ph->add_flag("--predictions", o.predictions, "Also write probability maps");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kOk;
    }
    err << "error: " << e.what() << '\n';
    return kUsage;
  }

  auto logger = std::make_shared<spdlog::logger>(
      "ihfood", std::make_shared<spdlog::sinks::ostream_sink_mt>(err));
  logger->set_level(kLevels.at(o.log_level));
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);

  auto given = [](CLI::App* c, const std::string& name) {
    return c->parsed() && c->get_option(name)->count() > 0;
  };
  o.seed_given = given(fit, "--seed") || given(score, "--seed") || given(cor, "--seed") ||
                 given(ev, "--seed") || given(sw, "--seed") || given(ph, "--seed");
  o.m_given = score_m->count() > 0;
  o.detector_given = score_det->count() > 0;

  try {
    if (pre->parsed()) return cmd_preprocess(o, out);
    if (fit->parsed()) return cmd_fit(o, out);
    if (score->parsed()) return cmd_score(o, out);
    if (cor->parsed()) return cmd_corrupt(o, out);
    if (ev->parsed()) return cmd_eval(o, out);
    if (sw->parsed()) return cmd_sweep(o, out);
    if (rep->parsed()) return cmd_report(o, out);
    if (ph->parsed()) return cmd_phantoms(o, out);
  } catch (const PreconditionError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const FitError& e) {
    err << "error: " << e.what() << '\n';
    return kNumerical;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kIo;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kIo;
  } catch (const json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kNumerical;
  }
  return kUsage;
}

}  // namespace ihfood::cli
