#include "ihfood/harness.hpp"

#include <cmath>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>

#include "ihfood/errors.hpp"
#include "ihfood/phantom.hpp"
#include "ihfood/rng.hpp"
#include "ihfood/parallel.hpp"

namespace ihfood {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(DetectorKind kind) noexcept {
  switch (kind) {
    case DetectorKind::ihf_mah: return "ihf-mah";
    case DetectorKind::ihf_nn: return "ihf-nn";
    case DetectorKind::volume_predictor: return "volume";
    case DetectorKind::entropy: return "entropy";
    case DetectorKind::uncertainty: return "uncertainty";
    case DetectorKind::external: return "external";
  }
  return "unknown";
}

DetectorKind detector_kind_from_string(std::string_view name) {
  if (name == "ihf-mah" || name == "ihf_mah") return DetectorKind::ihf_mah;
  if (name == "ihf-nn" || name == "ihf_nn") return DetectorKind::ihf_nn;
  if (name == "volume" || name == "volume_predictor") return DetectorKind::volume_predictor;
  if (name == "entropy") return DetectorKind::entropy;
  if (name == "uncertainty") return DetectorKind::uncertainty;
  if (name == "external") return DetectorKind::external;
  throw PreconditionError("unknown detector '" + std::string(name) + "'");
}

std::string DetectorSpec::name() const {
  return method_name.empty() ? std::string(to_string(kind)) : method_name;
}

std::string ChallengeResult::label() const {
  return severity ? ood_set + "/s" + std::to_string(*severity) : ood_set;
}

namespace {

bool is_ihf(DetectorKind k) { return k == DetectorKind::ihf_mah || k == DetectorKind::ihf_nn; }

// Serializes observer calls made from worker threads.
class Observer {
 public:
  explicit Observer(const RunOptions& o) : fn_(o.observer) {}
  void operator()(std::string_view stage, std::string_view case_id) {
    if (!fn_) return;
    std::lock_guard lock(mutex_);
    fn_(stage, case_id);
  }

 private:
  const std::function<void(std::string_view, std::string_view)>& fn_;
  std::mutex mutex_;
};

// Histograms of every case in the challenge, for each requested bin count.
struct IhfFeatures {
  std::vector<std::size_t> bins;
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
  std::vector<Eigen::MatrixXd> train;  // [m index]
  std::vector<Eigen::MatrixXd> test;
  std::vector<OodVariant> variants;
  std::vector<std::vector<std::string>> ood_ids;       // [variant]
  std::vector<std::vector<Eigen::MatrixXd>> ood;       // [variant][m index]
};

using CaseHistograms = std::vector<std::vector<double>>;  // [m index][bin]

CaseHistograms histograms_for(const Volume& preprocessed, const std::vector<std::size_t>& bins) {
  CaseHistograms out;
  out.reserve(bins.size());
  for (auto m : bins) out.push_back(histogram(preprocessed, m).values);
  return out;
}

std::vector<Eigen::MatrixXd> stack(const std::vector<CaseHistograms>& cases,
                                   const std::vector<std::size_t>& bins) {
  std::vector<Eigen::MatrixXd> out;
  for (std::size_t b = 0; b < bins.size(); ++b) {
    Eigen::MatrixXd mat(static_cast<Eigen::Index>(cases.size()),
                        static_cast<Eigen::Index>(bins[b]));
    for (std::size_t r = 0; r < cases.size(); ++r) {
      for (std::size_t c = 0; c < bins[b]; ++c) {
        mat(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = cases[r][b][c];
      }
    }
    out.push_back(std::move(mat));
  }
  return out;
}

IhfFeatures compute_features(const ChallengeManifest& manifest,
                             const std::vector<std::size_t>& bins, bool train_only,
                             const RunOptions& options) {
  IhfFeatures f;
  f.bins = bins;
  Observer observe(options);
  const auto& cfg = manifest.modality;

  std::vector<CaseHistograms> train(manifest.id_train.size());
  parallel_for(train.size(), options.jobs, [&](std::size_t i) {
    const auto& e = manifest.id_train[i];
    observe("fit", e.case_id);
    train[i] = histograms_for(preprocess(load_volume(e.path), cfg), bins);
  });
  for (const auto& e : manifest.id_train) f.train_ids.push_back(e.case_id);
  f.train = stack(train, bins);
  if (train_only) return f;

  f.variants = expand_ood_sets(manifest);
  const std::size_t nv = f.variants.size();
  std::vector<std::vector<CaseHistograms>> ood(nv);
  f.ood_ids.resize(nv);

  // Synthetic variants corrupt each preprocessed id_test volume, so those
  // are generated in the same pass as the clean id_test histograms.
  std::vector<std::size_t> synthetic;
  for (std::size_t v = 0; v < nv; ++v) {
    const auto& set = manifest.ood_sets[f.variants[v].set_index];
    if (set.synthetic) {
      synthetic.push_back(v);
      ood[v].resize(manifest.id_test.size());
      for (const auto& e : manifest.id_test) {
        f.ood_ids[v].push_back(synthetic_case_id(e.case_id, set.synthetic->kind,
                                                 *f.variants[v].severity));
      }
    } else {
      ood[v].resize(set.entries.size());
      for (const auto& e : set.entries) f.ood_ids[v].push_back(e.case_id);
    }
  }

  std::vector<CaseHistograms> test(manifest.id_test.size());
  parallel_for(test.size(), options.jobs, [&](std::size_t i) {
    const auto& e = manifest.id_test[i];
    observe("score", e.case_id);
    const Volume clean = preprocess(load_volume(e.path), cfg);
    test[i] = histograms_for(clean, bins);
    for (auto v : synthetic) {
      const auto& spec = *manifest.ood_sets[f.variants[v].set_index].synthetic;
      const CorruptionSpec cs{spec.kind, *f.variants[v].severity,
                              derive_case_seed(spec.seed, e.case_id)};
      ood[v][i] = histograms_for(preprocess(corrupt(clean, cs, options.corruption), cfg), bins);
    }
  });
  for (const auto& e : manifest.id_test) f.test_ids.push_back(e.case_id);
  f.test = stack(test, bins);

  // File-backed OOD sets: flatten (variant, entry) into one task list.
  std::vector<std::pair<std::size_t, std::size_t>> tasks;
  for (std::size_t v = 0; v < nv; ++v) {
    const auto& set = manifest.ood_sets[f.variants[v].set_index];
    if (set.synthetic) continue;
    for (std::size_t i = 0; i < set.entries.size(); ++i) tasks.emplace_back(v, i);
  }
  parallel_for(tasks.size(), options.jobs, [&](std::size_t t) {
    const auto [v, i] = tasks[t];
    const auto& e = manifest.ood_sets[f.variants[v].set_index].entries[i];
    observe("score", e.case_id);
    ood[v][i] = histograms_for(preprocess(load_volume(e.path), cfg), bins);
  });

  f.ood.resize(nv);
  for (std::size_t v = 0; v < nv; ++v) f.ood[v] = stack(ood[v], bins);
  return f;
}

Eigen::VectorXd detector_space(const IhfDetector& d, const Eigen::MatrixXd& rows, Eigen::Index r) {
  const Eigen::VectorXd raw = rows.row(r).transpose();
  return d.pca ? pca_transform(*d.pca, raw) : raw;
}

ScoreTable score_rows(const IhfDetector& d, DetectorKind kind, const Eigen::MatrixXd& rows,
                      const std::vector<std::string>& ids) {
  ScoreTable table;
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    const auto vec = detector_space(d, rows, r);
    const double s = kind == DetectorKind::ihf_mah ? mahalanobis(d, vec)
                                                   : nearest_neighbor_distance(d, vec);
    table.add(ids[static_cast<std::size_t>(r)], s);
  }
  return table;
}

IhfDetector fit_from_features(const ChallengeManifest& manifest, const IhfFeatures& f,
                              std::size_t bin_index, std::optional<double> v, double ridge) {
  try {
    return fit_ihf_embeddings(f.train[bin_index], manifest.modality, v, ridge);
  } catch (const FitError& e) {
    throw FitError("challenge '" + manifest.name + "': " + e.what());
  }
}

std::vector<ChallengeResult> evaluate_ihf(const ChallengeManifest& manifest, const IhfFeatures& f,
                                          std::size_t bin_index, std::optional<double> v,
                                          double ridge, DetectorKind kind,
                                          const std::string& method, double tpr_target) {
  const IhfDetector d = fit_from_features(manifest, f, bin_index, v, ridge);
  const ScoreTable id_scores = score_rows(d, kind, f.test[bin_index], f.test_ids);
  const auto id_values = id_scores.scores();
  std::vector<ChallengeResult> results;
  for (std::size_t vi = 0; vi < f.variants.size(); ++vi) {
    ChallengeResult r;
    r.challenge = manifest.name;
    r.ood_set = f.variants[vi].name;
    r.severity = f.variants[vi].severity;
    r.method = method;
    r.id_scores = id_scores;
    r.ood_scores = score_rows(d, kind, f.ood[vi][bin_index], f.ood_ids[vi]);
    r.metric = evaluate(id_values, r.ood_scores.scores(), tpr_target);
    results.push_back(std::move(r));
  }
  return results;
}

double predicted_volume(const CaseEntry& e, const std::string& unit) {
  if (e.volume) return *e.volume;
  if (!e.prediction) {
    throw PreconditionError("case '" + e.case_id +
                            "' has neither a 'volume' nor a 'prediction' for the volume predictor");
  }
  const Volume p = load_volume(*e.prediction);
  return unit == "voxels" ? static_cast<double>(predicted_voxels(p)) : predicted_volume_mm3(p);
}

std::map<std::string, double> merge_external(const std::vector<fs::path>& files) {
  if (files.empty()) throw PreconditionError("external detector needs at least one score file");
  std::map<std::string, double> scores;
  for (const auto& file : files) {
    const ScoreTable table = read_score_table(file);
    for (const auto& row : table.rows()) {
      if (!scores.emplace(row.case_id, row.score).second) {
        throw DataError("external scores: case_id '" + row.case_id +
                        "' appears in more than one file");
      }
    }
  }
  return scores;
}

std::vector<ChallengeResult> run_generic(const ChallengeManifest& manifest,
                                         const DetectorSpec& spec, const RunOptions& options) {
  Observer observe(options);
  const auto variants = expand_ood_sets(manifest);

  std::optional<VolumePredictor> predictor;
  if (spec.kind == DetectorKind::volume_predictor) {
    try {
      predictor = fit_manifest_volume(manifest, options);
    } catch (const FitError& e) {
      throw FitError("challenge '" + manifest.name + "': " + e.what());
    }
  }
  std::map<std::string, double> external;
  if (spec.kind == DetectorKind::external) external = merge_external(spec.score_files);

  // (key, entry) pairs to score; entry is null for synthetic cases.
  struct Task {
    std::string key;
    const CaseEntry* entry;
  };
  auto build = [&](const std::vector<CaseEntry>& entries) {
    std::vector<Task> out;
    for (const auto& e : entries) out.push_back({e.case_id, &e});
    return out;
  };
  const auto test_tasks = build(manifest.id_test);
  std::vector<std::vector<Task>> ood_tasks;
  for (const auto& v : variants) {
    const auto& set = manifest.ood_sets[v.set_index];
    if (!set.synthetic) {
      ood_tasks.push_back(build(set.entries));
      continue;
    }
    if (spec.kind != DetectorKind::external) {
      throw PreconditionError("detector '" + std::string(to_string(spec.kind)) +
                              "' scores prediction maps and cannot score synthetic OOD set '" +
                              set.name + "'; supply its scores through the external detector");
    }
    std::vector<Task> tasks;
    for (const auto& e : manifest.id_test) {
      tasks.push_back({synthetic_case_id(e.case_id, set.synthetic->kind, *v.severity), nullptr});
    }
    ood_tasks.push_back(std::move(tasks));
  }

  if (spec.kind == DetectorKind::external) {
    std::vector<std::string> missing;
    std::set<std::string> reported;
    auto check = [&](const std::vector<Task>& tasks) {
      for (const auto& t : tasks) {
        if (!external.contains(t.key) && reported.insert(t.key).second) missing.push_back(t.key);
      }
    };
    check(test_tasks);
    for (const auto& t : ood_tasks) check(t);
    if (!missing.empty()) {
      std::ostringstream msg;
      msg << "external scores missing for " << missing.size() << " case(s):";
      for (const auto& id : missing) msg << ' ' << id;
      throw DataError(msg.str());
    }
  }

  auto score_task = [&](const Task& t) -> double {
    if (spec.kind == DetectorKind::external) return external.at(t.key);
    observe("score", t.entry->case_id);
    const CaseEntry& e = *t.entry;
    switch (spec.kind) {
      case DetectorKind::volume_predictor:
        return predictor->score(predicted_volume(e, manifest.volume_unit));
      case DetectorKind::entropy:
        if (!e.prediction) {
          throw PreconditionError("case '" + e.case_id + "' lacks a 'prediction' map");
        }
        return entropy_score(load_volume(*e.prediction));
      case DetectorKind::uncertainty: {
        if (e.predictions.size() < 2) {
          throw PreconditionError("case '" + e.case_id + "' needs at least 2 'predictions'");
        }
        std::vector<Volume> maps;
        for (const auto& p : e.predictions) maps.push_back(load_volume(p));
        return uncertainty_score(maps);
      }
      default:
        throw PreconditionError("unsupported detector");
    }
  };
  auto score_all = [&](const std::vector<Task>& tasks) {
    std::vector<double> values(tasks.size());
    parallel_for(tasks.size(), options.jobs,
                         [&](std::size_t i) { values[i] = score_task(tasks[i]); });
    ScoreTable table;
    for (std::size_t i = 0; i < tasks.size(); ++i) table.add(tasks[i].key, values[i]);
    return table;
  };

  const ScoreTable id_scores = score_all(test_tasks);
  std::vector<ChallengeResult> results;
  for (std::size_t vi = 0; vi < variants.size(); ++vi) {
    ChallengeResult r;
    r.challenge = manifest.name;
    r.ood_set = variants[vi].name;
    r.severity = variants[vi].severity;
    r.method = spec.name();
    r.id_scores = id_scores;
    r.ood_scores = score_all(ood_tasks[vi]);
    r.metric = evaluate(id_scores.scores(), r.ood_scores.scores(), spec.tpr_target);
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace

IhfDetector fit_manifest_ihf(const ChallengeManifest& manifest, const DetectorSpec& detector,
                             const RunOptions& options) {
  const auto f = compute_features(manifest, {detector.m}, true, options);
  return fit_from_features(manifest, f, 0, detector.v, detector.ridge);
}

VolumePredictor fit_manifest_volume(const ChallengeManifest& manifest, const RunOptions& options) {
  Observer observe(options);
  std::vector<double> volumes(manifest.id_train.size());
  parallel_for(volumes.size(), options.jobs, [&](std::size_t i) {
    observe("fit", manifest.id_train[i].case_id);
    volumes[i] = predicted_volume(manifest.id_train[i], manifest.volume_unit);
  });
  return VolumePredictor(std::move(volumes));
}

std::vector<ChallengeResult> run_challenge(const ChallengeManifest& manifest,
                                           const DetectorSpec& detector,
                                           const RunOptions& options) {
  if (!(detector.tpr_target > 0.0 && detector.tpr_target <= 1.0)) {
    throw PreconditionError("tpr_target must lie in (0, 1]");
  }
  if (is_ihf(detector.kind)) {
    const auto f = compute_features(manifest, {detector.m}, false, options);
    return evaluate_ihf(manifest, f, 0, detector.v, detector.ridge, detector.kind,
                        detector.name(), detector.tpr_target);
  }
  return run_generic(manifest, detector, options);
}

std::vector<SweepRow> sweep_hyperparameters(const ChallengeManifest& manifest,
                                            DetectorKind detector,
                                            const std::vector<std::size_t>& m_list,
                                            const std::vector<std::optional<double>>& v_list,
                                            double ridge, const RunOptions& options) {
  if (!is_ihf(detector)) throw PreconditionError("sweeps are defined for IHF detectors only");
  if (m_list.empty() || v_list.empty()) throw PreconditionError("sweep grids must be non-empty");
  for (auto m : m_list) {
    if (m == 0) throw PreconditionError("bin counts must be positive");
  }
  const auto f = compute_features(manifest, m_list, false, options);
  std::vector<SweepRow> rows;
  for (std::size_t b = 0; b < m_list.size(); ++b) {
    for (const auto& v : v_list) {
      try {
        const auto results = evaluate_ihf(manifest, f, b, v, ridge, detector,
                                          std::string(to_string(detector)), 0.95);
        for (const auto& r : results) {
          rows.push_back({m_list[b], v, r.label(), r.metric.fpr_at_tpr95, r.metric.auroc, {}});
        }
      } catch (const Error& e) {
        for (const auto& variant : f.variants) {
          rows.push_back({m_list[b], v, variant.label(), std::numeric_limits<double>::quiet_NaN(),
                          std::numeric_limits<double>::quiet_NaN(), e.what()});
        }
      }
    }
  }
  return rows;
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
  std::string out = "m,v,ood_set,fpr,auroc,status\n";
  auto quote = [](const std::string& s) {
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c == '\n' ? ' ' : c;
    }
    return q + "\"";
  };
  for (const auto& r : rows) {
    out += std::to_string(r.m) + ',' + (r.v ? format_double(*r.v) : std::string("none")) + ',' +
           r.ood_set + ',';
    if (r.error.empty()) {
      out += format_double(r.fpr) + ',' + format_double(r.auroc) + ",ok\n";
    } else {
      out += ",," + quote("failed: " + r.error) + '\n';
    }
  }
  return out;
}

namespace {

json table_to_json(const ScoreTable& t) {
  json arr = json::array();
  for (const auto& r : t.rows()) arr.push_back({{"case_id", r.case_id}, {"score", r.score}});
  return arr;
}

ScoreTable table_from_json(const json& j) {
  ScoreTable t;
  for (const auto& r : j) t.add(r.at("case_id").get<std::string>(), r.at("score").get<double>());
  return t;
}

}  // namespace

json to_json(const ChallengeResult& r) {
  return {{"challenge", r.challenge},
          {"ood_set", r.ood_set},
          {"severity", r.severity ? json(*r.severity) : json(nullptr)},
          {"method", r.method},
          {"metric", to_json(r.metric)},
          {"id_scores", table_to_json(r.id_scores)},
          {"ood_scores", table_to_json(r.ood_scores)}};
}

ChallengeResult challenge_result_from_json(const json& j) {
  try {
    ChallengeResult r;
    r.challenge = j.at("challenge").get<std::string>();
    r.ood_set = j.at("ood_set").get<std::string>();
    if (j.contains("severity") && !j.at("severity").is_null()) {
      r.severity = j.at("severity").get<int>();
    }
    r.method = j.at("method").get<std::string>();
    r.metric = metric_result_from_json(j.at("metric"));
    if (j.contains("id_scores")) r.id_scores = table_from_json(j.at("id_scores"));
    if (j.contains("ood_scores")) r.ood_scores = table_from_json(j.at("ood_scores"));
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("challenge result: ") + e.what());
  }
}

json results_to_json(const std::vector<ChallengeResult>& results) {
  json arr = json::array();
  for (const auto& r : results) arr.push_back(to_json(r));
  return {{"results", arr}};
}

std::vector<ChallengeResult> results_from_json(const json& j) {
  const json& arr = j.is_object() && j.contains("results") ? j.at("results") : j;
  if (!arr.is_array()) throw FormatError("results document must hold a 'results' array");
  std::vector<ChallengeResult> out;
  for (const auto& r : arr) out.push_back(challenge_result_from_json(r));
  return out;
}

std::vector<Correlation> correlate_methods(const std::vector<ChallengeResult>& results,
                                           const std::string& reference_method, bool use_auroc) {
  std::vector<std::string> methods;
  std::map<std::string, std::map<std::string, double>> values;  // method -> row -> value
  for (const auto& r : results) {
    if (!values.contains(r.method)) methods.push_back(r.method);
    values[r.method][r.challenge + "|" + r.label()] =
        use_auroc ? r.metric.auroc : r.metric.fpr_at_tpr95;
  }
  if (!values.contains(reference_method)) {
    throw PreconditionError("reference method '" + reference_method + "' has no results");
  }
  const auto& ref = values.at(reference_method);
  std::vector<double> ref_vec;
  for (const auto& [row, v] : ref) ref_vec.push_back(v);

  std::vector<Correlation> out;
  for (const auto& method : methods) {
    const auto& mv = values.at(method);
    if (mv.size() != ref.size()) {
      throw PreconditionError("method '" + method + "' covers " + std::to_string(mv.size()) +
                              " challenges but the reference covers " +
                              std::to_string(ref.size()));
    }
    std::vector<double> vec;
    for (const auto& [row, v] : ref) {
      const auto it = mv.find(row);
      if (it == mv.end()) {
        throw PreconditionError("method '" + method + "' has no result for '" + row + "'");
      }
      vec.push_back(it->second);
    }
    out.push_back({method, fechner_correlation(ref_vec, vec)});
  }
  return out;
}

ChallengeManifest make_phantom_benchmark(const fs::path& dir, std::size_t n_train,
                                         std::size_t n_test, std::uint64_t seed,
                                         const std::vector<CorruptionKind>& kinds,
                                         const std::vector<int>& severities, std::size_t size,
                                         bool with_predictions) {
  fs::create_directories(dir);
  ChallengeManifest m;
  m.name = "phantom";
  m.modality = PreprocessConfig::mri();

  PhantomConfig cfg;
  cfg.shape = {size, size, size};
  const std::size_t total = n_train + n_test;
  std::vector<CaseEntry> entries(total);
  parallel_for(total, 0, [&](std::size_t i) {
    char id[32];
    std::snprintf(id, sizeof(id), "phantom_%03zu", i);
    CaseEntry& e = entries[i];
    e.case_id = id;
    e.path = dir / (e.case_id + ".json");
    const Volume v = make_phantom(derive_case_seed(seed, e.case_id), cfg);
    save_volume(v, e.path);
    if (with_predictions) {
      const Volume pre = preprocess(v, m.modality);
      const std::uint64_t base = derive_case_seed(seed ^ 0x5eedULL, e.case_id);
      e.prediction = dir / (e.case_id + "_pred.json");
      save_volume(phantom_probability_map(pre, base), *e.prediction);
      for (int member = 0; member < 3; ++member) {
        e.predictions.push_back(dir / (e.case_id + "_ens" + std::to_string(member) + ".json"));
        save_volume(phantom_probability_map(pre, mix64(base + 1 + member)), e.predictions.back());
      }
    }
  });
  m.id_train.assign(entries.begin(), entries.begin() + static_cast<std::ptrdiff_t>(n_train));
  m.id_test.assign(entries.begin() + static_cast<std::ptrdiff_t>(n_train), entries.end());
  for (auto kind : kinds) {
    m.ood_sets.push_back({std::string(to_string(kind)), {}, SyntheticSpec{kind, severities, seed}});
  }
  if (!kinds.empty()) m.groups["synthetic"] = [&] {
    std::vector<std::string> names;
    for (const auto& s : m.ood_sets) names.push_back(s.name);
    return names;
  }();
  return m;
}

}  // namespace ihfood
