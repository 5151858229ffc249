#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "ihfood/errors.hpp"
#include "ihfood/harness.hpp"

namespace ihfood {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void schema_error(const std::string& where, const std::string& what) {
  throw FormatError("manifest: " + where + ": " + what);
}

std::string get_string(const json& j, const std::string& where, const char* key) {
  if (!j.contains(key)) schema_error(where + "." + key, "missing");
  const auto& v = j.at(key);
  if (!v.is_string() || v.get<std::string>().empty()) {
    schema_error(where + "." + key, "must be a non-empty string");
  }
  return v.get<std::string>();
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

CaseEntry parse_entry(const json& j, const std::string& where, const fs::path& base) {
  if (!j.is_object()) schema_error(where, "must be an object");
  CaseEntry e;
  e.case_id = get_string(j, where, "case_id");
  e.path = resolve(base, get_string(j, where, "path"));
  if (j.contains("prediction")) e.prediction = resolve(base, get_string(j, where, "prediction"));
  if (j.contains("predictions")) {
    const auto& arr = j.at("predictions");
    if (!arr.is_array()) schema_error(where + ".predictions", "must be an array of paths");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      if (!arr[i].is_string()) {
        schema_error(where + ".predictions[" + std::to_string(i) + "]", "must be a string");
      }
      e.predictions.push_back(resolve(base, arr[i].get<std::string>()));
    }
  }
  if (j.contains("volume")) {
    if (!j.at("volume").is_number()) schema_error(where + ".volume", "must be a number");
    e.volume = j.at("volume").get<double>();
  }
  for (const auto& [key, _] : j.items()) {
    static const std::set<std::string> known{"case_id", "path", "prediction", "predictions",
                                             "volume"};
    if (!known.contains(key)) schema_error(where + "." + key, "unknown field");
  }
  return e;
}

std::vector<CaseEntry> parse_entries(const json& j, const std::string& where,
                                     const fs::path& base, bool allow_empty = false) {
  if (!j.is_array()) schema_error(where, "must be an array of case entries");
  if (j.empty() && !allow_empty) schema_error(where, "must not be empty");
  std::vector<CaseEntry> out;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < j.size(); ++i) {
    auto e = parse_entry(j[i], where + "[" + std::to_string(i) + "]", base);
    if (!seen.insert(e.case_id).second) {
      schema_error(where, "duplicate case_id '" + e.case_id + "'");
    }
    out.push_back(std::move(e));
  }
  return out;
}

SyntheticSpec parse_synthetic(const json& j, const std::string& where) {
  if (!j.is_object()) schema_error(where, "must be an object");
  SyntheticSpec s;
  try {
    s.kind = corruption_kind_from_string(get_string(j, where, "kind"));
  } catch (const PreconditionError& e) {
    schema_error(where + ".kind", e.what());
  }
  if (!j.contains("severities") || !j.at("severities").is_array() ||
      j.at("severities").empty()) {
    schema_error(where + ".severities", "must be a non-empty array of integers in 1..5");
  }
  for (const auto& sev : j.at("severities")) {
    if (!sev.is_number_integer() || sev.get<int>() < 1 || sev.get<int>() > 5) {
      schema_error(where + ".severities", "entries must be integers in 1..5");
    }
    s.severities.push_back(sev.get<int>());
  }
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned() && !j.at("seed").is_number_integer()) {
      schema_error(where + ".seed", "must be a non-negative integer");
    }
    s.seed = j.at("seed").get<std::uint64_t>();
  }
  return s;
}

void collect_missing(const CaseEntry& e, std::vector<std::string>& missing) {
  if (!fs::exists(e.path)) missing.push_back(e.path.string());
  if (e.prediction && !fs::exists(*e.prediction)) missing.push_back(e.prediction->string());
  for (const auto& p : e.predictions) {
    if (!fs::exists(p)) missing.push_back(p.string());
  }
}

}  // namespace

ChallengeManifest parse_manifest(const json& j, const fs::path& base_dir, bool check_files) {
  if (!j.is_object()) schema_error("<root>", "must be an object");
  ChallengeManifest m;
  m.name = get_string(j, "<root>", "name");
  if (j.contains("modality")) {
    try {
      m.modality = preprocess_config_from_json(j.at("modality"));
    } catch (const FormatError& e) {
      schema_error("modality", e.what());
    }
  }
  if (j.contains("volume_unit")) {
    m.volume_unit = get_string(j, "<root>", "volume_unit");
    if (m.volume_unit != "mm3" && m.volume_unit != "voxels") {
      schema_error("volume_unit", "must be \"mm3\" or \"voxels\"");
    }
  }
  if (j.contains("groups")) {
    const auto& g = j.at("groups");
    if (!g.is_object()) schema_error("groups", "must map group names to challenge lists");
    for (const auto& [group, members] : g.items()) {
      if (!members.is_array()) schema_error("groups." + group, "must be an array of names");
      for (const auto& name : members) {
        if (!name.is_string()) schema_error("groups." + group, "entries must be strings");
        m.groups[group].push_back(name.get<std::string>());
      }
    }
  }
  if (!j.contains("id_train")) schema_error("id_train", "missing");
  if (!j.contains("id_test")) schema_error("id_test", "missing");
  if (!j.contains("ood_sets")) schema_error("ood_sets", "missing");
  m.id_train = parse_entries(j.at("id_train"), "id_train", base_dir);
  m.id_test = parse_entries(j.at("id_test"), "id_test", base_dir);

  const auto& sets = j.at("ood_sets");
  if (!sets.is_array() || sets.empty()) schema_error("ood_sets", "must be a non-empty array");
  std::set<std::string> names;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    const std::string where = "ood_sets[" + std::to_string(i) + "]";
    const auto& s = sets[i];
    if (!s.is_object()) schema_error(where, "must be an object");
    OodSet set;
    set.name = get_string(s, where, "name");
    if (!names.insert(set.name).second) schema_error(where, "duplicate name '" + set.name + "'");
    const bool has_entries = s.contains("entries");
    const bool has_synth = s.contains("synthetic");
    if (has_entries == has_synth) {
      schema_error(where, "needs exactly one of 'entries' or 'synthetic'");
    }
    if (has_entries) {
      set.entries = parse_entries(s.at("entries"), where + ".entries", base_dir);
    } else {
      set.synthetic = parse_synthetic(s.at("synthetic"), where + ".synthetic");
    }
    m.ood_sets.push_back(std::move(set));
  }

  for (const auto& [group, members] : m.groups) {
    for (const auto& name : members) {
      if (!names.contains(name)) {
        schema_error("groups." + group, "unknown ood_set '" + name + "'");
      }
    }
  }

  if (check_files) {
    std::vector<std::string> missing;
    for (const auto& e : m.id_train) collect_missing(e, missing);
    for (const auto& e : m.id_test) collect_missing(e, missing);
    for (const auto& s : m.ood_sets) {
      for (const auto& e : s.entries) collect_missing(e, missing);
    }
    if (!missing.empty()) {
      std::ostringstream msg;
      msg << "manifest references " << missing.size() << " missing file(s):";
      constexpr std::size_t kShown = 20;
      for (std::size_t i = 0; i < std::min(missing.size(), kShown); ++i) msg << "\n  " << missing[i];
      if (missing.size() > kShown) msg << "\n  ... and " << missing.size() - kShown << " more";
      throw IoError(msg.str());
    }
  }
  return m;
}

ChallengeManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError("manifest " + path.string() + ": invalid JSON: " + e.what());
  }
  return parse_manifest(j, path.parent_path());
}

namespace {

json entry_to_json(const CaseEntry& e, const fs::path& base) {
  auto rel = [&](const fs::path& p) {
    if (base.empty()) return p.generic_string();
    const auto abs = fs::absolute(p).lexically_normal();
    const auto r = abs.lexically_relative(base);
    return r.empty() || *r.begin() == ".." ? abs.generic_string() : r.generic_string();
  };
  json j = {{"case_id", e.case_id}, {"path", rel(e.path)}};
  if (e.prediction) j["prediction"] = rel(*e.prediction);
  if (!e.predictions.empty()) {
    j["predictions"] = json::array();
    for (const auto& p : e.predictions) j["predictions"].push_back(rel(p));
  }
  if (e.volume) j["volume"] = *e.volume;
  return j;
}

json manifest_json(const ChallengeManifest& m, const fs::path& base) {
  json j;
  j["name"] = m.name;
  j["modality"] = to_json(m.modality);
  j["volume_unit"] = m.volume_unit;
  j["groups"] = m.groups;
  j["id_train"] = json::array();
  for (const auto& e : m.id_train) j["id_train"].push_back(entry_to_json(e, base));
  j["id_test"] = json::array();
  for (const auto& e : m.id_test) j["id_test"].push_back(entry_to_json(e, base));
  j["ood_sets"] = json::array();
  for (const auto& s : m.ood_sets) {
    json js = {{"name", s.name}};
    if (s.synthetic) {
      js["synthetic"] = {{"kind", to_string(s.synthetic->kind)},
                         {"severities", s.synthetic->severities},
                         {"seed", s.synthetic->seed}};
    } else {
      js["entries"] = json::array();
      for (const auto& e : s.entries) js["entries"].push_back(entry_to_json(e, base));
    }
    j["ood_sets"].push_back(js);
  }
  return j;
}

}  // namespace

json to_json(const ChallengeManifest& m) { return manifest_json(m, {}); }

void save_manifest(const ChallengeManifest& m, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << manifest_json(m, fs::absolute(path).lexically_normal().parent_path()).dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

std::string OodVariant::label() const {
  return severity ? name + "/s" + std::to_string(*severity) : name;
}

std::vector<OodVariant> expand_ood_sets(const ChallengeManifest& m) {
  std::vector<OodVariant> out;
  for (std::size_t i = 0; i < m.ood_sets.size(); ++i) {
    const auto& s = m.ood_sets[i];
    if (s.synthetic) {
      for (int sev : s.synthetic->severities) out.push_back({i, s.name, sev});
    } else {
      out.push_back({i, s.name, std::nullopt});
    }
  }
  return out;
}

std::string synthetic_case_id(std::string_view case_id, CorruptionKind kind, int severity) {
  return std::string(case_id) + "@" + std::string(to_string(kind)) + ":s" +
         std::to_string(severity);
}

}  // namespace ihfood
