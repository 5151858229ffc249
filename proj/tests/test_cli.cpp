#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "cli.hpp"
#include "ihfood/harness.hpp"
#include "ihfood/metrics.hpp"
#include "ihfood/volume.hpp"
#include "test_util.hpp"

using namespace ihfood;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
  json summary() const { return json::parse(out); }
};

Run cli_run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Writes a small phantom benchmark through the CLI and returns its manifest path.
std::string phantoms(const testutil::TempDir& dir, bool predictions = false) {
  std::vector<std::string> args{"phantoms", "--out", (dir / "bench").string(), "--n-train", "8",
                                "--n-test", "5", "--size", "16", "--seed", "3",
                                "--kinds", "ghosting", "--severities", "2,5"};
  if (predictions) args.push_back("--predictions");
  const auto r = cli_run(args);
  REQUIRE(r.code == 0);
  return (dir / "bench" / "manifest.json").string();
}

}  // namespace

TEST_CASE("usage errors exit with 1") {
  CHECK(cli_run({}).code == 1);
  CHECK(cli_run({"frobnicate"}).code == 1);
  CHECK(cli_run({"eval", "--manifest", "m.json", "--out", "r.json", "--bogus"}).code == 1);
  CHECK(cli_run({"eval", "--manifest", "m.json"}).code == 1);
  CHECK(cli_run({"eval", "--manifest", "m.json", "--out", "r.json", "--detector", "svm"}).code == 1);
  CHECK(cli_run({"eval", "--manifest", "m.json", "--out", "r.json", "--v", "1.5"}).code == 1);
  const auto help = cli_run({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("preprocess") != std::string::npos);
}

TEST_CASE("preprocess: one file, strict failures and idempotence") {
  testutil::TempDir dir;
  std::mt19937_64 gen(1);
  const Volume raw = testutil::random_volume(gen, {6, 6, 4}, {1.0, 1.0, 1.5}, -1500, 500);
  save_volume(raw, dir / "scan.json");
  const std::string before = slurp(dir / "scan.raw");

  auto r = cli_run({"preprocess", (dir / "scan.json").string(), "--modality", "ct", "--out",
                    (dir / "pre").string()});
  REQUIRE(r.code == 0);
  CHECK(r.summary()["written"] == 1);
  CHECK(slurp(dir / "scan.raw") == before);
  const Volume once = load_volume(dir / "pre" / "scan.json");

  r = cli_run({"preprocess", (dir / "pre" / "scan.json").string(), "--modality", "ct", "--out",
               (dir / "pre2").string()});
  REQUIRE(r.code == 0);
  const Volume twice = load_volume(dir / "pre2" / "scan.json");
  REQUIRE(twice.shape() == once.shape());
  for (std::size_t i = 0; i < once.size(); ++i) CHECK(std::abs(twice.values()[i] - once.values()[i]) < 1e-6);

  r = cli_run({"preprocess", (dir / "missing.json").string(), (dir / "scan.json").string(),
               "--modality", "ct", "--out", (dir / "pre3").string()});
  CHECK(r.code == 0);
  CHECK(r.summary()["skipped"].size() == 1);
  CHECK(r.summary()["written"] == 1);

  r = cli_run({"preprocess", (dir / "missing.json").string(), "--modality", "ct", "--strict",
               "--out", (dir / "pre4").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("missing.json") != std::string::npos);

  // Refuses to write over its own input.
  r = cli_run({"preprocess", (dir / "pre" / "scan.json").string(), "--modality", "ct", "--strict",
               "--out", (dir / "pre").string()});
  CHECK(r.code == 2);
}

TEST_CASE("fit, score, eval and report round trip") {
  testutil::TempDir dir;
  const std::string manifest = phantoms(dir);
  const std::string model = (dir / "model.json").string();

  auto r = cli_run({"fit", "--manifest", manifest, "--detector", "ihf-mah", "--m", "40", "--out", model});
  REQUIRE(r.code == 0);
  CHECK(r.summary()["m"] == 40);
  CHECK(r.summary()["v"] == 0.9999);

  r = cli_run({"score", "--model", model, "--manifest", manifest, "--out", (dir / "scores.csv").string()});
  REQUIRE(r.code == 0);
  const auto scores = read_score_table(dir / "scores.csv");
  CHECK(scores.size() == 5 + 2 * 5);

  r = cli_run({"eval", "--manifest", manifest, "--detector", "ihf-mah", "--m", "40", "--jobs", "2",
               "--out", (dir / "results.json").string()});
  REQUIRE(r.code == 0);
  const auto results = results_from_json(json::parse(slurp(dir / "results.json")));
  REQUIRE(results.size() == 2);
  for (const auto& res : results) {
    CHECK(std::isfinite(res.metric.fpr_at_tpr95));
    CHECK(std::isfinite(res.metric.auroc));
    // The standalone score command reproduces the harness scores.
    for (const auto& row : res.id_scores.rows()) CHECK(scores.find(row.case_id) == row.score);
    for (const auto& row : res.ood_scores.rows()) CHECK(scores.find(row.case_id) == row.score);
  }
  CHECK(r.summary()["results"].size() == 2);
  CHECK(r.summary()["seeds"]["ghosting"] == 3);

  r = cli_run({"report", (dir / "results.json").string(), "--manifest", manifest, "--format",
               "markdown", "--out", (dir / "report.md").string()});
  REQUIRE(r.code == 0);
  const std::string md = slurp(dir / "report.md");
  CHECK(md.find("ghosting/s5") != std::string::npos);
  CHECK(md.find("synthetic average") != std::string::npos);
}

TEST_CASE("score rejects a model with mismatched bins") {
  testutil::TempDir dir;
  const std::string manifest = phantoms(dir);
  const std::string model = (dir / "model.json").string();
  REQUIRE(cli_run({"fit", "--manifest", manifest, "--m", "30", "--out", model}).code == 0);

  auto r = cli_run({"score", "--model", model, "--m", "50", "--manifest", manifest, "--out",
                    (dir / "s.csv").string()});
  CHECK(r.code == 3);
  CHECK(r.err.find("dimension") != std::string::npos);

  auto j = json::parse(slurp(model));
  j["m"] = 31;
  std::ofstream(dir / "bad.json") << j.dump();
  r = cli_run({"score", "--model", (dir / "bad.json").string(), "--manifest", manifest, "--out",
               (dir / "s.csv").string()});
  CHECK(r.code == 3);
}

TEST_CASE("eval on external CSVs equals direct metric calls") {
  testutil::TempDir dir;
  const std::string manifest = phantoms(dir);
  const auto m = load_manifest(manifest);
  ScoreTable table;
  std::vector<double> id, ood;
  std::mt19937_64 gen(4);
  std::normal_distribution<double> nd;
  for (const auto& e : m.id_test) {
    id.push_back(nd(gen));
    table.add(e.case_id, id.back());
  }
  for (int s : {2, 5}) {
    for (const auto& e : m.id_test) {
      ood.push_back(nd(gen) + s * 0.3);
      table.add(synthetic_case_id(e.case_id, CorruptionKind::ghosting, s), ood.back());
    }
  }
  write_score_table(table, dir / "ext.csv");
  const auto r = cli_run({"eval", "--manifest", manifest, "--detector", "external", "--scores",
                          (dir / "ext.csv").string(), "--method-name", "MOOD", "--out",
                          (dir / "res.json").string()});
  REQUIRE(r.code == 0);
  const auto results = results_from_json(json::parse(slurp(dir / "res.json")));
  REQUIRE(results.size() == 2);
  for (std::size_t k = 0; k < 2; ++k) {
    const std::vector<double> o(ood.begin() + 5 * k, ood.begin() + 5 * (k + 1));
    const auto direct = evaluate(id, o);
    CHECK(results[k].method == "MOOD");
    CHECK(results[k].metric.fpr_at_tpr95 == direct.fpr_at_tpr95);
    CHECK(results[k].metric.auroc == direct.auroc);
  }
}

TEST_CASE("prediction-based detectors through fit, score and eval") {
  testutil::TempDir dir;
  const std::string manifest = phantoms(dir, true);
  const std::string model = (dir / "vol.json").string();
  REQUIRE(cli_run({"fit", "--manifest", manifest, "--detector", "volume", "--out", model}).code == 0);
  auto r = cli_run({"score", "--model", model, "--manifest", manifest, "--out", (dir / "v.csv").string()});
  REQUIRE(r.code == 0);
  CHECK(read_score_table(dir / "v.csv").size() == 5);
  r = cli_run({"score", "--detector", "uncertainty", "--manifest", manifest, "--out",
               (dir / "u.csv").string()});
  REQUIRE(r.code == 0);
  // Synthetic sets cannot be scored from prediction maps.
  r = cli_run({"eval", "--manifest", manifest, "--detector", "entropy", "--out", (dir / "e.json").string()});
  CHECK(r.code == 1);
}

TEST_CASE("corrupt command") {
  testutil::TempDir dir;
  std::mt19937_64 gen(2);
  save_volume(testutil::random_volume(gen, {8, 8, 8}), dir / "pre.json");
  const auto a = cli_run({"corrupt", (dir / "pre.json").string(), "--corrupt",
                          "kind=ghosting,severity=3,seed=9", "--out", (dir / "a.json").string()});
  REQUIRE(a.code == 0);
  CHECK(a.summary()["corrupt"] == "kind=ghosting,severity=3,seed=9");
  const auto b = cli_run({"corrupt", (dir / "pre.json").string(), "--corrupt", "kind=ghosting,severity=3",
                          "--seed", "9", "--out", (dir / "b.nii").string()});
  REQUIRE(b.code == 0);
  CHECK(load_volume(dir / "a.json").values() == load_volume(dir / "b.nii").values());

  save_volume(testutil::random_volume(gen, {8, 8, 8}, {1, 1, 1}, 0, 900), dir / "raw.json");
  auto r = cli_run({"corrupt", (dir / "raw.json").string(), "--corrupt", "kind=elastic,severity=1",
                    "--out", (dir / "c.json").string()});
  CHECK(r.code == 2);
  r = cli_run({"corrupt", (dir / "raw.json").string(), "--corrupt", "kind=elastic,severity=1",
               "--modality", "mri", "--out", (dir / "c.json").string()});
  CHECK(r.code == 0);
  r = cli_run({"corrupt", (dir / "pre.json").string(), "--corrupt", "kind=elastic,severity=7",
               "--out", (dir / "d.json").string()});
  CHECK(r.code == 1);
}

TEST_CASE("sweep command records failing cells") {
  testutil::TempDir dir;
  const std::string manifest = phantoms(dir);
  const auto r = cli_run({"sweep", "--manifest", manifest, "--detector", "ihf-mah", "--m", "16,32",
                          "--v", "0.99,none", "--ridge", "0", "--out", (dir / "sweep.csv").string()});
  REQUIRE(r.code == 0);
  CHECK(r.summary()["rows"] == 8);
  CHECK(r.summary()["failed"] == 4);
  CHECK(slurp(dir / "sweep.csv").rfind("m,v,ood_set,fpr,auroc,status", 0) == 0);
}

TEST_CASE("the installed binary maps errors to exit codes") {
  auto status = [](const std::string& args) {
    const int raw = std::system((std::string(IHFOOD_CLI_PATH) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  };
  CHECK(status("--help") == 0);
  CHECK(status("fit") == 1);
  CHECK(status("eval --manifest /nonexistent/m.json --out /tmp/x.json") == 2);
}

TEST_CASE("phantom manifests written to a relative directory resolve") {
  testutil::TempDir dir;
  const auto cwd = std::filesystem::current_path();
  std::filesystem::current_path(dir.path());
  const auto r = cli_run({"phantoms", "--out", "rel/bench", "--n-train", "3", "--n-test", "2",
                          "--size", "8", "--kinds", "anisotropy", "--severities", "1"});
  const bool loaded = [&] {
    try {
      return load_manifest("rel/bench/manifest.json").id_train.size() == 3;
    } catch (const std::exception&) {
      return false;
    }
  }();
  std::filesystem::current_path(cwd);
  CHECK(r.code == 0);
  CHECK(loaded);
  CHECK(slurp(dir / "rel" / "bench" / "manifest.json").find("\"phantom_000.json\"") != std::string::npos);
}
