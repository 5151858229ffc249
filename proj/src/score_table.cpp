#include "ihfood/score_table.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "ihfood/errors.hpp"

namespace ihfood {

ScoreTable::ScoreTable(std::vector<ScoreRow> rows) {
  for (auto& r : rows) add(std::move(r.case_id), r.score);
}

void ScoreTable::add(std::string case_id, double score) {
  if (case_id.empty()) throw DataError("score table: empty case_id");
  if (!std::isfinite(score)) throw DataError("score table: non-finite score for " + case_id);
  if (index_.contains(case_id)) throw DataError("score table: duplicate case_id " + case_id);
  index_.emplace(case_id, rows_.size());
  rows_.push_back({std::move(case_id), score});
}

std::optional<double> ScoreTable::find(const std::string& case_id) const {
  const auto it = index_.find(case_id);
  if (it == index_.end()) return std::nullopt;
  return rows_[it->second].score;
}

std::vector<double> ScoreTable::scores() const {
  std::vector<double> out;
  out.reserve(rows_.size());
  for (const auto& r : rows_) out.push_back(r.score);
  return out;
}

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

std::string to_csv(const ScoreTable& table) {
  std::string out = "case_id,score\n";
  for (const auto& r : table.rows()) {
    out += r.case_id;
    out += ',';
    out += format_double(r.score);
    out += '\n';
  }
  return out;
}

namespace {

std::string trim(std::string s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

}  // namespace

ScoreTable score_table_from_csv(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  ScoreTable table;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    line = trim(line);
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) {
      throw FormatError(source + ":" + std::to_string(lineno) + ": expected 'case_id,score'");
    }
    const std::string id = trim(line.substr(0, comma));
    const std::string value = trim(line.substr(comma + 1));
    if (!header_seen) {
      if (id != "case_id" || value != "score") {
        throw FormatError(source + ": header must be 'case_id,score'");
      }
      header_seen = true;
      continue;
    }
    double score = 0.0;
    const auto res = std::from_chars(value.data(), value.data() + value.size(), score);
    if (res.ec != std::errc() || res.ptr != value.data() + value.size()) {
      throw FormatError(source + ":" + std::to_string(lineno) + ": invalid score '" + value + "'");
    }
    try {
      table.add(id, score);
    } catch (const DataError& e) {
      throw DataError(source + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!header_seen) throw FormatError(source + ": missing 'case_id,score' header");
  return table;
}

ScoreTable read_score_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return score_table_from_csv(buf.str(), path.string());
}

void write_score_table(const ScoreTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_csv(table);
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace ihfood
