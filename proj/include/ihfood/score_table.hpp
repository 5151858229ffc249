#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace ihfood {

struct ScoreRow {
  std::string case_id;
  double score = 0.0;
  friend bool operator==(const ScoreRow&, const ScoreRow&) = default;
};

// Per-case OOD scores; a higher score means more OOD-like. Case ids are
// unique and scores finite.
class ScoreTable {
 public:
  ScoreTable() = default;
  explicit ScoreTable(std::vector<ScoreRow> rows);

  void add(std::string case_id, double score);
  const std::vector<ScoreRow>& rows() const noexcept { return rows_; }
  std::size_t size() const noexcept { return rows_.size(); }
  std::optional<double> find(const std::string& case_id) const;
  std::vector<double> scores() const;

  friend bool operator==(const ScoreTable& a, const ScoreTable& b) { return a.rows_ == b.rows_; }

 private:
  std::vector<ScoreRow> rows_;
  std::unordered_map<std::string, std::size_t> index_;
};

// CSV with header `case_id,score`.
std::string to_csv(const ScoreTable& table);
ScoreTable score_table_from_csv(const std::string& text, const std::string& source = "<csv>");
ScoreTable read_score_table(const std::filesystem::path& path);
void write_score_table(const ScoreTable& table, const std::filesystem::path& path);

// Formats a double so that it parses back to the same value.
std::string format_double(double x);

}  // namespace ihfood
