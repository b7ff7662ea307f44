#pragma once

// Versioned CSV files for benchmark output.
//
// A file is one or more segments. Each segment is
//
//   #schema=<name>/<version>
//   <header line>
//   <data rows>
//   #end rows=<count>
//
// The trailer lets a reader tell a complete file from a truncated one, and
// concatenating two files yields a valid multi-segment file. Doubles are
// written in the shortest form that parses back to the same value.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "asng/toy_bench.hpp"

namespace asng {

inline constexpr std::string_view kRunSchema = "asng-bench-runs/1";
inline constexpr std::string_view kSummarySchema = "asng-bench-summary/1";

// Columns shared by run and summary rows.
struct RunKey {
  std::string algo;
  int d = 0;
  int k = 0;
  double eps_x = 0.0;
  double theta_step_param = 0.0;
  std::optional<double> alpha;  // ASNG only

  bool operator==(const RunKey&) const = default;
};

struct RunRow {
  RunKey key;
  RunRecord record;

  bool operator==(const RunRow&) const = default;
};

struct SummaryRow {
  RunKey key;
  Summary summary;

  bool operator==(const SummaryRow&) const = default;
};

class CsvParseError : public std::runtime_error {
 public:
  CsvParseError(const std::string& source, std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

std::string format_double(double v);

void write_runs_csv(std::ostream& os, std::span<const RunRow> rows);
void write_summary_csv(std::ostream& os, std::span<const SummaryRow> rows);

struct CsvContents {
  std::vector<RunRow> runs;
  std::vector<SummaryRow> summaries;
};

// Reads every segment of either schema. `source` only labels error messages.
CsvContents read_csv(std::istream& is, const std::string& source);
CsvContents read_csv_file(const std::string& path);

}  // namespace asng
