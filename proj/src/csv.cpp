#include "asng/csv.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace asng {

namespace {

constexpr std::string_view kRunHeader =
    "algo,d,k,eps_x,theta_step_param,alpha,run_id,seed,success,hit_iteration,final_true_objective,wall_ms";
constexpr std::string_view kSummaryHeader =
    "algo,d,k,eps_x,theta_step_param,alpha,n_runs,n_success,success_rate,median_hit_iteration,paper_metric";
constexpr std::string_view kSchemaPrefix = "#schema=";
constexpr std::string_view kEndPrefix = "#end rows=";

void write_key(std::ostream& os, const RunKey& key) {
  os << key.algo << ',' << key.d << ',' << key.k << ',' << format_double(key.eps_x) << ','
     << format_double(key.theta_step_param) << ',';
  if (key.alpha) os << format_double(*key.alpha);
}

template <class T>
void write_optional(std::ostream& os, const std::optional<T>& v) {
  if (!v) return;
  if constexpr (std::is_floating_point_v<T>) {
    os << format_double(*v);
  } else {
    os << *v;
  }
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

// Field parsing; every helper throws std::invalid_argument with a short
// description, which the reader wraps with the file name and line.
template <class T>
T parse_int(std::string_view field, const char* name) {
  T v{};
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (field.empty() || ec != std::errc{} || ptr != field.data() + field.size()) {
    throw std::invalid_argument(std::string("bad integer in column ") + name + ": '" + std::string(field) + "'");
  }
  return v;
}

double parse_double(std::string_view field, const char* name) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (field.empty() || ec != std::errc{} || ptr != field.data() + field.size()) {
    throw std::invalid_argument(std::string("bad number in column ") + name + ": '" + std::string(field) + "'");
  }
  return v;
}

template <class T>
std::optional<T> parse_optional(std::string_view field, const char* name) {
  if (field.empty()) return std::nullopt;
  if constexpr (std::is_floating_point_v<T>) {
    return parse_double(field, name);
  } else {
    return parse_int<T>(field, name);
  }
}

RunKey parse_key(const std::vector<std::string_view>& f) {
  RunKey key;
  if (f[0].empty()) throw std::invalid_argument("empty algo column");
  key.algo = std::string(f[0]);
  key.d = parse_int<int>(f[1], "d");
  key.k = parse_int<int>(f[2], "k");
  key.eps_x = parse_double(f[3], "eps_x");
  key.theta_step_param = parse_double(f[4], "theta_step_param");
  key.alpha = parse_optional<double>(f[5], "alpha");
  return key;
}

RunRow parse_run(const std::vector<std::string_view>& f) {
  RunRow row;
  row.key = parse_key(f);
  row.record.run_id = parse_int<std::size_t>(f[6], "run_id");
  row.record.seed = parse_int<std::uint64_t>(f[7], "seed");
  const int success = parse_int<int>(f[8], "success");
  if (success != 0 && success != 1) throw std::invalid_argument("success must be 0 or 1");
  row.record.success = success == 1;
  row.record.hit_iteration = parse_optional<std::uint64_t>(f[9], "hit_iteration");
  if (row.record.success && !row.record.hit_iteration) throw std::invalid_argument("success=1 without hit_iteration");
  row.record.final_true_objective = parse_double(f[10], "final_true_objective");
  row.record.wall_ms = parse_int<std::int64_t>(f[11], "wall_ms");
  return row;
}

SummaryRow parse_summary(const std::vector<std::string_view>& f) {
  SummaryRow row;
  row.key = parse_key(f);
  row.summary.n_runs = parse_int<std::size_t>(f[6], "n_runs");
  row.summary.n_success = parse_int<std::size_t>(f[7], "n_success");
  if (row.summary.n_success > row.summary.n_runs) throw std::invalid_argument("n_success exceeds n_runs");
  row.summary.success_rate = parse_double(f[8], "success_rate");
  row.summary.median_hit_iteration = parse_optional<double>(f[9], "median_hit_iteration");
  row.summary.paper_metric = parse_optional<double>(f[10], "paper_metric");
  return row;
}

}  // namespace

CsvParseError::CsvParseError(const std::string& source, std::size_t line, const std::string& what)
    : std::runtime_error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf, ptr);
}

void write_runs_csv(std::ostream& os, std::span<const RunRow> rows) {
  os << kSchemaPrefix << kRunSchema << '\n' << kRunHeader << '\n';
  for (const auto& row : rows) {
    const auto& r = row.record;
    write_key(os, row.key);
    os << ',' << r.run_id << ',' << r.seed << ',' << (r.success ? 1 : 0) << ',';
    write_optional(os, r.hit_iteration);
    os << ',' << format_double(r.final_true_objective) << ',' << r.wall_ms << '\n';
  }
  os << kEndPrefix << rows.size() << '\n';
}

void write_summary_csv(std::ostream& os, std::span<const SummaryRow> rows) {
  os << kSchemaPrefix << kSummarySchema << '\n' << kSummaryHeader << '\n';
  for (const auto& row : rows) {
    const auto& s = row.summary;
    write_key(os, row.key);
    os << ',' << s.n_runs << ',' << s.n_success << ',' << format_double(s.success_rate) << ',';
    write_optional(os, s.median_hit_iteration);
    os << ',';
    write_optional(os, s.paper_metric);
    os << '\n';
  }
  os << kEndPrefix << rows.size() << '\n';
}

CsvContents read_csv(std::istream& is, const std::string& source) {
  enum class State { want_schema, want_header, rows };
  CsvContents out;
  State state = State::want_schema;
  bool runs_segment = false;
  std::size_t segment_rows = 0;
  std::size_t segments = 0;
  std::size_t line_no = 0;
  std::string line;

  auto fail = [&](const std::string& what) -> void { throw CsvParseError(source, line_no, what); };

  while (std::getline(is, line)) {
    ++line_no;
    if (is.eof()) fail("missing newline at end of file (truncated?)");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string_view view(line);

    switch (state) {
      case State::want_schema: {
        if (view.empty()) continue;
        if (!view.starts_with(kSchemaPrefix)) fail("expected a '#schema=' line");
        const auto name = view.substr(kSchemaPrefix.size());
        if (name == kRunSchema) {
          runs_segment = true;
        } else if (name == kSummarySchema) {
          runs_segment = false;
        } else {
          fail("unknown schema '" + std::string(name) + "'");
        }
        state = State::want_header;
        break;
      }
      case State::want_header:
        if (view != (runs_segment ? kRunHeader : kSummaryHeader)) fail("header does not match the schema");
        state = State::rows;
        segment_rows = 0;
        break;
      case State::rows: {
        if (view.starts_with(kEndPrefix)) {
          std::size_t declared = 0;
          try {
            declared = parse_int<std::size_t>(view.substr(kEndPrefix.size()), "rows");
          } catch (const std::invalid_argument& e) {
            fail(e.what());
          }
          if (declared != segment_rows) {
            fail("trailer declares " + std::to_string(declared) + " rows but the segment has " +
                 std::to_string(segment_rows));
          }
          state = State::want_schema;
          ++segments;
          break;
        }
        if (view.starts_with("#")) fail("unexpected directive inside a segment");
        const auto fields = split(view);
        if (fields.size() != 12 && runs_segment) fail("expected 12 fields, found " + std::to_string(fields.size()));
        if (fields.size() != 11 && !runs_segment) fail("expected 11 fields, found " + std::to_string(fields.size()));
        try {
          if (runs_segment) {
            out.runs.push_back(parse_run(fields));
          } else {
            out.summaries.push_back(parse_summary(fields));
          }
        } catch (const std::invalid_argument& e) {
          fail(e.what());
        }
        ++segment_rows;
        break;
      }
    }
  }
  if (!is.eof()) throw CsvParseError(source, line_no, "read error");
  if (state != State::want_schema) throw CsvParseError(source, line_no, "file ends inside a segment (truncated?)");
  if (segments == 0) throw CsvParseError(source, line_no, "no data segment found");
  return out;
}

CsvContents read_csv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_csv(in, path);
}

}  // namespace asng
