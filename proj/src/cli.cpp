#include "asng/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>
#include <system_error>
#include <thread>

namespace asng {

namespace {

constexpr double kDefaultDeltaInit = 1.0;
constexpr double kDefaultAlpha = 1.5;
constexpr double kDefaultDeltaFixed = 0.1;
constexpr double kDefaultAdamStep = 0.01;

double step_param(const RunOptions& o) {
  switch (o.algo) {
    case Algo::asng:
      return o.delta_init.value_or(kDefaultDeltaInit);
    case Algo::sng:
      return o.delta_fixed.value_or(kDefaultDeltaFixed);
    case Algo::adam_ng:
      return o.adam_step.value_or(kDefaultAdamStep);
  }
  return 0.0;
}

void reject(bool given, const char* flag, Algo algo, const char* hint) {
  if (!given) return;
  std::string msg = std::string(flag) + " conflicts with --algo " + std::string(algo_name(algo));
  if (hint) msg += std::string(" (use ") + hint + ")";
  throw UsageError(msg);
}

std::string describe(const RunKey& key) {
  std::ostringstream os;
  os << "algo=" << key.algo << " d=" << key.d << " k=" << key.k << " eps_x=" << format_double(key.eps_x)
     << " theta_step_param=" << format_double(key.theta_step_param);
  if (key.alpha) os << " alpha=" << format_double(*key.alpha);
  return os.str();
}

std::string describe(const Summary& s) {
  std::ostringstream os;
  os << "n_runs=" << s.n_runs << " n_success=" << s.n_success << " success_rate=" << format_double(s.success_rate)
     << " median_hit_iteration=" << (s.median_hit_iteration ? format_double(*s.median_hit_iteration) : "none")
     << " paper_metric=" << (s.paper_metric ? format_double(*s.paper_metric) : "failed");
  return os.str();
}

std::vector<RunRow> execute(const RunOptions& options) {
  const auto records = run_experiment(to_bench_config(options));
  const auto key = run_key(options);
  std::vector<RunRow> rows;
  rows.reserve(records.size());
  for (auto r : records) {
    if (!options.timing) r.wall_ms = 0;
    rows.push_back({key, r});
  }
  return rows;
}

// Writes through a temporary file so that a failed write leaves no partial
// output under the final name.
void write_file(const std::filesystem::path& path, const std::string& contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out << contents;
    out.flush();
    if (!out) throw std::runtime_error("write to " + tmp.string() + " failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw std::runtime_error("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::filesystem::path prepare_dir(const std::optional<std::string>& out) {
  const auto dir = output_dir(out);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

std::string runs_text(std::span<const RunRow> rows) {
  std::ostringstream os;
  write_runs_csv(os, rows);
  return os.str();
}

std::string summary_text(std::span<const SummaryRow> rows) {
  std::ostringstream os;
  write_summary_csv(os, rows);
  return os.str();
}

std::string plot_text(std::span<const SummaryRow> rows) {
  std::ostringstream os;
  os << "# x = theta_step_param, y = paper_metric, median = median_hit_iteration; failed cells omitted\n";
  const RunKey* series = nullptr;
  auto same_series = [](const RunKey& a, const RunKey& b) {
    return a.algo == b.algo && a.d == b.d && a.k == b.k && a.eps_x == b.eps_x && a.alpha == b.alpha;
  };
  for (const auto& row : rows) {
    if (!series || !same_series(*series, row.key)) {
      if (series) os << "\n\n";
      series = &row.key;
      os << "# series algo=" << row.key.algo << " d=" << row.key.d << " k=" << row.key.k
         << " eps_x=" << format_double(row.key.eps_x);
      if (row.key.alpha) os << " alpha=" << format_double(*row.key.alpha);
      os << "\n# x y median\n";
    }
    if (!row.summary.paper_metric) continue;
    os << format_double(row.key.theta_step_param) << ' ' << format_double(*row.summary.paper_metric) << ' '
       << format_double(*row.summary.median_hit_iteration) << '\n';
  }
  return os.str();
}

}  // namespace

std::string_view algo_name(Algo algo) {
  switch (algo) {
    case Algo::asng:
      return "asng";
    case Algo::sng:
      return "sng";
    case Algo::adam_ng:
      return "adam-ng";
  }
  return "?";
}

std::optional<Algo> parse_algo(std::string_view name) {
  if (name == "asng") return Algo::asng;
  if (name == "sng") return Algo::sng;
  if (name == "adam-ng") return Algo::adam_ng;
  return std::nullopt;
}

std::vector<double> default_delta_grid() {
  std::vector<double> grid;
  for (int i = 0; i <= 8; ++i) grid.push_back(std::pow(10.0, -2.0 + 0.5 * i));
  return grid;
}

void validate(const RunOptions& o) {
  if (o.d < 1) throw UsageError("--d must be at least 1");
  if (o.k < 2) throw UsageError("--k must be at least 2");
  if (!(o.eps_x >= 0.0) || !std::isfinite(o.eps_x)) throw UsageError("--eps-x must be a finite nonnegative number");
  if (o.runs < 1) throw UsageError("--runs must be at least 1");
  switch (o.algo) {
    case Algo::asng:
      reject(o.delta_fixed.has_value(), "--delta-fixed", o.algo, "--delta-init");
      reject(o.adam_step.has_value(), "--adam-step", o.algo, "--delta-init");
      break;
    case Algo::sng:
      reject(o.delta_init.has_value(), "--delta-init", o.algo, "--delta-fixed");
      reject(o.adam_step.has_value(), "--adam-step", o.algo, "--delta-fixed");
      reject(o.alpha.has_value(), "--alpha", o.algo, nullptr);
      break;
    case Algo::adam_ng:
      reject(o.delta_init.has_value(), "--delta-init", o.algo, "--adam-step");
      reject(o.delta_fixed.has_value(), "--delta-fixed", o.algo, "--adam-step");
      reject(o.alpha.has_value(), "--alpha", o.algo, nullptr);
      break;
  }
  if (o.delta_init && !(*o.delta_init > 0.0)) throw UsageError("--delta-init must be positive");
  if (o.alpha && !(*o.alpha > 1.0)) throw UsageError("--alpha must exceed 1");
  if (o.delta_fixed && !(*o.delta_fixed >= 0.0)) throw UsageError("--delta-fixed must be nonnegative");
  if (o.adam_step && !(*o.adam_step > 0.0)) throw UsageError("--adam-step must be positive");
  if (!std::isfinite(step_param(o))) throw UsageError("theta step parameter must be finite");
}

void validate(const SweepOptions& o) {
  if (o.base.delta_init || o.base.delta_fixed || o.base.adam_step) {
    throw UsageError("sweep takes step parameters from --deltas, not --delta-init/--delta-fixed/--adam-step");
  }
  if (o.algos.empty()) throw UsageError("--algos grid is empty");
  if (o.deltas && o.deltas->empty()) throw UsageError("--deltas grid is empty");
  if (o.alphas && o.alphas->empty()) throw UsageError("--alphas grid is empty");
  if (o.eps_xs && o.eps_xs->empty()) throw UsageError("--eps-xs grid is empty");
  const bool has_asng = std::find(o.algos.begin(), o.algos.end(), Algo::asng) != o.algos.end();
  if (o.alphas && !has_asng) throw UsageError("--alphas requires asng in --algos");
  if (o.alphas && o.base.alpha) throw UsageError("--alpha conflicts with --alphas");

  // Every cell must be a valid run on its own.
  RunOptions cell = o.base;
  cell.alpha.reset();
  for (Algo a : o.algos) {
    cell.algo = a;
    for (double delta : o.deltas.value_or(std::vector<double>{1.0})) {
      cell.delta_init = a == Algo::asng ? std::optional(delta) : std::nullopt;
      cell.delta_fixed = a == Algo::sng ? std::optional(delta) : std::nullopt;
      cell.adam_step = a == Algo::adam_ng ? std::optional(delta) : std::nullopt;
      try {
        validate(cell);
      } catch (const UsageError& e) {
        throw UsageError(std::string("--deltas value ") + format_double(delta) + ": " + e.what());
      }
    }
  }
  for (double alpha : o.alphas.value_or(std::vector<double>{})) {
    if (!(alpha > 1.0)) throw UsageError("--alphas values must exceed 1");
  }
  for (double eps : o.eps_xs.value_or(std::vector<double>{})) {
    if (!(eps >= 0.0) || !std::isfinite(eps)) throw UsageError("--eps-xs values must be finite and nonnegative");
  }
}

BenchConfig to_bench_config(const RunOptions& o) {
  BenchConfig c;
  c.d = o.d;
  c.k = o.k;
  c.eps_x = o.eps_x;
  c.max_iters = o.max_iters;
  c.n_runs = o.runs;
  c.base_seed = o.seed;
  c.per_eval_noise = o.per_eval_noise;
  c.jobs = o.jobs != 0 ? o.jobs : std::max(1u, std::thread::hardware_concurrency());
  switch (o.algo) {
    case Algo::asng:
      c.theta_algo = AsngConfig{step_param(o), o.alpha.value_or(kDefaultAlpha)};
      break;
    case Algo::sng:
      c.theta_algo = SngConfig{step_param(o)};
      break;
    case Algo::adam_ng:
      c.theta_algo = AdamNgConfig{step_param(o)};
      break;
  }
  return c;
}

RunKey run_key(const RunOptions& o) {
  RunKey key;
  key.algo = std::string(algo_name(o.algo));
  key.d = o.d;
  key.k = o.k;
  key.eps_x = o.eps_x;
  key.theta_step_param = step_param(o);
  if (o.algo == Algo::asng) key.alpha = o.alpha.value_or(kDefaultAlpha);
  return key;
}

std::filesystem::path output_dir(const std::optional<std::string>& out) {
  if (out) return *out;
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) return env;
  return "results";
}

std::vector<SummaryRow> aggregate(std::span<const RunRow> rows) {
  std::vector<RunKey> keys;
  std::vector<std::vector<RunRecord>> groups;
  for (const auto& row : rows) {
    const auto it = std::find(keys.begin(), keys.end(), row.key);
    if (it == keys.end()) {
      keys.push_back(row.key);
      groups.push_back({row.record});
    } else {
      groups[static_cast<std::size_t>(it - keys.begin())].push_back(row.record);
    }
  }
  std::vector<SummaryRow> out;
  for (std::size_t i = 0; i < keys.size(); ++i) out.push_back({keys[i], summarize(groups[i])});
  return out;
}

int cmd_run(const RunOptions& options, std::ostream& log, std::ostream& err) {
  try {
    validate(options);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  }
  try {
    const auto dir = prepare_dir(options.out);
    const auto rows = execute(options);
    const auto summaries = aggregate(rows);
    write_file(dir / "runs.csv", runs_text(rows));
    write_file(dir / "summary.csv", summary_text(summaries));
    log << "wrote " << (dir / "runs.csv").string() << " and " << (dir / "summary.csv").string() << ": "
        << describe(summaries.front().summary) << '\n';
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

int cmd_sweep(const SweepOptions& options, std::ostream& log, std::ostream& err) {
  try {
    validate(options);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  }
  try {
    const auto dir = prepare_dir(options.base.out);
    const auto deltas = options.deltas.value_or(default_delta_grid());
    const auto eps_xs = options.eps_xs.value_or(std::vector<double>{options.base.eps_x});
    const auto alphas = options.alphas.value_or(std::vector<double>{options.base.alpha.value_or(kDefaultAlpha)});

    std::vector<RunRow> all_runs;
    std::vector<SummaryRow> summaries;
    for (Algo algo : options.algos) {
      const std::vector<std::optional<double>> cell_alphas =
          algo == Algo::asng ? std::vector<std::optional<double>>(alphas.begin(), alphas.end())
                             : std::vector<std::optional<double>>{std::nullopt};
      for (const auto& alpha : cell_alphas) {
        for (double eps_x : eps_xs) {
          for (double delta : deltas) {
            RunOptions cell = options.base;
            cell.algo = algo;
            cell.alpha = alpha;
            cell.eps_x = eps_x;
            cell.delta_init = algo == Algo::asng ? std::optional(delta) : std::nullopt;
            cell.delta_fixed = algo == Algo::sng ? std::optional(delta) : std::nullopt;
            cell.adam_step = algo == Algo::adam_ng ? std::optional(delta) : std::nullopt;
            const auto rows = execute(cell);
            const auto summary = aggregate(rows).front();
            log << describe(summary.key) << ": " << describe(summary.summary) << '\n';
            all_runs.insert(all_runs.end(), rows.begin(), rows.end());
            summaries.push_back(summary);
          }
        }
      }
    }
    write_file(dir / "sweep_runs.csv", runs_text(all_runs));
    write_file(dir / "sweep_summary.csv", summary_text(summaries));
    write_file(dir / "sweep_plot.dat", plot_text(summaries));
    log << "wrote " << summaries.size() << " summary rows to " << (dir / "sweep_summary.csv").string() << '\n';
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

int cmd_summarize(const std::vector<std::string>& paths, const std::optional<std::string>& out_path, std::ostream& log,
                  std::ostream& err) {
  if (paths.empty()) {
    err << "usage error: summarize needs at least one CSV file\n";
    return 2;
  }
  std::vector<RunRow> runs;
  std::vector<SummaryRow> embedded;
  try {
    for (const auto& p : paths) {
      auto contents = read_csv_file(p);
      runs.insert(runs.end(), contents.runs.begin(), contents.runs.end());
      embedded.insert(embedded.end(), contents.summaries.begin(), contents.summaries.end());
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  if (runs.empty()) {
    err << "error: no run rows in the inputs\n";
    return 1;
  }

  const auto recomputed = aggregate(runs);
  std::size_t mismatches = 0;
  for (const auto& s : embedded) {
    const auto it =
        std::find_if(recomputed.begin(), recomputed.end(), [&](const SummaryRow& r) { return r.key == s.key; });
    if (it == recomputed.end()) {
      err << "mismatch: no run rows for summary " << describe(s.key) << '\n';
      ++mismatches;
    } else if (!(it->summary == s.summary)) {
      err << "mismatch: " << describe(s.key) << "\n  file:       " << describe(s.summary)
          << "\n  recomputed: " << describe(it->summary) << '\n';
      ++mismatches;
    }
  }

  try {
    const auto text = summary_text(recomputed);
    if (out_path) {
      write_file(*out_path, text);
    } else {
      log << text;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return mismatches == 0 ? 0 : 1;
}

}  // namespace asng
