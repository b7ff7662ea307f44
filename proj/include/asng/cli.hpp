#pragma once

// Command implementations behind the asng-bench executable. They take parsed
// options, write files, report on the given streams and return an exit code:
// 0 when all requested work completed, 1 on I/O, parse or consistency
// failures, 2 on usage errors. A 0% success rate is data, not an error.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "asng/csv.hpp"
#include "asng/toy_bench.hpp"

namespace asng {

enum class Algo { asng, sng, adam_ng };

std::string_view algo_name(Algo algo);
std::optional<Algo> parse_algo(std::string_view name);

// Name of the environment variable that replaces the default output
// directory "results".
inline constexpr const char* kOutputDirEnv = "ASNG_BENCH_OUT";

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Options of `run`. Step parameters left empty take the per-algorithm
// defaults: delta-init 1 and alpha 1.5 for asng, delta-fixed 0.1 for sng,
// adam-step 0.01 for adam-ng.
struct RunOptions {
  Algo algo = Algo::asng;
  int d = 30;
  int k = 5;
  double eps_x = 0.05;
  std::optional<double> delta_init;
  std::optional<double> delta_fixed;
  std::optional<double> adam_step;
  std::optional<double> alpha;
  std::size_t runs = 100;
  std::uint64_t max_iters = 100000;
  std::uint64_t seed = 0;
  std::optional<std::string> out;
  std::size_t jobs = 0;  // 0: hardware concurrency
  bool per_eval_noise = false;
  bool timing = false;  // record wall_ms; otherwise it is written as 0
};

// Options of `sweep`: the Cartesian product algos x alphas x eps_xs x deltas,
// in that nesting order. alphas only multiply asng cells; deltas are the step
// parameter of each algorithm. Non-grid fields of `base` are shared.
struct SweepOptions {
  RunOptions base;
  std::vector<Algo> algos{Algo::asng, Algo::sng};
  // Unset grids fall back to: deltas 10^-2 .. 10^2 in half-decade steps,
  // alphas {base alpha or 1.5}, eps_xs {base eps_x}. A set but empty grid is
  // a usage error.
  std::optional<std::vector<double>> deltas;
  std::optional<std::vector<double>> alphas;
  std::optional<std::vector<double>> eps_xs;
};

std::vector<double> default_delta_grid();

// Throws UsageError naming the offending flags.
void validate(const RunOptions& options);
void validate(const SweepOptions& options);

BenchConfig to_bench_config(const RunOptions& options);
RunKey run_key(const RunOptions& options);

// --out if given, else $ASNG_BENCH_OUT, else "results".
std::filesystem::path output_dir(const std::optional<std::string>& out);

// One summary per key, keys in order of first appearance.
std::vector<SummaryRow> aggregate(std::span<const RunRow> rows);

// Writes <out>/runs.csv and <out>/summary.csv.
int cmd_run(const RunOptions& options, std::ostream& log, std::ostream& err);

// Writes <out>/sweep_runs.csv, <out>/sweep_summary.csv and <out>/sweep_plot.dat.
int cmd_sweep(const SweepOptions& options, std::ostream& log, std::ostream& err);

// Re-aggregates the run rows of all inputs; summary rows found in the inputs
// are compared against the recomputed ones. The result goes to `out_path`
// when given, else to `log`.
int cmd_summarize(const std::vector<std::string>& paths, const std::optional<std::string>& out_path, std::ostream& log,
                  std::ostream& err);

}  // namespace asng
