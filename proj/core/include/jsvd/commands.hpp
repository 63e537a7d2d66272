#pragma once

#include "jsvd/tensor.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

namespace jsvd {

// Options shared by the command entry points. The driver fills this from
// argv; tests construct it directly.
struct CliConfig {
    // Path to a model manifest, or a builtin name (resnet18/34/50).
    std::string manifest;
    // Optional method override applied to every group ("rjsvd", "ljsvd",
    // "bijsvd"). Groups keep their declared method when empty.
    std::string method;
    std::optional<int> rank;        // total rank per group
    std::optional<double> target_cf; // compression factor budget
    double p = 0.5;                 // left share of the total rank (bijsvd)
    int k = 30;                     // alternation count (bijsvd)
    std::uint64_t seed = 0;         // verification/bench input seed
    int threads = 1;                // decomposition worker threads
    std::string out;                // output or artifact directory
    Dtype precision = Dtype::f64;   // stored factor precision
    int repeats = 3;                // timed repetitions per bench case
    bool force = false;             // overwrite existing outputs
};

// Each command returns a process exit code: 0 on success, 1 on any
// validation or verification failure, 2 when the named manifest does not
// exist. Progress and results go to `log`.

// Factorize grouped tensors and write model.factorized.json, factor
// payloads and report.json under the output directory (defaults to the
// manifest's directory).
int cmd_decompose(const CliConfig& cfg, std::ostream& log);

// Check a decomposition artifact against its source model: recorded
// residuals are recomputed from the stored factors, and factored-path
// convolution must match convolution with the reconstructed tensor on
// seeded inputs (1e-9 max abs diff in f64, 1e-4 in f32).
int cmd_verify(const CliConfig& cfg, std::ostream& log);

// Report parameter/MAC budgets, optionally planning ranks for a
// compression-factor target. Writes report.json into the output directory
// (the working directory when none is given), overwriting any previous
// one: the report is a pure function of the manifest and the plan.
int cmd_budget(const CliConfig& cfg, std::ostream& log);

// Time direct convolution against the factored path for every member of a
// decomposition artifact.
int cmd_bench(const CliConfig& cfg, std::ostream& log);

} // namespace jsvd
