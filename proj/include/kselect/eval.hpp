#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kselect/dataset.hpp"
#include "kselect/model.hpp"

namespace kselect::eval {

/// One predictor's decision on one row.
struct Decision {
    std::size_t kernel = 0;
    std::optional<Path> path;  ///< set for model predictors
    double kernel_cost = 0.0;  ///< preprocess + k * runtime of the chosen kernel
    double overhead = 0.0;     ///< charged feature-collection cost
    double cost = 0.0;         ///< kernel_cost + overhead
    bool substituted = false;  ///< chosen kernel unmeasured; worst measured kernel's cost used

    friend bool operator==(const Decision&, const Decision&) = default;
};

struct PredictorResult {
    std::string name;
    bool fixed = false;        ///< a single-kernel baseline
    std::vector<Decision> rows;
    double total = 0.0;        ///< sum of rows[i].cost in row order
    double accuracy = 0.0;
    double error_vs_oracle = 0.0; ///< sum of (cost - oracle cost) in row order
    bool substituted = false;

    friend bool operator==(const PredictorResult&, const PredictorResult&) = default;
};

struct EvalReport {
    int iterations = 1;
    std::vector<std::string> kernels;
    std::vector<std::string> names;
    /// oracle, known, gathered, selector, then one fixed baseline per kernel.
    std::vector<PredictorResult> predictors;

    /// Throws std::out_of_range for an unknown name.
    const PredictorResult& predictor(std::string_view name) const;
    /// Fixed baseline with the lowest aggregate total (first on ties).
    const PredictorResult& best_fixed() const;

    friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

inline constexpr std::size_t model_predictor_count = 4;

/// fastest_kernel at k iterations; zero overhead.
std::size_t oracle_choice(const DatasetRow& row, int iterations);

struct Choice {
    std::size_t kernel = 0;
    double overhead = 0.0;
    std::optional<Path> path;
};

/// Scores arbitrary per-row choices against the oracle.
PredictorResult score(std::string name, std::span<const DatasetRow> rows, std::span<const Choice> choices,
                      int iterations);

/// Realized cost of every predictor on `rows`. Throws EmptyInputError for no
/// rows and SchemaError when a row's timings do not match the vocabulary.
EvalReport evaluate(const SelectionModel& model, std::span<const DatasetRow> rows, int iterations);

/// Geometric mean over fixed baselines K of total(K) / total(against).
/// Throws std::invalid_argument without baselines or with a non-positive total.
double geomean_speedup(const EvalReport& report, std::string_view against = "selector");

/// Machine-readable report, stable for equal inputs.
std::string report_json(std::span<const EvalReport> reports);

struct OutputFile {
    std::string path; ///< relative to the output directory
    std::string content;
};

/// Per-matrix and aggregate stacked-bar data (CSV) and renders (SVG) under
/// plots/single_iteration/ for k = 1 and plots/multi_iteration/<name>_<k>iter otherwise.
std::vector<OutputFile> plot_files(const EvalReport& report);

/// Bars in plot order: the four model predictors and then each fixed kernel.
std::string plot_csv(const EvalReport& report, std::size_t row);
std::string aggregate_csv(const EvalReport& report);

} // namespace kselect::eval
