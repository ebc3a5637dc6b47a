#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kselect/features.hpp"
#include "kselect/sparse_io.hpp"

namespace kselect {

/// One kernel's measured cost on one input.
struct KernelTiming {
    double runtime = 0.0;    ///< seconds per iteration, > 0
    double preprocess = 0.0; ///< one-time seconds, >= 0

    friend bool operator==(const KernelTiming&, const KernelTiming&) = default;
};

/// Indexed by position in the kernel vocabulary; nullopt = not measured.
using KernelTimings = std::vector<std::optional<KernelTiming>>;

// --- per-kernel benchmark files: name,runtime,preprocess ---

struct BenchRecord {
    std::string name;
    double runtime = 0.0;
    double preprocess = 0.0;

    friend bool operator==(const BenchRecord&, const BenchRecord&) = default;
};

struct KernelBench {
    std::string label;
    std::vector<BenchRecord> records;

    friend bool operator==(const KernelBench&, const KernelBench&) = default;
};

/// "csr_tm.csv" -> "CSR,TM": the stem, upper-cased, with '_' read as ','.
std::string label_from_filename(std::string_view path);

/// Header must name the columns name, runtime, preprocess (any order).
/// Throws ParseError for a missing column, a non-numeric or non-positive
/// runtime, a negative preprocess time, or a repeated name.
KernelBench parse_bench_csv(std::string_view text, std::string label);
std::string write_bench_csv(const KernelBench& bench);

// --- aggregated tables: name,<kernel1>,<kernel2>,... ---

struct TimingTable {
    std::vector<std::string> kernels;
    std::vector<std::string> names;
    std::vector<std::vector<std::optional<double>>> cells; ///< [row][kernel]; nullopt renders as ""

    friend bool operator==(const TimingTable&, const TimingTable&) = default;
};

struct AggregatedTables {
    TimingTable elapsed;
    TimingTable preprocess;

    friend bool operator==(const AggregatedTables&, const AggregatedTables&) = default;
};

/// Joins per-kernel files into the elapsed and preprocess tables. Rows are
/// the union of names in first-appearance order. Throws EmptyInputError for
/// no files and SchemaError for a repeated kernel label.
AggregatedTables aggregate(std::span<const KernelBench> benches);

/// Inverse of aggregate: one KernelBench per column, skipping absent cells.
std::vector<KernelBench> split_by_kernel(const AggregatedTables& tables);

std::string write_timing_csv(const TimingTable& table);
TimingTable parse_timing_csv(std::string_view text);

// --- metadata.csv: name,[rows,cols,nnz,]max_density,min_density,mean_density,var_density,collection_time ---

struct MetadataRow {
    std::string name;
    std::optional<KnownFeatures> known; ///< present when rows/cols/nnz columns exist
    GatheredFeatures gathered;

    friend bool operator==(const MetadataRow&, const MetadataRow&) = default;
};

/// Columns are located by header name, so their order is free. The known
/// feature columns are optional as a group.
std::vector<MetadataRow> parse_metadata_csv(std::string_view text);
std::string write_metadata_csv(std::span<const MetadataRow> rows);

// --- joined dataset ---

struct DatasetRow {
    std::string name;
    KnownFeatures known;
    std::optional<GatheredFeatures> gathered;
    KernelTimings timings;
};

struct Dataset {
    std::vector<std::string> kernels;
    std::vector<DatasetRow> rows;
};

/// Joins the three tables on name. Every elapsed row needs a metadata row
/// carrying known features. A missing preprocess cell (or column) means the
/// kernel has no preprocessing step. Throws SchemaError naming the offending
/// rows or kernels.
Dataset join_tables(const TimingTable& elapsed, const TimingTable& preprocess, std::span<const MetadataRow> metadata);

/// Table-III style correlations of each kernel's runtime against
/// rows, nnz and the four density statistics.
CorrelationTable correlation_table(const Dataset& data);

// --- labels ---

/// preprocess + iterations * runtime; +infinity for an unmeasured kernel.
double total_cost(const KernelTimings& timings, std::size_t kernel, int iterations);

/// total_cost, except that an unmeasured kernel is charged the cost of the
/// slowest measured one. Throws SchemaError when no kernel is measured.
double realized_cost(const KernelTimings& timings, std::size_t kernel, int iterations);

/// Argmin of total_cost; exact ties go to the lower vocabulary index. Throws
/// SchemaError when no kernel is measured.
std::size_t fastest_kernel(const KernelTimings& timings, int iterations);

/// Feature columns of the known-features and gathered-features models. The
/// iteration count is the last column of both.
const std::vector<std::string>& known_schema();
const std::vector<std::string>& gathered_schema();

std::vector<double> known_vector(const KnownFeatures& known, int iterations);
std::vector<double> gathered_vector(const KnownFeatures& known, const GatheredFeatures& gathered, int iterations);

struct LabeledExample {
    std::vector<double> features;
    std::size_t label = 0;
    int iterations = 1;
    double weight = 1.0;
};

// --- train/test split ---

/// Seeded shuffle of [0, n); the first round(fraction * n) indices (clamped so
/// both sides are non-empty) train. Throws std::invalid_argument for
/// n < 2 or a fraction outside (0, 1).
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, std::uint64_t seed,
                                                                            double fraction = 0.8);

template <typename T>
std::pair<std::vector<T>, std::vector<T>> split_train_test(const std::vector<T>& rows, std::uint64_t seed,
                                                           double fraction = 0.8)
{
    auto [train_idx, test_idx] = split_indices(rows.size(), seed, fraction);
    std::pair<std::vector<T>, std::vector<T>> out;
    for (std::size_t i : train_idx) {
        out.first.push_back(rows[i]);
    }
    for (std::size_t i : test_idx) {
        out.second.push_back(rows[i]);
    }
    return out;
}

} // namespace kselect
