#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kselect/dataset.hpp"
#include "kselect/random.hpp"
#include "kselect/sparse_io.hpp"

namespace kselect::synth {

// Closed-form stand-ins for GPU SpMV kernels. The formulas are synthetic: they
// only encode each schedule's load-balance character (slowest lane gates a
// wave, padding, per-row overheads, one-time binning) so that labels have an
// analytically checkable ground truth.

enum class Schedule {
    thread_mapped_csr,
    thread_mapped_ell,
    warp_mapped_csr,
    warp_mapped_coo,
    block_mapped_csr,
    work_oriented_csr,
    adaptive_csr,
};

/// All schedules in vocabulary order.
const std::vector<Schedule>& all_schedules();

/// Kernel label, e.g. "CSR,TM" or "CSR,A".
std::string_view label(Schedule s);
std::optional<Schedule> schedule_from_label(std::string_view label);

struct Machine {
    index_t lanes = 64;           ///< P
    index_t wavefront = 8;        ///< W
    double entry_cost = 1e-9;     ///< c_e, seconds per processed entry
    double row_cost = 5e-9;       ///< c_r, seconds of per-wave / per-row overhead
    double binning_factor = 4.0;  ///< beta, scales Adaptive-CSR's sequential binning
    double adaptive_speedup = 0.9;
    double coo_entry_factor = 1.25; ///< COO reads a row index with every entry
    double collect_latency = 1e-5;  ///< fixed launch cost of the statistics pass
    double collect_row_cost = 5e-9; ///< per wave of offsets scanned

    /// Throws std::invalid_argument unless P >= W >= 1 and all costs are positive.
    void validate() const;
};

/// Per-iteration runtime and one-time preprocessing cost.
KernelTiming simulate_runtime(const CsrMatrix& m, Schedule s, const Machine& machine);

/// Simulated cost of gathering the row-density statistics.
double simulate_collection(const CsrMatrix& m, const Machine& machine);

enum class GeneratorKind { banded, power_law, uniform, dense_row };

std::string_view kind_name(GeneratorKind k);

struct Range {
    double lo = 0.0;
    double hi = 0.0;
};

/// Parameters are sampled per matrix from their ranges; row counts log-uniformly.
struct GeneratorSpec {
    GeneratorKind kind = GeneratorKind::uniform;
    std::size_t count = 1;
    Range rows{1000, 1000};
    std::optional<Range> cols;     ///< defaults to square
    Range row_nnz{8, 8};           ///< uniform/dense_row row length; power_law minimum row length
    Range bandwidth{2, 2};         ///< banded half-width
    Range exponent{2.5, 2.5};      ///< power_law tail exponent, > 1
    Range dense_fraction{1, 1};    ///< dense_row: share of columns in the dense row

    /// Throws std::invalid_argument for degenerate parameters.
    void validate() const;
};

CsrMatrix generate_matrix(const GeneratorSpec& spec, Rng& rng);

struct CorpusSpec {
    Machine machine;
    std::vector<GeneratorSpec> generators;
    std::vector<Schedule> schedules = all_schedules();
    std::uint64_t seed = 0;
};

/// Line-oriented "key = value" file; '#' starts a comment. Keys:
///   seed, lanes, wavefront, entry_cost, row_cost, binning_factor,
///   adaptive_speedup, coo_entry_factor, collect_latency, collect_row_cost,
///   schedules (comma-separated labels), and repeatable
///   generator = <kind> count=N rows=a:b [cols=a:b] [row_nnz=a:b]
///               [bandwidth=a:b] [exponent=a:b] [dense_fraction=a:b]
/// where a:b is a range sampled per matrix and a plain number a fixed value.
/// Throws ParseError with the line number.
CorpusSpec parse_corpus_config(std::string_view text);

struct NamedMatrix {
    std::string name;
    CsrMatrix matrix;
};

struct Corpus {
    std::vector<KernelBench> benches; ///< one per schedule
    AggregatedTables tables;
    std::vector<MetadataRow> metadata;
};

/// Simulated timings and features for given matrices. Collection times come
/// from simulate_collection, so the output is deterministic.
Corpus simulate_corpus(std::span<const NamedMatrix> matrices, const Machine& machine,
                       std::span<const Schedule> schedules);

/// Generates every matrix of the spec under its seed and simulates it.
/// Matrices are named "<kind>_<NNNN>". Throws EmptyInputError with no generators.
Corpus generate_corpus(const CorpusSpec& spec);

/// Same matrices generate_corpus would simulate.
std::vector<NamedMatrix> generate_matrices(const CorpusSpec& spec);

} // namespace kselect::synth
