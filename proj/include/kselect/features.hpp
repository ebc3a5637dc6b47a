#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kselect/clock.hpp"
#include "kselect/sparse_io.hpp"

namespace kselect {

/// Row-density statistics. A row's density is its stored-entry count divided
/// by the matrix column count.
struct GatheredFeatures {
    double max_row_density = 0.0;
    double min_row_density = 0.0;
    double mean_row_density = 0.0;
    double var_row_density = 0.0; ///< population variance
    double collection_time = 0.0; ///< seconds

    friend bool operator==(const GatheredFeatures&, const GatheredFeatures&) = default;
};

/// Throws std::domain_error for a zero-column matrix, std::out_of_range for a
/// bad row index.
double row_density(const CsrMatrix& m, index_t row);

/// Single pass over row offsets. The moments are accumulated as exact integer
/// sums, so the result does not depend on traversal order. Throws
/// EmptyInputError when the matrix has no rows or no columns.
GatheredFeatures gather_features(const CsrMatrix& m, Clock& clock);

/// Kendall tau-b over all pairs (O(n^2)). Throws std::invalid_argument on a
/// length mismatch or fewer than two samples, std::domain_error when either
/// sequence is entirely tied.
double kendall_tau(std::span<const double> x, std::span<const double> y);

/// Feature columns of the correlation table, in display order.
inline const std::vector<std::string>& correlation_feature_names()
{
    static const std::vector<std::string> names{"rows", "nnz", "max_density", "min_density", "mean_density",
                                                "var_density"};
    return names;
}

/// Kendall tau between each kernel's per-iteration runtime and each feature
/// column. Undefined cells (all-tied inputs, too few samples) are nullopt.
struct CorrelationTable {
    std::vector<std::string> kernels;
    std::vector<std::string> features;
    std::vector<std::vector<std::optional<double>>> tau; ///< [kernel][feature]
};

/// `runtimes[k][i]` is kernel k's runtime on sample i (nullopt when missing);
/// `feature_columns[f][i]` is feature f on sample i. Samples with a missing
/// runtime are dropped pairwise for that kernel.
CorrelationTable correlation_table(const std::vector<std::string>& kernels,
                                   const std::vector<std::vector<std::optional<double>>>& runtimes,
                                   const std::vector<std::string>& features,
                                   const std::vector<std::vector<double>>& feature_columns);

} // namespace kselect
