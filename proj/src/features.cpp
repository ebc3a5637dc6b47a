#include "kselect/features.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "kselect/error.hpp"

namespace kselect {

double row_density(const CsrMatrix& m, index_t row)
{
    if (m.n_cols() == 0) {
        throw std::domain_error("row density is undefined for a matrix with no columns");
    }
    if (row < 0 || row >= m.n_rows()) {
        throw std::out_of_range("row " + std::to_string(row) + " out of range");
    }
    return static_cast<double>(m.row_length(row)) / static_cast<double>(m.n_cols());
}

GatheredFeatures gather_features(const CsrMatrix& m, Clock& clock)
{
    if (m.n_rows() == 0 || m.n_cols() == 0) {
        throw EmptyInputError("gather_features needs at least one row and one column");
    }
    using wide = unsigned __int128;

    GatheredFeatures f;
    const double start = clock.now();

    const auto offsets = m.row_offsets();
    index_t shortest = offsets[1] - offsets[0];
    index_t longest = shortest;
    wide sum = 0;
    wide sum_sq = 0;
    for (index_t r = 0; r < m.n_rows(); ++r) {
        const index_t len = offsets[r + 1] - offsets[r];
        shortest = std::min(shortest, len);
        longest = std::max(longest, len);
        sum += static_cast<wide>(len);
        sum_sq += static_cast<wide>(len) * static_cast<wide>(len);
    }

    const double cols = static_cast<double>(m.n_cols());
    const double n = static_cast<double>(m.n_rows());
    f.max_row_density = static_cast<double>(longest) / cols;
    f.min_row_density = static_cast<double>(shortest) / cols;
    f.mean_row_density = static_cast<double>(sum) / (n * cols);
    // n * sum_sq - sum^2 >= 0 exactly (Cauchy-Schwarz over integers).
    const wide spread = static_cast<wide>(m.n_rows()) * sum_sq - sum * sum;
    f.var_row_density = static_cast<double>(spread) / (n * n * cols * cols);

    const double stop = clock.now();
    f.collection_time = stop > start ? stop - start : 0.0;
    return f;
}

namespace {

int order(double a, double b)
{
    return (b > a) - (b < a);
}

} // namespace

double kendall_tau(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size()) {
        throw std::invalid_argument("kendall_tau: sequences differ in length");
    }
    if (x.size() < 2) {
        throw std::invalid_argument("kendall_tau: need at least two samples");
    }
    const std::size_t n = x.size();
    std::int64_t concordant = 0;
    std::int64_t discordant = 0;
    std::int64_t untied_x = 0;
    std::int64_t untied_y = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const int sx = order(x[i], x[j]);
            const int sy = order(y[i], y[j]);
            untied_x += sx != 0;
            untied_y += sy != 0;
            const int s = sx * sy;
            concordant += s > 0;
            discordant += s < 0;
        }
    }
    if (untied_x == 0 || untied_y == 0) {
        throw std::domain_error("kendall_tau: undefined for an all-tied sequence");
    }
    return static_cast<double>(concordant - discordant) /
           std::sqrt(static_cast<double>(untied_x) * static_cast<double>(untied_y));
}

CorrelationTable correlation_table(const std::vector<std::string>& kernels,
                                   const std::vector<std::vector<std::optional<double>>>& runtimes,
                                   const std::vector<std::string>& features,
                                   const std::vector<std::vector<double>>& feature_columns)
{
    if (runtimes.size() != kernels.size() || feature_columns.size() != features.size()) {
        throw std::invalid_argument("correlation_table: column count does not match labels");
    }
    CorrelationTable table;
    table.kernels = kernels;
    table.features = features;
    table.tau.assign(kernels.size(), std::vector<std::optional<double>>(features.size()));
    for (std::size_t k = 0; k < kernels.size(); ++k) {
        for (std::size_t f = 0; f < features.size(); ++f) {
            if (feature_columns[f].size() != runtimes[k].size()) {
                throw std::invalid_argument("correlation_table: ragged columns");
            }
            std::vector<double> xs;
            std::vector<double> ys;
            for (std::size_t i = 0; i < runtimes[k].size(); ++i) {
                if (runtimes[k][i]) {
                    xs.push_back(*runtimes[k][i]);
                    ys.push_back(feature_columns[f][i]);
                }
            }
            try {
                table.tau[k][f] = kendall_tau(xs, ys);
            } catch (const std::invalid_argument&) {
                table.tau[k][f] = std::nullopt;
            } catch (const std::domain_error&) {
                table.tau[k][f] = std::nullopt;
            }
        }
    }
    return table;
}

} // namespace kselect
