#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace kselect {

using index_t = std::int64_t;

/// Compressed sparse row matrix in canonical form: column indices strictly
/// increase within each row. Immutable after construction.
class CsrMatrix {
public:
    CsrMatrix() : row_offsets_{0} {}

    /// Validates every invariant; throws std::invalid_argument on violation.
    CsrMatrix(index_t n_rows, index_t n_cols, std::vector<index_t> row_offsets, std::vector<index_t> col_indices,
              std::vector<double> values);

    index_t n_rows() const noexcept { return n_rows_; }
    index_t n_cols() const noexcept { return n_cols_; }
    index_t nnz() const noexcept { return row_offsets_.back(); }

    std::span<const index_t> row_offsets() const noexcept { return row_offsets_; }
    std::span<const index_t> col_indices() const noexcept { return col_indices_; }
    std::span<const double> values() const noexcept { return values_; }

    index_t row_length(index_t row) const { return row_offsets_[row + 1] - row_offsets_[row]; }

    friend bool operator==(const CsrMatrix&, const CsrMatrix&) = default;

private:
    index_t n_rows_ = 0;
    index_t n_cols_ = 0;
    std::vector<index_t> row_offsets_;
    std::vector<index_t> col_indices_;
    std::vector<double> values_;
};

struct CooEntry {
    index_t row;
    index_t col;
    double value;
};

/// Builds canonical CSR from coordinate entries. Duplicates are summed in
/// input order; explicit zeros are kept.
CsrMatrix csr_from_coo(index_t n_rows, index_t n_cols, std::span<const CooEntry> entries);

/// Dimensions read off the structure; never touches column indices or values.
struct KnownFeatures {
    index_t rows = 0;
    index_t cols = 0;
    index_t nnz = 0;

    friend bool operator==(const KnownFeatures&, const KnownFeatures&) = default;
};

inline KnownFeatures known_features(const CsrMatrix& m) noexcept
{
    return {m.n_rows(), m.n_cols(), m.nnz()};
}

/// Parses the coordinate variant of Matrix Market (real, integer or pattern
/// field; general, symmetric or skew-symmetric storage). Symmetric storage is
/// expanded so the result is always general. Throws ParseError carrying the
/// offending line number.
CsrMatrix parse_matrix_market(std::istream& in);
CsrMatrix parse_matrix_market(std::string_view text);
CsrMatrix read_matrix_market(const std::string& path);

/// Writes "matrix coordinate real general" with values that parse back exactly.
void write_matrix_market(std::ostream& out, const CsrMatrix& m);

/// Versioned JSON cache format: {"format":"kselect-csr","version":1,...}.
std::string csr_to_json(const CsrMatrix& m);
CsrMatrix csr_from_json(std::string_view text);

} // namespace kselect
