#include "kselect/sparse_io.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "kselect/csv.hpp"
#include "kselect/error.hpp"

namespace kselect {

CsrMatrix::CsrMatrix(index_t n_rows, index_t n_cols, std::vector<index_t> row_offsets,
                     std::vector<index_t> col_indices, std::vector<double> values)
    : n_rows_(n_rows),
      n_cols_(n_cols),
      row_offsets_(std::move(row_offsets)),
      col_indices_(std::move(col_indices)),
      values_(std::move(values))
{
    if (n_rows_ < 0 || n_cols_ < 0) {
        throw std::invalid_argument("negative matrix dimension");
    }
    if (row_offsets_.size() != static_cast<std::size_t>(n_rows_) + 1) {
        throw std::invalid_argument("row_offsets must have n_rows + 1 entries");
    }
    if (row_offsets_.front() != 0) {
        throw std::invalid_argument("row_offsets[0] must be 0");
    }
    if (col_indices_.size() != values_.size() ||
        static_cast<index_t>(col_indices_.size()) != row_offsets_.back()) {
        throw std::invalid_argument("row_offsets[n_rows] must equal the number of stored entries");
    }
    if (n_rows_ > 0 && n_cols_ > 0 &&
        static_cast<unsigned __int128>(row_offsets_.back()) >
            static_cast<unsigned __int128>(n_rows_) * static_cast<unsigned __int128>(n_cols_)) {
        throw std::invalid_argument("more stored entries than matrix cells");
    }
    for (index_t r = 0; r < n_rows_; ++r) {
        const index_t begin = row_offsets_[r];
        const index_t end = row_offsets_[r + 1];
        if (end < begin) {
            throw std::invalid_argument("row_offsets must be non-decreasing");
        }
        for (index_t k = begin; k < end; ++k) {
            const index_t c = col_indices_[k];
            if (c < 0 || c >= n_cols_) {
                throw std::invalid_argument("column index out of range in row " + std::to_string(r));
            }
            if (k > begin && c <= col_indices_[k - 1]) {
                throw std::invalid_argument("column indices must strictly increase within row " +
                                            std::to_string(r));
            }
        }
    }
}

CsrMatrix csr_from_coo(index_t n_rows, index_t n_cols, std::span<const CooEntry> entries)
{
    // Counting sort by row keeps input order within a row; the stable sort by
    // column then preserves it among duplicates so sums are order-deterministic.
    std::vector<index_t> counts(static_cast<std::size_t>(n_rows) + 1, 0);
    for (const CooEntry& e : entries) {
        if (e.row < 0 || e.row >= n_rows || e.col < 0 || e.col >= n_cols) {
            throw std::invalid_argument("coordinate entry out of range");
        }
        ++counts[e.row + 1];
    }
    std::partial_sum(counts.begin(), counts.end(), counts.begin());
    std::vector<CooEntry> sorted(entries.size());
    std::vector<index_t> cursor(counts.begin(), counts.end() - 1);
    for (const CooEntry& e : entries) {
        sorted[cursor[e.row]++] = e;
    }

    std::vector<index_t> offsets(static_cast<std::size_t>(n_rows) + 1, 0);
    std::vector<index_t> cols;
    std::vector<double> vals;
    cols.reserve(entries.size());
    vals.reserve(entries.size());
    for (index_t r = 0; r < n_rows; ++r) {
        auto first = sorted.begin() + counts[r];
        auto last = sorted.begin() + counts[r + 1];
        std::stable_sort(first, last, [](const CooEntry& a, const CooEntry& b) { return a.col < b.col; });
        for (auto it = first; it != last; ++it) {
            if (!cols.empty() && static_cast<index_t>(cols.size()) > offsets[r] && cols.back() == it->col) {
                vals.back() += it->value;
            } else {
                cols.push_back(it->col);
                vals.push_back(it->value);
            }
        }
        offsets[r + 1] = static_cast<index_t>(cols.size());
    }
    return CsrMatrix(n_rows, n_cols, std::move(offsets), std::move(cols), std::move(vals));
}

namespace {

enum class Field { real, integer, pattern };
enum class Symmetry { general, symmetric, skew_symmetric };

std::string lower(std::string s)
{
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

bool is_comment_or_blank(const std::string& line)
{
    const auto pos = line.find_first_not_of(" \t\r");
    return pos == std::string::npos || line[pos] == '%';
}

} // namespace

CsrMatrix parse_matrix_market(std::istream& in)
{
    std::string line;
    std::size_t line_no = 0;

    if (!std::getline(in, line)) {
        throw ParseError("empty input, expected %%MatrixMarket header", 1);
    }
    ++line_no;
    std::istringstream header(line);
    std::string banner, object, format, field_name, symmetry_name;
    header >> banner >> object >> format >> field_name >> symmetry_name;
    if (banner != "%%MatrixMarket") {
        throw ParseError("missing %%MatrixMarket banner", line_no);
    }
    if (lower(object) != "matrix") {
        throw ParseError("unsupported object '" + object + "'", line_no);
    }
    if (lower(format) != "coordinate") {
        throw ParseError("unsupported format '" + format + "', only coordinate is accepted", line_no);
    }
    Field field;
    const std::string f = lower(field_name);
    if (f == "real" || f == "double") {
        field = Field::real;
    } else if (f == "integer") {
        field = Field::integer;
    } else if (f == "pattern") {
        field = Field::pattern;
    } else {
        throw ParseError("unsupported field '" + field_name + "'", line_no);
    }
    Symmetry symmetry;
    const std::string s = lower(symmetry_name);
    if (s == "general") {
        symmetry = Symmetry::general;
    } else if (s == "symmetric") {
        symmetry = Symmetry::symmetric;
    } else if (s == "skew-symmetric") {
        symmetry = Symmetry::skew_symmetric;
    } else {
        throw ParseError("unsupported symmetry '" + symmetry_name + "'", line_no);
    }

    do {
        if (!std::getline(in, line)) {
            throw ParseError("missing size line", line_no + 1);
        }
        ++line_no;
    } while (is_comment_or_blank(line));

    std::istringstream size_line(line);
    std::string tok_rows, tok_cols, tok_entries, extra;
    size_line >> tok_rows >> tok_cols >> tok_entries;
    const auto rows = csv::parse_count(tok_rows);
    const auto cols = csv::parse_count(tok_cols);
    const auto declared = csv::parse_count(tok_entries);
    if (!rows || !cols || !declared || (size_line >> extra)) {
        throw ParseError("malformed size line, expected 'rows cols entries'", line_no);
    }
    const auto n_rows = static_cast<index_t>(*rows);
    const auto n_cols = static_cast<index_t>(*cols);
    if (symmetry != Symmetry::general && n_rows != n_cols) {
        throw ParseError("symmetric storage requires a square matrix", line_no);
    }

    std::vector<CooEntry> entries;
    entries.reserve(symmetry == Symmetry::general ? *declared : 2 * *declared);
    std::uint64_t seen = 0;
    while (seen < *declared) {
        if (!std::getline(in, line)) {
            throw ParseError("truncated entry list: expected " + std::to_string(*declared) + " entries, found " +
                                 std::to_string(seen),
                             line_no + 1);
        }
        ++line_no;
        if (is_comment_or_blank(line)) {
            continue;
        }
        std::istringstream entry(line);
        std::string ti, tj, tv;
        entry >> ti >> tj;
        const auto i = csv::parse_count(ti);
        const auto j = csv::parse_count(tj);
        if (!i || !j) {
            throw ParseError("malformed coordinate entry", line_no);
        }
        if (*i < 1 || *i > *rows || *j < 1 || *j > *cols) {
            throw ParseError("index (" + ti + ", " + tj + ") out of range", line_no);
        }
        double value = 1.0;
        if (field != Field::pattern) {
            entry >> tv;
            const auto v = csv::parse_real(tv);
            if (!v) {
                throw ParseError("malformed value '" + tv + "'", line_no);
            }
            value = *v;
        }
        if (entry >> extra) {
            throw ParseError("unexpected trailing token '" + extra + "'", line_no);
        }
        const index_t r = static_cast<index_t>(*i) - 1;
        const index_t c = static_cast<index_t>(*j) - 1;
        entries.push_back({r, c, value});
        if (r != c) {
            if (symmetry == Symmetry::symmetric) {
                entries.push_back({c, r, value});
            } else if (symmetry == Symmetry::skew_symmetric) {
                entries.push_back({c, r, -value});
            }
        }
        ++seen;
    }
    while (std::getline(in, line)) {
        ++line_no;
        if (!is_comment_or_blank(line)) {
            throw ParseError("more entries than declared on the size line", line_no);
        }
    }
    return csr_from_coo(n_rows, n_cols, entries);
}

CsrMatrix parse_matrix_market(std::string_view text)
{
    std::istringstream in{std::string(text)};
    return parse_matrix_market(in);
}

CsrMatrix read_matrix_market(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open " + path);
    }
    try {
        return parse_matrix_market(in);
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what());
    }
}

void write_matrix_market(std::ostream& out, const CsrMatrix& m)
{
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << m.n_rows() << ' ' << m.n_cols() << ' ' << m.nnz() << '\n';
    const auto offsets = m.row_offsets();
    const auto cols = m.col_indices();
    const auto vals = m.values();
    for (index_t r = 0; r < m.n_rows(); ++r) {
        for (index_t k = offsets[r]; k < offsets[r + 1]; ++k) {
            out << (r + 1) << ' ' << (cols[k] + 1) << ' ' << csv::format_real(vals[k]) << '\n';
        }
    }
}

namespace {
constexpr const char* kCsrFormat = "kselect-csr";
constexpr int kCsrVersion = 1;
} // namespace

std::string csr_to_json(const CsrMatrix& m)
{
    nlohmann::json j;
    j["format"] = kCsrFormat;
    j["version"] = kCsrVersion;
    j["n_rows"] = m.n_rows();
    j["n_cols"] = m.n_cols();
    j["row_offsets"] = std::vector<index_t>(m.row_offsets().begin(), m.row_offsets().end());
    j["col_indices"] = std::vector<index_t>(m.col_indices().begin(), m.col_indices().end());
    j["values"] = std::vector<double>(m.values().begin(), m.values().end());
    return j.dump();
}

CsrMatrix csr_from_json(std::string_view text)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("invalid CSR cache: ") + e.what());
    }
    if (!j.is_object() || j.value("format", "") != kCsrFormat) {
        throw ParseError("not a CSR cache document");
    }
    if (j.value("version", -1) != kCsrVersion) {
        throw ParseError("unsupported CSR cache version " + j.value("version", nlohmann::json()).dump());
    }
    try {
        return CsrMatrix(j.at("n_rows").get<index_t>(), j.at("n_cols").get<index_t>(),
                         j.at("row_offsets").get<std::vector<index_t>>(),
                         j.at("col_indices").get<std::vector<index_t>>(), j.at("values").get<std::vector<double>>());
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed CSR cache: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ParseError(std::string("invalid CSR cache: ") + e.what());
    }
}

} // namespace kselect
