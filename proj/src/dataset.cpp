#include "kselect/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include "kselect/csv.hpp"
#include "kselect/error.hpp"
#include "kselect/random.hpp"

namespace kselect {

std::string label_from_filename(std::string_view path)
{
    const auto slash = path.find_last_of("/\\");
    if (slash != std::string_view::npos) {
        path.remove_prefix(slash + 1);
    }
    const auto dot = path.find_last_of('.');
    if (dot != std::string_view::npos && dot > 0) {
        path = path.substr(0, dot);
    }
    std::string label;
    for (char c : path) {
        label.push_back(c == '_' ? ',' : static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    }
    return label;
}

namespace {

std::size_t require_column(const csv::Document& doc, std::string_view name)
{
    const auto col = doc.column(name);
    if (!col) {
        throw ParseError("missing column '" + std::string(name) + "'", doc.header.line);
    }
    return *col;
}

double require_real(const csv::Record& row, std::size_t col, std::string_view what)
{
    const auto v = csv::parse_real(row.fields[col]);
    if (!v) {
        throw ParseError("non-numeric " + std::string(what) + " '" + row.fields[col] + "' for '" + row.fields[0] + "'",
                         row.line);
    }
    return *v;
}

} // namespace

KernelBench parse_bench_csv(std::string_view text, std::string label)
{
    const csv::Document doc = csv::parse(text);
    const std::size_t name_col = require_column(doc, "name");
    const std::size_t runtime_col = require_column(doc, "runtime");
    const std::size_t pre_col = require_column(doc, "preprocess");

    KernelBench bench{std::move(label), {}};
    std::set<std::string> seen;
    for (const csv::Record& row : doc.rows) {
        BenchRecord rec;
        rec.name = row.fields[name_col];
        if (rec.name.empty()) {
            throw ParseError("empty name", row.line);
        }
        if (!seen.insert(rec.name).second) {
            throw ParseError("duplicate name '" + rec.name + "'", row.line);
        }
        rec.runtime = require_real(row, runtime_col, "runtime");
        rec.preprocess = require_real(row, pre_col, "preprocess time");
        if (rec.runtime <= 0.0) {
            throw ParseError("runtime must be positive for '" + rec.name + "'", row.line);
        }
        if (rec.preprocess < 0.0) {
            throw ParseError("preprocess time must be non-negative for '" + rec.name + "'", row.line);
        }
        bench.records.push_back(std::move(rec));
    }
    return bench;
}

std::string write_bench_csv(const KernelBench& bench)
{
    std::string out = csv::format_record({"name", "runtime", "preprocess"});
    for (const BenchRecord& r : bench.records) {
        out += csv::format_record({r.name, csv::format_real(r.runtime), csv::format_real(r.preprocess)});
    }
    return out;
}

AggregatedTables aggregate(std::span<const KernelBench> benches)
{
    if (benches.empty()) {
        throw EmptyInputError("aggregate needs at least one kernel file");
    }
    AggregatedTables out;
    std::unordered_map<std::string, std::size_t> row_of;
    std::set<std::string> labels;
    for (const KernelBench& b : benches) {
        if (!labels.insert(b.label).second) {
            throw SchemaError("kernel '" + b.label + "' appears in more than one input file");
        }
        out.elapsed.kernels.push_back(b.label);
        for (const BenchRecord& r : b.records) {
            if (row_of.emplace(r.name, out.elapsed.names.size()).second) {
                out.elapsed.names.push_back(r.name);
            }
        }
    }
    const std::size_t n_kernels = benches.size();
    out.elapsed.cells.assign(out.elapsed.names.size(), std::vector<std::optional<double>>(n_kernels));
    out.preprocess.kernels = out.elapsed.kernels;
    out.preprocess.names = out.elapsed.names;
    out.preprocess.cells = out.elapsed.cells;
    for (std::size_t k = 0; k < n_kernels; ++k) {
        for (const BenchRecord& r : benches[k].records) {
            const std::size_t row = row_of.at(r.name);
            if (out.elapsed.cells[row][k]) {
                throw SchemaError("name '" + r.name + "' appears twice for kernel '" + benches[k].label + "'");
            }
            out.elapsed.cells[row][k] = r.runtime;
            out.preprocess.cells[row][k] = r.preprocess;
        }
    }
    return out;
}

std::vector<KernelBench> split_by_kernel(const AggregatedTables& tables)
{
    const TimingTable& e = tables.elapsed;
    const TimingTable& p = tables.preprocess;
    if (e.kernels != p.kernels || e.names != p.names) {
        throw SchemaError("elapsed and preprocess tables disagree on kernels or names");
    }
    std::vector<KernelBench> out;
    for (std::size_t k = 0; k < e.kernels.size(); ++k) {
        KernelBench bench{e.kernels[k], {}};
        for (std::size_t r = 0; r < e.names.size(); ++r) {
            if (e.cells[r][k]) {
                bench.records.push_back({e.names[r], *e.cells[r][k], p.cells[r][k].value_or(0.0)});
            }
        }
        out.push_back(std::move(bench));
    }
    return out;
}

std::string write_timing_csv(const TimingTable& table)
{
    std::vector<std::string> header{"name"};
    header.insert(header.end(), table.kernels.begin(), table.kernels.end());
    std::string out = csv::format_record(header);
    for (std::size_t r = 0; r < table.names.size(); ++r) {
        std::vector<std::string> fields{table.names[r]};
        for (const auto& cell : table.cells[r]) {
            fields.push_back(cell ? csv::format_real(*cell) : std::string());
        }
        out += csv::format_record(fields);
    }
    return out;
}

TimingTable parse_timing_csv(std::string_view text)
{
    const csv::Document doc = csv::parse(text);
    if (doc.header.fields.empty() || doc.header.fields.front() != "name") {
        throw ParseError("first column must be 'name'", doc.header.line);
    }
    TimingTable table;
    table.kernels.assign(doc.header.fields.begin() + 1, doc.header.fields.end());
    std::set<std::string> kernels(table.kernels.begin(), table.kernels.end());
    if (kernels.size() != table.kernels.size()) {
        throw ParseError("repeated kernel column", doc.header.line);
    }
    std::set<std::string> seen;
    for (const csv::Record& row : doc.rows) {
        if (!seen.insert(row.fields[0]).second) {
            throw ParseError("duplicate name '" + row.fields[0] + "'", row.line);
        }
        table.names.push_back(row.fields[0]);
        std::vector<std::optional<double>> cells;
        for (std::size_t c = 1; c < row.fields.size(); ++c) {
            if (row.fields[c].empty()) {
                cells.emplace_back();
            } else {
                cells.emplace_back(require_real(row, c, "time"));
            }
        }
        table.cells.push_back(std::move(cells));
    }
    return table;
}

namespace {

const char* const kGatheredColumns[] = {"max_density", "min_density", "mean_density", "var_density",
                                        "collection_time"};
const char* const kKnownColumns[] = {"rows", "cols", "nnz"};

} // namespace

std::vector<MetadataRow> parse_metadata_csv(std::string_view text)
{
    const csv::Document doc = csv::parse(text);
    const std::size_t name_col = require_column(doc, "name");
    std::size_t gathered_cols[5];
    for (int i = 0; i < 5; ++i) {
        gathered_cols[i] = require_column(doc, kGatheredColumns[i]);
    }
    int known_present = 0;
    std::size_t known_cols[3] = {0, 0, 0};
    for (int i = 0; i < 3; ++i) {
        if (const auto c = doc.column(kKnownColumns[i])) {
            known_cols[i] = *c;
            ++known_present;
        }
    }
    if (known_present != 0 && known_present != 3) {
        throw ParseError("rows, cols and nnz columns must appear together", doc.header.line);
    }

    std::vector<MetadataRow> out;
    std::set<std::string> seen;
    for (const csv::Record& row : doc.rows) {
        MetadataRow m;
        m.name = row.fields[name_col];
        if (!seen.insert(m.name).second) {
            throw ParseError("duplicate name '" + m.name + "'", row.line);
        }
        double g[5];
        for (int i = 0; i < 5; ++i) {
            g[i] = require_real(row, gathered_cols[i], kGatheredColumns[i]);
        }
        m.gathered = {g[0], g[1], g[2], g[3], g[4]};
        if (m.gathered.collection_time < 0.0) {
            throw ParseError("negative collection_time for '" + m.name + "'", row.line);
        }
        if (known_present == 3) {
            index_t k[3];
            for (int i = 0; i < 3; ++i) {
                const auto v = csv::parse_count(row.fields[known_cols[i]]);
                if (!v) {
                    throw ParseError(std::string("non-integer ") + kKnownColumns[i] + " for '" + m.name + "'",
                                     row.line);
                }
                k[i] = static_cast<index_t>(*v);
            }
            m.known = KnownFeatures{k[0], k[1], k[2]};
        }
        out.push_back(std::move(m));
    }
    return out;
}

std::string write_metadata_csv(std::span<const MetadataRow> rows)
{
    const bool with_known = std::all_of(rows.begin(), rows.end(), [](const MetadataRow& r) { return r.known; });
    std::vector<std::string> header{"name"};
    if (with_known && !rows.empty()) {
        header.insert(header.end(), std::begin(kKnownColumns), std::end(kKnownColumns));
    }
    header.insert(header.end(), std::begin(kGatheredColumns), std::end(kGatheredColumns));
    std::string out = csv::format_record(header);
    for (const MetadataRow& r : rows) {
        std::vector<std::string> fields{r.name};
        if (with_known) {
            fields.push_back(std::to_string(r.known->rows));
            fields.push_back(std::to_string(r.known->cols));
            fields.push_back(std::to_string(r.known->nnz));
        }
        const GatheredFeatures& g = r.gathered;
        for (double v : {g.max_row_density, g.min_row_density, g.mean_row_density, g.var_row_density,
                         g.collection_time}) {
            fields.push_back(csv::format_real(v));
        }
        out += csv::format_record(fields);
    }
    return out;
}

Dataset join_tables(const TimingTable& elapsed, const TimingTable& preprocess, std::span<const MetadataRow> metadata)
{
    if (elapsed.kernels.empty()) {
        throw SchemaError("elapsed table has no kernel columns");
    }
    Dataset data;
    data.kernels = elapsed.kernels;

    std::vector<std::optional<std::size_t>> pre_col(elapsed.kernels.size());
    for (std::size_t pk = 0; pk < preprocess.kernels.size(); ++pk) {
        const auto it = std::find(elapsed.kernels.begin(), elapsed.kernels.end(), preprocess.kernels[pk]);
        if (it == elapsed.kernels.end()) {
            throw SchemaError("preprocess column '" + preprocess.kernels[pk] + "' has no elapsed column");
        }
        pre_col[static_cast<std::size_t>(it - elapsed.kernels.begin())] = pk;
    }
    std::unordered_map<std::string, std::size_t> pre_row;
    for (std::size_t r = 0; r < preprocess.names.size(); ++r) {
        pre_row.emplace(preprocess.names[r], r);
    }
    std::unordered_map<std::string, const MetadataRow*> meta;
    for (const MetadataRow& m : metadata) {
        meta.emplace(m.name, &m);
    }

    std::vector<std::string> missing_meta;
    for (std::size_t r = 0; r < elapsed.names.size(); ++r) {
        const std::string& name = elapsed.names[r];
        const auto mit = meta.find(name);
        if (mit == meta.end() || !mit->second->known) {
            missing_meta.push_back(name);
            continue;
        }
        DatasetRow row;
        row.name = name;
        row.known = *mit->second->known;
        row.gathered = mit->second->gathered;
        row.timings.resize(elapsed.kernels.size());
        const auto prow = pre_row.find(name);
        bool any = false;
        for (std::size_t k = 0; k < elapsed.kernels.size(); ++k) {
            const auto& cell = elapsed.cells[r][k];
            if (!cell) {
                continue;
            }
            if (*cell <= 0.0) {
                throw SchemaError("non-positive runtime for '" + name + "' on '" + elapsed.kernels[k] + "'");
            }
            double pre = 0.0;
            if (prow != pre_row.end() && pre_col[k]) {
                pre = preprocess.cells[prow->second][*pre_col[k]].value_or(0.0);
            }
            if (pre < 0.0) {
                throw SchemaError("negative preprocess time for '" + name + "' on '" + elapsed.kernels[k] + "'");
            }
            row.timings[k] = KernelTiming{*cell, pre};
            any = true;
        }
        if (!any) {
            throw SchemaError("'" + name + "' has no measured kernel");
        }
        data.rows.push_back(std::move(row));
    }
    if (!missing_meta.empty()) {
        std::string list;
        for (std::size_t i = 0; i < missing_meta.size() && i < 10; ++i) {
            list += (i ? ", " : "") + missing_meta[i];
        }
        if (missing_meta.size() > 10) {
            list += ", ...";
        }
        throw SchemaError("no metadata row with rows/cols/nnz for " + std::to_string(missing_meta.size()) +
                          " name(s): " + list);
    }
    return data;
}

CorrelationTable correlation_table(const Dataset& data)
{
    std::vector<std::vector<std::optional<double>>> runtimes(data.kernels.size());
    std::vector<std::vector<double>> columns(correlation_feature_names().size());
    for (const DatasetRow& row : data.rows) {
        if (!row.gathered) {
            throw SchemaError("'" + row.name + "' has no gathered features");
        }
        for (std::size_t k = 0; k < data.kernels.size(); ++k) {
            runtimes[k].push_back(row.timings[k] ? std::optional<double>(row.timings[k]->runtime) : std::nullopt);
        }
        const GatheredFeatures& g = *row.gathered;
        const double values[] = {static_cast<double>(row.known.rows), static_cast<double>(row.known.nnz),
                                 g.max_row_density,
                                 g.min_row_density,
                                 g.mean_row_density,
                                 g.var_row_density};
        for (std::size_t f = 0; f < columns.size(); ++f) {
            columns[f].push_back(values[f]);
        }
    }
    return correlation_table(data.kernels, runtimes, correlation_feature_names(), columns);
}

double total_cost(const KernelTimings& timings, std::size_t kernel, int iterations)
{
    if (iterations < 1) {
        throw std::invalid_argument("iterations must be >= 1");
    }
    if (kernel >= timings.size() || !timings[kernel]) {
        return std::numeric_limits<double>::infinity();
    }
    return timings[kernel]->preprocess + static_cast<double>(iterations) * timings[kernel]->runtime;
}

double realized_cost(const KernelTimings& timings, std::size_t kernel, int iterations)
{
    const double cost = total_cost(timings, kernel, iterations);
    if (std::isfinite(cost)) {
        return cost;
    }
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < timings.size(); ++k) {
        if (timings[k]) {
            worst = std::max(worst, total_cost(timings, k, iterations));
        }
    }
    if (!std::isfinite(worst)) {
        throw SchemaError("no kernel is measured");
    }
    return worst;
}

std::size_t fastest_kernel(const KernelTimings& timings, int iterations)
{
    std::optional<std::size_t> best;
    double best_cost = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < timings.size(); ++k) {
        if (!timings[k]) {
            continue;
        }
        const double c = total_cost(timings, k, iterations);
        if (!best || c < best_cost) {
            best = k;
            best_cost = c;
        }
    }
    if (!best) {
        throw SchemaError("no kernel has a measured runtime");
    }
    return *best;
}

const std::vector<std::string>& known_schema()
{
    static const std::vector<std::string> names{"rows", "cols", "nnz", "iterations"};
    return names;
}

const std::vector<std::string>& gathered_schema()
{
    static const std::vector<std::string> names{"rows",         "cols",         "nnz",         "max_density",
                                                "min_density",  "mean_density", "var_density", "iterations"};
    return names;
}

std::vector<double> known_vector(const KnownFeatures& known, int iterations)
{
    return {static_cast<double>(known.rows), static_cast<double>(known.cols), static_cast<double>(known.nnz),
            static_cast<double>(iterations)};
}

std::vector<double> gathered_vector(const KnownFeatures& known, const GatheredFeatures& g, int iterations)
{
    return {static_cast<double>(known.rows), static_cast<double>(known.cols), static_cast<double>(known.nnz),
            g.max_row_density,
            g.min_row_density,
            g.mean_row_density,
            g.var_row_density,
            static_cast<double>(iterations)};
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, std::uint64_t seed,
                                                                            double fraction)
{
    if (!(fraction > 0.0 && fraction < 1.0)) {
        throw std::invalid_argument("split fraction must lie in (0, 1)");
    }
    if (n < 2) {
        throw std::invalid_argument("split needs at least two rows");
    }
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) {
        order[i] = i;
    }
    Rng rng(seed);
    rng.shuffle(order);
    auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
    n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
    return {std::vector<std::size_t>(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train)),
            std::vector<std::size_t>(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end())};
}

} // namespace kselect
