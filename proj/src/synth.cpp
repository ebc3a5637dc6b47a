#include "kselect/synth.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include <fmt/core.h>

#include "kselect/clock.hpp"
#include "kselect/csv.hpp"
#include "kselect/error.hpp"
#include "kselect/features.hpp"

namespace kselect::synth {

const std::vector<Schedule>& all_schedules()
{
    static const std::vector<Schedule> s{Schedule::thread_mapped_csr, Schedule::thread_mapped_ell,
                                         Schedule::warp_mapped_csr,   Schedule::warp_mapped_coo,
                                         Schedule::block_mapped_csr,  Schedule::work_oriented_csr,
                                         Schedule::adaptive_csr};
    return s;
}

std::string_view label(Schedule s)
{
    switch (s) {
    case Schedule::thread_mapped_csr: return "CSR,TM";
    case Schedule::thread_mapped_ell: return "ELL,TM";
    case Schedule::warp_mapped_csr: return "CSR,WM";
    case Schedule::warp_mapped_coo: return "COO,WM";
    case Schedule::block_mapped_csr: return "CSR,BM";
    case Schedule::work_oriented_csr: return "CSR,WO";
    case Schedule::adaptive_csr: return "CSR,A";
    }
    return "?";
}

std::optional<Schedule> schedule_from_label(std::string_view l)
{
    for (Schedule s : all_schedules()) {
        if (label(s) == l) {
            return s;
        }
    }
    return std::nullopt;
}

void Machine::validate() const
{
    if (wavefront < 1 || lanes < wavefront) {
        throw std::invalid_argument("machine needs lanes >= wavefront >= 1");
    }
    for (double c : {entry_cost, row_cost, binning_factor, adaptive_speedup, coo_entry_factor}) {
        if (!(c > 0.0) || !std::isfinite(c)) {
            throw std::invalid_argument("machine costs must be positive and finite");
        }
    }
    if (!(collect_latency >= 0.0) || !(collect_row_cost >= 0.0)) {
        throw std::invalid_argument("collection costs must be non-negative");
    }
}

namespace {

index_t ceil_div(index_t a, index_t b)
{
    return (a + b - 1) / b;
}

/// sum over waves of `per_wave` consecutive rows of max(cost(row)) + overhead
template <typename RowCost>
double waves(const CsrMatrix& m, index_t per_wave, double overhead, RowCost&& cost)
{
    double total = 0.0;
    for (index_t start = 0; start < m.n_rows(); start += per_wave) {
        const index_t stop = std::min(m.n_rows(), start + per_wave);
        double worst = 0.0;
        for (index_t r = start; r < stop; ++r) {
            worst = std::max(worst, cost(m.row_length(r)));
        }
        total += worst + overhead;
    }
    return total;
}

double work_oriented(const CsrMatrix& m, const Machine& mc)
{
    return static_cast<double>(ceil_div(m.nnz() + m.n_rows(), mc.lanes)) * mc.entry_cost + mc.row_cost;
}

} // namespace

KernelTiming simulate_runtime(const CsrMatrix& m, Schedule s, const Machine& mc)
{
    mc.validate();
    const double ce = mc.entry_cost;
    const double cr = mc.row_cost;
    const index_t P = mc.lanes;
    const index_t W = mc.wavefront;
    switch (s) {
    case Schedule::thread_mapped_csr:
        return {waves(m, P, cr, [&](index_t len) { return static_cast<double>(len) * ce; }), 0.0};
    case Schedule::thread_mapped_ell: {
        index_t widest = 0;
        for (index_t r = 0; r < m.n_rows(); ++r) {
            widest = std::max(widest, m.row_length(r));
        }
        return {static_cast<double>(ceil_div(m.n_rows(), P)) * static_cast<double>(widest) * ce,
                static_cast<double>(m.n_rows()) * cr};
    }
    case Schedule::warp_mapped_csr:
        return {waves(m, P / W, cr, [&](index_t len) { return static_cast<double>(ceil_div(len, W)) * ce; }), 0.0};
    case Schedule::warp_mapped_coo:
        return {waves(m, P / W, 0.0,
                      [&](index_t len) { return static_cast<double>(ceil_div(len, W)) * ce * mc.coo_entry_factor; }),
                0.0};
    case Schedule::block_mapped_csr:
        return {waves(m, 1, cr, [&](index_t len) { return static_cast<double>(ceil_div(len, P)) * ce; }), 0.0};
    case Schedule::work_oriented_csr:
        return {work_oriented(m, mc), 0.0};
    case Schedule::adaptive_csr:
        return {work_oriented(m, mc) * mc.adaptive_speedup,
                static_cast<double>(m.n_rows()) * cr * mc.binning_factor};
    }
    throw std::invalid_argument("unknown schedule");
}

double simulate_collection(const CsrMatrix& m, const Machine& mc)
{
    return mc.collect_latency + static_cast<double>(ceil_div(m.n_rows() + 1, mc.lanes)) * mc.collect_row_cost;
}

std::string_view kind_name(GeneratorKind k)
{
    switch (k) {
    case GeneratorKind::banded: return "banded";
    case GeneratorKind::power_law: return "power_law";
    case GeneratorKind::uniform: return "uniform";
    case GeneratorKind::dense_row: return "dense_row";
    }
    return "?";
}

void GeneratorSpec::validate() const
{
    auto check_range = [](const Range& r, double min, const char* what) {
        if (!(r.lo >= min) || !(r.hi >= r.lo) || !std::isfinite(r.hi)) {
            throw std::invalid_argument(std::string("generator: bad ") + what + " range");
        }
    };
    if (count < 1) {
        throw std::invalid_argument("generator: count must be >= 1");
    }
    check_range(rows, 1, "rows");
    if (cols) {
        check_range(*cols, 1, "cols");
    }
    check_range(row_nnz, 1, "row_nnz");
    check_range(bandwidth, 0, "bandwidth");
    check_range(exponent, 0, "exponent");
    check_range(dense_fraction, 0, "dense_fraction");
    if (kind == GeneratorKind::power_law && !(exponent.lo > 1.0)) {
        throw std::invalid_argument("generator: power-law exponent must be > 1");
    }
    if (kind == GeneratorKind::dense_row && !(dense_fraction.lo > 0.0 && dense_fraction.hi <= 1.0)) {
        throw std::invalid_argument("generator: dense_fraction must lie in (0, 1]");
    }
}

namespace {

index_t sample_count(const Range& r, Rng& rng, bool log_scale)
{
    if (r.lo == r.hi) {
        return static_cast<index_t>(std::llround(r.lo));
    }
    const double u = log_scale ? std::exp(rng.uniform(std::log(r.lo), std::log(r.hi))) : rng.uniform(r.lo, r.hi);
    return std::clamp(static_cast<index_t>(std::llround(u)), static_cast<index_t>(std::llround(r.lo)),
                      static_cast<index_t>(std::llround(r.hi)));
}

double sample_real(const Range& r, Rng& rng)
{
    return r.lo == r.hi ? r.lo : rng.uniform(r.lo, r.hi);
}

/// `count` distinct sorted columns from [0, n).
void sample_columns(index_t n, index_t count, Rng& rng, std::vector<index_t>& out)
{
    out.clear();
    if (count >= n) {
        for (index_t c = 0; c < n; ++c) {
            out.push_back(c);
        }
        return;
    }
    if (2 * count >= n) {
        // Selection sampling: each column kept with probability needed/remaining.
        index_t needed = count;
        for (index_t c = 0; c < n && needed > 0; ++c) {
            if (static_cast<index_t>(rng.below(static_cast<std::uint64_t>(n - c))) < needed) {
                out.push_back(c);
                --needed;
            }
        }
        return;
    }
    // Floyd's algorithm.
    std::unordered_set<index_t> chosen;
    for (index_t j = n - count; j < n; ++j) {
        const auto t = static_cast<index_t>(rng.below(static_cast<std::uint64_t>(j + 1)));
        out.push_back(chosen.insert(t).second ? t : (chosen.insert(j), j));
    }
    std::sort(out.begin(), out.end());
}

} // namespace

CsrMatrix generate_matrix(const GeneratorSpec& spec, Rng& rng)
{
    spec.validate();
    const index_t rows = sample_count(spec.rows, rng, true);
    const index_t cols = spec.cols ? sample_count(*spec.cols, rng, true) : rows;
    const index_t base = std::min(cols, sample_count(spec.row_nnz, rng, false));

    std::vector<index_t> lengths(static_cast<std::size_t>(rows));
    switch (spec.kind) {
    case GeneratorKind::uniform:
        std::fill(lengths.begin(), lengths.end(), base);
        break;
    case GeneratorKind::dense_row: {
        std::fill(lengths.begin(), lengths.end(), base);
        const auto dense = static_cast<index_t>(rng.below(static_cast<std::uint64_t>(rows)));
        const double fraction = sample_real(spec.dense_fraction, rng);
        const auto width = static_cast<index_t>(std::ceil(fraction * static_cast<double>(cols)));
        lengths[dense] = std::clamp(width, base, cols);
        break;
    }
    case GeneratorKind::power_law: {
        const double shape = 1.0 / (sample_real(spec.exponent, rng) - 1.0);
        for (auto& len : lengths) {
            const double u = 1.0 - rng.uniform(); // (0, 1]
            const double x = static_cast<double>(base) * std::pow(u, -shape);
            len = x >= static_cast<double>(cols) ? cols : std::max<index_t>(1, static_cast<index_t>(x));
        }
        break;
    }
    case GeneratorKind::banded:
        break;
    }

    std::vector<index_t> offsets{0};
    offsets.reserve(static_cast<std::size_t>(rows) + 1);
    std::vector<index_t> col_idx;
    std::vector<index_t> row_cols;
    if (spec.kind == GeneratorKind::banded) {
        const index_t half = sample_count(spec.bandwidth, rng, false);
        for (index_t r = 0; r < rows; ++r) {
            // Rectangular matrices follow the scaled diagonal.
            const index_t centre = rows > 1 ? r * (cols - 1) / (rows - 1) : 0;
            const index_t lo = std::max<index_t>(0, centre - half);
            const index_t hi = std::min<index_t>(cols - 1, centre + half);
            for (index_t c = lo; c <= hi; ++c) {
                col_idx.push_back(c);
            }
            offsets.push_back(static_cast<index_t>(col_idx.size()));
        }
    } else {
        for (index_t r = 0; r < rows; ++r) {
            sample_columns(cols, lengths[r], rng, row_cols);
            col_idx.insert(col_idx.end(), row_cols.begin(), row_cols.end());
            offsets.push_back(static_cast<index_t>(col_idx.size()));
        }
    }
    std::vector<double> values(col_idx.size(), 1.0);
    return CsrMatrix(rows, cols, std::move(offsets), std::move(col_idx), std::move(values));
}

namespace {

Range parse_range(std::string_view text, std::size_t line)
{
    const auto colon = text.find(':');
    const auto lo = csv::parse_real(text.substr(0, colon));
    const auto hi = colon == std::string_view::npos ? lo : csv::parse_real(text.substr(colon + 1));
    if (!lo || !hi) {
        throw ParseError("bad range '" + std::string(text) + "'", line);
    }
    return {*lo, *hi};
}

double parse_number(std::string_view text, std::size_t line)
{
    const auto v = csv::parse_real(text);
    if (!v) {
        throw ParseError("bad number '" + std::string(text) + "'", line);
    }
    return *v;
}

std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

GeneratorSpec parse_generator(const std::string& value, std::size_t line)
{
    std::istringstream in(value);
    std::string kind;
    in >> kind;
    GeneratorSpec g;
    if (kind == "banded") {
        g.kind = GeneratorKind::banded;
    } else if (kind == "power_law") {
        g.kind = GeneratorKind::power_law;
    } else if (kind == "uniform") {
        g.kind = GeneratorKind::uniform;
    } else if (kind == "dense_row") {
        g.kind = GeneratorKind::dense_row;
    } else {
        throw ParseError("unknown generator kind '" + kind + "'", line);
    }
    std::string tok;
    while (in >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) {
            throw ParseError("expected key=value, got '" + tok + "'", line);
        }
        const std::string key = tok.substr(0, eq);
        const std::string_view val = std::string_view(tok).substr(eq + 1);
        if (key == "count") {
            g.count = static_cast<std::size_t>(parse_number(val, line));
        } else if (key == "rows") {
            g.rows = parse_range(val, line);
        } else if (key == "cols") {
            g.cols = parse_range(val, line);
        } else if (key == "row_nnz") {
            g.row_nnz = parse_range(val, line);
        } else if (key == "bandwidth") {
            g.bandwidth = parse_range(val, line);
        } else if (key == "exponent") {
            g.exponent = parse_range(val, line);
        } else if (key == "dense_fraction") {
            g.dense_fraction = parse_range(val, line);
        } else {
            throw ParseError("unknown generator key '" + key + "'", line);
        }
    }
    try {
        g.validate();
    } catch (const std::invalid_argument& e) {
        throw ParseError(e.what(), line);
    }
    return g;
}

} // namespace

CorpusSpec parse_corpus_config(std::string_view text)
{
    CorpusSpec spec;
    std::istringstream in{std::string(text)};
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const auto hash = raw.find('#');
        const std::string body = trim(std::string_view(raw).substr(0, hash));
        if (body.empty()) {
            continue;
        }
        const auto eq = body.find('=');
        if (eq == std::string::npos) {
            throw ParseError("expected 'key = value'", line);
        }
        const std::string key = trim(std::string_view(body).substr(0, eq));
        const std::string value = trim(std::string_view(body).substr(eq + 1));
        Machine& m = spec.machine;
        if (key == "generator") {
            spec.generators.push_back(parse_generator(value, line));
        } else if (key == "seed") {
            const auto v = csv::parse_count(value);
            if (!v) {
                throw ParseError("bad seed '" + value + "'", line);
            }
            spec.seed = *v;
        } else if (key == "lanes") {
            m.lanes = static_cast<index_t>(parse_number(value, line));
        } else if (key == "wavefront") {
            m.wavefront = static_cast<index_t>(parse_number(value, line));
        } else if (key == "entry_cost") {
            m.entry_cost = parse_number(value, line);
        } else if (key == "row_cost") {
            m.row_cost = parse_number(value, line);
        } else if (key == "binning_factor") {
            m.binning_factor = parse_number(value, line);
        } else if (key == "adaptive_speedup") {
            m.adaptive_speedup = parse_number(value, line);
        } else if (key == "coo_entry_factor") {
            m.coo_entry_factor = parse_number(value, line);
        } else if (key == "collect_latency") {
            m.collect_latency = parse_number(value, line);
        } else if (key == "collect_row_cost") {
            m.collect_row_cost = parse_number(value, line);
        } else if (key == "schedules") {
            spec.schedules.clear();
            std::istringstream list(value);
            std::string item;
            // Labels contain commas, so the list is separated by ';' or whitespace.
            while (list >> item) {
                std::istringstream parts(item);
                std::string one;
                while (std::getline(parts, one, ';')) {
                    if (one.empty()) {
                        continue;
                    }
                    const auto s = schedule_from_label(one);
                    if (!s) {
                        throw ParseError("unknown schedule '" + one + "'", line);
                    }
                    spec.schedules.push_back(*s);
                }
            }
        } else {
            throw ParseError("unknown key '" + key + "'", line);
        }
    }
    try {
        spec.machine.validate();
    } catch (const std::invalid_argument& e) {
        throw ParseError(e.what());
    }
    return spec;
}

Corpus simulate_corpus(std::span<const NamedMatrix> matrices, const Machine& machine,
                       std::span<const Schedule> schedules)
{
    machine.validate();
    if (schedules.empty()) {
        throw EmptyInputError("no schedules to simulate");
    }
    Corpus corpus;
    for (Schedule s : schedules) {
        corpus.benches.push_back({std::string(label(s)), {}});
    }
    FixedClock clock;
    for (const NamedMatrix& nm : matrices) {
        for (std::size_t i = 0; i < schedules.size(); ++i) {
            const KernelTiming t = simulate_runtime(nm.matrix, schedules[i], machine);
            corpus.benches[i].records.push_back({nm.name, t.runtime, t.preprocess});
        }
        MetadataRow row;
        row.name = nm.name;
        row.known = known_features(nm.matrix);
        row.gathered = gather_features(nm.matrix, clock);
        row.gathered.collection_time = simulate_collection(nm.matrix, machine);
        corpus.metadata.push_back(std::move(row));
    }
    corpus.tables = aggregate(corpus.benches);
    return corpus;
}

namespace {

template <typename Fn>
void for_each_generated(const CorpusSpec& spec, Fn&& fn)
{
    if (spec.generators.empty()) {
        throw EmptyInputError("corpus spec has no generators");
    }
    Rng rng(spec.seed);
    std::size_t index = 0;
    for (const GeneratorSpec& g : spec.generators) {
        for (std::size_t i = 0; i < g.count; ++i) {
            NamedMatrix nm{fmt::format("{}_{:04}", kind_name(g.kind), index++), generate_matrix(g, rng)};
            fn(std::move(nm));
        }
    }
}

} // namespace

std::vector<NamedMatrix> generate_matrices(const CorpusSpec& spec)
{
    std::vector<NamedMatrix> out;
    for_each_generated(spec, [&](NamedMatrix nm) { out.push_back(std::move(nm)); });
    return out;
}

Corpus generate_corpus(const CorpusSpec& spec)
{
    Corpus corpus;
    std::vector<KernelBench> benches;
    for (Schedule s : spec.schedules) {
        benches.push_back({std::string(label(s)), {}});
    }
    // One matrix alive at a time.
    for_each_generated(spec, [&](NamedMatrix nm) {
        Corpus one = simulate_corpus(std::span<const NamedMatrix>(&nm, 1), spec.machine, spec.schedules);
        for (std::size_t i = 0; i < benches.size(); ++i) {
            benches[i].records.push_back(one.benches[i].records.front());
        }
        corpus.metadata.push_back(std::move(one.metadata.front()));
    });
    corpus.tables = aggregate(benches);
    corpus.benches = std::move(benches);
    return corpus;
}

} // namespace kselect::synth
