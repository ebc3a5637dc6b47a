// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance            run every criterion
//   acceptance 3 7        run the listed ones
//
// Exit status is 0 only when every selected criterion passes.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/core.h>

#include "generators.hpp"
#include "interpreter.hpp"
#include "kselect/cli.hpp"
#include "kselect/csv.hpp"
#include "kselect/dtree.hpp"
#include "kselect/eval.hpp"
#include "kselect/features.hpp"
#include "kselect/model.hpp"
#include "kselect/synth.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace kselect;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string data_file(const std::string& name)
{
    return std::string(KSELECT_TEST_DATA) + "/" + name;
}

Dataset corpus_from(const std::string& config_file)
{
    const auto spec = synth::parse_corpus_config(cli::read_file(data_file(config_file)));
    const auto c = synth::generate_corpus(spec);
    return join_tables(c.tables.elapsed, c.tables.preprocess, c.metadata);
}

// ---------------------------------------------------------------------------

Outcome tree_oracle()
{
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(20240601);
    const int instances = 300;
    int mismatched = 0;
    int cart_higher = 0;
    std::string first;
    for (int i = 0; i < instances; ++i) {
        const std::size_t n = 1 + rng.below(8);
        dtree::FeatureMatrix x(2);
        std::vector<std::size_t> y;
        for (std::size_t s = 0; s < n; ++s) {
            const double row[2] = {static_cast<double>(rng.below(4)), static_cast<double>(rng.below(4))};
            x.add_row(row);
            y.push_back(rng.below(3));
        }
        const auto tree = dtree::train_tree(x, y, 3, {2, 1}, {"a", "b"});
        std::size_t hits = 0;
        for (std::size_t s = 0; s < n; ++s) {
            hits += tree.predict(x.row(s)) == y[s];
        }
        std::vector<std::size_t> all(n);
        for (std::size_t s = 0; s < n; ++s) {
            all[s] = s;
        }
        const std::size_t best = oracle::best_hits(x, y, all, 3, 2);
        if (hits != best) {
            ++mismatched;
            cart_higher += hits > best;
            if (first.empty()) {
                first = fmt::format("instance {} (n={}): CART {} vs optimum {}", i, n, hits, best);
            }
        }
    }
    const double secs = seconds_since(t0);
    return {mismatched == 0 && secs < 10.0,
            fmt::format("{}/{} instances differ from the depth<=2 optimum ({} above it), first: {}; {:.2f} s",
                        mismatched, instances, cart_higher, first.empty() ? "none" : first, secs)};
}

Outcome gini_kendall()
{
    Rng rng(7);
    double worst = 0.0;
    for (int t = 0; t < 1000; ++t) {
        std::vector<std::size_t> labels(1 + rng.below(200));
        const std::uint64_t classes = 1 + rng.below(10);
        for (auto& l : labels) {
            l = rng.below(classes);
        }
        worst = std::max(worst, std::abs(dtree::gini(labels) - oracle::gini_direct(labels)));
    }
    int kendall_bad = 0, all_tied = 0;
    for (int t = 0; t < 1000; ++t) {
        const std::size_t n = 2 + rng.below(60);
        const std::uint64_t levels = 1 + rng.below(8);
        std::vector<double> a(n), b(n);
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = static_cast<double>(rng.below(levels)) * 0.5;
            b[i] = static_cast<double>(rng.below(levels + 2)) - 3.0;
        }
        std::optional<double> got, want;
        try {
            got = kendall_tau(a, b);
        } catch (const std::domain_error&) {
        }
        try {
            want = oracle::kendall_tau_b(a, b);
        } catch (const std::domain_error&) {
            ++all_tied;
        }
        kendall_bad += got != want;
    }
    return {worst <= 1e-12 && kendall_bad == 0,
            fmt::format("gini max |diff| {:.3g} over 1000 multisets; kendall {} mismatches over 1000 vectors "
                        "({} all-tied, rejected by both)",
                        worst, kendall_bad, all_tied)};
}

/// First k at which `a` is strictly cheaper than every other measured kernel
/// from then on, from the closed form; nullopt when it never is.
std::optional<int> closed_form_crossover(const KernelTimings& t, std::size_t a)
{
    long double k_star = 1;
    for (std::size_t k = 0; k < t.size(); ++k) {
        if (k == a || !t[k]) {
            continue;
        }
        const long double d_rt = static_cast<long double>(t[k]->runtime) - t[a]->runtime;
        const long double d_pre = static_cast<long double>(t[a]->preprocess) - t[k]->preprocess;
        if (d_rt <= 0) {
            return std::nullopt;
        }
        k_star = std::max(k_star, d_pre < 0 ? 1.0L : std::floor(d_pre / d_rt) + 1);
    }
    return static_cast<int>(k_star);
}

Outcome crossover()
{
    const Dataset data = corpus_from("crossover.cfg");
    const auto a = static_cast<std::size_t>(std::find(data.kernels.begin(), data.kernels.end(), "CSR,A") -
                                            data.kernels.begin());
    std::optional<int> k_star;
    std::vector<std::string> problems;
    for (const auto& row : data.rows) {
        const auto k = closed_form_crossover(row.timings, a);
        if (!k || (k_star && *k != *k_star)) {
            return {false, "rows disagree on the crossover or it does not exist"};
        }
        k_star = k;
        const std::size_t before = fastest_kernel(row.timings, *k - 1);
        if (*k < 2 || row.timings[before]->preprocess != 0.0) {
            problems.push_back(row.name + ": regime before k* is not a no-preprocess kernel");
        }
        for (int j = 1; j < *k; ++j) {
            if (fastest_kernel(row.timings, j) == a) {
                problems.push_back(fmt::format("{}: adaptive already fastest at k={}", row.name, j));
            }
        }
        for (int j = *k; j < *k + 2000; ++j) {
            if (fastest_kernel(row.timings, j) != a) {
                problems.push_back(fmt::format("{}: adaptive not fastest at k={}", row.name, j));
                break;
            }
        }
    }
    const std::vector<int> ks{1, *k_star + 2};
    const auto model = train_model(data, ks, {});
    std::size_t right = 0, total = 0;
    FixedClock clock;
    for (const auto& row : data.rows) {
        for (int k : ks) {
            const auto out = infer(model, FeatureSource{row.known, row.gathered, {}}, k, clock);
            right += out.kernel == fastest_kernel(row.timings, k);
            ++total;
        }
    }
    const std::string before = data.kernels[fastest_kernel(data.rows[0].timings, 1)];
    return {problems.empty() && right == total,
            fmt::format("k* = {} ({} -> CSR,A), flip exact on {} matrices; selector trained on k in {{1, {}}} "
                        "right on {}/{}{}",
                        *k_star, before, data.rows.size(), *k_star + 2, right, total,
                        problems.empty() ? "" : "; " + problems.front())};
}

struct Mixed {
    Dataset data;
    SelectionModel model;
    eval::EvalReport report;
    double seconds = 0;
};

const Mixed& mixed()
{
    static const Mixed m = [] {
        const auto t0 = std::chrono::steady_clock::now();
        Dataset data = corpus_from("mixed_corpus.cfg");
        SelectionModel model = train_model(data, std::vector<int>{1}, {});
        eval::EvalReport report = eval::evaluate(model, data.rows, 1);
        return Mixed{std::move(data), std::move(model), std::move(report), seconds_since(t0)};
    }();
    return m;
}

Outcome selector_dominance()
{
    const Mixed& m = mixed();
    const double sel = m.report.predictor("selector").total;
    const double orc = m.report.predictor("oracle").total;
    const auto& best = m.report.best_fixed();
    std::set<std::size_t> labels;
    for (const auto& row : m.data.rows) {
        labels.insert(fastest_kernel(row.timings, 1));
    }
    return {m.data.rows.size() == 200 && sel <= best.total && sel <= 1.25 * orc && m.seconds < 60.0,
            fmt::format("{} matrices, {} distinct fastest kernels; selector {:.4g} s, best fixed {} {:.4g} s "
                        "({:.3f}x), oracle {:.4g} s (selector/oracle {:.3f}); {:.1f} s",
                        m.data.rows.size(), labels.size(), sel, best.name, best.total, best.total / sel, orc,
                        sel / orc, m.seconds)};
}

Outcome overhead_accounting()
{
    const Mixed& m = mixed();
    std::vector<DatasetRow> slice;
    for (const auto& row : m.data.rows) {
        if (row.gathered->collection_time > total_cost(row.timings, fastest_kernel(row.timings, 1), 1)) {
            slice.push_back(row);
        }
    }
    if (slice.empty()) {
        return {false, "no row has collection cost above its best kernel runtime"};
    }
    const auto rep = eval::evaluate(m.model, slice, 1);
    const double known = rep.predictor("known").total;
    const double gathered = rep.predictor("gathered").total;
    std::size_t use_known = 0;
    for (const auto& d : rep.predictor("selector").rows) {
        use_known += d.path == Path::use_known;
    }
    const double share = static_cast<double>(use_known) / static_cast<double>(slice.size());
    return {gathered > known && share >= 0.9,
            fmt::format("{} rows with collection > best runtime; always-gathered {:.4g} s vs always-known {:.4g} s; "
                        "selector chose known on {}/{} ({:.1f}%)",
                        slice.size(), gathered, known, use_known, slice.size(), 100 * share)};
}

Outcome decoupling()
{
    // K0 is fastest on three rows but disastrous on the fourth; K1 is never
    // fastest on those three yet always within 1%.
    Dataset d;
    d.kernels = {"K0", "K1"};
    for (int i = 0; i < 4; ++i) {
        DatasetRow r;
        r.name = "r" + std::to_string(i);
        r.known = {1000 * (i + 1), 1000, 5000};
        r.gathered = GatheredFeatures{0.1, 0.001, 0.005, 0.0001, 1e-6};
        r.timings = i < 3 ? KernelTimings{KernelTiming{1.0, 0}, KernelTiming{1.01, 0}}
                          : KernelTimings{KernelTiming{100.0, 0}, KernelTiming{1.0, 0}};
        d.rows.push_back(r);
    }
    const auto model = train_model(d, std::vector<int>{1}, {});
    const auto rep = eval::evaluate(model, d.rows, 1);
    const auto& a = rep.predictor("K1");
    const auto& b = rep.predictor("K0");
    return {a.accuracy < b.accuracy && a.error_vs_oracle < b.error_vs_oracle,
            fmt::format("A=K1 accuracy {:.2f} error {:.4g}; B=K0 accuracy {:.2f} error {:.4g}", a.accuracy,
                        a.error_vs_oracle, b.accuracy, b.error_vs_oracle)};
}

Outcome emitted_code()
{
    Rng rng(99);
    int disagreements = 0;
    std::size_t nodes = 0;
    for (int t = 0; t < 100; ++t) {
        const auto tree = gen::random_tree(rng);
        nodes += tree.nodes().size();
        const interp::Program prog(emit_source(tree, "pick", t % 2 ? dtree::Dialect::c : dtree::Dialect::cpp));
        for (int i = 0; i < 1000; ++i) {
            const auto x = gen::random_input(rng, tree);
            disagreements += prog.run(x) != static_cast<int>(tree.predict(x));
        }
    }
    return {disagreements == 0,
            fmt::format("100 trees ({} nodes), 100000 inputs, {} disagreements", nodes, disagreements)};
}

std::map<std::string, std::string> snapshot(const fs::path& root)
{
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) {
            files[fs::relative(e.path(), root).string()] = cli::read_file(e.path());
        }
    }
    return files;
}

Outcome determinism()
{
    const fs::path base = fs::temp_directory_path() / "kselect_acceptance_determinism";
    fs::remove_all(base);
    std::string failure;
    auto pipeline = [&](const fs::path& root) {
        const std::string d = (root / "data").string();
        const std::vector<std::string> csvs{"--elapsed", d + "/elapsed.csv", "--preprocess", d + "/preprocess.csv",
                                            "--metadata", d + "/metadata.csv"};
        std::vector<std::vector<std::string>> steps{
            {"synth", "--synth-config", data_file("small_corpus.cfg"), "--seed", "11", "--out", d},
            {"train", "--seed", "11", "--fixed-clock", "--iterations", "1,19", "--out", (root / "model").string()},
            {"evaluate", "--seed", "11", "--fixed-clock", "--iterations", "1,19", "--model",
             (root / "model/model.json").string(), "--out", (root / "eval").string()},
        };
        steps[1].insert(steps[1].end(), csvs.begin(), csvs.end());
        steps[2].insert(steps[2].end(), csvs.begin(), csvs.end());
        for (const auto& args : steps) {
            std::ostringstream out, err;
            if (cli::run(args, out, err) != 0) {
                failure = args[0] + ": " + err.str();
                return;
            }
        }
    };
    pipeline(base / "a");
    pipeline(base / "b");
    if (!failure.empty()) {
        fs::remove_all(base);
        return {false, "pipeline failed: " + failure};
    }
    const auto a = snapshot(base / "a");
    const auto b = snapshot(base / "b");
    fs::remove_all(base);
    std::map<std::string, int> kinds;
    int differ = 0;
    for (const auto& [path, content] : a) {
        kinds[fs::path(path).extension().string()]++;
        const auto it = b.find(path);
        differ += it == b.end() || it->second != content;
    }
    const bool all_kinds = kinds[".csv"] > 0 && kinds[".json"] >= 3 && kinds[".svg"] > 0;
    return {a.size() == b.size() && differ == 0 && all_kinds,
            fmt::format("{} files ({} csv, {} json, {} svg), {} differ", a.size(), kinds[".csv"], kinds[".json"],
                        kinds[".svg"], differ + static_cast<int>(a.size() != b.size()))};
}

Outcome csv_round_trip()
{
    Rng rng(5);
    int failures = 0;
    int missing_cells = 0;
    for (int t = 0; t < 500; ++t) {
        std::vector<KernelBench> benches;
        const std::size_t n_kernels = 1 + rng.below(7);
        for (std::size_t k = 0; k < n_kernels; ++k) {
            KernelBench b{std::string(synth::label(synth::all_schedules()[k])), {}};
            for (int m = 0; m < 30; ++m) {
                if (rng.below(4) == 0) {
                    continue; // a missing measurement
                }
                const double rt = std::ldexp(rng.uniform(1, 2), -static_cast<int>(rng.between(5, 40)));
                const double pre = rng.below(2) ? 0.0 : rng.uniform(0, 1) / 7;
                b.records.push_back({"mat \"" + std::to_string(m) + "\",x", rt, pre});
            }
            benches.push_back(std::move(b));
        }
        const auto tables = aggregate(benches);
        for (const auto& row : tables.elapsed.cells) {
            for (const auto& c : row) {
                missing_cells += !c;
            }
        }
        const std::string el = write_timing_csv(tables.elapsed);
        const std::string pre = write_timing_csv(tables.preprocess);
        const AggregatedTables back{parse_timing_csv(el), parse_timing_csv(pre)};
        failures += !(back == tables);
        failures += write_timing_csv(back.elapsed) != el;
        failures += !(aggregate(split_by_kernel(back)) == tables);
        for (const auto& b : benches) {
            failures += !(parse_bench_csv(write_bench_csv(b), b.label) == b);
        }

        std::vector<MetadataRow> md;
        const bool with_known = rng.below(2);
        for (int m = 0; m < 20; ++m) {
            MetadataRow r;
            r.name = "m" + std::to_string(m);
            if (with_known) {
                r.known = KnownFeatures{rng.between(1, 1 << 30), rng.between(1, 1 << 30), rng.between(0, 1LL << 40)};
            }
            r.gathered = GatheredFeatures{rng.uniform(), rng.uniform() / 3, rng.uniform() / 7, rng.uniform() / 11,
                                          rng.uniform() * 1e-5};
            md.push_back(r);
        }
        const std::string text = write_metadata_csv(md);
        failures += !(parse_metadata_csv(text) == md);
        failures += write_metadata_csv(parse_metadata_csv(text)) != text;
    }
    return {failures == 0, fmt::format("500 random table sets ({} missing cells), {} round-trip failures",
                                       missing_cells, failures)};
}

struct Criterion {
    int id;
    const char* title;
    std::function<Outcome()> check;
};

} // namespace

int main(int argc, char** argv)
{
    const std::vector<Criterion> all{
        {1, "decision-tree oracle equivalence", tree_oracle},
        {2, "gini and kendall oracles", gini_kendall},
        {3, "amortization crossover", crossover},
        {4, "selector dominance", selector_dominance},
        {5, "overhead accounting", overhead_accounting},
        {6, "accuracy/error decoupling", decoupling},
        {7, "emitted-code equivalence", emitted_code},
        {8, "determinism", determinism},
        {9, "csv round-trip fidelity", csv_round_trip},
    };
    std::set<int> wanted;
    for (int i = 1; i < argc; ++i) {
        wanted.insert(std::atoi(argv[i]));
    }
    bool ok = true;
    for (const auto& c : all) {
        if (!wanted.empty() && !wanted.count(c.id)) {
            continue;
        }
        Outcome o;
        try {
            o = c.check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        ok = ok && o.pass;
        fmt::print("criterion {} {}: {} ({})\n", c.id, c.title, o.pass ? "PASS" : "FAIL", o.detail);
        std::fflush(stdout);
    }
    return ok ? 0 : 1;
}
