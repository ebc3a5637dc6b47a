#include "kselect/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/core.h>
#include <json.hpp>

#include "kselect/clock.hpp"
#include "kselect/csv.hpp"
#include "kselect/dataset.hpp"
#include "kselect/error.hpp"
#include "kselect/eval.hpp"
#include "kselect/features.hpp"
#include "kselect/model.hpp"
#include "kselect/sparse_io.hpp"
#include "kselect/synth.hpp"

namespace fs = std::filesystem;

namespace kselect::cli {

void write_file_atomic(const fs::path& path, std::string_view content)
{
    std::error_code ec;
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path(), ec);
        if (ec) {
            throw Error("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
        }
    }
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        f.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!f) {
            throw Error("cannot write '" + tmp.string() + "'");
        }
    }
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw Error("cannot replace '" + path.string() + "'");
    }
}

std::string read_file(const fs::path& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw Error("cannot read '" + path.string() + "'");
    }
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

namespace {

/// Fixed step charged per clock read under --fixed-clock.
constexpr double kFixedStep = 1e-6;

struct RunConfig {
    std::string elapsed;
    std::string preprocess;
    std::string metadata;
    std::string matrices;
    std::string synth_config;
    std::string model;
    std::string matrix;
    std::string name;
    std::string out;
    std::vector<int> iterations{1};
    std::uint64_t seed = 0;
    dtree::TreeParams params;
    double split = 0.8;
    bool fixed_clock = false;
    bool abs_tau = false;
    bool all_rows = false;
    std::string dialect = "cpp";
    std::string prefix = "kselect";
    std::string selector_weights = "regret";
    bool seed_given = false;
};

std::unique_ptr<Clock> make_clock(const RunConfig& cfg)
{
    if (cfg.fixed_clock) {
        return std::make_unique<FixedClock>(kFixedStep);
    }
    return std::make_unique<SteadyClock>();
}

fs::path out_dir(const RunConfig& cfg)
{
    return cfg.out.empty() ? fs::path(".") : fs::path(cfg.out);
}

/// *.mtx files of a directory in name order.
std::vector<fs::path> matrix_files(const std::string& dir)
{
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) {
        throw Error("'" + dir + "' is not a directory");
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".mtx") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    return files;
}

synth::CorpusSpec corpus_spec(const RunConfig& cfg)
{
    synth::CorpusSpec spec;
    if (!cfg.synth_config.empty()) {
        spec = synth::parse_corpus_config(read_file(cfg.synth_config));
    }
    if (cfg.seed_given) {
        spec.seed = cfg.seed;
    }
    return spec;
}

/// Simulated timings for a directory of .mtx files.
synth::Corpus simulate_directory(const RunConfig& cfg, std::ostream& err)
{
    const auto spec = corpus_spec(cfg);
    std::vector<synth::NamedMatrix> matrices;
    for (const auto& file : matrix_files(cfg.matrices)) {
        try {
            matrices.push_back({file.stem().string(), read_matrix_market(file.string())});
        } catch (const ParseError& e) {
            throw ParseError(file.string() + ": " + e.what());
        }
    }
    if (matrices.empty()) {
        throw EmptyInputError("no .mtx files in '" + cfg.matrices + "'");
    }
    err << fmt::format("simulated {} matrices\n", matrices.size());
    return synth::simulate_corpus(matrices, spec.machine, spec.schedules);
}

Dataset load_dataset(const RunConfig& cfg, std::ostream& err)
{
    const bool csv_mode = !cfg.elapsed.empty() || !cfg.metadata.empty() || !cfg.preprocess.empty();
    const bool dir_mode = !cfg.matrices.empty();
    if (csv_mode == dir_mode) {
        throw std::invalid_argument(
            "give exactly one data source: --elapsed/--preprocess/--metadata or --matrices [--synth-config]");
    }
    if (dir_mode) {
        const auto corpus = simulate_directory(cfg, err);
        return join_tables(corpus.tables.elapsed, corpus.tables.preprocess, corpus.metadata);
    }
    if (cfg.elapsed.empty()) {
        throw std::invalid_argument("--elapsed is required");
    }
    if (cfg.metadata.empty()) {
        throw std::invalid_argument("--metadata is required");
    }
    auto parse_in = [](const std::string& path, auto&& parse) {
        try {
            return parse(read_file(path));
        } catch (const ParseError& e) {
            throw ParseError(path + ": " + e.what());
        }
    };
    const auto elapsed = parse_in(cfg.elapsed, [](const std::string& t) { return parse_timing_csv(t); });
    TimingTable preprocess;
    if (!cfg.preprocess.empty()) {
        preprocess = parse_in(cfg.preprocess, [](const std::string& t) { return parse_timing_csv(t); });
    }
    const auto metadata = parse_in(cfg.metadata, [](const std::string& t) { return parse_metadata_csv(t); });
    Dataset data = join_tables(elapsed, preprocess, metadata);
    if (data.rows.empty()) {
        throw EmptyInputError(cfg.elapsed + " has no rows");
    }
    return data;
}

void write_corpus(const synth::Corpus& corpus, const fs::path& dir, std::ostream& out)
{
    write_file_atomic(dir / "elapsed.csv", write_timing_csv(corpus.tables.elapsed));
    write_file_atomic(dir / "preprocess.csv", write_timing_csv(corpus.tables.preprocess));
    write_file_atomic(dir / "metadata.csv", write_metadata_csv(corpus.metadata));
    out << fmt::format("wrote {} matrices x {} kernels to {}\n", corpus.metadata.size(),
                       corpus.tables.elapsed.kernels.size(), dir.string());
}

int cmd_features(const RunConfig& cfg, std::ostream& out, std::ostream& err)
{
    if (cfg.matrices.empty()) {
        throw std::invalid_argument("features needs --matrices");
    }
    auto clock = make_clock(cfg);
    std::vector<MetadataRow> rows;
    std::size_t failed = 0;
    const auto files = matrix_files(cfg.matrices);
    for (const auto& file : files) {
        try {
            const CsrMatrix m = read_matrix_market(file.string());
            rows.push_back({file.stem().string(), known_features(m), gather_features(m, *clock)});
        } catch (const Error& e) {
            ++failed;
            err << "warning: skipping " << file.string() << ": " << e.what() << "\n";
        }
    }
    if (files.empty()) {
        err << "warning: no .mtx files in " << cfg.matrices << "\n";
    }
    const fs::path path = out_dir(cfg) / "metadata.csv";
    write_file_atomic(path, write_metadata_csv(rows));
    out << fmt::format("wrote {} rows to {}\n", rows.size(), path.string());
    if (failed > 0) {
        err << fmt::format("{} of {} matrices could not be read\n", failed, files.size());
        return parse_error;
    }
    return ok;
}

int cmd_synth(const RunConfig& cfg, std::ostream& out, std::ostream& err)
{
    if (!cfg.matrices.empty()) {
        write_corpus(simulate_directory(cfg, err), out_dir(cfg), out);
        return ok;
    }
    if (cfg.synth_config.empty()) {
        throw std::invalid_argument("synth needs --synth-config (or --matrices)");
    }
    write_corpus(synth::generate_corpus(corpus_spec(cfg)), out_dir(cfg), out);
    return ok;
}

double tree_accuracy(const dtree::DecisionTree& tree, const std::vector<LabeledExample>& examples)
{
    if (examples.empty()) {
        return 0.0;
    }
    std::size_t hit = 0;
    for (const auto& e : examples) {
        hit += tree.predict(e.features) == e.label ? 1 : 0;
    }
    return static_cast<double>(hit) / static_cast<double>(examples.size());
}

std::pair<std::vector<DatasetRow>, std::vector<DatasetRow>> split_rows(const Dataset& data, const RunConfig& cfg)
{
    return split_train_test(data.rows, cfg.seed, cfg.split);
}

int cmd_train(const RunConfig& cfg, std::ostream& out, std::ostream& err)
{
    const Dataset data = load_dataset(cfg, err);
    auto [train, test] = split_rows(data, cfg);
    const Dataset train_set{data.kernels, train};
    const SelectionModel model =
        train_model(train_set, cfg.iterations, cfg.params, weighting_from_name(cfg.selector_weights));

    nlohmann::ordered_json summary;
    summary["kernels"] = data.kernels;
    summary["iterations"] = cfg.iterations;
    summary["seed"] = cfg.seed;
    summary["split"] = cfg.split;
    summary["params"] = {{"max_depth", cfg.params.max_depth},
                         {"min_samples_leaf", cfg.params.min_samples_leaf},
                         {"selector_weighting", cfg.selector_weights}};
    summary["rows"] = {{"train", train.size()}, {"test", test.size()}};
    auto acc = nlohmann::ordered_json::object();
    auto record = [&](const char* name, const dtree::DecisionTree& tree, const std::vector<LabeledExample>& tr,
                      const std::vector<LabeledExample>& te) {
        acc[name] = {{"train", tree_accuracy(tree, tr)}, {"test", tree_accuracy(tree, te)}};
        out << fmt::format("{:<9} train {:.4f}  test {:.4f}\n", name, tree_accuracy(tree, tr), tree_accuracy(tree, te));
    };
    record("known", model.known_tree, known_examples(train, cfg.iterations), known_examples(test, cfg.iterations));
    record("gathered", model.gathered_tree, gathered_examples(train, cfg.iterations),
           gathered_examples(test, cfg.iterations));
    record("selector", model.selector_tree,
           selector_examples(model.known_tree, model.gathered_tree, train, cfg.iterations),
           selector_examples(model.known_tree, model.gathered_tree, test, cfg.iterations));
    summary["accuracy"] = acc;

    const fs::path dir = out_dir(cfg);
    write_file_atomic(dir / "model.json", serialize_model(model));
    write_file_atomic(dir / "train_summary.json", summary.dump(1) + "\n");
    out << "wrote " << (dir / "model.json").string() << "\n";
    return ok;
}

SelectionModel load_model(const RunConfig& cfg)
{
    if (cfg.model.empty()) {
        throw std::invalid_argument("--model is required");
    }
    try {
        return deserialize_model(read_file(cfg.model));
    } catch (const ParseError& e) {
        throw ParseError(cfg.model + ": " + e.what());
    }
}

int cmd_predict(const RunConfig& cfg, std::ostream& out, std::ostream&)
{
    const SelectionModel model = load_model(cfg);
    auto clock = make_clock(cfg);
    std::optional<CsrMatrix> matrix;
    FeatureSource source;
    if (!cfg.matrix.empty()) {
        try {
            matrix = read_matrix_market(cfg.matrix);
        } catch (const ParseError& e) {
            throw ParseError(cfg.matrix + ": " + e.what());
        }
        source = matrix_source(*matrix, *clock);
    } else if (!cfg.metadata.empty() && !cfg.name.empty()) {
        const auto rows = parse_metadata_csv(read_file(cfg.metadata));
        const auto it = std::find_if(rows.begin(), rows.end(), [&](const MetadataRow& r) { return r.name == cfg.name; });
        if (it == rows.end()) {
            throw SchemaError("no metadata row named '" + cfg.name + "'");
        }
        if (!it->known) {
            throw SchemaError("metadata row '" + cfg.name + "' lacks rows/cols/nnz");
        }
        source.known = *it->known;
        source.gathered = it->gathered;
    } else {
        throw std::invalid_argument("predict needs --matrix or --metadata with --name");
    }
    out << csv::format_record({"iterations", "kernel", "path", "overhead", "inference_time", "predicted_total"});
    for (int k : cfg.iterations) {
        const InferenceOutcome o = infer(model, source, k, *clock);
        out << csv::format_record({std::to_string(k), model.kernels[o.kernel], std::string(path_name(o.path)),
                                   csv::format_real(o.charged_overhead), csv::format_real(o.inference_time),
                                   csv::format_real(o.predicted_total)});
    }
    return ok;
}

int cmd_evaluate(const RunConfig& cfg, std::ostream& out, std::ostream& err)
{
    const SelectionModel model = load_model(cfg);
    const Dataset data = load_dataset(cfg, err);
    if (data.kernels != model.kernels) {
        throw SchemaError("corpus kernels differ from the model's vocabulary");
    }
    std::vector<DatasetRow> rows = cfg.all_rows ? data.rows : split_rows(data, cfg).second;
    std::vector<eval::EvalReport> reports;
    const fs::path dir = out_dir(cfg);
    for (int k : cfg.iterations) {
        reports.push_back(eval::evaluate(model, rows, k));
        const auto& r = reports.back();
        for (const auto& f : eval::plot_files(r)) {
            write_file_atomic(dir / f.path, f.content);
        }
        const auto& best = r.best_fixed();
        const double sel = r.predictor("selector").total;
        out << fmt::format("k={} rows={} selector={:.6g} oracle={:.6g} best_fixed={}({:.6g}) "
                           "speedup_over_best={:.3f} geomean={:.3f}\n",
                           k, rows.size(), sel, r.predictor("oracle").total, best.name, best.total, best.total / sel,
                           eval::geomean_speedup(r));
        for (const auto& p : r.predictors) {
            if (p.substituted) {
                err << "note: " << p.name << " total at k=" << k << " substitutes the worst measured kernel for "
                    << "unmeasured choices\n";
            }
        }
    }
    write_file_atomic(dir / "report.json", eval::report_json(reports));
    out << "wrote " << (dir / "report.json").string() << "\n";
    return ok;
}

int cmd_emit(const RunConfig& cfg, std::ostream& out, std::ostream&)
{
    const SelectionModel model = load_model(cfg);
    dtree::Dialect dialect;
    if (cfg.dialect == "cpp") {
        dialect = dtree::Dialect::cpp;
    } else if (cfg.dialect == "c") {
        dialect = dtree::Dialect::c;
    } else {
        throw std::invalid_argument("--dialect must be c or cpp");
    }
    const fs::path path = out_dir(cfg) / (dtree::identifier(cfg.prefix) + "_model.h");
    write_file_atomic(path, emit_header(model, dialect, cfg.prefix));
    out << "wrote " << path.string() << "\n";
    return ok;
}

int cmd_correlate(const RunConfig& cfg, std::ostream& out, std::ostream& err)
{
    const Dataset data = load_dataset(cfg, err);
    const CorrelationTable t = correlation_table(data);
    std::vector<std::string> header{"kernel"};
    header.insert(header.end(), t.features.begin(), t.features.end());
    std::string text = csv::format_record(header);
    for (std::size_t k = 0; k < t.kernels.size(); ++k) {
        std::vector<std::string> row{t.kernels[k]};
        for (const auto& cell : t.tau[k]) {
            row.push_back(cell ? fmt::format("{:.4f}", cfg.abs_tau ? std::abs(*cell) : *cell) : "");
        }
        text += csv::format_record(row);
    }
    out << text;
    if (!cfg.out.empty()) {
        write_file_atomic(fs::path(cfg.out) / "correlation.csv", text);
    }
    return ok;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    RunConfig cfg;
    CLI::App app{"Kernel-variant selection with cost-aware feature collection", "kselect"};
    app.fallthrough();
    app.require_subcommand(1);
    app.set_config("--config", "", "Flat 'key = value' file; keys are long flag names");

    app.add_option("--elapsed", cfg.elapsed, "Aggregated per-iteration runtimes (name,<kernel>...)");
    app.add_option("--preprocess", cfg.preprocess, "Aggregated preprocessing times; missing means none");
    app.add_option("--metadata", cfg.metadata, "Per-matrix features with collection_time");
    app.add_option("--matrices", cfg.matrices, "Directory of .mtx files");
    app.add_option("--synth-config", cfg.synth_config, "Generator and machine description for synth");
    app.add_option("--model", cfg.model, "Model bundle (model.json)");
    app.add_option("--matrix", cfg.matrix, "Matrix Market file for predict");
    app.add_option("--name", cfg.name, "Metadata row to predict for");
    app.add_option("--out", cfg.out, "Output directory");
    app.add_option("--iterations", cfg.iterations, "Iteration counts, e.g. 1,19")->delimiter(',');
    auto* seed = app.add_option("--seed", cfg.seed, "Seed for generation and the train/test split");
    app.add_option("--max-depth", cfg.params.max_depth, "Tree depth limit")->check(CLI::NonNegativeNumber);
    app.add_option("--min-samples-leaf", cfg.params.min_samples_leaf, "Smallest leaf")->check(CLI::PositiveNumber);
    app.add_option("--split", cfg.split, "Training fraction")->check(CLI::Range(0.0, 1.0));
    app.add_flag("--fixed-clock", cfg.fixed_clock, "Charge a constant 1e-6 s per clock read");
    app.add_flag("--abs-tau", cfg.abs_tau, "Print |tau| in correlate");
    app.add_flag("--all-rows", cfg.all_rows, "Evaluate on every row instead of the test split");
    app.add_option("--dialect", cfg.dialect, "emit: c or cpp")->check(CLI::IsMember({"c", "cpp"}));
    app.add_option("--prefix", cfg.prefix, "emit: function name prefix");
    app.add_option("--selector-weights", cfg.selector_weights, "train: regret (cost-weighted) or uniform")
        ->check(CLI::IsMember({"regret", "uniform"}));

    std::string command;
    const std::vector<std::pair<std::string, std::string>> commands{
        {"features", "Compute metadata.csv for a directory of .mtx files"},
        {"synth", "Write a synthetic elapsed/preprocess/metadata corpus"},
        {"train", "Train the known, gathered and selector trees"},
        {"predict", "Choose a kernel for one matrix or feature row"},
        {"evaluate", "Compare predictors against the oracle and fixed kernels"},
        {"emit", "Write the model as a C or C++ header"},
        {"correlate", "Kendall tau of kernel runtimes against features"},
    };
    for (const auto& [name, help] : commands) {
        app.add_subcommand(name, help)->callback([&command, n = name] { command = n; });
    }

    std::vector<std::string> argv(args.rbegin(), args.rend()); // CLI11 consumes a reversed vector
    try {
        app.parse(argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? ok : usage;
    }
    cfg.seed_given = seed->count() > 0;

    try {
        if (command == "features") {
            return cmd_features(cfg, out, err);
        }
        if (command == "synth") {
            return cmd_synth(cfg, out, err);
        }
        if (command == "train") {
            return cmd_train(cfg, out, err);
        }
        if (command == "predict") {
            return cmd_predict(cfg, out, err);
        }
        if (command == "evaluate") {
            return cmd_evaluate(cfg, out, err);
        }
        if (command == "emit") {
            return cmd_emit(cfg, out, err);
        }
        if (command == "correlate") {
            return cmd_correlate(cfg, out, err);
        }
        err << "error: unknown command\n";
        return usage;
    } catch (const ParseError& e) {
        err << "parse error: " << e.what() << "\n";
        return parse_error;
    } catch (const SchemaError& e) {
        err << "schema error: " << e.what() << "\n";
        return schema_error;
    } catch (const EmptyInputError& e) {
        err << "empty input: " << e.what() << "\n";
        return empty_input;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return usage;
    }
}

} // namespace kselect::cli
