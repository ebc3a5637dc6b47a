#include "kselect/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "kselect/error.hpp"

namespace kselect {

std::string_view path_name(Path p)
{
    return p == Path::use_known ? "known" : "gathered";
}

Path selector_label(const KernelTimings& timings, std::size_t known_pred, std::size_t gathered_pred,
                    double collection_time, int iterations)
{
    const double via_known = total_cost(timings, known_pred, iterations);
    const double via_gathered = total_cost(timings, gathered_pred, iterations) + collection_time;
    return via_gathered < via_known ? Path::use_gathered : Path::use_known;
}

std::string_view weighting_name(SelectorWeighting w)
{
    return w == SelectorWeighting::regret ? "regret" : "uniform";
}

SelectorWeighting weighting_from_name(std::string_view name)
{
    if (name == "regret") {
        return SelectorWeighting::regret;
    }
    if (name == "uniform") {
        return SelectorWeighting::uniform;
    }
    throw std::invalid_argument("unknown selector weighting '" + std::string(name) + "'");
}

namespace {

void check_iterations(std::span<const int> iterations)
{
    if (iterations.empty()) {
        throw EmptyInputError("no iteration counts given");
    }
    for (int k : iterations) {
        if (k < 1) {
            throw std::invalid_argument("iteration counts must be >= 1");
        }
    }
}

const GatheredFeatures& require_gathered(const DatasetRow& row)
{
    if (!row.gathered) {
        throw SchemaError("row '" + row.name + "' has no gathered features");
    }
    return *row.gathered;
}

dtree::FeatureMatrix to_matrix(const std::vector<LabeledExample>& examples, std::size_t width)
{
    dtree::FeatureMatrix x(width);
    for (const auto& e : examples) {
        x.add_row(e.features);
    }
    return x;
}

std::vector<std::size_t> labels_of(const std::vector<LabeledExample>& examples)
{
    std::vector<std::size_t> y;
    y.reserve(examples.size());
    for (const auto& e : examples) {
        y.push_back(e.label);
    }
    return y;
}

} // namespace

std::vector<LabeledExample> known_examples(std::span<const DatasetRow> rows, std::span<const int> iterations)
{
    check_iterations(iterations);
    std::vector<LabeledExample> out;
    for (const auto& row : rows) {
        for (int k : iterations) {
            out.push_back({known_vector(row.known, k), fastest_kernel(row.timings, k), k});
        }
    }
    return out;
}

std::vector<LabeledExample> gathered_examples(std::span<const DatasetRow> rows, std::span<const int> iterations)
{
    check_iterations(iterations);
    std::vector<LabeledExample> out;
    for (const auto& row : rows) {
        const auto& g = require_gathered(row);
        for (int k : iterations) {
            out.push_back({gathered_vector(row.known, g, k), fastest_kernel(row.timings, k), k});
        }
    }
    return out;
}

std::vector<LabeledExample> selector_examples(const dtree::DecisionTree& known_tree,
                                              const dtree::DecisionTree& gathered_tree,
                                              std::span<const DatasetRow> rows, std::span<const int> iterations)
{
    check_iterations(iterations);
    std::vector<LabeledExample> out;
    for (const auto& row : rows) {
        const auto& g = require_gathered(row);
        for (int k : iterations) {
            auto kv = known_vector(row.known, k);
            const std::size_t kp = known_tree.predict(kv);
            const std::size_t gp = gathered_tree.predict(gathered_vector(row.known, g, k));
            const Path label = selector_label(row.timings, kp, gp, g.collection_time, k);
            const double regret = std::abs(realized_cost(row.timings, kp, k) -
                                           (realized_cost(row.timings, gp, k) + g.collection_time));
            out.push_back({std::move(kv), static_cast<std::size_t>(label), k, regret});
        }
    }
    return out;
}

SelectionModel train_model(const Dataset& data, std::span<const int> iterations, const dtree::TreeParams& params,
                           SelectorWeighting weighting)
{
    if (data.kernels.empty()) {
        throw EmptyInputError("no kernels to choose between");
    }
    if (data.rows.empty()) {
        throw EmptyInputError("no training rows");
    }
    check_iterations(iterations);

    const std::size_t n_kernels = data.kernels.size();
    const auto ke = known_examples(data.rows, iterations);
    auto known_tree = dtree::train_tree(to_matrix(ke, known_schema().size()), labels_of(ke), n_kernels, params,
                                        known_schema());
    const auto ge = gathered_examples(data.rows, iterations);
    auto gathered_tree = dtree::train_tree(to_matrix(ge, gathered_schema().size()), labels_of(ge), n_kernels,
                                           params, gathered_schema());
    const auto se = selector_examples(known_tree, gathered_tree, data.rows, iterations);
    std::vector<double> weights;
    if (weighting == SelectorWeighting::regret) {
        for (const auto& e : se) {
            weights.push_back(e.weight);
        }
    }
    auto selector_tree = dtree::train_tree(to_matrix(se, known_schema().size()), labels_of(se), 2, params,
                                           known_schema(), weights);
    return SelectionModel{std::move(known_tree),
                          std::move(gathered_tree),
                          std::move(selector_tree),
                          data.kernels,
                          std::vector<int>(iterations.begin(), iterations.end()),
                          params,
                          weighting};
}

FeatureSource matrix_source(const CsrMatrix& m, Clock& clock)
{
    FeatureSource src;
    src.known = known_features(m);
    src.gather = [&m, &clock] { return gather_features(m, clock); };
    return src;
}

InferenceOutcome infer(const SelectionModel& model, const FeatureSource& source, int iterations, Clock& clock)
{
    if (iterations < 1) {
        throw std::invalid_argument("iteration count must be >= 1");
    }
    InferenceOutcome out;
    const auto kv = known_vector(source.known, iterations);
    std::size_t choice = 0;
    out.inference_time += measure(clock, [&] { choice = model.selector_tree.predict(kv); });
    out.path = choice == 0 ? Path::use_known : Path::use_gathered;

    if (out.path == Path::use_known) {
        out.inference_time += measure(clock, [&] { out.kernel = model.known_tree.predict(kv); });
    } else {
        GatheredFeatures g;
        if (source.gathered) {
            g = *source.gathered;
        } else if (source.gather) {
            g = source.gather();
        } else {
            throw SchemaError("selector chose gathered features but none were supplied and there is no matrix");
        }
        out.charged_overhead = g.collection_time;
        const auto gv = gathered_vector(source.known, g, iterations);
        out.inference_time += measure(clock, [&] { out.kernel = model.gathered_tree.predict(gv); });
    }
    out.predicted_total = out.charged_overhead + out.inference_time;
    return out;
}

namespace {

constexpr const char* kModelFormat = "kselect-model";
constexpr int kModelVersion = 1;

nlohmann::ordered_json tree_json(const dtree::DecisionTree& t)
{
    return nlohmann::ordered_json::parse(dtree::serialize(t));
}

} // namespace

std::string serialize_model(const SelectionModel& model)
{
    nlohmann::ordered_json j;
    j["format"] = kModelFormat;
    j["version"] = kModelVersion;
    j["kernels"] = model.kernels;
    j["paths"] = {path_name(Path::use_known), path_name(Path::use_gathered)};
    j["iterations"] = model.iterations;
    j["params"] = {{"max_depth", model.params.max_depth},
                   {"min_samples_leaf", model.params.min_samples_leaf},
                   {"selector_weighting", weighting_name(model.weighting)}};
    j["schemas"] = {{"known", known_schema()}, {"gathered", gathered_schema()}, {"selector", known_schema()}};
    j["trees"] = {{"known", tree_json(model.known_tree)},
                  {"gathered", tree_json(model.gathered_tree)},
                  {"selector", tree_json(model.selector_tree)}};
    return j.dump(1) + "\n";
}

SelectionModel deserialize_model(std::string_view text)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("model: invalid JSON: ") + e.what());
    }
    if (!j.is_object() || j.value("format", "") != kModelFormat) {
        throw ParseError("model: not a model bundle");
    }
    if (!j.contains("version") || j["version"] != kModelVersion) {
        throw ParseError("model: unsupported version " + (j.contains("version") ? j["version"].dump() : "<none>"));
    }
    try {
        const auto& schemas = j.at("schemas");
        if (schemas.at("known").get<std::vector<std::string>>() != known_schema() ||
            schemas.at("gathered").get<std::vector<std::string>>() != gathered_schema() ||
            schemas.at("selector").get<std::vector<std::string>>() != known_schema()) {
            throw SchemaError("model: feature schema differs from this build's");
        }
        const auto& trees = j.at("trees");
        SelectionModel m{dtree::deserialize(trees.at("known").dump()),
                         dtree::deserialize(trees.at("gathered").dump()),
                         dtree::deserialize(trees.at("selector").dump()),
                         j.at("kernels").get<std::vector<std::string>>(),
                         j.at("iterations").get<std::vector<int>>(),
                         {j.at("params").at("max_depth").get<int>(),
                          j.at("params").at("min_samples_leaf").get<std::size_t>()},
                         weighting_from_name(j.at("params").at("selector_weighting").get<std::string>())};
        if (m.kernels.empty() || m.known_tree.n_classes() != m.kernels.size() ||
            m.gathered_tree.n_classes() != m.kernels.size() || m.selector_tree.n_classes() != 2) {
            throw SchemaError("model: class counts disagree with the kernel vocabulary");
        }
        if (m.known_tree.feature_names() != known_schema() || m.gathered_tree.feature_names() != gathered_schema() ||
            m.selector_tree.feature_names() != known_schema()) {
            throw SchemaError("model: tree features disagree with the stored schemas");
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("model: malformed bundle: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ParseError(std::string("model: malformed bundle: ") + e.what());
    }
}

std::string emit_header(const SelectionModel& model, dtree::Dialect dialect, std::string_view prefix)
{
    const std::string p = dtree::identifier(prefix);
    const std::string fn = dialect == dtree::Dialect::cpp ? "inline " : "static inline ";
    std::string guard;
    for (char c : p) {
        guard.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    }
    guard += "_MODEL_H";

    std::vector<std::string> known_params;
    for (const auto& name : known_schema()) {
        known_params.push_back(dtree::identifier(name));
    }
    std::vector<std::string> gathered_only;
    for (const auto& name : gathered_schema()) {
        if (std::find(known_schema().begin(), known_schema().end(), name) == known_schema().end()) {
            gathered_only.push_back(dtree::identifier(name));
        }
    }
    auto join = [](const std::vector<std::string>& xs, std::string_view sep, std::string_view before = "") {
        std::string s;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            s += (i ? std::string(sep) : std::string()) + std::string(before) + xs[i];
        }
        return s;
    };

    std::string out;
    out += "/* Generated kernel selector. Kernel indices:\n";
    for (std::size_t i = 0; i < model.kernels.size(); ++i) {
        out += " *   " + std::to_string(i) + "  " + model.kernels[i] + "\n";
    }
    out += " */\n#ifndef " + guard + "\n#define " + guard + "\n\n";
    out += dtree::emit_source(model.known_tree, p + "_known", dialect) + "\n";
    out += dtree::emit_source(model.gathered_tree, p + "_gathered", dialect) + "\n";
    out += dtree::emit_source(model.selector_tree, p + "_selector", dialect) + "\n";

    out += fn + "const char* " + p + "_kernel_label(int kernel)\n{\n    switch (kernel) {\n";
    for (std::size_t i = 0; i < model.kernels.size(); ++i) {
        std::string quoted;
        for (char c : model.kernels[i]) {
            if (c == '"' || c == '\\') {
                quoted.push_back('\\');
            }
            quoted.push_back(c);
        }
        out += "    case " + std::to_string(i) + ": return \"" + quoted + "\";\n";
    }
    out += "    default: return 0;\n    }\n}\n\n";

    out += "/* Fills the gathered features; called only when the selector asks for them. */\n";
    out += "typedef void (*" + p + "_gather_fn)(void* ctx, " + join(gathered_only, ", ", "double* ") + ");\n\n";
    out += "/* Returns the kernel index, or -1 when gathering is needed but gather is null.\n";
    out += "   *path is set to 0 for the known-features path and 1 for the gathered path. */\n";
    out += fn + "int " + p + "_dispatch(" + join(known_params, ", ", "double ") + ", " + p +
           "_gather_fn gather, void* ctx, int* path)\n{\n";
    const std::string known_args = join(known_params, ", ");
    out += "    if (" + p + "_selector(" + known_args + ") == 0) {\n";
    out += "        if (path) {\n            *path = 0;\n        }\n";
    out += "        return " + p + "_known(" + known_args + ");\n    }\n";
    out += "    if (!gather) {\n        return -1;\n    }\n";
    out += "    double " + join(gathered_only, " = 0, ") + " = 0;\n";
    out += "    gather(ctx, " + join(gathered_only, ", ", "&") + ");\n";
    out += "    if (path) {\n        *path = 1;\n    }\n";
    std::vector<std::string> gathered_args;
    for (const auto& name : gathered_schema()) {
        gathered_args.push_back(dtree::identifier(name));
    }
    out += "    return " + p + "_gathered(" + join(gathered_args, ", ") + ");\n}\n\n";
    out += "#endif\n";
    return out;
}

} // namespace kselect
