#include "kselect/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

#include <fmt/core.h>
#include <json.hpp>

#include "kselect/csv.hpp"
#include "kselect/error.hpp"

namespace kselect::eval {

const PredictorResult& EvalReport::predictor(std::string_view name) const
{
    for (const auto& p : predictors) {
        if (p.name == name) {
            return p;
        }
    }
    throw std::out_of_range("no predictor named '" + std::string(name) + "'");
}

const PredictorResult& EvalReport::best_fixed() const
{
    const PredictorResult* best = nullptr;
    for (const auto& p : predictors) {
        if (p.fixed && (!best || p.total < best->total)) {
            best = &p;
        }
    }
    if (!best) {
        throw std::out_of_range("report has no fixed-kernel baselines");
    }
    return *best;
}

std::size_t oracle_choice(const DatasetRow& row, int iterations)
{
    return fastest_kernel(row.timings, iterations);
}

PredictorResult score(std::string name, std::span<const DatasetRow> rows, std::span<const Choice> choices,
                      int iterations)
{
    if (rows.size() != choices.size()) {
        throw std::invalid_argument("one choice per row required");
    }
    PredictorResult r;
    r.name = std::move(name);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const DatasetRow& row = rows[i];
        const Choice& c = choices[i];
        if (c.kernel >= row.timings.size()) {
            throw std::invalid_argument("choice outside the kernel vocabulary");
        }
        const std::size_t best = oracle_choice(row, iterations);
        Decision d;
        d.kernel = c.kernel;
        d.path = c.path;
        d.overhead = c.overhead;
        d.kernel_cost = realized_cost(row.timings, c.kernel, iterations);
        if (!row.timings[c.kernel]) {
            d.substituted = true;
            r.substituted = true;
        }
        d.cost = d.kernel_cost + d.overhead;
        r.total += d.cost;
        r.error_vs_oracle += d.cost - total_cost(row.timings, best, iterations);
        correct += c.kernel == best ? 1 : 0;
        r.rows.push_back(d);
    }
    r.accuracy = rows.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(rows.size());
    return r;
}

EvalReport evaluate(const SelectionModel& model, std::span<const DatasetRow> rows, int iterations)
{
    if (rows.empty()) {
        throw EmptyInputError("no rows to evaluate");
    }
    if (iterations < 1) {
        throw std::invalid_argument("iteration count must be >= 1");
    }
    EvalReport report;
    report.iterations = iterations;
    report.kernels = model.kernels;
    const std::size_t n = rows.size();
    std::vector<Choice> oracle(n), known(n), gathered(n), selector(n);
    FixedClock clock; // inference time is not part of the realized cost
    for (std::size_t i = 0; i < n; ++i) {
        const DatasetRow& row = rows[i];
        if (row.timings.size() != model.kernels.size()) {
            throw SchemaError("row '" + row.name + "' has timings for " + std::to_string(row.timings.size()) +
                              " kernels, the model knows " + std::to_string(model.kernels.size()));
        }
        if (!row.gathered) {
            throw SchemaError("row '" + row.name + "' has no gathered features");
        }
        report.names.push_back(row.name);
        const GatheredFeatures& g = *row.gathered;
        oracle[i] = {oracle_choice(row, iterations), 0.0, std::nullopt};
        known[i] = {model.known_tree.predict(known_vector(row.known, iterations)), 0.0, Path::use_known};
        gathered[i] = {model.gathered_tree.predict(gathered_vector(row.known, g, iterations)), g.collection_time,
                       Path::use_gathered};
        const InferenceOutcome out = infer(model, FeatureSource{row.known, g, {}}, iterations, clock);
        selector[i] = {out.kernel, out.charged_overhead, out.path};
    }
    report.predictors.push_back(score("oracle", rows, oracle, iterations));
    report.predictors.push_back(score("known", rows, known, iterations));
    report.predictors.push_back(score("gathered", rows, gathered, iterations));
    report.predictors.push_back(score("selector", rows, selector, iterations));
    for (std::size_t k = 0; k < model.kernels.size(); ++k) {
        std::vector<Choice> fixed(n, Choice{k, 0.0, std::nullopt});
        auto r = score(model.kernels[k], rows, fixed, iterations);
        r.fixed = true;
        report.predictors.push_back(std::move(r));
    }
    return report;
}

double geomean_speedup(const EvalReport& report, std::string_view against)
{
    const double denom = report.predictor(against).total;
    if (!(denom > 0.0)) {
        throw std::invalid_argument("speedup needs a positive reference total");
    }
    double log_sum = 0.0;
    std::size_t count = 0;
    for (const auto& p : report.predictors) {
        if (!p.fixed) {
            continue;
        }
        if (!(p.total > 0.0) || !std::isfinite(p.total)) {
            throw std::invalid_argument("baseline '" + p.name + "' has a non-positive or infinite total");
        }
        log_sum += std::log(p.total / denom);
        ++count;
    }
    if (count == 0) {
        throw std::invalid_argument("no fixed-kernel baselines");
    }
    return std::exp(log_sum / static_cast<double>(count));
}

std::string report_json(std::span<const EvalReport> reports)
{
    auto all = nlohmann::ordered_json::array();
    for (const EvalReport& r : reports) {
        nlohmann::ordered_json j;
        j["iterations"] = r.iterations;
        j["kernels"] = r.kernels;
        j["rows"] = r.names.size();
        const auto& best = r.best_fixed();
        const double selector = r.predictor("selector").total;
        j["best_fixed_kernel"] = best.name;
        j["speedup_over_best_fixed"] = best.total / selector;
        j["geomean_speedup"] = geomean_speedup(r);
        j["selector_over_oracle"] = selector / r.predictor("oracle").total;
        auto preds = nlohmann::ordered_json::array();
        for (const auto& p : r.predictors) {
            nlohmann::ordered_json jp;
            jp["name"] = p.name;
            jp["fixed"] = p.fixed;
            jp["total"] = p.total;
            jp["accuracy"] = p.accuracy;
            jp["error_vs_oracle"] = p.error_vs_oracle;
            jp["substituted"] = p.substituted;
            auto rows = nlohmann::ordered_json::array();
            for (std::size_t i = 0; i < p.rows.size(); ++i) {
                const Decision& d = p.rows[i];
                nlohmann::ordered_json jr;
                jr["name"] = r.names[i];
                jr["kernel"] = r.kernels[d.kernel];
                if (d.path) {
                    jr["path"] = path_name(*d.path);
                }
                jr["kernel_cost"] = d.kernel_cost;
                jr["overhead"] = d.overhead;
                jr["cost"] = d.cost;
                if (d.substituted) {
                    jr["substituted"] = true;
                }
                rows.push_back(std::move(jr));
            }
            jp["rows"] = std::move(rows);
            preds.push_back(std::move(jp));
        }
        j["predictors"] = std::move(preds);
        all.push_back(std::move(j));
    }
    return all.dump(1) + "\n";
}

namespace {

const std::vector<std::string> kPlotHeader{"bar", "kernel", "runtime", "overhead", "total", "substituted"};

struct Bar {
    std::string name;
    double runtime = 0.0;
    double overhead = 0.0;
};

std::string file_stem(std::string_view name)
{
    std::string s;
    for (char c : name) {
        const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '_';
        s.push_back(ok ? c : '_');
    }
    return s.empty() ? "_" : s;
}

std::string xml_escape(std::string_view s)
{
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out.push_back(c);
        }
    }
    return out;
}

std::string render_svg(std::string_view title, const std::vector<Bar>& bars)
{
    constexpr double bar_w = 36.0, gap = 14.0, left = 60.0, top = 40.0, plot_h = 260.0, label_h = 110.0;
    double peak = 0.0;
    for (const Bar& b : bars) {
        peak = std::max(peak, b.runtime + b.overhead);
    }
    const double scale = peak > 0.0 ? plot_h / peak : 0.0;
    const double width = left + static_cast<double>(bars.size()) * (bar_w + gap) + gap;
    const double height = top + plot_h + label_h;

    std::string s = fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" viewBox=\"0 0 {:.0f} {:.0f}\">\n",
        width, height, width, height);
    s += fmt::format("<text x=\"{:.1f}\" y=\"20\" font-family=\"sans-serif\" font-size=\"13\">{}</text>\n", left,
                     xml_escape(title));
    s += fmt::format("<line x1=\"{:.1f}\" y1=\"{:.1f}\" x2=\"{:.1f}\" y2=\"{:.1f}\" stroke=\"#000\"/>\n", left,
                     top + plot_h, width - gap / 2, top + plot_h);
    s += fmt::format("<text x=\"4\" y=\"{:.1f}\" font-family=\"sans-serif\" font-size=\"10\">{:.3g} s</text>\n",
                     top + 4, peak);
    for (std::size_t i = 0; i < bars.size(); ++i) {
        const Bar& b = bars[i];
        const double x = left + gap + static_cast<double>(i) * (bar_w + gap);
        const double h_run = b.runtime * scale;
        const double h_over = b.overhead * scale;
        const double base = top + plot_h;
        s += fmt::format("<rect x=\"{:.1f}\" y=\"{:.2f}\" width=\"{:.1f}\" height=\"{:.2f}\" fill=\"#2b5c8a\"/>\n", x,
                         base - h_run, bar_w, h_run);
        s += fmt::format("<rect x=\"{:.1f}\" y=\"{:.2f}\" width=\"{:.1f}\" height=\"{:.2f}\" fill=\"#9cc3e6\"/>\n", x,
                         base - h_run - h_over, bar_w, h_over);
        s += fmt::format("<text transform=\"translate({:.1f},{:.1f}) rotate(60)\" font-family=\"sans-serif\" "
                         "font-size=\"10\">{}</text>\n",
                         x + bar_w / 2, base + 12, xml_escape(b.name));
    }
    s += "</svg>\n";
    return s;
}

std::string bars_csv(const std::vector<std::vector<std::string>>& rows)
{
    std::string out = csv::format_record(kPlotHeader);
    for (const auto& r : rows) {
        out += csv::format_record(r);
    }
    return out;
}

std::string plot_dir(const EvalReport& r)
{
    return r.iterations == 1 ? "plots/single_iteration/" : "plots/multi_iteration/";
}

std::string plot_stem(const EvalReport& r, std::string_view name)
{
    return r.iterations == 1 ? file_stem(name) : file_stem(name) + "_" + std::to_string(r.iterations) + "iter";
}

std::vector<Bar> row_bars(const EvalReport& report, std::size_t row)
{
    std::vector<Bar> bars;
    for (const auto& p : report.predictors) {
        bars.push_back({p.name, p.rows[row].kernel_cost, p.rows[row].overhead});
    }
    return bars;
}

} // namespace

std::string plot_csv(const EvalReport& report, std::size_t row)
{
    std::vector<std::vector<std::string>> rows;
    for (const auto& p : report.predictors) {
        const Decision& d = p.rows.at(row);
        rows.push_back({p.name, report.kernels[d.kernel], csv::format_real(d.kernel_cost),
                        csv::format_real(d.overhead), csv::format_real(d.cost), d.substituted ? "1" : "0"});
    }
    return bars_csv(rows);
}

std::string aggregate_csv(const EvalReport& report)
{
    std::vector<std::vector<std::string>> rows;
    for (const auto& p : report.predictors) {
        double runtime = 0.0;
        double overhead = 0.0;
        for (const Decision& d : p.rows) {
            runtime += d.kernel_cost;
            overhead += d.overhead;
        }
        rows.push_back({p.name, p.fixed ? p.name : "", csv::format_real(runtime), csv::format_real(overhead),
                        csv::format_real(p.total), p.substituted ? "1" : "0"});
    }
    return bars_csv(rows);
}

std::vector<OutputFile> plot_files(const EvalReport& report)
{
    std::vector<OutputFile> files;
    const std::string dir = plot_dir(report);
    for (std::size_t i = 0; i < report.names.size(); ++i) {
        const std::string stem = dir + plot_stem(report, report.names[i]);
        files.push_back({stem + ".csv", plot_csv(report, i)});
        files.push_back({stem + ".svg",
                         render_svg(fmt::format("{} ({} iterations)", report.names[i], report.iterations),
                                    row_bars(report, i))});
    }
    std::vector<Bar> totals;
    for (const auto& p : report.predictors) {
        Bar b{p.name, 0.0, 0.0};
        for (const Decision& d : p.rows) {
            b.runtime += d.kernel_cost;
            b.overhead += d.overhead;
        }
        totals.push_back(b);
    }
    const std::string stem = dir + plot_stem(report, "_aggregate");
    files.push_back({stem + ".csv", aggregate_csv(report)});
    files.push_back(
        {stem + ".svg", render_svg(fmt::format("all matrices ({} iterations)", report.iterations), totals)});
    return files;
}

} // namespace kselect::eval
