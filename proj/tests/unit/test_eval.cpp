#include <gtest/gtest.h>

#include <cmath>
#include <json.hpp>

#include "kselect/csv.hpp"
#include "kselect/error.hpp"
#include "kselect/eval.hpp"
#include "kselect/synth.hpp"

using namespace kselect;
using namespace kselect::eval;

namespace {

DatasetRow make_row(std::string name, KernelTimings t, double coll = 0.5)
{
    DatasetRow r;
    r.name = std::move(name);
    r.known = {10, 10, 30};
    r.gathered = GatheredFeatures{0.3, 0.1, 0.2, 0.01, coll};
    r.timings = std::move(t);
    return r;
}

std::vector<DatasetRow> three_rows()
{
    return {make_row("a", {KernelTiming{1, 0}, KernelTiming{3, 0}, KernelTiming{2, 0}}),
            make_row("b", {KernelTiming{4, 0}, KernelTiming{2, 0}, KernelTiming{5, 0}}),
            make_row("c", {KernelTiming{2, 1}, std::nullopt, KernelTiming{7, 0}})};
}

Dataset synthetic(std::uint64_t seed)
{
    const auto spec = synth::parse_corpus_config("seed = " + std::to_string(seed) +
                                                 "\nrow_cost = 1e-10\ncollect_latency = 2e-7\ncollect_row_cost = 1e-10\n"
                                                 "generator = power_law count=30 rows=1000:20000 row_nnz=1:6 exponent=1.5:3\n"
                                                 "generator = dense_row count=15 rows=1000:20000 row_nnz=1:3 dense_fraction=0.05:0.5\n");
    const auto c = synth::generate_corpus(spec);
    return join_tables(c.tables.elapsed, c.tables.preprocess, c.metadata);
}

double column_sum(const std::string& csv_text, std::size_t row, std::size_t col)
{
    return *csv::parse_real(csv::parse(csv_text).rows.at(row).fields.at(col));
}

} // namespace

TEST(Score, OracleAgainstItselfHasNoError)
{
    const auto rows = three_rows();
    std::vector<Choice> choices;
    for (const auto& r : rows) {
        choices.push_back({oracle_choice(r, 1), 0.0, std::nullopt});
    }
    const auto res = score("oracle", rows, choices, 1);
    EXPECT_EQ(res.error_vs_oracle, 0.0);
    EXPECT_EQ(res.accuracy, 1.0);
    EXPECT_EQ(res.total, 1 + 2 + 3);
}

TEST(Score, AlwaysWorstErrorIsHandSum)
{
    const auto rows = three_rows();
    // worst per row: a->1 (3), b->2 (5), c->2 (7); oracle 1, 2, 3
    const std::vector<Choice> worst{{1, 0, {}}, {2, 0, {}}, {2, 0, {}}};
    const auto res = score("worst", rows, worst, 1);
    EXPECT_EQ(res.error_vs_oracle, (3 - 1) + (5 - 2) + (7 - 3));
    EXPECT_EQ(res.accuracy, 0.0);
}

TEST(Score, MissingKernelChargedWorstMeasured)
{
    const auto rows = three_rows();
    const std::vector<Choice> pick1{{1, 0, {}}, {1, 0, {}}, {1, 0.25, {}}};
    const auto res = score("k1", rows, pick1, 1);
    EXPECT_TRUE(res.substituted);
    EXPECT_FALSE(res.rows[0].substituted);
    EXPECT_TRUE(res.rows[2].substituted);
    EXPECT_EQ(res.rows[2].kernel_cost, 7.0);
    EXPECT_EQ(res.rows[2].cost, 7.25);
    EXPECT_THROW(score("x", rows, std::vector<Choice>{}, 1), std::invalid_argument);
}

TEST(Geomean, Examples)
{
    EvalReport r;
    PredictorResult sel{"selector", false, {}, 1.0};
    PredictorResult a{"A", true, {}, 2.0};
    PredictorResult b{"B", true, {}, 8.0};
    r.predictors = {sel, a, b};
    EXPECT_DOUBLE_EQ(geomean_speedup(r), 4.0);
    EXPECT_EQ(r.best_fixed().name, "A");
    r.predictors = {sel, PredictorResult{"only", true, {}, 1.0}};
    EXPECT_EQ(geomean_speedup(r), 1.0);
    r.predictors = {sel};
    EXPECT_THROW(geomean_speedup(r), std::invalid_argument);
    EXPECT_THROW(r.best_fixed(), std::out_of_range);
    EXPECT_THROW(r.predictor("nobody"), std::out_of_range);
}

TEST(Evaluate, InvariantsOnSyntheticCorpus)
{
    const auto data = synthetic(3);
    const auto model = train_model(data, std::vector<int>{1, 20}, {});
    for (int k : {1, 20, 300}) {
        const auto rep = evaluate(model, data.rows, k);
        ASSERT_EQ(rep.predictors.size(), model_predictor_count + data.kernels.size());
        EXPECT_EQ(rep.predictors[0].name, "oracle");
        EXPECT_EQ(rep.predictors[3].name, "selector");
        const auto& oracle = rep.predictor("oracle");
        for (const auto& p : rep.predictors) {
            double sum = 0, err = 0;
            for (std::size_t i = 0; i < p.rows.size(); ++i) {
                EXPECT_GE(p.rows[i].cost, oracle.rows[i].cost);
                sum += p.rows[i].cost;
                err += p.rows[i].cost - oracle.rows[i].cost;
                if (p.rows[i].path == Path::use_known || !p.rows[i].path) {
                    EXPECT_EQ(p.rows[i].overhead, 0.0);
                }
            }
            EXPECT_EQ(p.total, sum);
            EXPECT_EQ(p.error_vs_oracle, err);
        }
        EXPECT_GE(geomean_speedup(rep, "oracle"), 1.0);
        EXPECT_EQ(oracle.accuracy, 1.0);
    }
}

TEST(Evaluate, Errors)
{
    const auto data = synthetic(4);
    const auto model = train_model(data, std::vector<int>{1}, {});
    EXPECT_THROW(evaluate(model, std::vector<DatasetRow>{}, 1), EmptyInputError);
    auto rows = data.rows;
    rows[0].timings.pop_back();
    EXPECT_THROW(evaluate(model, rows, 1), SchemaError);
    rows = data.rows;
    rows[1].gathered.reset();
    EXPECT_THROW(evaluate(model, rows, 1), SchemaError);
}

TEST(Plots, LayoutAndSums)
{
    const auto data = synthetic(5);
    const auto model = train_model(data, std::vector<int>{1}, {});
    std::vector<DatasetRow> one{data.rows[0]};
    const auto single = evaluate(model, one, 1);
    const auto files = plot_files(single);
    ASSERT_EQ(files.size(), 4u);
    EXPECT_EQ(files[0].path, "plots/single_iteration/" + data.rows[0].name + ".csv");
    EXPECT_EQ(files[1].path, "plots/single_iteration/" + data.rows[0].name + ".svg");
    EXPECT_EQ(files[2].path, "plots/single_iteration/_aggregate.csv");
    EXPECT_EQ(csv::parse(files[0].content).rows.size(), data.kernels.size() + 4);
    EXPECT_EQ(files[1].content.rfind("<svg", 0), 0u);

    const auto rep = evaluate(model, data.rows, 7);
    const auto many = plot_files(rep);
    EXPECT_EQ(many.size(), 2 * data.rows.size() + 2);
    EXPECT_EQ(many[0].path, "plots/multi_iteration/" + data.rows[0].name + "_7iter.csv");
    const std::string agg = aggregate_csv(rep);
    for (std::size_t bar = 0; bar < rep.predictors.size(); ++bar) {
        for (std::size_t col : {2u, 3u, 4u}) {
            double sum = 0;
            for (std::size_t i = 0; i < rep.names.size(); ++i) {
                sum += column_sum(plot_csv(rep, i), bar, col);
            }
            EXPECT_EQ(sum, column_sum(agg, bar, col)) << bar << " " << col;
        }
    }
    // known-path bars carry no overhead
    const auto& known = rep.predictor("known");
    for (std::size_t i = 0; i < rep.names.size(); ++i) {
        EXPECT_EQ(column_sum(plot_csv(rep, i), 1, 3), 0.0);
        EXPECT_EQ(known.rows[i].overhead, 0.0);
    }
    EXPECT_EQ(plot_files(rep)[5].content, many[5].content);
}

TEST(Report, JsonCarriesBothBaselines)
{
    const auto data = synthetic(6);
    const auto model = train_model(data, std::vector<int>{1}, {});
    const std::vector<EvalReport> reps{evaluate(model, data.rows, 1), evaluate(model, data.rows, 50)};
    const auto j = nlohmann::json::parse(report_json(reps));
    ASSERT_EQ(j.size(), 2u);
    EXPECT_EQ(j[0]["iterations"], 1);
    EXPECT_EQ(j[1]["iterations"], 50);
    EXPECT_TRUE(j[0].contains("best_fixed_kernel"));
    EXPECT_TRUE(j[0].contains("geomean_speedup"));
    EXPECT_TRUE(j[0].contains("selector_over_oracle"));
    EXPECT_EQ(j[0]["predictors"].size(), model_predictor_count + data.kernels.size());
    EXPECT_EQ(report_json(reps), report_json(reps));
}
