#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kselect/clock.hpp"
#include "kselect/dataset.hpp"
#include "kselect/dtree.hpp"

namespace kselect {

enum class Path : std::size_t { use_known = 0, use_gathered = 1 };

/// "known" or "gathered".
std::string_view path_name(Path p);

/// How selector examples are weighted. `regret` weighs each (row, k) by the
/// realized-cost gap between the two paths, so the tree minimises cost rather
/// than miscount; `uniform` is plain CART.
enum class SelectorWeighting { uniform, regret };

std::string_view weighting_name(SelectorWeighting w);
/// Throws std::invalid_argument for an unknown name.
SelectorWeighting weighting_from_name(std::string_view name);

/// Known-features classifier, gathered-features classifier, and the selector
/// that decides per input whether gathering is worth its cost. The selector
/// reads the known schema; its classes are the Path values.
struct SelectionModel {
    dtree::DecisionTree known_tree;
    dtree::DecisionTree gathered_tree;
    dtree::DecisionTree selector_tree;
    std::vector<std::string> kernels;
    std::vector<int> iterations; ///< iteration counts seen in training
    dtree::TreeParams params;
    SelectorWeighting weighting = SelectorWeighting::regret;

    friend bool operator==(const SelectionModel&, const SelectionModel&) = default;
};

/// USE_GATHERED iff the gathered prediction plus the collection cost is
/// strictly cheaper than the known prediction at k iterations.
Path selector_label(const KernelTimings& timings, std::size_t known_pred, std::size_t gathered_pred,
                    double collection_time, int iterations);

/// Labeled examples in (row, iteration) order.
std::vector<LabeledExample> known_examples(std::span<const DatasetRow> rows, std::span<const int> iterations);
std::vector<LabeledExample> gathered_examples(std::span<const DatasetRow> rows, std::span<const int> iterations);

/// Selector examples for the given sub-models: each (row, k) is labelled by
/// selector_label on the sub-models' own predictions and weighted by the
/// absolute realized-cost difference between the two paths.
std::vector<LabeledExample> selector_examples(const dtree::DecisionTree& known_tree,
                                              const dtree::DecisionTree& gathered_tree,
                                              std::span<const DatasetRow> rows, std::span<const int> iterations);

/// Trains the three trees. Deterministic: the trees depend only on the row
/// order and contents. Throws EmptyInputError without rows, kernels or
/// iteration counts, SchemaError when a row lacks gathered features, and
/// std::invalid_argument for an iteration count below 1.
SelectionModel train_model(const Dataset& data, std::span<const int> iterations, const dtree::TreeParams& params,
                           SelectorWeighting weighting = SelectorWeighting::regret);

/// Where infer gets its inputs. Known features are always present; gathered
/// ones are either precomputed (with their recorded collection_time) or
/// produced on demand by `gather`, which is only called on the gathered path.
struct FeatureSource {
    KnownFeatures known;
    std::optional<GatheredFeatures> gathered;
    std::function<GatheredFeatures()> gather;
};

/// Source backed by a matrix; gathering runs gather_features with `clock`.
/// The matrix must outlive the source.
FeatureSource matrix_source(const CsrMatrix& m, Clock& clock);

struct InferenceOutcome {
    std::size_t kernel = 0;
    Path path = Path::use_known;
    double charged_overhead = 0.0; ///< collection_time on the gathered path, else 0
    double inference_time = 0.0;   ///< measured tree evaluation time
    double predicted_total = 0.0;  ///< charged_overhead + inference_time

    friend bool operator==(const InferenceOutcome&, const InferenceOutcome&) = default;
};

/// Throws SchemaError when the selector picks the gathered path and the
/// source can neither supply nor compute gathered features.
InferenceOutcome infer(const SelectionModel& model, const FeatureSource& source, int iterations, Clock& clock);

/// Versioned JSON bundle of the three trees, vocabulary and schemas.
std::string serialize_model(const SelectionModel& model);
/// Throws ParseError for malformed input and SchemaError when the stored
/// schemas or class counts disagree with this build.
SelectionModel deserialize_model(std::string_view text);

/// One header holding <prefix>_known, <prefix>_gathered, <prefix>_selector and
/// <prefix>_dispatch, which follows infer's control flow and calls back for
/// the gathered features only when the selector asks for them.
std::string emit_header(const SelectionModel& model, dtree::Dialect dialect, std::string_view prefix = "kselect");

} // namespace kselect
