#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace kselect::dtree {

/// Row-major sample matrix: sample i occupies [i*n_features, (i+1)*n_features).
class FeatureMatrix {
public:
    explicit FeatureMatrix(std::size_t n_features) : n_features_(n_features) {}
    FeatureMatrix(std::size_t n_features, std::vector<double> data);

    void add_row(std::span<const double> row);

    std::size_t n_samples() const noexcept { return n_features_ == 0 ? 0 : data_.size() / n_features_; }
    std::size_t n_features() const noexcept { return n_features_; }
    double at(std::size_t sample, std::size_t feature) const { return data_[sample * n_features_ + feature]; }
    std::span<const double> row(std::size_t sample) const
    {
        return std::span<const double>(data_).subspan(sample * n_features_, n_features_);
    }

private:
    std::size_t n_features_;
    std::vector<double> data_;
};

/// A split node sends x left iff x[feature] <= threshold. Leaves have feature == -1.
struct Node {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    std::size_t label = 0;

    bool is_leaf() const noexcept { return feature < 0; }
    friend bool operator==(const Node&, const Node&) = default;
};

class DecisionTree {
public:
    /// Validates shape: node 0 is the root, every node is reachable exactly
    /// once, depth <= max_depth, labels < n_classes, split features index into
    /// feature_names. Throws std::invalid_argument otherwise.
    DecisionTree(std::vector<Node> nodes, std::size_t n_classes, int max_depth, std::vector<std::string> feature_names);

    /// Single-leaf tree.
    static DecisionTree constant(std::size_t label, std::size_t n_classes, std::vector<std::string> feature_names);

    /// Throws std::invalid_argument when x has the wrong dimension.
    std::size_t predict(std::span<const double> x) const;

    const std::vector<Node>& nodes() const noexcept { return nodes_; }
    std::size_t n_classes() const noexcept { return n_classes_; }
    std::size_t n_features() const noexcept { return feature_names_.size(); }
    int max_depth() const noexcept { return max_depth_; }
    int depth() const noexcept { return depth_; }
    const std::vector<std::string>& feature_names() const noexcept { return feature_names_; }

    friend bool operator==(const DecisionTree&, const DecisionTree&) = default;

private:
    std::vector<Node> nodes_;
    std::size_t n_classes_;
    int max_depth_;
    int depth_ = 0;
    std::vector<std::string> feature_names_;
};

/// 1 - sum_c p_c^2. Throws std::invalid_argument on an empty multiset.
double gini(std::span<const std::size_t> labels);

struct Split {
    std::size_t feature = 0;
    double threshold = 0.0;
    double weighted_impurity = 0.0;
};

/// Minimises n_L/n * gini(L) + n_R/n * gini(R) over midpoints between
/// consecutive distinct values of each feature. Candidate scores are compared
/// as exact rationals, so ties resolve to the lower feature index and then the
/// lower threshold. Returns nullopt when no candidate strictly lowers the
/// parent impurity.
std::optional<Split> best_split(const FeatureMatrix& x, std::span<const std::size_t> y,
                                std::size_t min_samples_leaf = 1);

struct TreeParams {
    int max_depth = 5;
    std::size_t min_samples_leaf = 1;

    friend bool operator==(const TreeParams&, const TreeParams&) = default;
};

/// Greedy CART with Gini impurity. Leaves take the majority label (ties go to
/// the lowest class index). Deterministic for a fixed input order.
/// With `weights`, class counts become weight sums: impurity and leaf
/// majorities are weighted, while min_samples_leaf still counts samples.
DecisionTree train_tree(const FeatureMatrix& x, std::span<const std::size_t> y, std::size_t n_classes,
                        const TreeParams& params, std::vector<std::string> feature_names,
                        std::span<const double> weights = {});

/// Fraction of samples whose prediction equals the label.
double accuracy(const DecisionTree& tree, const FeatureMatrix& x, std::span<const std::size_t> y);

/// Versioned JSON text; thresholds round-trip exactly.
std::string serialize(const DecisionTree& tree);
/// Throws ParseError on a version mismatch or malformed node table.
DecisionTree deserialize(std::string_view text);

enum class Dialect { cpp, c };

/// Self-contained function of nested if/else equivalent to predict. Parameters
/// are the tree's feature names (made into identifiers), in order.
std::string emit_source(const DecisionTree& tree, std::string_view function_name, Dialect dialect);

/// Turns an arbitrary name into a C identifier.
std::string identifier(std::string_view name);

} // namespace kselect::dtree
