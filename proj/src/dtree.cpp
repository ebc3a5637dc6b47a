#include "kselect/dtree.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "kselect/csv.hpp"
#include "kselect/error.hpp"

namespace kselect::dtree {

FeatureMatrix::FeatureMatrix(std::size_t n_features, std::vector<double> data)
    : n_features_(n_features), data_(std::move(data))
{
    if (n_features_ == 0 ? !data_.empty() : data_.size() % n_features_ != 0) {
        throw std::invalid_argument("feature data is not a whole number of rows");
    }
}

void FeatureMatrix::add_row(std::span<const double> row)
{
    if (row.size() != n_features_) {
        throw std::invalid_argument("row has " + std::to_string(row.size()) + " features, expected " +
                                    std::to_string(n_features_));
    }
    data_.insert(data_.end(), row.begin(), row.end());
}

DecisionTree::DecisionTree(std::vector<Node> nodes, std::size_t n_classes, int max_depth,
                           std::vector<std::string> feature_names)
    : nodes_(std::move(nodes)), n_classes_(n_classes), max_depth_(max_depth), feature_names_(std::move(feature_names))
{
    if (nodes_.empty()) {
        throw std::invalid_argument("tree has no nodes");
    }
    if (n_classes_ == 0) {
        throw std::invalid_argument("tree needs at least one class");
    }
    if (max_depth_ < 0) {
        throw std::invalid_argument("max_depth must be >= 0");
    }
    std::vector<int> visits(nodes_.size(), 0);
    // Explicit stack of (node, depth).
    std::vector<std::pair<int, int>> stack{{0, 0}};
    while (!stack.empty()) {
        const auto [id, d] = stack.back();
        stack.pop_back();
        if (++visits[id] > 1) {
            throw std::invalid_argument("node " + std::to_string(id) + " is reachable more than once");
        }
        depth_ = std::max(depth_, d);
        const Node& n = nodes_[id];
        if (n.is_leaf()) {
            if (n.label >= n_classes_) {
                throw std::invalid_argument("leaf " + std::to_string(id) + " has label out of range");
            }
            continue;
        }
        if (static_cast<std::size_t>(n.feature) >= feature_names_.size()) {
            throw std::invalid_argument("split " + std::to_string(id) + " uses an unknown feature");
        }
        for (int child : {n.left, n.right}) {
            if (child <= 0 || static_cast<std::size_t>(child) >= nodes_.size()) {
                throw std::invalid_argument("split " + std::to_string(id) + " has an invalid child");
            }
            stack.emplace_back(child, d + 1);
        }
    }
    if (std::find(visits.begin(), visits.end(), 0) != visits.end()) {
        throw std::invalid_argument("tree has unreachable nodes");
    }
    if (depth_ > max_depth_) {
        throw std::invalid_argument("tree depth exceeds max_depth");
    }
}

DecisionTree DecisionTree::constant(std::size_t label, std::size_t n_classes, std::vector<std::string> feature_names)
{
    Node leaf;
    leaf.label = label;
    return DecisionTree({leaf}, n_classes, 0, std::move(feature_names));
}

std::size_t DecisionTree::predict(std::span<const double> x) const
{
    if (x.size() != feature_names_.size()) {
        throw std::invalid_argument("predict: expected " + std::to_string(feature_names_.size()) +
                                    " features, got " + std::to_string(x.size()));
    }
    const Node* n = &nodes_.front();
    while (!n->is_leaf()) {
        n = &nodes_[x[n->feature] <= n->threshold ? n->left : n->right];
    }
    return n->label;
}

double gini(std::span<const std::size_t> labels)
{
    if (labels.empty()) {
        throw std::invalid_argument("gini of an empty multiset");
    }
    const std::size_t n_classes = *std::max_element(labels.begin(), labels.end()) + 1;
    std::vector<std::size_t> counts(n_classes, 0);
    for (std::size_t l : labels) {
        ++counts[l];
    }
    const double n = static_cast<double>(labels.size());
    double sum = 0.0;
    for (std::size_t c : counts) {
        const double p = static_cast<double>(c) / n;
        sum += p * p;
    }
    return 1.0 - sum;
}

namespace {

using wide = unsigned __int128;

/// sum_c count_c^2
wide sum_sq(const std::vector<std::size_t>& counts)
{
    wide s = 0;
    for (std::size_t c : counts) {
        s += static_cast<wide>(c) * c;
    }
    return s;
}

/// Purity score of a split, sum_L c^2/n_L + sum_R c^2/n_R, as num/den.
/// Larger is purer; weighted Gini = 1 - score/n.
struct Score {
    wide num;
    wide den;

    bool beats(const Score& o) const { return num * o.den > o.num * den; }
};

double midpoint(double a, double b)
{
    double t = a / 2.0 + b / 2.0;
    if (t >= b || t < a) {
        t = a;
    }
    return t;
}

struct Candidate {
    std::size_t feature;
    double threshold;
    Score score;
};

std::optional<Candidate> search(const FeatureMatrix& x, std::span<const std::size_t> y,
                                std::span<const std::size_t> samples, std::size_t n_classes,
                                std::size_t min_samples_leaf)
{
    const std::size_t n = samples.size();
    if (n < 2 || n < 2 * min_samples_leaf) {
        return std::nullopt;
    }
    std::vector<std::size_t> total(n_classes, 0);
    for (std::size_t s : samples) {
        ++total[y[s]];
    }
    // Parent score sum c^2 / n.
    const Score parent{sum_sq(total), n};

    std::optional<Candidate> best;
    std::vector<std::size_t> order(samples.begin(), samples.end());
    std::vector<std::size_t> left(n_classes);
    std::vector<std::size_t> right(n_classes);
    for (std::size_t f = 0; f < x.n_features(); ++f) {
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return x.at(a, f) < x.at(b, f); });
        std::fill(left.begin(), left.end(), 0);
        right = total;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const std::size_t lab = y[order[i]];
            ++left[lab];
            --right[lab];
            const double lo = x.at(order[i], f);
            const double hi = x.at(order[i + 1], f);
            if (!(lo < hi)) {
                continue;
            }
            const std::size_t n_left = i + 1;
            const std::size_t n_right = n - n_left;
            if (n_left < min_samples_leaf || n_right < min_samples_leaf) {
                continue;
            }
            const Score s{sum_sq(left) * n_right + sum_sq(right) * n_left, static_cast<wide>(n_left) * n_right};
            if (!s.beats(parent)) {
                continue;
            }
            if (!best || s.beats(best->score)) {
                best = Candidate{f, midpoint(lo, hi), s};
            }
        }
    }
    return best;
}

/// Weighted variant: score = sum_L w_c^2/W_L + sum_R w_c^2/W_R in floating
/// point. A candidate must win by a relative margin, so rounding noise never
/// creates a split or reorders near-ties.
struct WeightedCandidate {
    std::size_t feature;
    double threshold;
    long double score;
};

constexpr long double kRelativeMargin = 1e-12L;

bool clearly_above(long double a, long double b)
{
    return a > b + kRelativeMargin * std::max(std::abs(b), 1e-300L);
}

long double weighted_score(const std::vector<long double>& sums)
{
    long double total = 0.0L;
    long double sq = 0.0L;
    for (long double w : sums) {
        w = std::max(w, 0.0L); // subtraction residue
        total += w;
        sq += w * w;
    }
    return total > 0.0L ? sq / total : 0.0L;
}

std::optional<WeightedCandidate> search_weighted(const FeatureMatrix& x, std::span<const std::size_t> y,
                                                 std::span<const double> w, std::span<const std::size_t> samples,
                                                 std::size_t n_classes, std::size_t min_samples_leaf)
{
    const std::size_t n = samples.size();
    if (n < 2 || n < 2 * min_samples_leaf) {
        return std::nullopt;
    }
    std::vector<long double> total(n_classes, 0.0L);
    for (std::size_t s : samples) {
        total[y[s]] += w[s];
    }
    const long double parent = weighted_score(total);

    std::optional<WeightedCandidate> best;
    std::vector<std::size_t> order(samples.begin(), samples.end());
    std::vector<long double> left(n_classes);
    std::vector<long double> right(n_classes);
    for (std::size_t f = 0; f < x.n_features(); ++f) {
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return x.at(a, f) < x.at(b, f); });
        std::fill(left.begin(), left.end(), 0.0L);
        right = total;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            left[y[order[i]]] += w[order[i]];
            right[y[order[i]]] -= w[order[i]];
            const double lo = x.at(order[i], f);
            const double hi = x.at(order[i + 1], f);
            if (!(lo < hi)) {
                continue;
            }
            const std::size_t n_left = i + 1;
            if (n_left < min_samples_leaf || n - n_left < min_samples_leaf) {
                continue;
            }
            const long double score = weighted_score(left) + weighted_score(right);
            if (!clearly_above(score, parent)) {
                continue;
            }
            if (!best || clearly_above(score, best->score)) {
                best = WeightedCandidate{f, midpoint(lo, hi), score};
            }
        }
    }
    return best;
}

std::size_t infer_classes(std::span<const std::size_t> y)
{
    return y.empty() ? 1 : *std::max_element(y.begin(), y.end()) + 1;
}

std::size_t majority(std::span<const std::size_t> y, std::span<const std::size_t> samples, std::size_t n_classes)
{
    std::vector<std::size_t> counts(n_classes, 0);
    for (std::size_t s : samples) {
        ++counts[y[s]];
    }
    // max_element returns the first maximum, i.e. the lowest class index.
    return static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

std::size_t weighted_majority(std::span<const std::size_t> y, std::span<const double> w,
                              std::span<const std::size_t> samples, std::size_t n_classes)
{
    std::vector<long double> sums(n_classes, 0.0L);
    for (std::size_t s : samples) {
        sums[y[s]] += w[s];
    }
    return static_cast<std::size_t>(std::max_element(sums.begin(), sums.end()) - sums.begin());
}

struct Builder {
    const FeatureMatrix& x;
    std::span<const std::size_t> y;
    std::span<const double> w; ///< empty = unweighted
    std::size_t n_classes;
    TreeParams params;
    std::vector<Node> nodes;

    int grow(std::vector<std::size_t> samples, int depth)
    {
        const int id = static_cast<int>(nodes.size());
        nodes.push_back(Node{});
        nodes[id].label = w.empty() ? majority(y, samples, n_classes) : weighted_majority(y, w, samples, n_classes);

        const bool pure = std::all_of(samples.begin(), samples.end(),
                                      [&](std::size_t s) { return y[s] == y[samples.front()]; });
        if (pure || depth >= params.max_depth) {
            return id;
        }
        std::size_t feature = 0;
        double threshold = 0.0;
        if (w.empty()) {
            const auto split = search(x, y, samples, n_classes, params.min_samples_leaf);
            if (!split) {
                return id;
            }
            feature = split->feature;
            threshold = split->threshold;
        } else {
            const auto split = search_weighted(x, y, w, samples, n_classes, params.min_samples_leaf);
            if (!split) {
                return id;
            }
            feature = split->feature;
            threshold = split->threshold;
        }
        std::vector<std::size_t> left;
        std::vector<std::size_t> right;
        for (std::size_t s : samples) {
            (x.at(s, feature) <= threshold ? left : right).push_back(s);
        }
        samples.clear();
        samples.shrink_to_fit();
        nodes[id].feature = static_cast<int>(feature);
        nodes[id].threshold = threshold;
        nodes[id].label = 0; // only leaves carry labels
        const int l = grow(std::move(left), depth + 1);
        const int r = grow(std::move(right), depth + 1);
        nodes[id].left = l;
        nodes[id].right = r;
        return id;
    }
};

} // namespace

std::optional<Split> best_split(const FeatureMatrix& x, std::span<const std::size_t> y,
                                std::size_t min_samples_leaf)
{
    if (y.size() != x.n_samples()) {
        throw std::invalid_argument("best_split: label count does not match sample count");
    }
    std::vector<std::size_t> samples(y.size());
    std::iota(samples.begin(), samples.end(), 0);
    const auto c = search(x, y, samples, infer_classes(y), std::max<std::size_t>(min_samples_leaf, 1));
    if (!c) {
        return std::nullopt;
    }
    const double n = static_cast<double>(y.size());
    const double score = static_cast<double>(c->score.num) / static_cast<double>(c->score.den);
    return Split{c->feature, c->threshold, std::max(0.0, 1.0 - score / n)};
}

DecisionTree train_tree(const FeatureMatrix& x, std::span<const std::size_t> y, std::size_t n_classes,
                        const TreeParams& params, std::vector<std::string> feature_names,
                        std::span<const double> weights)
{
    if (!weights.empty()) {
        if (weights.size() != y.size()) {
            throw std::invalid_argument("train_tree: weight count does not match sample count");
        }
        for (double v : weights) {
            if (!(v >= 0.0) || !std::isfinite(v)) {
                throw std::invalid_argument("train_tree: weights must be finite and non-negative");
            }
        }
    }
    if (y.empty()) {
        throw EmptyInputError("train_tree: empty training set");
    }
    if (y.size() != x.n_samples()) {
        throw std::invalid_argument("train_tree: label count does not match sample count");
    }
    if (feature_names.size() != x.n_features()) {
        throw std::invalid_argument("train_tree: feature name count does not match feature count");
    }
    if (params.max_depth < 0) {
        throw std::invalid_argument("train_tree: max_depth must be >= 0");
    }
    if (infer_classes(y) > n_classes) {
        throw std::invalid_argument("train_tree: label out of range");
    }
    TreeParams p = params;
    p.min_samples_leaf = std::max<std::size_t>(p.min_samples_leaf, 1);
    Builder b{x, y, weights, n_classes, p, {}};
    std::vector<std::size_t> all(y.size());
    std::iota(all.begin(), all.end(), 0);
    b.grow(std::move(all), 0);
    return DecisionTree(std::move(b.nodes), n_classes, params.max_depth, std::move(feature_names));
}

double accuracy(const DecisionTree& tree, const FeatureMatrix& x, std::span<const std::size_t> y)
{
    if (y.empty()) {
        return 0.0;
    }
    std::size_t hits = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        hits += tree.predict(x.row(i)) == y[i];
    }
    return static_cast<double>(hits) / static_cast<double>(y.size());
}

namespace {
constexpr const char* kTreeFormat = "kselect-dtree";
constexpr int kTreeVersion = 1;
} // namespace

std::string serialize(const DecisionTree& tree)
{
    nlohmann::ordered_json j;
    j["format"] = kTreeFormat;
    j["version"] = kTreeVersion;
    j["n_classes"] = tree.n_classes();
    j["max_depth"] = tree.max_depth();
    j["features"] = tree.feature_names();
    auto nodes = nlohmann::ordered_json::array();
    for (const Node& n : tree.nodes()) {
        nlohmann::ordered_json jn;
        if (n.is_leaf()) {
            jn["leaf"] = n.label;
        } else {
            jn["feature"] = n.feature;
            jn["threshold"] = n.threshold;
            jn["left"] = n.left;
            jn["right"] = n.right;
        }
        nodes.push_back(std::move(jn));
    }
    j["nodes"] = std::move(nodes);
    return j.dump(1);
}

DecisionTree deserialize(std::string_view text)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("tree: invalid JSON: ") + e.what());
    }
    if (!j.is_object() || j.value("format", "") != kTreeFormat) {
        throw ParseError("tree: not a serialized decision tree");
    }
    if (!j.contains("version") || j["version"] != kTreeVersion) {
        throw ParseError("tree: unsupported version " + (j.contains("version") ? j["version"].dump() : "<none>"));
    }
    try {
        std::vector<Node> nodes;
        for (const auto& jn : j.at("nodes")) {
            Node n;
            if (jn.contains("leaf")) {
                n.label = jn.at("leaf").get<std::size_t>();
            } else {
                n.feature = jn.at("feature").get<int>();
                n.threshold = jn.at("threshold").get<double>();
                n.left = jn.at("left").get<int>();
                n.right = jn.at("right").get<int>();
                if (n.feature < 0) {
                    throw ParseError("tree: negative split feature");
                }
            }
            nodes.push_back(n);
        }
        return DecisionTree(std::move(nodes), j.at("n_classes").get<std::size_t>(), j.at("max_depth").get<int>(),
                            j.at("features").get<std::vector<std::string>>());
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("tree: malformed node table: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ParseError(std::string("tree: malformed node table: ") + e.what());
    }
}

std::string identifier(std::string_view name)
{
    std::string id;
    for (char c : name) {
        id.push_back(std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
    }
    if (id.empty() || std::isdigit(static_cast<unsigned char>(id.front()))) {
        id.insert(id.begin(), '_');
    }
    return id;
}

namespace {

void emit_node(std::string& out, const DecisionTree& tree, int id, const std::vector<std::string>& params,
               int indent)
{
    const std::string pad(static_cast<std::size_t>(indent) * 4, ' ');
    const Node& n = tree.nodes()[id];
    if (n.is_leaf()) {
        out += pad + "return " + std::to_string(n.label) + ";\n";
        return;
    }
    out += pad + "if (" + params[n.feature] + " <= " + csv::format_real(n.threshold) + ") {\n";
    emit_node(out, tree, n.left, params, indent + 1);
    out += pad + "} else {\n";
    emit_node(out, tree, n.right, params, indent + 1);
    out += pad + "}\n";
}

} // namespace

std::string emit_source(const DecisionTree& tree, std::string_view function_name, Dialect dialect)
{
    std::vector<std::string> params;
    std::set<std::string> used;
    for (std::size_t i = 0; i < tree.n_features(); ++i) {
        std::string p = identifier(tree.feature_names()[i]);
        while (!used.insert(p).second) {
            p += "_" + std::to_string(i);
        }
        params.push_back(std::move(p));
    }
    std::string out = dialect == Dialect::cpp ? "inline int " : "static inline int ";
    out += identifier(function_name) + "(";
    for (std::size_t i = 0; i < params.size(); ++i) {
        out += (i ? ", double " : "double ") + params[i];
    }
    if (params.empty()) {
        out += dialect == Dialect::c ? "void" : "";
    }
    out += ")\n{\n";
    std::vector<bool> read(params.size(), false);
    for (const Node& n : tree.nodes()) {
        if (!n.is_leaf()) {
            read[static_cast<std::size_t>(n.feature)] = true;
        }
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!read[i]) {
            out += "    (void)" + params[i] + ";\n";
        }
    }
    emit_node(out, tree, 0, params, 1);
    out += "}\n";
    return out;
}

} // namespace kselect::dtree
