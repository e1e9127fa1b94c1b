#include "tree_grower.hpp"

#include "devfp/selection.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace devfp::classifiers {

ClassDistribution DecisionTree::distribution(std::span<const Cell> row) const
{
    const auto& counts = nodes_[leaf_index(row)].class_counts;
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    const double k = static_cast<double>(counts.size());
    ClassDistribution dist(counts.size());
    for (std::size_t c = 0; c < counts.size(); ++c)
        dist[c] = (counts[c] + 1.0) / (total + k);
    return dist;
}

std::size_t DecisionTree::leaf_index(std::span<const Cell> row) const
{
    std::size_t idx = 0;
    while (const auto& split = nodes_[idx].split) {
        const Cell& value = row[split->attribute];
        const bool go_left = value ? *value <= split->threshold : split->absent_left;
        idx = go_left ? split->left : split->right;
    }
    return idx;
}

std::size_t DecisionTree::leaf_count() const
{
    return static_cast<std::size_t>(
        std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return !n.split; }));
}

std::size_t DecisionTree::depth() const
{
    if (nodes_.empty())
        return 0;
    std::size_t best = 0;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
    while (!stack.empty()) {
        const auto [idx, d] = stack.back();
        stack.pop_back();
        best = std::max(best, d);
        if (const auto& s = nodes_[idx].split) {
            stack.push_back({s->left, d + 1});
            stack.push_back({s->right, d + 1});
        }
    }
    return best;
}

namespace detail {

TreeGrower::TreeGrower(const Dataset& data, GrowConfig config)
    : data_(data), config_(config), class_count_(data.class_count())
{
    config_.min_leaf = std::max<std::size_t>(config_.min_leaf, 1);
}

DecisionTree TreeGrower::grow(std::vector<std::size_t> rows)
{
    nodes_.clear();
    grow_node(rows);
    return DecisionTree(std::move(nodes_));
}

std::vector<double> TreeGrower::counts_of(std::span<const std::size_t> rows) const
{
    std::vector<double> counts(class_count_, 0.0);
    for (std::size_t r : rows)
        counts[*data_.label(r)] += 1.0;
    return counts;
}

selection::AttributeScore TreeGrower::score(std::span<const std::size_t> rows, std::size_t attribute)
{
    buffer_.clear();
    for (std::size_t r : rows)
        if (const Cell& v = data_.at(r, attribute))
            buffer_.push_back({*v, *data_.label(r)});
    return selection::score_present(buffer_, rows.size(), class_count_, config_.min_leaf);
}

std::optional<TreeGrower::Choice> TreeGrower::choose_split(std::span<const std::size_t> rows)
{
    const std::size_t k = data_.attribute_count();
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    if (config_.sample_size && config_.rng)
        config_.rng->shuffle(std::span<std::size_t>(order));
    const std::size_t window = config_.sample_size ? *config_.sample_size : k;

    struct Candidate {
        std::size_t attribute;
        selection::AttributeScore score;
    };
    std::vector<Candidate> positive;
    std::optional<Choice> fallback;
    for (std::size_t i = 0; i < k; ++i) {
        // Sampled trees look past their window only while no attribute has shown positive gain.
        if (i >= window && !positive.empty())
            break;
        const std::size_t a = order[i];
        auto s = score(rows, a);
        if (!s.split_threshold)
            continue;
        if (s.info_gain > selection::kGainEpsilon)
            positive.push_back({a, std::move(s)});
        else if (!fallback || a < fallback->attribute)
            fallback = Choice{a, *s.split_threshold};
    }

    if (positive.empty())
        return fallback;

    double average_gain = 0;
    for (const auto& c : positive)
        average_gain += c.score.info_gain;
    average_gain /= static_cast<double>(positive.size());

    const Candidate* best = nullptr;
    for (const auto& c : positive) {
        if (c.score.info_gain + selection::kGainEpsilon < average_gain)
            continue;
        if (!best || c.score.gain_ratio > best->score.gain_ratio ||
            (c.score.gain_ratio == best->score.gain_ratio && c.attribute < best->attribute))
            best = &c;
    }
    return Choice{best->attribute, *best->score.split_threshold};
}

std::uint32_t TreeGrower::grow_node(std::vector<std::size_t>& rows)
{
    const auto idx = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back(TreeNode{counts_of(rows), std::nullopt});

    const auto& counts = nodes_[idx].class_counts;
    const auto classes = std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0; });
    if (classes <= 1 || rows.size() < 2 * config_.min_leaf)
        return idx;

    const auto choice = choose_split(rows);
    if (!choice)
        return idx;

    std::vector<std::size_t> left, right, absent;
    for (std::size_t r : rows) {
        const Cell& v = data_.at(r, choice->attribute);
        if (!v)
            absent.push_back(r);
        else if (*v <= choice->threshold)
            left.push_back(r);
        else
            right.push_back(r);
    }
    if (left.empty() || right.empty())
        return idx;
    const bool absent_left = left.size() >= right.size();
    auto& absent_side = absent_left ? left : right;
    absent_side.insert(absent_side.end(), absent.begin(), absent.end());
    std::vector<std::size_t>().swap(rows);
    std::vector<std::size_t>().swap(absent);

    TreeSplit split;
    split.attribute = choice->attribute;
    split.threshold = choice->threshold;
    split.absent_left = absent_left;
    split.left = grow_node(left);
    split.right = grow_node(right);
    nodes_[idx].split = split;
    return idx;
}

double pessimistic_added_errors(double n, double e, double confidence)
{
    if (e < 1) {
        const double base = n * (1 - std::pow(confidence, 1 / n));
        if (e == 0)
            return base;
        return base + e * (pessimistic_added_errors(n, 1, confidence) - base);
    }
    if (e + 0.5 >= n)
        return std::max(n - e, 0.0);
    const double z = boost::math::quantile(boost::math::normal(), 1 - confidence);
    const double f = (e + 0.5) / n;
    const double r =
        (f + z * z / (2 * n) + z * std::sqrt(f / n - f * f / n + z * z / (4 * n * n))) / (1 + z * z / n);
    return r * n - e;
}

namespace {

double leaf_estimate(const std::vector<double>& counts, double confidence)
{
    const double n = std::accumulate(counts.begin(), counts.end(), 0.0);
    const double errors = n - *std::max_element(counts.begin(), counts.end());
    return errors + pessimistic_added_errors(n, errors, confidence);
}

double prune_node(std::vector<TreeNode>& nodes, std::size_t idx, double confidence)
{
    const double as_leaf = leaf_estimate(nodes[idx].class_counts, confidence);
    if (!nodes[idx].split)
        return as_leaf;
    const TreeSplit split = *nodes[idx].split;
    const double subtree = prune_node(nodes, split.left, confidence) + prune_node(nodes, split.right, confidence);
    if (as_leaf <= subtree + 1e-9) {
        nodes[idx].split.reset();
        return as_leaf;
    }
    return subtree;
}

std::uint32_t copy_reachable(const std::vector<TreeNode>& from, std::size_t idx, std::vector<TreeNode>& to)
{
    const auto out = static_cast<std::uint32_t>(to.size());
    to.push_back(TreeNode{from[idx].class_counts, std::nullopt});
    if (const auto& s = from[idx].split) {
        TreeSplit split = *s;
        split.left = copy_reachable(from, s->left, to);
        split.right = copy_reachable(from, s->right, to);
        to[out].split = split;
    }
    return out;
}

} // namespace

DecisionTree prune(const DecisionTree& tree, double confidence)
{
    std::vector<TreeNode> nodes = tree.nodes();
    if (nodes.empty())
        return tree;
    prune_node(nodes, 0, confidence);
    std::vector<TreeNode> compact;
    copy_reachable(nodes, 0, compact);
    return DecisionTree(std::move(compact));
}

} // namespace detail

} // namespace devfp::classifiers
