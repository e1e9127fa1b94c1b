#pragma once

#include "devfp/classifiers.hpp"
#include "devfp/selection.hpp"

namespace devfp::classifiers::detail {

struct GrowConfig {
    std::size_t min_leaf = 2;
    std::optional<std::size_t> sample_size; // set for random trees
    Rng* rng = nullptr;
};

/// Top-down growth shared by C4.5 and random trees. At each node the split attribute
/// maximises gain ratio among candidates whose (missing-scaled) information gain is
/// positive and at least the candidates' average; rows with the split attribute
/// absent follow the child that received more present rows. An impure node where no
/// candidate has positive gain (e.g. XOR-style labels) still splits on the lowest-index
/// attribute that admits a threshold, so consistent data is always fit exactly.
class TreeGrower {
public:
    TreeGrower(const Dataset& data, GrowConfig config);

    /// Every row must be labeled; rows may repeat (bootstrap samples).
    DecisionTree grow(std::vector<std::size_t> rows);

private:
    struct Choice {
        std::size_t attribute;
        double threshold;
    };

    std::uint32_t grow_node(std::vector<std::size_t>& rows);
    std::optional<Choice> choose_split(std::span<const std::size_t> rows);
    selection::AttributeScore score(std::span<const std::size_t> rows, std::size_t attribute);
    std::vector<double> counts_of(std::span<const std::size_t> rows) const;

    const Dataset& data_;
    GrowConfig config_;
    std::size_t class_count_;
    std::vector<TreeNode> nodes_;
    std::vector<selection::LabeledValue> buffer_;
};

/// C4.5 upper-confidence-bound error increment for a leaf with `e` errors out of `n`.
double pessimistic_added_errors(double n, double e, double confidence);

/// Bottom-up pessimistic pruning: a subtree collapses into a leaf when the leaf's
/// estimated errors do not exceed the subtree's.
DecisionTree prune(const DecisionTree& tree, double confidence);

} // namespace devfp::classifiers::detail
