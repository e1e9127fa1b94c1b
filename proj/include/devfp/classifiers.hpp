#pragma once

// The six supervised classifiers (C4.5/J48, random tree, random forest, Gaussian
// naive Bayes, bagging, vote) behind one train / predict_proba contract.

#include "devfp/dataset.hpp"
#include "devfp/rng.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace devfp::classifiers {

enum class ModelKind { j48, random_tree, random_forest, naive_bayes, bagging, vote };

/// CLI spelling: j48, rt, rf, nb, bagging, vote.
std::string_view to_string(ModelKind kind);
std::optional<ModelKind> parse_model_kind(std::string_view text);

struct Hyperparams {
    std::uint64_t seed = 1;
    std::size_t forest_trees = 100;
    std::optional<std::size_t> rt_feature_count; // default floor(log2(k)) + 1
    std::size_t bagging_rounds = 10;
    double bag_fraction = 1.0;
    std::size_t c45_min_leaf = 2;
    double c45_confidence = 0.25;
    bool c45_prune = true;
    double nb_variance_floor = 1e-9;
    /// Test mode when false: ensemble members train on rows 0..m-1 in order instead of a bootstrap sample.
    bool bootstrap = true;
    std::vector<ModelKind> vote_members = {ModelKind::j48, ModelKind::bagging};

    /// Throws Error{InvalidHyperparams}.
    void validate() const;
    std::size_t feature_sample_size(std::size_t attribute_count) const;
    bool operator==(const Hyperparams&) const = default;
};

/// Probability per class index; entries >= 0 summing to 1.
using ClassDistribution = std::vector<double>;

/// Lowest index wins ties.
std::size_t argmax(std::span<const double> distribution);

struct TreeSplit {
    std::size_t attribute = 0;
    double threshold = 0; // value <= threshold goes left
    bool absent_left = true;
    std::uint32_t left = 0;
    std::uint32_t right = 0;
    bool operator==(const TreeSplit&) const = default;
};

/// Leaf iff !split. class_counts are the training rows that reached the node.
struct TreeNode {
    std::vector<double> class_counts;
    std::optional<TreeSplit> split;
    bool operator==(const TreeNode&) const = default;
};

class DecisionTree {
public:
    DecisionTree() = default;
    explicit DecisionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

    /// Laplace-smoothed distribution of the leaf reached by `row`.
    ClassDistribution distribution(std::span<const Cell> row) const;
    std::size_t leaf_index(std::span<const Cell> row) const;

    const std::vector<TreeNode>& nodes() const { return nodes_; }
    std::size_t leaf_count() const;
    std::size_t depth() const;
    bool operator==(const DecisionTree&) const = default;

private:
    std::vector<TreeNode> nodes_; // nodes_[0] is the root
};

struct ForestModel {
    std::vector<DecisionTree> trees;
    bool operator==(const ForestModel&) const = default;
};

struct BaggingModel {
    std::vector<DecisionTree> members;
    bool operator==(const BaggingModel&) const = default;
};

struct GaussianEstimate {
    double mean = 0;
    double stddev = 1;
    double present_rate = 0; // fraction of the class's rows with the attribute present
    bool observed = false;   // false: mean/stddev are the pooled all-class estimate
    bool operator==(const GaussianEstimate&) const = default;
};

struct NaiveBayesModel {
    std::vector<double> priors;                        // per class
    std::vector<std::vector<GaussianEstimate>> stats;  // [class][attribute]
    std::vector<bool> attribute_seen;                  // present in any training row
    bool operator==(const NaiveBayesModel&) const = default;
};

class TrainedModel;

struct VoteModel {
    std::vector<TrainedModel> members;
    bool operator==(const VoteModel&) const;
};

class TrainedModel {
public:
    using Body = std::variant<DecisionTree, ForestModel, NaiveBayesModel, BaggingModel, VoteModel>;

    TrainedModel(ModelKind kind, std::vector<std::string> schema, std::vector<std::string> class_names,
                 Hyperparams hyperparams, Body body);

    ModelKind kind() const { return kind_; }
    const std::vector<std::string>& schema() const { return schema_; }
    const std::vector<std::string>& class_names() const { return class_names_; }
    const Hyperparams& hyperparams() const { return hyperparams_; }
    const Body& body() const { return body_; }

    /// Throws Error{SchemaMismatch} unless `attributes` equals the training schema.
    void check_schema(std::span<const std::string> attributes) const;

    /// Throws Error{SchemaMismatch} when row.size() differs from the schema width.
    ClassDistribution predict_proba(std::span<const Cell> row) const;
    std::size_t predict(std::span<const Cell> row) const;
    const std::string& predict_name(std::span<const Cell> row) const;

    bool operator==(const TrainedModel&) const = default;

private:
    ClassDistribution distribution_unchecked(std::span<const Cell> row) const;

    ModelKind kind_;
    std::vector<std::string> schema_;
    std::vector<std::string> class_names_;
    Hyperparams hyperparams_;
    Body body_;
};

// Training. All trainers require every row to be labeled (Error{UnlabeledRow}),
// at least two rows (Error{EmptyDataset}) and two distinct classes (Error{SingleClassDataset}).

TrainedModel train_c45(const Dataset& dataset, const Hyperparams& hyperparams);
TrainedModel train_random_tree(const Dataset& dataset, const Hyperparams& hyperparams, Rng& rng);
TrainedModel train_random_tree(const Dataset& dataset, const Hyperparams& hyperparams);
/// Member i is grown from Rng(derive_seed(seed, i)): bootstrap draws first, then the tree.
/// Ensemble trainers grow members on up to `threads` threads; the result does not depend on it.
TrainedModel train_random_forest(const Dataset& dataset, const Hyperparams& hyperparams, unsigned threads = 1);
TrainedModel train_naive_bayes(const Dataset& dataset, const Hyperparams& hyperparams = {});
TrainedModel train_bagging(const Dataset& dataset, const Hyperparams& hyperparams, unsigned threads = 1);
/// Members are hyperparams.vote_members; member errors are re-thrown with the member name.
TrainedModel train_vote(std::span<const ModelKind> members, const Dataset& dataset,
                        const Hyperparams& hyperparams, unsigned threads = 1);

TrainedModel train(ModelKind kind, const Dataset& dataset, const Hyperparams& hyperparams, unsigned threads = 1);

// Persistence. Line-oriented text, version 1:
//
//   model      := "devfp-model 1" NL "kind " KIND NL schema classes hyper body "end" NL
//   schema     := "schema " N NL (NAME NL){N}
//   classes    := "classes " K NL (NAME NL){K}
//   hyper      := "hyperparams" (" " KEY "=" VALUE)* NL
//   body       := tree | "members " M NL tree{M}          (rf, bagging)
//               | "priors" (" " REAL){K} NL "seen" (" " 0|1){N} NL ("class" NL gauss{N}){K}   (nb)
//               | "members " M NL model{M}                (vote)
//   tree       := "tree " T NL node{T}
//   node       := "leaf" counts NL | "split " ATTR " " THRESH " " ("L"|"R") " " LEFT " " RIGHT counts NL
//   counts     := (" " REAL){K}
//   gauss      := "gauss " MEAN " " STDDEV " " RATE " " (0|1) NL
//
// Reals use the shortest round-trip decimal form, so save/load is exact.

inline constexpr int kModelFormatVersion = 1;

void save_model(const TrainedModel& model, std::ostream& out);
std::string save_model(const TrainedModel& model);
void save_model_file(const TrainedModel& model, const std::filesystem::path& path);

/// Throws Error{ModelFormat | ModelVersion}.
TrainedModel load_model(std::istream& in);
TrainedModel load_model(std::string_view text);
TrainedModel load_model_file(const std::filesystem::path& path);

} // namespace devfp::classifiers
