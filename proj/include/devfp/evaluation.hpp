#pragma once

// Train/test splitting, confusion matrices, and TPR / precision / accuracy reports.

#include "devfp/classifiers.hpp"
#include "devfp/dataset.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace devfp::evaluation {

struct SplitSpec {
    double train_fraction = 0.8;
    std::uint64_t seed = 1;
    bool stratified = true;
};

struct SplitIndices {
    std::vector<std::size_t> train; // ascending row indices
    std::vector<std::size_t> test;
};

/// Per class (or over all labeled rows when not stratified) the train share is
/// round(fraction * size), clamped so each side keeps at least one row. Rows are
/// shuffled with Rng(seed), classes taken in class-index order. Unlabeled rows are
/// left out. Throws Error{ClassTooSmall} for a class with fewer than two rows.
SplitIndices split_indices(const Dataset& dataset, const SplitSpec& spec);
std::pair<Dataset, Dataset> stratified_split(const Dataset& dataset, const SplitSpec& spec);

/// Rows are actual classes, columns predicted.
class ConfusionMatrix {
public:
    ConfusionMatrix() = default;
    explicit ConfusionMatrix(std::vector<std::string> class_names);

    void add(std::size_t actual, std::size_t predicted, std::size_t count = 1);

    const std::vector<std::string>& class_names() const { return class_names_; }
    std::size_t size() const { return class_names_.size(); }
    std::size_t at(std::size_t actual, std::size_t predicted) const { return counts_[actual * size() + predicted]; }
    std::size_t row_sum(std::size_t actual) const;
    std::size_t column_sum(std::size_t predicted) const;
    std::size_t total() const { return total_; }
    std::size_t trace() const;

    bool operator==(const ConfusionMatrix&) const = default;

private:
    std::vector<std::string> class_names_;
    std::vector<std::size_t> counts_;
    std::size_t total_ = 0;
};

/// One increment per test row at (actual, predicted). Throws Error{SchemaMismatch}
/// (schema differs), Error{UnlabeledRow}, Error{UnknownClass}, Error{EmptyDataset}.
ConfusionMatrix evaluate(const classifiers::TrainedModel& model, const Dataset& test);

struct ClassMetrics {
    std::string name;
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    double tpr = 0;       // TP / (TP + FN)
    double precision = 0; // TP / (TP + FP)
    double accuracy = 0;  // (TP + TN) / total, one-vs-rest
    bool tpr_defined = true;
    bool precision_defined = true;
    std::size_t support() const { return tp + fn; }
};

struct RunInfo {
    std::uint64_t seed = 1;
    std::string model;
    std::string feature_set;
};

struct EvalReport {
    std::vector<ClassMetrics> per_class;
    double accuracy = 0; // trace / total
    double macro_tpr = 0;
    double macro_precision = 0;
    double weighted_tpr = 0;       // support-weighted, for comparison with instance-averaged figures
    double weighted_precision = 0;
    ConfusionMatrix matrix;
    RunInfo run;
};

/// Undefined ratios (0/0) are reported as 0 and flagged; macro averages skip them.
/// Throws Error{EmptyMatrix}.
EvalReport metrics(const ConfusionMatrix& matrix, RunInfo run = {});

enum class FeatureSet { network, transport, combined };

std::string_view to_string(FeatureSet set);
std::optional<FeatureSet> parse_feature_set(std::string_view text);
/// network = ip.len, ip.ttl, ip.proto; transport = the six tcp/udp columns; combined = all nine.
std::vector<std::string> feature_columns(FeatureSet set);

struct AblationResult {
    classifiers::TrainedModel model;
    EvalReport report;
};

/// Projects onto the feature set, splits, trains and evaluates.
AblationResult ablation_run(const Dataset& dataset, FeatureSet set, classifiers::ModelKind kind,
                            const classifiers::Hyperparams& hyperparams, const SplitSpec& split,
                            unsigned threads = 1);

/// `class,tpr,precision,support`
void write_per_class_csv(const EvalReport& report, std::ostream& out);
/// `acc,macro_tpr,macro_pre,seed,model,feature_set` header plus one value line.
void write_summary_csv(const EvalReport& report, std::ostream& out);
/// Header `actual\predicted,<classes...>`, one line per actual class.
void write_confusion_csv(const EvalReport& report, std::ostream& out);
/// Human-readable table.
void write_text_report(const EvalReport& report, std::ostream& out);

} // namespace devfp::evaluation
