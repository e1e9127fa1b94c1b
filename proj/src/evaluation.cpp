#include "devfp/evaluation.hpp"

#include "devfp/error.hpp"
#include "devfp/features.hpp"
#include "devfp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

namespace devfp::evaluation {

namespace {

std::size_t train_share(std::size_t n, double fraction)
{
    const auto wanted = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
    return std::clamp<std::size_t>(wanted, 1, n - 1);
}

} // namespace

SplitIndices split_indices(const Dataset& dataset, const SplitSpec& spec)
{
    if (!(spec.train_fraction > 0 && spec.train_fraction < 1))
        throw Error(ErrorCode::InvalidHyperparams, "train fraction must be in (0, 1)");
    std::vector<std::vector<std::size_t>> groups;
    if (spec.stratified) {
        groups.resize(dataset.class_count());
        for (std::size_t r = 0; r < dataset.size(); ++r)
            if (const auto l = dataset.label(r))
                groups[*l].push_back(r);
        for (std::size_t c = 0; c < groups.size(); ++c)
            if (groups[c].size() == 1)
                throw Error(ErrorCode::ClassTooSmall,
                            "class '" + dataset.class_names()[c] + "' has a single row; stratified splitting needs two");
    } else {
        groups.emplace_back();
        for (std::size_t r = 0; r < dataset.size(); ++r)
            if (dataset.label(r))
                groups.back().push_back(r);
        if (groups.back().size() < 2)
            throw Error(ErrorCode::ClassTooSmall, "splitting needs at least two labeled rows");
    }

    Rng rng(spec.seed);
    SplitIndices out;
    for (auto& group : groups) {
        if (group.empty())
            continue;
        rng.shuffle(std::span<std::size_t>(group));
        const std::size_t n_train = train_share(group.size(), spec.train_fraction);
        out.train.insert(out.train.end(), group.begin(), group.begin() + static_cast<std::ptrdiff_t>(n_train));
        out.test.insert(out.test.end(), group.begin() + static_cast<std::ptrdiff_t>(n_train), group.end());
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

std::pair<Dataset, Dataset> stratified_split(const Dataset& dataset, const SplitSpec& spec)
{
    const auto idx = split_indices(dataset, spec);
    return {dataset.subset(idx.train), dataset.subset(idx.test)};
}

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> class_names)
    : class_names_(std::move(class_names)), counts_(class_names_.size() * class_names_.size(), 0)
{
}

void ConfusionMatrix::add(std::size_t actual, std::size_t predicted, std::size_t count)
{
    if (actual >= size() || predicted >= size())
        throw Error(ErrorCode::UnknownClass, "confusion matrix index out of range");
    counts_[actual * size() + predicted] += count;
    total_ += count;
}

std::size_t ConfusionMatrix::row_sum(std::size_t actual) const
{
    std::size_t s = 0;
    for (std::size_t p = 0; p < size(); ++p)
        s += at(actual, p);
    return s;
}

std::size_t ConfusionMatrix::column_sum(std::size_t predicted) const
{
    std::size_t s = 0;
    for (std::size_t a = 0; a < size(); ++a)
        s += at(a, predicted);
    return s;
}

std::size_t ConfusionMatrix::trace() const
{
    std::size_t s = 0;
    for (std::size_t c = 0; c < size(); ++c)
        s += at(c, c);
    return s;
}

ConfusionMatrix evaluate(const classifiers::TrainedModel& model, const Dataset& test)
{
    model.check_schema(test.attributes());
    if (test.empty())
        throw Error(ErrorCode::EmptyDataset, "test set is empty");
    // Map the test set's class indices onto the model's.
    std::vector<std::optional<std::size_t>> to_model(test.class_count());
    for (std::size_t c = 0; c < test.class_count(); ++c) {
        const auto& names = model.class_names();
        const auto it = std::find(names.begin(), names.end(), test.class_names()[c]);
        if (it != names.end())
            to_model[c] = static_cast<std::size_t>(it - names.begin());
    }
    ConfusionMatrix matrix(model.class_names());
    for (std::size_t r = 0; r < test.size(); ++r) {
        const auto label = test.label(r);
        if (!label)
            throw Error(ErrorCode::UnlabeledRow, "test row " + std::to_string(r) + " has no class");
        if (!to_model[*label])
            throw Error(ErrorCode::UnknownClass,
                        "test class '" + test.class_names()[*label] + "' was not seen in training");
        matrix.add(*to_model[*label], model.predict(test.row(r)));
    }
    return matrix;
}

EvalReport metrics(const ConfusionMatrix& matrix, RunInfo run)
{
    if (matrix.total() == 0)
        throw Error(ErrorCode::EmptyMatrix, "no predictions to score");
    EvalReport report;
    report.matrix = matrix;
    report.run = std::move(run);
    const double total = static_cast<double>(matrix.total());
    report.accuracy = static_cast<double>(matrix.trace()) / total;

    double tpr_sum = 0, pre_sum = 0, w_tpr = 0, w_pre = 0;
    std::size_t tpr_n = 0, pre_n = 0;
    for (std::size_t c = 0; c < matrix.size(); ++c) {
        ClassMetrics m;
        m.name = matrix.class_names()[c];
        m.tp = matrix.at(c, c);
        m.fn = matrix.row_sum(c) - m.tp;
        m.fp = matrix.column_sum(c) - m.tp;
        m.tn = matrix.total() - m.tp - m.fn - m.fp;
        m.tpr_defined = m.tp + m.fn > 0;
        m.precision_defined = m.tp + m.fp > 0;
        m.tpr = m.tpr_defined ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn) : 0.0;
        m.precision = m.precision_defined ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp) : 0.0;
        m.accuracy = static_cast<double>(m.tp + m.tn) / total;
        if (m.tpr_defined) {
            tpr_sum += m.tpr;
            ++tpr_n;
        }
        if (m.precision_defined) {
            pre_sum += m.precision;
            ++pre_n;
        }
        const double weight = static_cast<double>(m.support()) / total;
        w_tpr += weight * m.tpr;
        w_pre += weight * m.precision;
        report.per_class.push_back(std::move(m));
    }
    report.macro_tpr = tpr_n ? tpr_sum / static_cast<double>(tpr_n) : 0.0;
    report.macro_precision = pre_n ? pre_sum / static_cast<double>(pre_n) : 0.0;
    report.weighted_tpr = w_tpr;
    report.weighted_precision = w_pre;
    return report;
}

std::string_view to_string(FeatureSet set)
{
    switch (set) {
    case FeatureSet::network: return "network";
    case FeatureSet::transport: return "transport";
    case FeatureSet::combined: return "combined";
    }
    return "?";
}

std::optional<FeatureSet> parse_feature_set(std::string_view text)
{
    for (auto set : {FeatureSet::network, FeatureSet::transport, FeatureSet::combined})
        if (to_string(set) == text)
            return set;
    return std::nullopt;
}

std::vector<std::string> feature_columns(FeatureSet set)
{
    const auto& all = features::kFeatureNames;
    switch (set) {
    case FeatureSet::network: return {all.begin() + 6, all.end()};
    case FeatureSet::transport: return {all.begin(), all.begin() + 6};
    case FeatureSet::combined: break;
    }
    return {all.begin(), all.end()};
}

AblationResult ablation_run(const Dataset& dataset, FeatureSet set, classifiers::ModelKind kind,
                            const classifiers::Hyperparams& hyperparams, const SplitSpec& split,
                            unsigned threads)
{
    const auto columns = feature_columns(set);
    const Dataset projected = dataset.project(columns);
    auto [train, test] = stratified_split(projected, split);
    auto model = classifiers::train(kind, train, hyperparams, threads);
    auto report = metrics(evaluate(model, test),
                          RunInfo{split.seed, std::string(classifiers::to_string(kind)), std::string(to_string(set))});
    return {std::move(model), std::move(report)};
}

namespace {

std::string fixed(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

} // namespace

void write_per_class_csv(const EvalReport& report, std::ostream& out)
{
    out << "class,tpr,precision,support\n";
    for (const auto& m : report.per_class)
        out << m.name << ',' << fixed(m.tpr) << ',' << fixed(m.precision) << ',' << m.support() << '\n';
}

void write_summary_csv(const EvalReport& report, std::ostream& out)
{
    out << "acc,macro_tpr,macro_pre,seed,model,feature_set\n";
    out << fixed(report.accuracy) << ',' << fixed(report.macro_tpr) << ',' << fixed(report.macro_precision) << ','
        << report.run.seed << ',' << report.run.model << ',' << report.run.feature_set << '\n';
}

void write_confusion_csv(const EvalReport& report, std::ostream& out)
{
    const auto& m = report.matrix;
    out << "actual\\predicted";
    for (const auto& name : m.class_names())
        out << ',' << name;
    out << '\n';
    for (std::size_t a = 0; a < m.size(); ++a) {
        out << m.class_names()[a];
        for (std::size_t p = 0; p < m.size(); ++p)
            out << ',' << m.at(a, p);
        out << '\n';
    }
}

void write_text_report(const EvalReport& report, std::ostream& out)
{
    char buf[256];
    std::size_t width = 5;
    for (const auto& m : report.per_class)
        width = std::max(width, m.name.size());
    const int w = static_cast<int>(width);
    out << "model " << report.run.model << ", features " << report.run.feature_set << ", seed " << report.run.seed
        << ", " << report.matrix.total() << " test rows\n";
    std::snprintf(buf, sizeof buf, "%-*s %9s %9s %9s\n", w, "class", "TPR", "PRE", "support");
    out << buf;
    bool any_undefined = false;
    for (const auto& m : report.per_class) {
        any_undefined = any_undefined || !m.tpr_defined || !m.precision_defined;
        std::snprintf(buf, sizeof buf, "%-*s %8.2f%s %8.2f%s %9zu\n", w, m.name.c_str(), 100 * m.tpr,
                      m.tpr_defined ? " " : "*", 100 * m.precision, m.precision_defined ? " " : "*", m.support());
        out << buf;
    }
    std::snprintf(buf, sizeof buf, "ACC %.3f%%  macro TPR %.2f%%  macro PRE %.2f%%  weighted TPR %.2f%%  weighted PRE %.2f%%\n",
                  100 * report.accuracy, 100 * report.macro_tpr, 100 * report.macro_precision,
                  100 * report.weighted_tpr, 100 * report.weighted_precision);
    out << buf;
    if (any_undefined)
        out << "* undefined (0/0), reported as 0 and excluded from macro averages\n";
}

} // namespace devfp::evaluation
