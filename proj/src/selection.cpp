#include "devfp/selection.hpp"

#include "devfp/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

namespace devfp::selection {

namespace {

// H = log2(N) - (1/N) * sum c*log2(c), over nonzero counts.
double entropy_of(const double* counts, std::size_t k, double total)
{
    if (total <= 0)
        return 0;
    double acc = 0;
    for (std::size_t i = 0; i < k; ++i)
        if (counts[i] > 0)
            acc += counts[i] * std::log2(counts[i]);
    return std::max(0.0, std::log2(total) - acc / total);
}

double binary_entropy(double a, double b)
{
    const double counts[2] = {a, b};
    return entropy_of(counts, 2, a + b);
}

} // namespace

double entropy(std::span<const std::size_t> class_counts)
{
    std::vector<double> counts(class_counts.begin(), class_counts.end());
    double total = 0;
    for (double c : counts)
        total += c;
    if (total <= 0)
        throw Error(ErrorCode::AllZeroCounts, "entropy of an empty distribution");
    return entropy_of(counts.data(), counts.size(), total);
}

BinarySplit best_binary_split(std::span<LabeledValue> values, std::size_t class_count,
                              std::size_t min_leaf)
{
    BinarySplit best;
    const std::size_t n = values.size();
    if (n < 2)
        return best;
    min_leaf = std::max<std::size_t>(min_leaf, 1);
    std::sort(values.begin(), values.end(), [](const LabeledValue& a, const LabeledValue& b) {
        return a.value < b.value || (a.value == b.value && a.label < b.label);
    });

    std::vector<double> total(class_count, 0), left(class_count, 0), right(class_count, 0);
    for (const auto& v : values)
        total[v.label] += 1;
    const auto classes_present = std::count_if(total.begin(), total.end(), [](double c) { return c > 0; });
    if (classes_present < 2 || values.front().value == values.back().value)
        return best;

    const double n_total = static_cast<double>(n);
    const double parent = entropy_of(total.data(), class_count, n_total);
    bool found = false;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        left[values[i].label] += 1;
        if (values[i].value == values[i + 1].value)
            continue;
        const std::size_t n_left = i + 1;
        const std::size_t n_right = n - n_left;
        if (n_left < min_leaf || n_right < min_leaf)
            continue;
        for (std::size_t c = 0; c < class_count; ++c)
            right[c] = total[c] - left[c];
        const double nl = static_cast<double>(n_left), nr = static_cast<double>(n_right);
        const double gain = parent - (nl / n_total) * entropy_of(left.data(), class_count, nl) -
                            (nr / n_total) * entropy_of(right.data(), class_count, nr);
        if (!found || gain > best.info_gain + kGainEpsilon) {
            found = true;
            best.threshold = values[i].value + (values[i + 1].value - values[i].value) / 2;
            best.info_gain = gain;
            best.left_count = n_left;
            best.right_count = n_right;
        }
    }
    if (!found)
        return BinarySplit{};
    best.info_gain = best.info_gain > kGainEpsilon ? best.info_gain : 0.0;
    best.split_info = binary_entropy(static_cast<double>(best.left_count),
                                     static_cast<double>(best.right_count));
    return best;
}

AttributeScore score_present(std::span<LabeledValue> present, std::size_t total,
                             std::size_t class_count, std::size_t min_leaf)
{
    AttributeScore score;
    if (total == 0 || present.empty())
        return score;
    score.present_fraction = static_cast<double>(present.size()) / static_cast<double>(total);
    const BinarySplit split = best_binary_split(present, class_count, min_leaf);
    score.split_threshold = split.threshold;
    score.split_info = split.split_info;
    score.info_gain = split.info_gain * score.present_fraction;
    if (score.info_gain > kGainEpsilon && split.split_info > 0)
        score.gain_ratio = score.info_gain / split.split_info;
    else
        score.info_gain = std::max(0.0, score.info_gain);
    return score;
}

AttributeScore gain_ratio(std::span<const Cell> column, std::span<const std::size_t> labels,
                          std::size_t class_count, std::size_t min_leaf)
{
    if (column.size() != labels.size())
        throw Error(ErrorCode::SchemaMismatch, "column and label lengths differ");
    std::vector<LabeledValue> present;
    present.reserve(column.size());
    for (std::size_t i = 0; i < column.size(); ++i) {
        if (labels[i] >= class_count)
            throw Error(ErrorCode::UnknownClass, "label index out of range");
        if (column[i])
            present.push_back({*column[i], labels[i]});
    }
    return score_present(present, column.size(), class_count, min_leaf);
}

RankedList rank(const Dataset& dataset)
{
    std::vector<std::size_t> rows;
    std::vector<std::size_t> labels;
    for (std::size_t r = 0; r < dataset.size(); ++r) {
        if (const auto l = dataset.label(r)) {
            rows.push_back(r);
            labels.push_back(*l);
        }
    }
    if (rows.size() < 2)
        throw Error(ErrorCode::EmptyDataset, "ranking needs at least two labeled rows");
    if (dataset.distinct_labels() < 2)
        throw Error(ErrorCode::SingleClassDataset, "ranking needs at least two classes");

    RankedList ranked;
    std::vector<Cell> column(rows.size());
    for (std::size_t a = 0; a < dataset.attribute_count(); ++a) {
        for (std::size_t i = 0; i < rows.size(); ++i)
            column[i] = dataset.at(rows[i], a);
        AttributeScore score = gain_ratio(column, labels, dataset.class_count());
        score.name = dataset.attributes()[a];
        ranked.push_back(std::move(score));
    }
    std::stable_sort(ranked.begin(), ranked.end(), [](const AttributeScore& x, const AttributeScore& y) {
        return x.gain_ratio > y.gain_ratio;
    });
    return ranked;
}

std::string_view to_string(AttributeFlag flag)
{
    switch (flag) {
    case AttributeFlag::multi_valued_identifier: return "multi_valued_identifier";
    case AttributeFlag::time_dependent: return "time_dependent";
    case AttributeFlag::negative_hex_binary: return "negative_hex_binary";
    }
    return "?";
}

MetaRegistry MetaRegistry::parse(std::string_view text)
{
    MetaRegistry registry;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty() || line.front() == '#')
            continue;
        const auto tab = line.find('\t');
        AttributeMeta meta;
        meta.name = line.substr(0, tab);
        if (meta.name.empty())
            throw Error(ErrorCode::InvalidMeta, "line " + std::to_string(line_no) + ": empty attribute name");
        const std::string flags = tab == std::string::npos ? "" : line.substr(tab + 1);
        std::istringstream flag_stream(flags);
        std::string flag;
        while (std::getline(flag_stream, flag, ',')) {
            if (flag.empty() || flag == "none")
                continue;
            if (flag == "multi_valued_identifier")
                meta.flags.push_back(AttributeFlag::multi_valued_identifier);
            else if (flag == "time_dependent")
                meta.flags.push_back(AttributeFlag::time_dependent);
            else if (flag == "negative_hex_binary")
                meta.flags.push_back(AttributeFlag::negative_hex_binary);
            else
                throw Error(ErrorCode::InvalidMeta,
                            "line " + std::to_string(line_no) + ": unknown flag '" + flag + "'");
        }
        registry.add(std::move(meta));
    }
    return registry;
}

MetaRegistry MetaRegistry::load(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorCode::Io, "cannot open attribute registry " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse(buffer.str());
}

void MetaRegistry::add(AttributeMeta meta)
{
    if (entries_.count(meta.name))
        throw Error(ErrorCode::InvalidMeta, "duplicate attribute '" + meta.name + "'");
    auto name = meta.name;
    entries_.emplace(std::move(name), std::move(meta));
}

const AttributeMeta* MetaRegistry::find(const std::string& name) const
{
    const auto it = entries_.find(name);
    return it == entries_.end() ? nullptr : &it->second;
}

std::vector<std::string> apply_criteria(const RankedList& ranked, const MetaRegistry& meta)
{
    std::vector<std::string> selected;
    for (const auto& score : ranked) {
        const AttributeMeta* m = meta.find(score.name);
        if (!m)
            throw Error(ErrorCode::MissingMeta, score.name);
        // gain ratios are clamped at 0, so "<= 0" reduces to "== 0"
        if (score.gain_ratio <= 0 || !m->flags.empty())
            continue;
        selected.push_back(score.name);
    }
    return selected;
}

void write_rank_report(const RankedList& ranked, std::ostream& out)
{
    out << "rank,attribute,gain_ratio,info_gain,present_fraction\n";
    char buf[128];
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        const auto& s = ranked[i];
        std::snprintf(buf, sizeof buf, "%zu,%s,%.6f,%.6f,%.6f\n", i + 1, s.name.c_str(), s.gain_ratio,
                      s.info_gain, s.present_fraction);
        out << buf;
    }
}

} // namespace devfp::selection
