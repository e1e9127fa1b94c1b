#pragma once

// Gain-ratio attribute scoring, ranking and the exclusion criteria used to
// pick the fingerprint feature subset.

#include "devfp/dataset.hpp"

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace devfp::selection {

/// Gains at or below this are treated as zero (floating-point residue of equal entropies).
inline constexpr double kGainEpsilon = 1e-12;

/// Shannon entropy in bits over the nonzero counts. Throws Error{AllZeroCounts}.
double entropy(std::span<const std::size_t> class_counts);

struct LabeledValue {
    double value = 0;
    std::size_t label = 0;
};

struct BinarySplit {
    std::optional<double> threshold; // absent when degenerate
    double info_gain = 0;
    double split_info = 0;
    std::size_t left_count = 0;  // values <= threshold
    std::size_t right_count = 0;
};

/// Best `value <= t` split over midpoints of consecutive distinct values, maximising
/// information gain; ties go to the smaller threshold. Both sides must hold at least
/// `min_leaf` values. Degenerate input (fewer than two distinct values, one class, or
/// no admissible midpoint) yields info_gain 0 and no threshold.
/// `values` is sorted in place.
BinarySplit best_binary_split(std::span<LabeledValue> values, std::size_t class_count,
                              std::size_t min_leaf = 1);

struct AttributeScore {
    std::string name;
    double gain_ratio = 0;
    double info_gain = 0; // already scaled by present_fraction
    double split_info = 0;
    std::optional<double> split_threshold;
    double present_fraction = 0;
};

/// Scores a column over its present cells; the gain is scaled by the present fraction
/// and divided by the split information of the two partitions.
AttributeScore gain_ratio(std::span<const Cell> column, std::span<const std::size_t> labels,
                          std::size_t class_count, std::size_t min_leaf = 1);

/// Same computation for callers that already gathered the present cells.
/// `total` counts present and absent rows; `present` is sorted in place.
AttributeScore score_present(std::span<LabeledValue> present, std::size_t total,
                             std::size_t class_count, std::size_t min_leaf = 1);

using RankedList = std::vector<AttributeScore>;

/// One score per schema attribute, descending by gain ratio, ties in schema order.
/// Unlabeled rows are ignored. Throws Error{EmptyDataset | SingleClassDataset}.
RankedList rank(const Dataset& dataset);

enum class AttributeFlag { multi_valued_identifier, time_dependent, negative_hex_binary };

std::string_view to_string(AttributeFlag flag);

struct AttributeMeta {
    std::string name;
    std::vector<AttributeFlag> flags;
};

/// Attribute name -> flags. Text form: `name<TAB>flag[,flag...]` per line; an empty
/// flag field or "none" means unflagged; '#' starts a comment line.
class MetaRegistry {
public:
    static MetaRegistry parse(std::string_view text);
    static MetaRegistry load(const std::filesystem::path& path);

    void add(AttributeMeta meta);
    const AttributeMeta* find(const std::string& name) const;
    std::size_t size() const { return entries_.size(); }

private:
    std::map<std::string, AttributeMeta> entries_;
};

/// Drops attributes with gain ratio <= 0 or any exclusion flag, keeping rank order.
/// Throws Error{MissingMeta} when an attribute has no registry entry.
std::vector<std::string> apply_criteria(const RankedList& ranked, const MetaRegistry& meta);

/// CSV `rank,attribute,gain_ratio,info_gain,present_fraction`, ranks starting at 1.
void write_rank_report(const RankedList& ranked, std::ostream& out);

} // namespace devfp::selection
