#include "devfp/dataset.hpp"

#include "devfp/error.hpp"

#include <algorithm>

namespace devfp {

Dataset::Dataset(std::vector<std::string> attributes, ClassAttribute class_attribute)
    : attributes_(std::move(attributes)), class_attribute_(class_attribute)
{
}

std::optional<std::size_t> Dataset::attribute_index(const std::string& name) const
{
    const auto it = std::find(attributes_.begin(), attributes_.end(), name);
    if (it == attributes_.end())
        return std::nullopt;
    return static_cast<std::size_t>(it - attributes_.begin());
}

std::optional<std::size_t> Dataset::class_index(const std::string& name) const
{
    const auto it = std::find(class_names_.begin(), class_names_.end(), name);
    if (it == class_names_.end())
        return std::nullopt;
    return static_cast<std::size_t>(it - class_names_.begin());
}

std::size_t Dataset::intern_class(const std::string& name)
{
    if (auto idx = class_index(name))
        return *idx;
    class_names_.push_back(name);
    return class_names_.size() - 1;
}

void Dataset::add_row(std::span<const Cell> values, std::optional<std::string> label)
{
    std::optional<std::size_t> idx;
    if (label)
        idx = intern_class(*label);
    add_row_indexed(values, idx);
}

void Dataset::add_row_indexed(std::span<const Cell> values, std::optional<std::size_t> class_index)
{
    if (values.size() != attributes_.size())
        throw Error(ErrorCode::SchemaMismatch, "row has " + std::to_string(values.size()) +
                                                   " values, schema has " +
                                                   std::to_string(attributes_.size()));
    if (class_index && *class_index >= class_names_.size())
        throw Error(ErrorCode::UnknownClass, "class index " + std::to_string(*class_index));
    cells_.insert(cells_.end(), values.begin(), values.end());
    labels_.push_back(class_index);
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const
{
    Dataset out(attributes_, class_attribute_);
    out.class_names_ = class_names_;
    out.cells_.reserve(rows.size() * attributes_.size());
    out.labels_.reserve(rows.size());
    for (std::size_t r : rows) {
        const auto values = row(r);
        out.cells_.insert(out.cells_.end(), values.begin(), values.end());
        out.labels_.push_back(labels_[r]);
    }
    return out;
}

Dataset Dataset::project(std::span<const std::string> names) const
{
    std::vector<std::size_t> columns;
    for (const auto& name : names) {
        const auto idx = attribute_index(name);
        if (!idx)
            throw Error(ErrorCode::SchemaMismatch, "attribute '" + name + "' not in dataset");
        columns.push_back(*idx);
    }
    Dataset out(std::vector<std::string>(names.begin(), names.end()), class_attribute_);
    out.class_names_ = class_names_;
    out.cells_.reserve(size() * columns.size());
    for (std::size_t r = 0; r < size(); ++r)
        for (std::size_t c : columns)
            out.cells_.push_back(at(r, c));
    out.labels_ = labels_;
    return out;
}

std::vector<std::size_t> Dataset::class_counts() const
{
    std::vector<std::size_t> counts(class_names_.size(), 0);
    for (const auto& l : labels_)
        if (l)
            ++counts[*l];
    return counts;
}

std::size_t Dataset::distinct_labels() const
{
    const auto counts = class_counts();
    return static_cast<std::size_t>(std::count_if(counts.begin(), counts.end(),
                                                  [](std::size_t c) { return c > 0; }));
}

bool operator==(const Dataset& a, const Dataset& b)
{
    if (a.attributes_ != b.attributes_ || a.class_attribute_ != b.class_attribute_ ||
        a.cells_ != b.cells_ || a.labels_.size() != b.labels_.size())
        return false;
    for (std::size_t i = 0; i < a.labels_.size(); ++i) {
        const std::string* la = a.label_name(i);
        const std::string* lb = b.label_name(i);
        if ((la == nullptr) != (lb == nullptr))
            return false;
        if (la && *la != *lb)
            return false;
    }
    return true;
}

} // namespace devfp
