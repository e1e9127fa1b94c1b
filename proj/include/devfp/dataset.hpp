#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace devfp {

/// One attribute value; std::nullopt is the Absent marker.
using Cell = std::optional<double>;

enum class ClassAttribute { device_name, device_type };

/// Row-major table of numeric attributes with an optional class label per row.
/// Class names are interned in first-appearance order; the index of a name is
/// its class index everywhere downstream (ties resolve toward lower indices).
class Dataset {
public:
    Dataset() = default;
    explicit Dataset(std::vector<std::string> attributes,
                     ClassAttribute class_attribute = ClassAttribute::device_name);

    const std::vector<std::string>& attributes() const { return attributes_; }
    std::size_t attribute_count() const { return attributes_.size(); }
    std::optional<std::size_t> attribute_index(const std::string& name) const;

    const std::vector<std::string>& class_names() const { return class_names_; }
    std::size_t class_count() const { return class_names_.size(); }
    std::optional<std::size_t> class_index(const std::string& name) const;
    /// Returns the index of `name`, interning it if new.
    std::size_t intern_class(const std::string& name);

    ClassAttribute class_attribute() const { return class_attribute_; }
    void set_class_attribute(ClassAttribute attr) { class_attribute_ = attr; }

    std::size_t size() const { return labels_.size(); }
    bool empty() const { return labels_.empty(); }

    std::span<const Cell> row(std::size_t i) const
    {
        return {cells_.data() + i * attributes_.size(), attributes_.size()};
    }
    const Cell& at(std::size_t row, std::size_t attr) const
    {
        return cells_[row * attributes_.size() + attr];
    }
    std::optional<std::size_t> label(std::size_t i) const { return labels_[i]; }
    const std::string* label_name(std::size_t i) const
    {
        return labels_[i] ? &class_names_[*labels_[i]] : nullptr;
    }

    /// Throws Error{SchemaMismatch} when values.size() != attribute_count().
    void add_row(std::span<const Cell> values, std::optional<std::string> label);
    void add_row_indexed(std::span<const Cell> values, std::optional<std::size_t> class_index);

    /// Same class list, rows picked (with repetition allowed) by index.
    Dataset subset(std::span<const std::size_t> rows) const;
    /// Keeps only the named columns in the given order; throws Error{SchemaMismatch}.
    Dataset project(std::span<const std::string> names) const;

    /// Rows per class index; unlabeled rows are not counted.
    std::vector<std::size_t> class_counts() const;
    /// Number of distinct classes that actually occur among labeled rows.
    std::size_t distinct_labels() const;

    /// Semantic equality: schema, cells and label strings (class interning order ignored).
    friend bool operator==(const Dataset& a, const Dataset& b);

private:
    std::vector<std::string> attributes_;
    ClassAttribute class_attribute_ = ClassAttribute::device_name;
    std::vector<std::string> class_names_;
    std::vector<Cell> cells_;
    std::vector<std::optional<std::size_t>> labels_;
};

} // namespace devfp
