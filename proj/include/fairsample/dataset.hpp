#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fairsample/errors.hpp"

namespace fairsample {

// Reserved pseudo-attribute names. "intervention" exposes the binary label to
// the grouping machinery, "cluster" exposes the behavioral cluster once assigned.
inline constexpr const char* kLabelName = "intervention";
inline constexpr const char* kClusterName = "cluster";

struct StudentRecord {
    std::string student_id;
    std::map<std::string, std::string> attributes;
    std::vector<std::vector<double>> behavior;  // T rows of D features
    int label = 0;                              // 1 = needs intervention

    bool operator==(const StudentRecord&) const = default;
};

struct AttributeDef {
    std::string name;
    std::vector<std::string> values;

    bool operator==(const AttributeDef&) const = default;
};

struct AttributeSchema {
    std::vector<AttributeDef> attributes;

    const AttributeDef* find(const std::string& name) const;
    bool has(const std::string& name) const { return find(name) != nullptr; }
    std::vector<std::string> names() const;

    bool operator==(const AttributeSchema&) const = default;
};

// A (possibly combined) attribute selection. Names are canonicalized (sorted,
// unique) so that {gender, school} and {school, gender} compare equal.
class GroupSpec {
public:
    GroupSpec() = default;
    explicit GroupSpec(std::vector<std::string> names);

    const std::vector<std::string>& names() const { return names_; }
    std::size_t arity() const { return names_.size(); }
    bool contains(const std::string& name) const;

    std::string to_string() const;  // names joined with '+'

    auto operator<=>(const GroupSpec&) const = default;

private:
    std::vector<std::string> names_;
};

struct GroupKey {
    GroupSpec spec;
    std::vector<std::string> values;  // aligned with spec.names()

    std::string to_string() const;  // values joined with '|'

    auto operator<=>(const GroupKey&) const = default;
};

struct Dataset {
    AttributeSchema schema;
    std::vector<StudentRecord> records;
    std::size_t feature_dim = 0;
    std::optional<std::map<std::string, int>> cluster_assignment;

    std::size_t size() const { return records.size(); }
    bool operator==(const Dataset&) const = default;
};

// Resolves the categorical value of `name` for one record: a schema attribute,
// the label pseudo-attribute ("0"/"1"), or the cluster pseudo-attribute.
std::string attribute_value(const Dataset& dataset, std::size_t record_index,
                            const std::string& name);

GroupKey group_key_of(const Dataset& dataset, std::size_t record_index,
                      const GroupSpec& spec);

// Throws if the dataset violates any data-model invariant.
void validate_dataset(const Dataset& dataset);

using GroupCounts = std::map<GroupKey, std::size_t>;
using GroupPartition = std::map<GroupKey, std::vector<std::size_t>>;

// Groups with zero members are absent from the result.
GroupCounts group_counts(const Dataset& dataset, const GroupSpec& spec);

// Index lists are disjoint, jointly exhaustive and ascending.
GroupPartition partition_by_group(const Dataset& dataset, const GroupSpec& spec);

}  // namespace fairsample
