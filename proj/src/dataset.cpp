#include "fairsample/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace fairsample {

const AttributeDef* AttributeSchema::find(const std::string& name) const {
    for (const auto& attr : attributes) {
        if (attr.name == name) return &attr;
    }
    return nullptr;
}

std::vector<std::string> AttributeSchema::names() const {
    std::vector<std::string> out;
    out.reserve(attributes.size());
    for (const auto& attr : attributes) out.push_back(attr.name);
    return out;
}

GroupSpec::GroupSpec(std::vector<std::string> names) : names_(std::move(names)) {
    if (names_.empty()) throw Error("GroupSpec requires at least one attribute name");
    std::sort(names_.begin(), names_.end());
    if (std::adjacent_find(names_.begin(), names_.end()) != names_.end()) {
        throw Error("GroupSpec contains duplicate attribute name");
    }
}

bool GroupSpec::contains(const std::string& name) const {
    return std::binary_search(names_.begin(), names_.end(), name);
}

std::string GroupSpec::to_string() const {
    std::string out;
    for (const auto& name : names_) {
        if (!out.empty()) out += '+';
        out += name;
    }
    return out;
}

std::string GroupKey::to_string() const {
    std::string out;
    for (const auto& value : values) {
        if (!out.empty()) out += '|';
        out += value;
    }
    return out;
}

std::string attribute_value(const Dataset& dataset, std::size_t record_index,
                            const std::string& name) {
    const StudentRecord& rec = dataset.records.at(record_index);
    if (name == kLabelName) return rec.label == 1 ? "1" : "0";
    if (name == kClusterName) {
        if (!dataset.cluster_assignment) {
            throw ClusterNotAssigned("cluster requested but no clustering has been assigned");
        }
        auto it = dataset.cluster_assignment->find(rec.student_id);
        if (it == dataset.cluster_assignment->end()) {
            throw ClusterNotAssigned("no cluster for student " + rec.student_id);
        }
        return std::to_string(it->second);
    }
    if (!dataset.schema.has(name)) {
        throw UnknownAttribute("unknown attribute: " + name);
    }
    auto it = rec.attributes.find(name);
    if (it == rec.attributes.end()) {
        throw SchemaViolation("record " + rec.student_id + " missing attribute " + name);
    }
    return it->second;
}

GroupKey group_key_of(const Dataset& dataset, std::size_t record_index,
                      const GroupSpec& spec) {
    GroupKey key;
    key.spec = spec;
    key.values.reserve(spec.arity());
    for (const auto& name : spec.names()) {
        key.values.push_back(attribute_value(dataset, record_index, name));
    }
    return key;
}

void validate_dataset(const Dataset& dataset) {
    std::set<std::string> seen_ids;
    std::set<std::string> schema_names;
    for (const auto& attr : dataset.schema.attributes) {
        if (!schema_names.insert(attr.name).second) {
            throw SchemaViolation("duplicate attribute in schema: " + attr.name);
        }
        if (attr.name == kLabelName || attr.name == kClusterName) {
            throw SchemaViolation("reserved attribute name in schema: " + attr.name);
        }
        if (attr.values.size() < 2) {
            throw SchemaViolation("attribute " + attr.name + " needs at least 2 values");
        }
    }
    for (std::size_t i = 0; i < dataset.records.size(); ++i) {
        const StudentRecord& rec = dataset.records[i];
        if (!seen_ids.insert(rec.student_id).second) {
            throw DuplicateStudentId("duplicate student_id: " + rec.student_id);
        }
        if (rec.label != 0 && rec.label != 1) {
            throw MalformedRecord("record " + rec.student_id + ": label must be 0 or 1");
        }
        if (rec.attributes.size() != dataset.schema.attributes.size()) {
            throw SchemaViolation("record " + rec.student_id +
                                  ": attribute set does not match schema");
        }
        for (const auto& [name, value] : rec.attributes) {
            const AttributeDef* def = dataset.schema.find(name);
            if (!def) throw SchemaViolation("record " + rec.student_id +
                                            ": unknown attribute " + name);
            if (std::find(def->values.begin(), def->values.end(), value) ==
                def->values.end()) {
                throw SchemaViolation("record " + rec.student_id + ": value '" + value +
                                      "' not allowed for attribute " + name);
            }
        }
        if (rec.behavior.empty()) {
            throw MalformedRecord("record " + rec.student_id + ": behavior requires T >= 1");
        }
        for (const auto& row : rec.behavior) {
            if (row.size() != dataset.feature_dim) {
                throw InconsistentFeatureDim("record " + rec.student_id +
                                             ": behavior row dimension mismatch");
            }
            for (double x : row) {
                if (!std::isfinite(x)) {
                    throw MalformedRecord("record " + rec.student_id +
                                          ": non-finite behavior value");
                }
            }
        }
    }
    if (dataset.cluster_assignment) {
        if (dataset.cluster_assignment->size() != dataset.records.size()) {
            throw CoverageMismatch("cluster assignment does not cover every student exactly once");
        }
        for (const auto& rec : dataset.records) {
            if (!dataset.cluster_assignment->count(rec.student_id)) {
                throw CoverageMismatch("no cluster for student " + rec.student_id);
            }
        }
    }
}

GroupCounts group_counts(const Dataset& dataset, const GroupSpec& spec) {
    GroupCounts counts;
    for (std::size_t i = 0; i < dataset.records.size(); ++i) {
        counts[group_key_of(dataset, i, spec)] += 1;
    }
    return counts;
}

GroupPartition partition_by_group(const Dataset& dataset, const GroupSpec& spec) {
    GroupPartition parts;
    for (std::size_t i = 0; i < dataset.records.size(); ++i) {
        parts[group_key_of(dataset, i, spec)].push_back(i);
    }
    return parts;
}

}  // namespace fairsample
