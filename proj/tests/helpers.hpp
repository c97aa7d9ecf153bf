#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "fairsample/dataset.hpp"

namespace testutil {

using fairsample::AttributeSchema;
using fairsample::Dataset;
using fairsample::StudentRecord;

inline std::vector<std::vector<double>> behavior1(double value) {
    return {{value}};
}

inline StudentRecord make_record(std::string id,
                                 std::map<std::string, std::string> attributes,
                                 int label,
                                 std::vector<std::vector<double>> behavior = {{0.0}}) {
    StudentRecord rec;
    rec.student_id = std::move(id);
    rec.attributes = std::move(attributes);
    rec.label = label;
    rec.behavior = std::move(behavior);
    return rec;
}

// one categorical attribute, n_per_value[i] records carrying values[i]
inline Dataset dataset_with_counts(const std::string& attribute,
                                   const std::vector<std::string>& values,
                                   const std::vector<std::size_t>& n_per_value,
                                   const std::vector<int>* labels_per_value = nullptr) {
    Dataset ds;
    ds.schema.attributes = {{attribute, values}};
    ds.feature_dim = 1;
    std::size_t next_id = 0;
    for (std::size_t v = 0; v < values.size(); ++v) {
        for (std::size_t i = 0; i < n_per_value[v]; ++i) {
            const int label = labels_per_value ? (*labels_per_value)[v] : 0;
            ds.records.push_back(make_record("s" + std::to_string(next_id++),
                                             {{attribute, values[v]}}, label));
        }
    }
    return ds;
}

// multi-attribute dataset from explicit cell counts
struct Cell {
    std::map<std::string, std::string> attributes;
    int label;
    std::size_t count;
};

inline Dataset dataset_from_cells(const AttributeSchema& schema,
                                  const std::vector<Cell>& cells) {
    Dataset ds;
    ds.schema = schema;
    ds.feature_dim = 1;
    std::size_t next_id = 0;
    for (const auto& cell : cells) {
        for (std::size_t i = 0; i < cell.count; ++i) {
            ds.records.push_back(make_record("s" + std::to_string(next_id++),
                                             cell.attributes, cell.label));
        }
    }
    return ds;
}

// adjusted Rand index between two labelings of the same points
inline double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
    const std::size_t n = a.size();
    std::map<int, std::map<int, std::size_t>> table;
    std::map<int, std::size_t> row_sum, col_sum;
    for (std::size_t i = 0; i < n; ++i) {
        table[a[i]][b[i]] += 1;
        row_sum[a[i]] += 1;
        col_sum[b[i]] += 1;
    }
    auto choose2 = [](std::size_t m) { return static_cast<double>(m) * (m - 1.0) / 2.0; };
    double sum_cells = 0.0, sum_rows = 0.0, sum_cols = 0.0;
    for (const auto& [ra, row] : table) {
        for (const auto& [cb, count] : row) sum_cells += choose2(count);
    }
    for (const auto& [ra, count] : row_sum) sum_rows += choose2(count);
    for (const auto& [cb, count] : col_sum) sum_cols += choose2(count);
    const double total = choose2(n);
    const double expected = sum_rows * sum_cols / total;
    const double max_index = (sum_rows + sum_cols) / 2.0;
    if (max_index == expected) return 1.0;
    return (sum_cells - expected) / (max_index - expected);
}

// plug-in mutual information (nats) between two discrete labelings
inline double plugin_mutual_information(const std::vector<int>& a,
                                        const std::vector<int>& b) {
    const double n = static_cast<double>(a.size());
    std::map<std::pair<int, int>, double> joint;
    std::map<int, double> pa, pb;
    for (std::size_t i = 0; i < a.size(); ++i) {
        joint[{a[i], b[i]}] += 1.0;
        pa[a[i]] += 1.0;
        pb[b[i]] += 1.0;
    }
    double mi = 0.0;
    for (const auto& [key, count] : joint) {
        const double pxy = count / n;
        const double px = pa[key.first] / n;
        const double py = pb[key.second] / n;
        mi += pxy * std::log(pxy / (px * py));
    }
    return mi;
}

}  // namespace testutil
