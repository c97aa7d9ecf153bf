#pragma once

#include <cstdint>
#include <json.hpp>
#include <map>
#include <string>
#include <vector>

#include "fairsample/dataset.hpp"

namespace fairsample {

// Per-dimension standardization. Constant dimensions map to all-zero.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> stddev;  // sample std; 0 marks a constant dimension

    void fit(const std::vector<std::vector<double>>& rows);
    std::vector<double> transform(const std::vector<double>& row) const;

    bool operator==(const Standardizer&) const = default;
};

// Fixed-length summary of one behavior sequence: per feature the mean over
// time, std over time, last value and least-squares slope over the time index.
std::vector<double> embed_record(const StudentRecord& record, std::size_t feature_dim);

struct BehaviorEmbedding {
    std::vector<std::string> student_ids;          // dataset record order
    std::vector<std::vector<double>> rows;         // standardized, n x 4D
    Standardizer scaler;                           // fitted on the raw rows
};

BehaviorEmbedding embed_behavior(const Dataset& dataset);

struct ClusteringResult {
    std::size_t k = 0;
    std::map<std::string, int> assignment;  // student_id -> cluster in [0, k)
    std::vector<std::vector<double>> centroids;
    double inertia = 0.0;
    double silhouette = 0.0;
    std::uint64_t seed = 0;

    std::vector<std::size_t> cluster_sizes() const;
};

// Lloyd's algorithm with greedy k-means++ seeding, best of `restarts` by
// inertia. Empty clusters are reseeded at the point farthest from its
// assigned centroid. Deterministic given the seed.
ClusteringResult kmeans(const BehaviorEmbedding& embedding, std::size_t k,
                        std::uint64_t seed, std::size_t restarts = 10,
                        std::size_t max_iter = 300, double tol = 1e-6);

// Runs kmeans for every k in [k_min, k_max] and keeps the best mean
// silhouette; ties go to the smaller k. A fixed k bypasses selection.
ClusteringResult select_k(const BehaviorEmbedding& embedding, std::size_t k_min,
                          std::size_t k_max, std::uint64_t seed,
                          std::size_t restarts = 10);

double mean_silhouette(const std::vector<std::vector<double>>& rows,
                       const std::vector<int>& labels, std::size_t k);

// Returns a new dataset with the cluster pseudo-attribute populated.
Dataset assign_clusters(const Dataset& dataset, const ClusteringResult& result);

nlohmann::json clustering_to_json(const ClusteringResult& result);
ClusteringResult clustering_from_json(const nlohmann::json& j);

}  // namespace fairsample
