#include "fairsample/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "fairsample/rng.hpp"

using nlohmann::json;

namespace fairsample {

void Standardizer::fit(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw Error("cannot fit standardizer on empty data");
    const std::size_t dim = rows.front().size();
    const double n = static_cast<double>(rows.size());
    mean.assign(dim, 0.0);
    stddev.assign(dim, 0.0);
    for (const auto& row : rows) {
        for (std::size_t d = 0; d < dim; ++d) mean[d] += row[d];
    }
    for (std::size_t d = 0; d < dim; ++d) mean[d] /= n;
    if (rows.size() < 2) return;  // single row: all dimensions constant
    for (const auto& row : rows) {
        for (std::size_t d = 0; d < dim; ++d) {
            const double delta = row[d] - mean[d];
            stddev[d] += delta * delta;
        }
    }
    for (std::size_t d = 0; d < dim; ++d) {
        stddev[d] = std::sqrt(stddev[d] / (n - 1.0));
        if (stddev[d] < 1e-12) stddev[d] = 0.0;
    }
}

std::vector<double> Standardizer::transform(const std::vector<double>& row) const {
    if (row.size() != mean.size()) {
        throw DimensionMismatch("standardizer fitted on dimension " +
                                std::to_string(mean.size()) + ", got " +
                                std::to_string(row.size()));
    }
    std::vector<double> out(row.size());
    for (std::size_t d = 0; d < row.size(); ++d) {
        out[d] = stddev[d] == 0.0 ? 0.0 : (row[d] - mean[d]) / stddev[d];
    }
    return out;
}

std::vector<double> embed_record(const StudentRecord& record, std::size_t feature_dim) {
    const std::size_t T = record.behavior.size();
    std::vector<double> out(4 * feature_dim, 0.0);
    const double n = static_cast<double>(T);
    const double t_mean = (n - 1.0) / 2.0;
    double t_var = 0.0;  // sum of squared deviations of the time index
    for (std::size_t t = 0; t < T; ++t) {
        const double dt = static_cast<double>(t) - t_mean;
        t_var += dt * dt;
    }
    for (std::size_t f = 0; f < feature_dim; ++f) {
        double sum = 0.0;
        for (std::size_t t = 0; t < T; ++t) sum += record.behavior[t][f];
        const double mean = sum / n;
        double sq = 0.0, cov = 0.0;
        for (std::size_t t = 0; t < T; ++t) {
            const double dx = record.behavior[t][f] - mean;
            sq += dx * dx;
            cov += (static_cast<double>(t) - t_mean) * dx;
        }
        out[4 * f + 0] = mean;
        out[4 * f + 1] = std::sqrt(sq / n);
        out[4 * f + 2] = record.behavior[T - 1][f];
        out[4 * f + 3] = t_var == 0.0 ? 0.0 : cov / t_var;  // slope of length-1 is 0
    }
    return out;
}

BehaviorEmbedding embed_behavior(const Dataset& dataset) {
    if (dataset.records.empty()) throw EmptyDataset("cannot embed an empty dataset");
    BehaviorEmbedding embedding;
    embedding.rows.reserve(dataset.records.size());
    for (const auto& rec : dataset.records) {
        embedding.student_ids.push_back(rec.student_id);
        embedding.rows.push_back(embed_record(rec, dataset.feature_dim));
    }
    embedding.scaler.fit(embedding.rows);
    for (auto& row : embedding.rows) row = embedding.scaler.transform(row);
    return embedding;
}

namespace {

double sq_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double sum = 0.0;
    for (std::size_t d = 0; d < a.size(); ++d) {
        const double diff = a[d] - b[d];
        sum += diff * diff;
    }
    return sum;
}

struct LloydRun {
    std::vector<int> labels;
    std::vector<std::vector<double>> centroids;
    double inertia = 0.0;
};

// greedy k-means++: several candidates per seeding step, keep the one that
// minimizes the resulting potential
std::vector<std::vector<double>> seed_centroids(
    const std::vector<std::vector<double>>& rows, std::size_t k, Rng& rng) {
    const std::size_t n = rows.size();
    const std::size_t n_candidates = 2 + static_cast<std::size_t>(std::log(double(k)));
    std::vector<std::vector<double>> centroids;
    centroids.push_back(rows[rng.bounded(n)]);

    std::vector<double> dist_sq(n);
    double potential = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        dist_sq[i] = sq_distance(rows[i], centroids[0]);
        potential += dist_sq[i];
    }
    while (centroids.size() < k) {
        std::size_t best_candidate = 0;
        double best_potential = std::numeric_limits<double>::max();
        std::vector<double> best_dist;
        for (std::size_t c = 0; c < n_candidates; ++c) {
            // sample proportional to squared distance
            std::size_t pick = n - 1;
            if (potential > 0.0) {
                double target = rng.uniform() * potential;
                double acc = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    acc += dist_sq[i];
                    if (acc >= target) {
                        pick = i;
                        break;
                    }
                }
            } else {
                pick = rng.bounded(n);
            }
            std::vector<double> cand_dist(n);
            double cand_potential = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                cand_dist[i] = std::min(dist_sq[i], sq_distance(rows[i], rows[pick]));
                cand_potential += cand_dist[i];
            }
            if (cand_potential < best_potential) {
                best_potential = cand_potential;
                best_candidate = pick;
                best_dist = std::move(cand_dist);
            }
        }
        centroids.push_back(rows[best_candidate]);
        dist_sq = std::move(best_dist);
        potential = best_potential;
    }
    return centroids;
}

LloydRun lloyd(const std::vector<std::vector<double>>& rows, std::size_t k,
               std::uint64_t seed, std::size_t max_iter, double tol) {
    const std::size_t n = rows.size();
    const std::size_t dim = rows.front().size();
    Rng rng(seed);

    LloydRun run;
    run.centroids = seed_centroids(rows, k, rng);
    run.labels.assign(n, 0);

    double prev_inertia = std::numeric_limits<double>::max();
    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        // assignment step
        run.inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::max();
            int best_c = 0;
            for (std::size_t c = 0; c < k; ++c) {
                const double d = sq_distance(rows[i], run.centroids[c]);
                if (d < best) {
                    best = d;
                    best_c = static_cast<int>(c);
                }
            }
            run.labels[i] = best_c;
            run.inertia += best;
        }
        // assignment against fixed centroids cannot increase the objective
        if (run.inertia > prev_inertia + 1e-9 * (1.0 + prev_inertia)) {
            throw Error("k-means inertia increased across iterations");
        }
        prev_inertia = run.inertia;

        // update step
        std::vector<std::vector<double>> next(k, std::vector<double>(dim, 0.0));
        std::vector<std::size_t> sizes(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            sizes[run.labels[i]] += 1;
            for (std::size_t d = 0; d < dim; ++d) next[run.labels[i]][d] += rows[i][d];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (sizes[c] == 0) {
                // reseed an empty cluster at the point farthest from its centroid
                double worst = -1.0;
                std::size_t farthest = 0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double d = sq_distance(rows[i], run.centroids[run.labels[i]]);
                    if (d > worst) {
                        worst = d;
                        farthest = i;
                    }
                }
                next[c] = rows[farthest];
                run.labels[farthest] = static_cast<int>(c);
                prev_inertia = std::numeric_limits<double>::max();
            } else {
                for (std::size_t d = 0; d < dim; ++d) next[c][d] /= double(sizes[c]);
            }
        }
        double shift = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            shift = std::max(shift, std::sqrt(sq_distance(next[c], run.centroids[c])));
        }
        run.centroids = std::move(next);
        if (shift < tol) break;
    }
    // final assignment so labels and inertia match the returned centroids
    run.inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::max();
        int best_c = 0;
        for (std::size_t c = 0; c < k; ++c) {
            const double d = sq_distance(rows[i], run.centroids[c]);
            if (d < best) {
                best = d;
                best_c = static_cast<int>(c);
            }
        }
        run.labels[i] = best_c;
        run.inertia += best;
    }
    // duplicate rows can still starve a cluster on ties; move the farthest
    // point of a multi-member cluster into each empty one
    for (;;) {
        std::vector<std::size_t> sizes(k, 0);
        for (int label : run.labels) sizes[label] += 1;
        std::size_t empty = k;
        for (std::size_t c = 0; c < k; ++c) {
            if (sizes[c] == 0) {
                empty = c;
                break;
            }
        }
        if (empty == k) break;
        double worst = -1.0;
        std::size_t farthest = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (sizes[run.labels[i]] < 2) continue;
            const double d = sq_distance(rows[i], run.centroids[run.labels[i]]);
            if (d > worst) {
                worst = d;
                farthest = i;
            }
        }
        run.centroids[empty] = rows[farthest];
        run.labels[farthest] = static_cast<int>(empty);
        run.inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            run.inertia += sq_distance(rows[i], run.centroids[run.labels[i]]);
        }
    }
    return run;
}

}  // namespace

double mean_silhouette(const std::vector<std::vector<double>>& rows,
                       const std::vector<int>& labels, std::size_t k) {
    const std::size_t n = rows.size();
    if (k < 2) return 0.0;
    std::vector<std::size_t> sizes(k, 0);
    for (int label : labels) sizes[label] += 1;

    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (sizes[labels[i]] <= 1) continue;  // singleton clusters score 0
        std::vector<double> mean_dist(k, 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            mean_dist[labels[j]] += std::sqrt(sq_distance(rows[i], rows[j]));
        }
        double a = mean_dist[labels[i]] / double(sizes[labels[i]] - 1);
        double b = std::numeric_limits<double>::max();
        for (std::size_t c = 0; c < k; ++c) {
            if (static_cast<int>(c) == labels[i] || sizes[c] == 0) continue;
            b = std::min(b, mean_dist[c] / double(sizes[c]));
        }
        const double denom = std::max(a, b);
        if (denom > 0.0) total += (b - a) / denom;
    }
    return total / double(n);
}

ClusteringResult kmeans(const BehaviorEmbedding& embedding, std::size_t k,
                        std::uint64_t seed, std::size_t restarts, std::size_t max_iter,
                        double tol) {
    const auto& rows = embedding.rows;
    if (k < 2) throw Error("k must be >= 2");
    std::set<std::vector<double>> distinct(rows.begin(), rows.end());
    if (distinct.size() < 2) throw DegenerateData("all embedded rows are identical");
    if (k > distinct.size()) {
        throw KTooLarge("k = " + std::to_string(k) + " exceeds " +
                        std::to_string(distinct.size()) + " distinct rows");
    }

    LloydRun best;
    best.inertia = std::numeric_limits<double>::max();
    for (std::size_t r = 0; r < restarts; ++r) {
        LloydRun run = lloyd(rows, k, mix_seed(seed, r), max_iter, tol);
        if (run.inertia < best.inertia) best = std::move(run);  // stable argmin
    }

    ClusteringResult result;
    result.k = k;
    result.centroids = best.centroids;
    result.inertia = best.inertia;
    result.silhouette = mean_silhouette(rows, best.labels, k);
    result.seed = seed;
    for (std::size_t i = 0; i < embedding.student_ids.size(); ++i) {
        result.assignment[embedding.student_ids[i]] = best.labels[i];
    }
    return result;
}

ClusteringResult select_k(const BehaviorEmbedding& embedding, std::size_t k_min,
                          std::size_t k_max, std::uint64_t seed, std::size_t restarts) {
    if (k_min < 2 || k_max < k_min) throw Error("invalid k range");
    ClusteringResult best;
    bool have_best = false;
    for (std::size_t k = k_min; k <= k_max; ++k) {
        ClusteringResult result = kmeans(embedding, k, seed, restarts);
        if (!have_best || result.silhouette > best.silhouette) {
            best = std::move(result);  // strict >: ties keep the smaller k
            have_best = true;
        }
    }
    return best;
}

std::vector<std::size_t> ClusteringResult::cluster_sizes() const {
    std::vector<std::size_t> sizes(k, 0);
    for (const auto& [id, label] : assignment) sizes[label] += 1;
    return sizes;
}

Dataset assign_clusters(const Dataset& dataset, const ClusteringResult& result) {
    for (const auto& rec : dataset.records) {
        if (!result.assignment.count(rec.student_id)) {
            throw CoverageMismatch("clustering result has no label for student " +
                                   rec.student_id);
        }
    }
    Dataset out = dataset;
    std::map<std::string, int> assignment;
    for (const auto& rec : dataset.records) {
        assignment[rec.student_id] = result.assignment.at(rec.student_id);
    }
    out.cluster_assignment = std::move(assignment);
    return out;
}

json clustering_to_json(const ClusteringResult& result) {
    json assignment = json::object();
    for (const auto& [id, label] : result.assignment) assignment[id] = label;
    return json{{"k", result.k},
                {"assignment", assignment},
                {"centroids", result.centroids},
                {"inertia", result.inertia},
                {"silhouette", result.silhouette},
                {"seed", result.seed}};
}

ClusteringResult clustering_from_json(const json& j) {
    ClusteringResult result;
    result.k = j.at("k").get<std::size_t>();
    for (const auto& [id, label] : j.at("assignment").items()) {
        result.assignment[id] = label.get<int>();
    }
    result.centroids = j.at("centroids").get<std::vector<std::vector<double>>>();
    result.inertia = j.at("inertia").get<double>();
    result.silhouette = j.at("silhouette").get<double>();
    result.seed = j.at("seed").get<std::uint64_t>();
    return result;
}

}  // namespace fairsample
