#pragma once

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "fairsample/audit.hpp"
#include "fairsample/clustering.hpp"
#include "fairsample/evaluation.hpp"
#include "fairsample/synthetic.hpp"

namespace fairsample {

enum class ClusterMode { Off, Fixed, Auto };

// Everything needed to replay a run byte-for-byte; persisted as config.json
// in the run directory.
struct RunConfig {
    // input: a named preset or a records/schema file pair
    std::string preset_name;
    std::string records_path;
    std::string schema_path;
    bool csv = false;
    std::size_t n_students = 0;  // preset size override; 0 keeps the default

    std::vector<std::string> audited_attributes;  // empty: all schema attributes
    double imbalance_threshold = 0.15;
    ImbalanceRule imbalance_rule = ImbalanceRule::ShareOfTotal;
    std::size_t max_combo_arity = 3;
    std::vector<GroupSpec> forced_specs;

    std::vector<Strategy> strategies;  // empty: all five
    ClusterMode cluster_mode = ClusterMode::Fixed;
    std::size_t cluster_k = 6;
    std::size_t cluster_k_min = 2;
    std::size_t cluster_k_max = 8;

    PredictorConfig predictor;
    std::size_t folds = 10;
    GapMode gap_mode = GapMode::Pooled;
    std::uint64_t seed = 0;
    std::string out_dir;
    std::size_t workers = 0;  // 0: hardware concurrency

    void validate() const;
    std::vector<std::string> audited_or_default(const Dataset& dataset) const;
    std::vector<Strategy> strategies_or_default() const;
};

nlohmann::json run_config_to_json(const RunConfig& config);
RunConfig run_config_from_json(const nlohmann::json& j);

// Loads the input files or deterministically generates the configured preset.
Dataset acquire_dataset(const RunConfig& config);

struct SweepConfiguration {
    std::optional<MitigationSpec> mitigation;  // nullopt = baseline
    std::string id;
};

// baseline + (strategy x candidate spec) + behavioral variants, in a fixed
// deterministic order
std::vector<SweepConfiguration> enumerate_sweep(const Dataset& dataset,
                                                const CandidateSet& candidates,
                                                const RunConfig& config);

// audit: imbalance findings, candidate set and the baseline fairness report
std::filesystem::path cmd_audit(const RunConfig& config);

// cluster: behavior embedding + k-means, persisted as clusters.json
std::filesystem::path cmd_cluster(const RunConfig& config);

// mitigate: full sweep with per-configuration reports, plans, selection and
// the rendered text report; finished configurations are skipped on rerun
std::filesystem::path cmd_mitigate(const RunConfig& config);

// report: re-render report.txt from the JSON artifacts of a finished run
std::string cmd_report(const std::filesystem::path& run_dir);

// generate: synthesize a preset cohort to records/schema files plus the
// ground-truth archetype sidecar
std::filesystem::path cmd_generate(const RunConfig& config);

}  // namespace fairsample
