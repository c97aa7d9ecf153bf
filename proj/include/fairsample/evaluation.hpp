#pragma once

#include <cstdint>
#include <json.hpp>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fairsample/dataset.hpp"
#include "fairsample/predictor.hpp"
#include "fairsample/sampling.hpp"

namespace fairsample {

struct FoldAssignment {
    std::size_t k = 0;
    std::map<std::string, std::size_t> fold_of;  // student_id -> fold index

    std::vector<std::size_t> test_indices(const Dataset& dataset, std::size_t fold) const;
    std::vector<std::size_t> train_indices(const Dataset& dataset, std::size_t fold) const;
};

// Student-stratified folds: ids are shuffled within each label stratum and
// dealt round-robin, the deal position carrying over between strata so fold
// sizes stay within one of each other.
FoldAssignment stratified_folds(const Dataset& dataset, std::size_t k, std::uint64_t seed);

// Mann-Whitney AUC: fraction of (positive, negative) pairs ranked correctly,
// ties counted one half.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

struct GroupMetrics {
    GroupKey group;
    std::size_t n = 0;
    std::size_t tp = 0, fn = 0, fp = 0, tn = 0;
    std::optional<double> fnr;  // undefined (not zero) when no positives
    std::optional<double> fpr;
    bool reported = true;  // false when n < 10
};

std::vector<GroupMetrics> confusion_by_group(const std::vector<int>& predictions,
                                             const std::vector<int>& labels,
                                             const Dataset& dataset,
                                             const GroupSpec& spec);

// Pooled: one confusion per group over the union of test folds (default).
// PerFoldMacro: per-fold FNRs averaged over the folds where they are defined.
enum class GapMode { Pooled, PerFoldMacro };

struct MitigationSpec {
    Strategy strategy = Strategy::Equal;
    GroupSpec spec;
};

std::string config_id_of(const std::optional<MitigationSpec>& mitigation);

struct AttributeGap {
    double gap = 0.0;  // max - min FNR over reported groups with defined FNR
    std::vector<GroupMetrics> groups;
};

struct FairnessReport {
    std::string config_id;
    std::uint64_t seed = 0;
    double auc_mean = 0.0;
    double auc_std = 0.0;
    std::map<std::string, AttributeGap> per_attribute;
    double overall_fnr = 0.0;
    double selection_score = 0.0;  // mean of the audited per-attribute gaps
    std::vector<std::string> flags;
};

struct EvalOptions {
    std::size_t folds = 10;
    std::uint64_t seed = 0;
    PredictorConfig predictor;
    std::vector<std::string> audited_attributes;
    GapMode gap_mode = GapMode::Pooled;
    std::string external_work_dir;  // scratch space for external-model scoring
};

// Per-fold bookkeeping for leakage checks and plan persistence.
struct EvalTrace {
    std::vector<std::vector<std::string>> train_ids;  // duplicates included
    std::vector<std::vector<std::string>> test_ids;
    std::vector<SamplingPlan> plans;  // one per fold when mitigation is active
};

// Trains on each (re-balanced) training fold, scores the untouched test fold,
// pools test predictions for group metrics and averages AUC over folds.
FairnessReport evaluate_configuration(const Dataset& dataset,
                                      const std::optional<MitigationSpec>& mitigation,
                                      const EvalOptions& options,
                                      EvalTrace* trace = nullptr);

struct SelectionEntry {
    std::size_t rank = 0;
    std::string config_id;
    double selection_score = 0.0;
    double overall_fnr = 0.0;
    std::string verdict;  // chosen | skipped-degradation | not-considered
};

struct SelectionResult {
    FairnessReport chosen;
    std::vector<SelectionEntry> trace;
    bool degradation_accepted = false;
};

// Ranks candidates by ascending selection score (ties: lower overall FNR,
// then config id) and accepts the first whose overall FNR stays within
// degradation_limit of the baseline; otherwise the rank-1 candidate is
// returned flagged "degradation-accepted".
SelectionResult select_technique(const std::vector<FairnessReport>& candidates,
                                 const FairnessReport& baseline,
                                 double degradation_limit = 0.15);

nlohmann::json report_to_json(const FairnessReport& report);
FairnessReport report_from_json(const nlohmann::json& j);
nlohmann::json selection_to_json(const SelectionResult& result,
                                 const FairnessReport& baseline,
                                 double degradation_limit);

}  // namespace fairsample
