#include "fairsample/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <set>

#include "fairsample/rng.hpp"

using nlohmann::json;

namespace fairsample {

std::vector<std::size_t> FoldAssignment::test_indices(const Dataset& dataset,
                                                      std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < dataset.records.size(); ++i) {
        if (fold_of.at(dataset.records[i].student_id) == fold) out.push_back(i);
    }
    return out;
}

std::vector<std::size_t> FoldAssignment::train_indices(const Dataset& dataset,
                                                       std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < dataset.records.size(); ++i) {
        if (fold_of.at(dataset.records[i].student_id) != fold) out.push_back(i);
    }
    return out;
}

FoldAssignment stratified_folds(const Dataset& dataset, std::size_t k,
                                std::uint64_t seed) {
    if (k < 2) throw TooFewRecords("need at least 2 folds to hold out data");
    std::vector<std::size_t> strata[2];
    for (std::size_t i = 0; i < dataset.records.size(); ++i) {
        strata[dataset.records[i].label == 1 ? 1 : 0].push_back(i);
    }
    for (int label = 0; label < 2; ++label) {
        if (strata[label].size() < k) {
            throw TooFewRecords("label " + std::to_string(label) + " has " +
                                std::to_string(strata[label].size()) +
                                " records, need at least " + std::to_string(k));
        }
    }

    FoldAssignment assignment;
    assignment.k = k;
    Rng rng(mix_seed(seed, "stratified-folds"));
    std::size_t next_fold = 0;  // deal position carries over between strata
    for (int label = 0; label < 2; ++label) {
        std::vector<std::size_t>& stratum = strata[label];
        rng.shuffle(stratum);
        for (std::size_t idx : stratum) {
            assignment.fold_of[dataset.records[idx].student_id] = next_fold;
            next_fold = (next_fold + 1) % k;
        }
    }
    return assignment;
}

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) {
        throw AlignmentMismatch("scores and labels differ in length");
    }
    std::size_t n_pos = 0, n_neg = 0;
    for (int label : labels) (label == 1 ? n_pos : n_neg) += 1;
    if (n_pos == 0 || n_neg == 0) {
        throw SingleClass("AUC requires both labels to be present");
    }

    // rank-sum with average ranks on ties
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&scores](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t t = i; t <= j; ++t) {
            if (labels[order[t]] == 1) rank_sum_pos += avg_rank;
        }
        i = j + 1;
    }
    const double u = rank_sum_pos - static_cast<double>(n_pos) *
                                        (static_cast<double>(n_pos) + 1.0) / 2.0;
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

namespace {

std::vector<GroupMetrics> confusion_over(const std::vector<std::size_t>& indices,
                                         const std::vector<int>& predictions,
                                         const std::vector<int>& labels,
                                         const Dataset& dataset, const GroupSpec& spec) {
    std::map<GroupKey, GroupMetrics> by_group;
    for (std::size_t i : indices) {
        GroupKey key = group_key_of(dataset, i, spec);
        GroupMetrics& m = by_group[key];
        m.group = key;
        m.n += 1;
        if (labels[i] == 1) {
            (predictions[i] == 1 ? m.tp : m.fn) += 1;
        } else {
            (predictions[i] == 1 ? m.fp : m.tn) += 1;
        }
    }
    std::vector<GroupMetrics> out;
    out.reserve(by_group.size());
    for (auto& [key, m] : by_group) {
        if (m.tp + m.fn > 0) m.fnr = static_cast<double>(m.fn) / double(m.tp + m.fn);
        if (m.fp + m.tn > 0) m.fpr = static_cast<double>(m.fp) / double(m.fp + m.tn);
        m.reported = m.n >= 10;
        out.push_back(std::move(m));
    }
    return out;
}

}  // namespace

std::vector<GroupMetrics> confusion_by_group(const std::vector<int>& predictions,
                                             const std::vector<int>& labels,
                                             const Dataset& dataset,
                                             const GroupSpec& spec) {
    if (predictions.size() != dataset.records.size() ||
        labels.size() != dataset.records.size()) {
        throw AlignmentMismatch("predictions and labels must align with the records");
    }
    std::vector<std::size_t> all(dataset.records.size());
    std::iota(all.begin(), all.end(), 0);
    return confusion_over(all, predictions, labels, dataset, spec);
}

std::string config_id_of(const std::optional<MitigationSpec>& mitigation) {
    if (!mitigation) return "baseline";
    return to_string(mitigation->strategy) + "__" + mitigation->spec.to_string();
}

FairnessReport evaluate_configuration(const Dataset& dataset,
                                      const std::optional<MitigationSpec>& mitigation,
                                      const EvalOptions& options, EvalTrace* trace) {
    FairnessReport report;
    report.config_id = config_id_of(mitigation);
    report.seed = options.seed;

    const FoldAssignment folds =
        stratified_folds(dataset, options.folds, mix_seed(options.seed, "folds"));

    std::vector<int> pooled_predictions(dataset.records.size(), -1);
    std::vector<bool> scored(dataset.records.size(), false);
    std::vector<double> fold_aucs;

    for (std::size_t f = 0; f < options.folds; ++f) {
        const std::vector<std::size_t> test_idx = folds.test_indices(dataset, f);
        const std::vector<std::size_t> train_idx = folds.train_indices(dataset, f);

        // training fold as a dataset of its own, so plans see fold counts only
        Dataset train_fold;
        train_fold.schema = dataset.schema;
        train_fold.feature_dim = dataset.feature_dim;
        train_fold.records.reserve(train_idx.size());
        for (std::size_t i : train_idx) train_fold.records.push_back(dataset.records[i]);
        if (dataset.cluster_assignment) {
            std::map<std::string, int> sub;
            for (std::size_t i : train_idx) {
                const std::string& id = dataset.records[i].student_id;
                sub[id] = dataset.cluster_assignment->at(id);
            }
            train_fold.cluster_assignment = std::move(sub);
        }

        std::vector<StudentRecord> train_records = train_fold.records;
        if (mitigation) {
            SamplingPlan plan =
                make_plan(train_fold, mitigation->spec, mitigation->strategy,
                          mix_seed(options.seed, "plan-fold-" + std::to_string(f)));
            const ResampledDataset extras = apply_plan(train_fold, plan);
            for (std::size_t idx : extras.extra_indices) {
                train_records.push_back(train_fold.records[idx]);
            }
            for (const auto& warning : plan.warnings) {
                const std::string flag = "plan-warning: " + warning;
                if (std::find(report.flags.begin(), report.flags.end(), flag) ==
                    report.flags.end()) {
                    report.flags.push_back(flag);
                }
            }
            if (trace) trace->plans.push_back(std::move(plan));
        }

        // re-balancing may only touch the training fold; no test id may ever
        // appear in the (possibly duplicated) training records
        std::set<std::string> test_ids;
        for (std::size_t i : test_idx) test_ids.insert(dataset.records[i].student_id);
        for (const auto& rec : train_records) {
            if (test_ids.count(rec.student_id)) {
                throw Error("leakage: training fold contains test student " +
                            rec.student_id);
            }
        }
        if (trace) {
            std::vector<std::string> train_ids;
            train_ids.reserve(train_records.size());
            for (const auto& rec : train_records) train_ids.push_back(rec.student_id);
            trace->train_ids.push_back(std::move(train_ids));
            trace->test_ids.push_back(
                std::vector<std::string>(test_ids.begin(), test_ids.end()));
        }

        bool has_pos = false, has_neg = false;
        for (const auto& rec : train_records) (rec.label == 1 ? has_pos : has_neg) = true;
        if (!has_pos || !has_neg) {
            report.flags.push_back("single-class-fold: " + std::to_string(f));
            continue;
        }

        std::vector<StudentRecord> test_records;
        test_records.reserve(test_idx.size());
        for (std::size_t i : test_idx) test_records.push_back(dataset.records[i]);

        PredictorConfig fold_config = options.predictor;
        fold_config.seed = mix_seed(options.seed, "train-fold-" + std::to_string(f));
        std::vector<double> scores;
        if (fold_config.kind == ModelKind::External) {
            const std::filesystem::path work =
                std::filesystem::path(options.external_work_dir.empty()
                                          ? std::filesystem::temp_directory_path().string()
                                          : options.external_work_dir) /
                (report.config_id + "-fold" + std::to_string(f));
            scores = score_with_external_model(fold_config.external_command, dataset.schema,
                                               train_records, test_records, work);
        } else {
            const TrainedModel model = train(train_records, fold_config, dataset.feature_dim);
            scores = predict_proba(model, test_records, dataset.feature_dim);
        }

        std::vector<int> test_labels;
        test_labels.reserve(test_idx.size());
        for (std::size_t i : test_idx) test_labels.push_back(dataset.records[i].label);
        fold_aucs.push_back(auc(scores, test_labels));

        for (std::size_t t = 0; t < test_idx.size(); ++t) {
            pooled_predictions[test_idx[t]] =
                scores[t] >= fold_config.threshold ? 1 : 0;
            scored[test_idx[t]] = true;
        }
    }

    if (fold_aucs.empty()) throw SingleClassFold("every training fold was single-class");
    const double mean = std::accumulate(fold_aucs.begin(), fold_aucs.end(), 0.0) /
                        static_cast<double>(fold_aucs.size());
    double var = 0.0;
    for (double a : fold_aucs) var += (a - mean) * (a - mean);
    report.auc_mean = mean;
    report.auc_std = fold_aucs.size() > 1
                         ? std::sqrt(var / static_cast<double>(fold_aucs.size() - 1))
                         : 0.0;

    std::vector<std::size_t> scored_idx;
    std::vector<int> labels(dataset.records.size(), 0);
    for (std::size_t i = 0; i < dataset.records.size(); ++i) {
        labels[i] = dataset.records[i].label;
        if (scored[i]) scored_idx.push_back(i);
    }

    std::size_t overall_fn = 0, overall_tp = 0;
    for (std::size_t i : scored_idx) {
        if (labels[i] == 1) (pooled_predictions[i] == 1 ? overall_tp : overall_fn) += 1;
    }
    report.overall_fnr = (overall_fn + overall_tp) == 0
                             ? 0.0
                             : static_cast<double>(overall_fn) /
                                   static_cast<double>(overall_fn + overall_tp);

    double gap_sum = 0.0;
    for (const auto& attr : options.audited_attributes) {
        const GroupSpec spec({attr});
        AttributeGap entry;
        entry.groups = confusion_over(scored_idx, pooled_predictions, labels, dataset, spec);

        std::map<GroupKey, double> fnr_by_group;
        if (options.gap_mode == GapMode::Pooled) {
            for (const auto& m : entry.groups) {
                if (m.fnr) fnr_by_group[m.group] = *m.fnr;
            }
        } else {
            // macro: average the per-fold FNRs over the folds where defined
            std::map<GroupKey, std::pair<double, std::size_t>> sums;
            for (std::size_t f = 0; f < options.folds; ++f) {
                std::vector<std::size_t> fold_scored;
                for (std::size_t i : folds.test_indices(dataset, f)) {
                    if (scored[i]) fold_scored.push_back(i);
                }
                for (const auto& m :
                     confusion_over(fold_scored, pooled_predictions, labels, dataset, spec)) {
                    if (m.fnr) {
                        sums[m.group].first += *m.fnr;
                        sums[m.group].second += 1;
                    }
                }
            }
            for (const auto& [key, acc] : sums) {
                fnr_by_group[key] = acc.first / static_cast<double>(acc.second);
            }
        }

        double lo = 1.0, hi = 0.0;
        std::size_t usable = 0;
        for (const auto& m : entry.groups) {
            if (!m.reported || !fnr_by_group.count(m.group)) continue;
            lo = std::min(lo, fnr_by_group.at(m.group));
            hi = std::max(hi, fnr_by_group.at(m.group));
            ++usable;
        }
        entry.gap = usable >= 2 ? hi - lo : 0.0;
        if (usable < 2) report.flags.push_back("gap-undefined: " + attr);
        gap_sum += entry.gap;
        report.per_attribute[attr] = std::move(entry);
    }
    report.selection_score = options.audited_attributes.empty()
                                 ? 0.0
                                 : gap_sum / double(options.audited_attributes.size());
    return report;
}

SelectionResult select_technique(const std::vector<FairnessReport>& candidates,
                                 const FairnessReport& baseline,
                                 double degradation_limit) {
    if (candidates.empty()) throw EmptyCandidates("no candidate reports to select from");

    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&candidates](std::size_t a, std::size_t b) {
        const FairnessReport& ra = candidates[a];
        const FairnessReport& rb = candidates[b];
        if (ra.selection_score != rb.selection_score) {
            return ra.selection_score < rb.selection_score;
        }
        if (ra.overall_fnr != rb.overall_fnr) return ra.overall_fnr < rb.overall_fnr;
        return ra.config_id < rb.config_id;
    });

    SelectionResult result;
    std::size_t chosen_rank = 0;
    for (std::size_t r = 0; r < order.size(); ++r) {
        const FairnessReport& candidate = candidates[order[r]];
        SelectionEntry entry;
        entry.rank = r + 1;
        entry.config_id = candidate.config_id;
        entry.selection_score = candidate.selection_score;
        entry.overall_fnr = candidate.overall_fnr;
        if (chosen_rank == 0 &&
            candidate.overall_fnr <= baseline.overall_fnr + degradation_limit) {
            entry.verdict = "chosen";
            chosen_rank = r + 1;
            result.chosen = candidate;
        } else if (chosen_rank == 0) {
            entry.verdict = "skipped-degradation";
        } else {
            entry.verdict = "not-considered";
        }
        result.trace.push_back(std::move(entry));
    }
    if (chosen_rank == 0) {
        // nothing within the limit: fall back to the best-scored candidate
        result.chosen = candidates[order[0]];
        result.chosen.flags.push_back("degradation-accepted");
        result.degradation_accepted = true;
        result.trace[0].verdict = "chosen-degradation-accepted";
    }
    return result;
}

json report_to_json(const FairnessReport& report) {
    json per_attribute = json::object();
    for (const auto& [attr, entry] : report.per_attribute) {
        json groups = json::array();
        for (const auto& m : entry.groups) {
            json g{{"key", m.group.to_string()}, {"n", m.n},     {"tp", m.tp},
                   {"fn", m.fn},                 {"fp", m.fp},   {"tn", m.tn},
                   {"reported", m.reported}};
            if (m.fnr) g["fnr"] = *m.fnr;
            if (m.fpr) g["fpr"] = *m.fpr;
            groups.push_back(std::move(g));
        }
        per_attribute[attr] = {{"gap", entry.gap}, {"groups", groups}};
    }
    return json{{"config_id", report.config_id},
                {"seed", report.seed},
                {"auc_mean", report.auc_mean},
                {"auc_std", report.auc_std},
                {"per_attribute", per_attribute},
                {"overall_fnr", report.overall_fnr},
                {"selection_score", report.selection_score},
                {"flags", report.flags}};
}

FairnessReport report_from_json(const json& j) {
    FairnessReport report;
    report.config_id = j.at("config_id").get<std::string>();
    report.seed = j.at("seed").get<std::uint64_t>();
    report.auc_mean = j.at("auc_mean").get<double>();
    report.auc_std = j.at("auc_std").get<double>();
    report.overall_fnr = j.at("overall_fnr").get<double>();
    report.selection_score = j.at("selection_score").get<double>();
    report.flags = j.at("flags").get<std::vector<std::string>>();
    for (const auto& [attr, entry] : j.at("per_attribute").items()) {
        AttributeGap gap;
        gap.gap = entry.at("gap").get<double>();
        for (const auto& g : entry.at("groups")) {
            GroupMetrics m;
            m.group.values = {g.at("key").get<std::string>()};  // display key only
            m.n = g.at("n").get<std::size_t>();
            m.tp = g.at("tp").get<std::size_t>();
            m.fn = g.at("fn").get<std::size_t>();
            m.fp = g.at("fp").get<std::size_t>();
            m.tn = g.at("tn").get<std::size_t>();
            m.reported = g.at("reported").get<bool>();
            if (g.contains("fnr")) m.fnr = g.at("fnr").get<double>();
            if (g.contains("fpr")) m.fpr = g.at("fpr").get<double>();
            gap.groups.push_back(std::move(m));
        }
        report.per_attribute[attr] = std::move(gap);
    }
    return report;
}

json selection_to_json(const SelectionResult& result, const FairnessReport& baseline,
                       double degradation_limit) {
    json trace = json::array();
    for (const auto& entry : result.trace) {
        trace.push_back({{"rank", entry.rank},
                         {"config_id", entry.config_id},
                         {"selection_score", entry.selection_score},
                         {"overall_fnr", entry.overall_fnr},
                         {"verdict", entry.verdict}});
    }
    return json{{"baseline_config_id", baseline.config_id},
                {"baseline_overall_fnr", baseline.overall_fnr},
                {"baseline_selection_score", baseline.selection_score},
                {"degradation_limit", degradation_limit},
                {"chosen", result.chosen.config_id},
                {"degradation_accepted", result.degradation_accepted},
                {"trace", trace}};
}

}  // namespace fairsample
