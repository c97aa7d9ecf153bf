#include "fairsample/audit.hpp"

#include <algorithm>

using nlohmann::json;

namespace fairsample {

std::string to_string(CandidateProvenance p) {
    switch (p) {
        case CandidateProvenance::StandaloneImbalanced: return "standalone-imbalanced";
        case CandidateProvenance::CombinationImbalanced: return "combination-imbalanced";
        case CandidateProvenance::ForcedByConfig: return "forced-by-config";
    }
    return "unknown";
}

bool CandidateSet::contains(const GroupSpec& spec) const {
    return std::find(specs.begin(), specs.end(), spec) != specs.end();
}

ImbalanceFinding detect_imbalance(const Dataset& dataset, const GroupSpec& spec,
                                  double threshold, ImbalanceRule rule) {
    if (dataset.records.empty()) throw EmptyDataset("cannot audit an empty dataset");

    ImbalanceFinding finding;
    finding.spec = spec;
    finding.counts = group_counts(dataset, spec);
    finding.threshold = threshold;

    // majority = maximal count, ties broken by canonical key order (map order)
    std::size_t majority_count = 0;
    for (const auto& [key, count] : finding.counts) {
        if (count > majority_count) {
            majority_count = count;
            finding.majority_key = key;
        }
    }
    const double total = static_cast<double>(dataset.records.size());
    for (const auto& [key, count] : finding.counts) {
        const double diff = static_cast<double>(majority_count - count);
        const double reference =
            rule == ImbalanceRule::ShareOfTotal ? total : static_cast<double>(majority_count);
        if (diff > threshold * reference) {
            finding.under_represented.push_back(key);
        }
    }
    return finding;
}

namespace {

// all size-r subsets of `pool` (indices ascending), appended to `out`
void combinations(const std::vector<std::string>& pool, std::size_t r,
                  std::vector<std::vector<std::string>>& out) {
    if (r == 0 || r > pool.size()) return;
    std::vector<std::size_t> idx(r);
    for (std::size_t i = 0; i < r; ++i) idx[i] = i;
    for (;;) {
        std::vector<std::string> combo;
        combo.reserve(r);
        for (std::size_t i : idx) combo.push_back(pool[i]);
        out.push_back(std::move(combo));
        std::size_t i = r;
        while (i > 0 && idx[i - 1] == pool.size() - r + (i - 1)) --i;
        if (i == 0) break;
        ++idx[i - 1];
        for (std::size_t j = i; j < r; ++j) idx[j] = idx[j - 1] + 1;
    }
}

}  // namespace

CandidateSet build_candidate_set(const Dataset& dataset,
                                 const std::vector<std::string>& biased_attributes,
                                 std::size_t max_combo_arity, double threshold,
                                 ImbalanceRule rule) {
    for (const auto& name : biased_attributes) {
        if (!dataset.schema.has(name)) {
            throw UnknownAttribute("biased attribute not in schema: " + name);
        }
    }
    if (max_combo_arity < 1) throw Error("max_combo_arity must be >= 1");

    CandidateSet out;
    auto add = [&out](GroupSpec spec, CandidateProvenance prov) {
        if (!out.contains(spec)) {
            out.specs.push_back(std::move(spec));
            out.provenance.push_back(prov);
        }
    };

    // standalone pass: every schema attribute plus the label pseudo-attribute
    std::vector<std::string> standalone_names = dataset.schema.names();
    standalone_names.push_back(kLabelName);
    std::sort(standalone_names.begin(), standalone_names.end());
    for (const auto& name : standalone_names) {
        GroupSpec spec({name});
        if (detect_imbalance(dataset, spec, threshold, rule).imbalanced()) {
            add(std::move(spec), CandidateProvenance::StandaloneImbalanced);
        }
    }

    // combination pass: each biased attribute joined with other attributes
    // and/or the label, up to max_combo_arity, kept when the joint cells are
    // imbalanced
    std::vector<GroupSpec> combos;
    for (const auto& biased : biased_attributes) {
        std::vector<std::string> others;
        for (const auto& name : dataset.schema.names()) {
            if (name != biased) others.push_back(name);
        }
        others.push_back(kLabelName);
        std::sort(others.begin(), others.end());
        for (std::size_t extra = 1; extra + 1 <= max_combo_arity; ++extra) {
            std::vector<std::vector<std::string>> subsets;
            combinations(others, extra, subsets);
            for (auto& subset : subsets) {
                subset.push_back(biased);
                combos.emplace_back(std::move(subset));
            }
        }
    }
    std::sort(combos.begin(), combos.end(),
              [](const GroupSpec& a, const GroupSpec& b) {
                  if (a.arity() != b.arity()) return a.arity() < b.arity();
                  return a.names() < b.names();
              });
    combos.erase(std::unique(combos.begin(), combos.end()), combos.end());
    for (auto& spec : combos) {
        if (detect_imbalance(dataset, spec, threshold, rule).imbalanced()) {
            add(std::move(spec), CandidateProvenance::CombinationImbalanced);
        }
    }
    return out;
}

json finding_to_json(const ImbalanceFinding& finding, std::size_t total_records) {
    json counts = json::object();
    json shares = json::object();
    for (const auto& [key, count] : finding.counts) {
        counts[key.to_string()] = count;
        shares[key.to_string()] =
            static_cast<double>(count) / static_cast<double>(total_records);
    }
    json under = json::array();
    for (const auto& key : finding.under_represented) under.push_back(key.to_string());
    return json{{"spec", finding.spec.to_string()},
                {"counts", counts},
                {"shares", shares},
                {"majority", finding.majority_key.to_string()},
                {"under_represented", under},
                {"imbalanced", finding.imbalanced()},
                {"threshold", finding.threshold}};
}

json candidate_set_to_json(const CandidateSet& candidates) {
    json out = json::array();
    for (std::size_t i = 0; i < candidates.specs.size(); ++i) {
        out.push_back({{"spec", candidates.specs[i].to_string()},
                       {"provenance", to_string(candidates.provenance[i])}});
    }
    return out;
}

}  // namespace fairsample
