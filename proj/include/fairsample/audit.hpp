#pragma once

#include <json.hpp>
#include <string>
#include <vector>

#include "fairsample/dataset.hpp"

namespace fairsample {

// How "15% difference in representation compared to the majority" is read.
// ShareOfTotal flags group g when (count(majority) - count(g)) / N > threshold;
// RatioToMajority compares the difference against threshold * count(majority).
enum class ImbalanceRule { ShareOfTotal, RatioToMajority };

struct ImbalanceFinding {
    GroupSpec spec;
    GroupCounts counts;
    GroupKey majority_key;
    std::vector<GroupKey> under_represented;
    double threshold = 0.15;

    bool imbalanced() const { return !under_represented.empty(); }
};

enum class CandidateProvenance { StandaloneImbalanced, CombinationImbalanced, ForcedByConfig };

std::string to_string(CandidateProvenance p);

// The candidate oversampling set. Specs keep insertion order: standalone
// specs first (canonical), then combinations by ascending arity then
// lexicographic.
struct CandidateSet {
    std::vector<GroupSpec> specs;
    std::vector<CandidateProvenance> provenance;

    bool contains(const GroupSpec& spec) const;
    std::size_t size() const { return specs.size(); }
};

ImbalanceFinding detect_imbalance(const Dataset& dataset, const GroupSpec& spec,
                                  double threshold = 0.15,
                                  ImbalanceRule rule = ImbalanceRule::ShareOfTotal);

// Builds the candidate set from the attributes on which the predictor was
// found biased: imbalanced standalone attributes (and the label) enter
// directly, and every combination of a biased attribute with other attributes
// and/or the label that forms imbalanced groups enters as well.
CandidateSet build_candidate_set(const Dataset& dataset,
                                 const std::vector<std::string>& biased_attributes,
                                 std::size_t max_combo_arity = 3,
                                 double threshold = 0.15,
                                 ImbalanceRule rule = ImbalanceRule::ShareOfTotal);

nlohmann::json finding_to_json(const ImbalanceFinding& finding, std::size_t total_records);
nlohmann::json candidate_set_to_json(const CandidateSet& candidates);

}  // namespace fairsample
