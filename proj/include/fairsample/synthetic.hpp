#pragma once

#include <cstdint>
#include <json.hpp>
#include <map>
#include <string>
#include <vector>

#include "fairsample/dataset.hpp"

namespace fairsample {

struct DemographicMarginal {
    std::string name;
    std::vector<std::string> values;
    std::vector<double> probabilities;  // sums to 1
};

struct Archetype {
    std::string name;
    std::vector<std::vector<double>> mean_trajectory;  // T x D
    double noise_sigma = 0.35;
    double outcome_logit = 0.0;  // P(label = 1 | archetype) through the logistic link
};

// Synthetic-cohort recipe: students draw a demographic cell, the cell's
// coupling row picks a behavioral archetype, behavior is the archetype mean
// trajectory plus Gaussian noise, and the label is Bernoulli in the
// archetype's outcome probability.
struct ScenarioConfig {
    std::string name;
    std::size_t n_students = 400;
    std::vector<DemographicMarginal> demographics;
    std::vector<Archetype> archetypes;
    // P(archetype | demographic cell); cells enumerate the cartesian product
    // of attribute values in attribute order, last attribute fastest
    std::vector<std::vector<double>> coupling;
    std::uint64_t seed = 0;

    std::size_t n_cells() const;
    void validate() const;
};

struct SyntheticCohort {
    Dataset dataset;
    std::map<std::string, int> archetype_of;  // ground truth, tests only
};

SyntheticCohort generate(const ScenarioConfig& config);

// "flipped-like", "tuglet-like" or "uniform-null". The first two carry
// fixed demographic marginals and label interactions at the population
// level; uniform-null couples nothing to demographics.
ScenarioConfig preset(const std::string& name);

nlohmann::json scenario_to_json(const ScenarioConfig& config);
ScenarioConfig scenario_from_json(const nlohmann::json& j);

}  // namespace fairsample
