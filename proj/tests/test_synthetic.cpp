#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fairsample/clustering.hpp"
#include "fairsample/evaluation.hpp"
#include "fairsample/synthetic.hpp"
#include "helpers.hpp"

using namespace fairsample;

namespace {

double share_of(const Dataset& ds, const std::string& attr, const std::string& value) {
    std::size_t count = 0;
    for (const auto& rec : ds.records) count += rec.attributes.at(attr) == value;
    return static_cast<double>(count) / static_cast<double>(ds.records.size());
}

double label_share(const Dataset& ds) {
    std::size_t count = 0;
    for (const auto& rec : ds.records) count += rec.label;
    return static_cast<double>(count) / static_cast<double>(ds.records.size());
}

}  // namespace

TEST_CASE("generation is deterministic per seed") {
    ScenarioConfig config = preset("tuglet-like");
    config.n_students = 300;
    config.seed = 77;
    const SyntheticCohort a = generate(config);
    const SyntheticCohort b = generate(config);
    CHECK(a.dataset == b.dataset);
    CHECK(a.archetype_of == b.archetype_of);

    config.seed = 78;
    const SyntheticCohort c = generate(config);
    CHECK(a.dataset.records != c.dataset.records);
}

TEST_CASE("generated cohorts pass full dataset validation") {
    for (const char* name : {"flipped-like", "tuglet-like", "uniform-null"}) {
        ScenarioConfig config = preset(name);
        config.seed = 3;
        const SyntheticCohort cohort = generate(config);
        CHECK_NOTHROW(validate_dataset(cohort.dataset));
        CHECK(cohort.archetype_of.size() == cohort.dataset.records.size());
        CHECK(cohort.dataset.records.size() == config.n_students);
    }
}

TEST_CASE("flipped preset hits its target gender and label shares") {
    ScenarioConfig config = preset("flipped-like");
    config.n_students = 10000;
    config.seed = 13;
    const Dataset ds = generate(config).dataset;
    CHECK(std::abs(share_of(ds, "gender", "M") - 0.65) < 0.02);
    CHECK(std::abs(share_of(ds, "gender", "F") - 0.35) < 0.02);
    CHECK(std::abs(label_share(ds) - 0.42) < 0.02);
    // country marginals carry a small residual "other" mass
    CHECK(std::abs(share_of(ds, "country", "CO") - 0.49) < 0.02);
    CHECK(std::abs(share_of(ds, "country", "CF") - 0.47) < 0.02);
    CHECK(std::abs(share_of(ds, "country", "XX") - 0.04) < 0.01);
}

TEST_CASE("tuglet preset reproduces the label-school interaction") {
    ScenarioConfig config = preset("tuglet-like");
    config.n_students = 10000;
    config.seed = 17;
    const Dataset ds = generate(config).dataset;

    std::size_t label1 = 0, label1_school_m = 0;
    for (const auto& rec : ds.records) {
        if (rec.label == 1) {
            ++label1;
            label1_school_m += rec.attributes.at("school") == "M";
        }
    }
    const double p = static_cast<double>(label1_school_m) / static_cast<double>(label1);
    CHECK(std::abs(p - 0.58) < 0.03);
    CHECK(std::abs(label_share(ds) - 0.47) < 0.02);
    CHECK(std::abs(share_of(ds, "gender", "M") - 0.51) < 0.02);
    CHECK(std::abs(share_of(ds, "gender", "F") - 0.48) < 0.02);
}

TEST_CASE("uniform coupling leaves demographics and archetypes independent") {
    ScenarioConfig config = preset("uniform-null");
    config.n_students = 5000;
    config.seed = 19;
    const SyntheticCohort cohort = generate(config);

    // demographic cell index vs archetype, plug-in mutual information
    std::vector<int> cell_of, archetype_of;
    for (const auto& rec : cohort.dataset.records) {
        const int gender = rec.attributes.at("gender") == "A" ? 0 : 1;
        const int region = rec.attributes.at("region") == "X" ? 0 : 1;
        cell_of.push_back(gender * 2 + region);
        archetype_of.push_back(cohort.archetype_of.at(rec.student_id));
    }
    CHECK(testutil::plugin_mutual_information(cell_of, archetype_of) < 0.02);
}

TEST_CASE("vanishing noise lets k-means recover the archetypes") {
    ScenarioConfig config = preset("uniform-null");
    config.n_students = 300;
    config.seed = 23;
    for (auto& archetype : config.archetypes) archetype.noise_sigma = 1e-6;
    const SyntheticCohort cohort = generate(config);

    const BehaviorEmbedding embedding = embed_behavior(cohort.dataset);
    const ClusteringResult result = kmeans(embedding, config.archetypes.size(), 7);
    std::vector<int> truth, found;
    for (const auto& rec : cohort.dataset.records) {
        truth.push_back(cohort.archetype_of.at(rec.student_id));
        found.push_back(result.assignment.at(rec.student_id));
    }
    CHECK(testutil::adjusted_rand_index(truth, found) >= 0.95);
}

TEST_CASE("uniform-null baseline gaps stay below 0.05 in expectation") {
    double gap_sum = 0.0;
    std::size_t gap_count = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        ScenarioConfig config = preset("uniform-null");
        config.n_students = 400;
        config.seed = seed;
        const Dataset ds = generate(config).dataset;

        EvalOptions options;
        options.folds = 10;
        options.seed = seed;
        options.audited_attributes = {"gender", "region"};
        const FairnessReport report = evaluate_configuration(ds, std::nullopt, options);
        for (const auto& [attr, entry] : report.per_attribute) {
            gap_sum += entry.gap;
            ++gap_count;
        }
    }
    CHECK(gap_sum / static_cast<double>(gap_count) < 0.05);
}

TEST_CASE("malformed scenario configs are rejected") {
    ScenarioConfig config = preset("uniform-null");
    config.demographics[0].probabilities = {0.6, 0.6};
    CHECK_THROWS_AS(generate(config), InvalidConfig);

    config = preset("uniform-null");
    config.archetypes[0].noise_sigma = 0.0;
    CHECK_THROWS_AS(generate(config), InvalidConfig);

    config = preset("uniform-null");
    config.coupling[1] = {0.9, 0.2, 0.2};
    CHECK_THROWS_AS(generate(config), InvalidConfig);

    config = preset("uniform-null");
    config.coupling.pop_back();
    CHECK_THROWS_AS(generate(config), InvalidConfig);

    CHECK_THROWS_AS(preset("unknown"), UnknownPreset);
}

TEST_CASE("scenario configs round-trip through JSON") {
    const ScenarioConfig config = preset("flipped-like");
    const ScenarioConfig loaded = scenario_from_json(scenario_to_json(config));
    CHECK(loaded.name == config.name);
    CHECK(loaded.n_students == config.n_students);
    CHECK(loaded.coupling == config.coupling);
    CHECK(loaded.demographics.size() == config.demographics.size());
    CHECK(loaded.archetypes.size() == config.archetypes.size());
    CHECK(loaded.archetypes[0].mean_trajectory == config.archetypes[0].mean_trajectory);
    const nlohmann::json a = scenario_to_json(config);
    const nlohmann::json b = scenario_to_json(loaded);
    CHECK(a.dump() == b.dump());
}
