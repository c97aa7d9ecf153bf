#include "fairsample/synthetic.hpp"

#include <cmath>
#include <numeric>

#include "fairsample/predictor.hpp"
#include "fairsample/rng.hpp"

using nlohmann::json;

namespace fairsample {

std::size_t ScenarioConfig::n_cells() const {
    std::size_t cells = 1;
    for (const auto& attr : demographics) cells *= attr.values.size();
    return cells;
}

void ScenarioConfig::validate() const {
    if (n_students < 1) throw InvalidConfig("n_students must be >= 1");
    if (demographics.empty()) throw InvalidConfig("at least one demographic attribute");
    if (archetypes.empty()) throw InvalidConfig("at least one archetype");
    for (const auto& attr : demographics) {
        if (attr.values.size() != attr.probabilities.size() || attr.values.size() < 2) {
            throw InvalidConfig("attribute " + attr.name + " marginals malformed");
        }
        double sum = std::accumulate(attr.probabilities.begin(), attr.probabilities.end(), 0.0);
        if (std::abs(sum - 1.0) > 1e-9) {
            throw InvalidConfig("marginals of " + attr.name + " sum to " + std::to_string(sum));
        }
        for (double p : attr.probabilities) {
            if (p < 0.0) throw InvalidConfig("negative marginal in " + attr.name);
        }
    }
    const std::size_t T = archetypes.front().mean_trajectory.size();
    const std::size_t D = T == 0 ? 0 : archetypes.front().mean_trajectory.front().size();
    if (T < 1 || D < 1) throw InvalidConfig("archetype trajectories need T, D >= 1");
    for (const auto& a : archetypes) {
        if (a.noise_sigma <= 0.0) {
            throw InvalidConfig("archetype " + a.name + " needs a positive noise sigma");
        }
        if (a.mean_trajectory.size() != T) {
            throw InvalidConfig("archetype " + a.name + " has inconsistent T");
        }
        for (const auto& row : a.mean_trajectory) {
            if (row.size() != D) {
                throw InvalidConfig("archetype " + a.name + " has inconsistent D");
            }
        }
    }
    if (coupling.size() != n_cells()) {
        throw InvalidConfig("coupling must have one row per demographic cell");
    }
    for (const auto& row : coupling) {
        if (row.size() != archetypes.size()) {
            throw InvalidConfig("coupling row arity must equal archetype count");
        }
        double sum = std::accumulate(row.begin(), row.end(), 0.0);
        if (std::abs(sum - 1.0) > 1e-9) {
            throw InvalidConfig("coupling row sums to " + std::to_string(sum));
        }
        for (double p : row) {
            if (p < 0.0) throw InvalidConfig("negative coupling probability");
        }
    }
}

namespace {

std::size_t draw_categorical(Rng& rng, const std::vector<double>& probabilities) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < probabilities.size(); ++i) {
        acc += probabilities[i];
        if (u < acc) return i;
    }
    return probabilities.size() - 1;
}

}  // namespace

SyntheticCohort generate(const ScenarioConfig& config) {
    config.validate();

    SyntheticCohort cohort;
    cohort.dataset.schema.attributes.reserve(config.demographics.size());
    for (const auto& attr : config.demographics) {
        cohort.dataset.schema.attributes.push_back({attr.name, attr.values});
    }
    cohort.dataset.feature_dim = config.archetypes.front().mean_trajectory.front().size();

    const std::size_t width = std::to_string(config.n_students).size();
    for (std::size_t i = 0; i < config.n_students; ++i) {
        // per-student substream: generation parallelizes without reordering draws
        Rng rng(mix_seed(config.seed, 0x5eed0000ULL + i));

        StudentRecord rec;
        std::string number = std::to_string(i);
        rec.student_id = "s" + std::string(width - number.size(), '0') + number;

        std::size_t cell = 0;
        for (const auto& attr : config.demographics) {
            const std::size_t v = draw_categorical(rng, attr.probabilities);
            rec.attributes[attr.name] = attr.values[v];
            cell = cell * attr.values.size() + v;
        }
        const std::size_t a = draw_categorical(rng, config.coupling[cell]);
        const Archetype& archetype = config.archetypes[a];

        rec.behavior.reserve(archetype.mean_trajectory.size());
        for (const auto& mean_row : archetype.mean_trajectory) {
            std::vector<double> row(mean_row.size());
            for (std::size_t d = 0; d < mean_row.size(); ++d) {
                row[d] = mean_row[d] + archetype.noise_sigma * rng.normal();
            }
            rec.behavior.push_back(std::move(row));
        }
        rec.label = rng.uniform() < sigmoid(archetype.outcome_logit) ? 1 : 0;

        cohort.archetype_of[rec.student_id] = static_cast<int>(a);
        cohort.dataset.records.push_back(std::move(rec));
    }
    validate_dataset(cohort.dataset);
    return cohort;
}

namespace {

double logit(double p) { return std::log(p / (1.0 - p)); }

std::vector<std::vector<double>> constant_trajectory(std::size_t T, std::vector<double> means) {
    return std::vector<std::vector<double>>(T, std::move(means));
}

std::vector<double> add_rows(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return out;
}

std::vector<double> scale_row(const std::vector<double>& a, double s) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * s;
    return out;
}

// residual row r solving p_major * major + p_rest * r = global
std::vector<double> residual_row(const std::vector<double>& global, double p_major,
                                 const std::vector<double>& major, double p_rest) {
    std::vector<double> out(global.size());
    for (std::size_t i = 0; i < global.size(); ++i) {
        out[i] = (global[i] - p_major * major[i]) / p_rest;
    }
    return out;
}

ScenarioConfig tuglet_like() {
    ScenarioConfig config;
    config.name = "tuglet-like";
    config.n_students = 264;
    config.demographics = {
        {"gender", {"M", "F", "X"}, {0.51, 0.48, 0.01}},
        {"school", {"H", "M"}, {0.52, 0.48}},
    };
    const std::size_t T = 6;
    // open-ended-game flavored profiles; struggle lives on two distinct
    // behavior directions, the rarer one mostly in school H. slow-pass
    // shadows rare-struggle: same f1, lower f2, far more mass, so the
    // unweighted fit prefers writing the whole f2 direction off as passing
    // until the rare profile is re-weighted
    config.archetypes = {
        {"calm-pass", constant_trajectory(T, {0.0, 0.0}), 0.30, logit(0.02)},
        {"active-pass", constant_trajectory(T, {0.5, 0.1}), 0.30, logit(0.02)},
        {"common-struggle", constant_trajectory(T, {2.0, 0.0}), 0.30, logit(0.95)},
        {"rare-struggle", constant_trajectory(T, {1.0, 2.8}), 0.30, logit(0.95)},
        {"mixed-struggle", constant_trajectory(T, {1.7, 0.1}), 0.30, logit(0.75)},
        {"slow-pass", constant_trajectory(T, {1.0, 1.2}), 0.30, logit(0.03)},
    };

    // global archetype shares mirror the six target cluster shares
    const std::vector<double> global = {0.14, 0.23, 0.34, 0.04, 0.13, 0.12};
    // school M over-expresses the common struggle so that 58% of the
    // label-1 students come from school M at the population level; school H
    // holds nearly all of slow-pass and rare-struggle
    const std::vector<double> school_m = {0.10, 0.26, 0.48, 0.01, 0.13, 0.02};
    const std::vector<double> school_h = residual_row(global, 0.48, school_m, 0.52);
    // females tilt toward both struggle profiles (45% of label-1 are male)
    const std::vector<double> delta_f = {-0.04, -0.04, 0.07, 0.01, 0.0, 0.0};
    const std::vector<double> delta_m = scale_row(delta_f, -0.48 / 0.51);
    const std::vector<double> delta_x(6, 0.0);

    const std::vector<const std::vector<double>*> gender_delta = {&delta_m, &delta_f, &delta_x};
    const std::vector<const std::vector<double>*> school_row = {&school_h, &school_m};
    for (std::size_t g = 0; g < 3; ++g) {
        for (std::size_t s = 0; s < 2; ++s) {
            config.coupling.push_back(add_rows(*school_row[s], *gender_delta[g]));
        }
    }
    return config;
}

ScenarioConfig flipped_like() {
    ScenarioConfig config;
    config.name = "flipped-like";
    config.n_students = 191;
    config.demographics = {
        {"gender", {"M", "F"}, {0.65, 0.35}},
        {"country", {"CO", "CF", "XX"}, {0.49, 0.47, 0.04}},
    };
    const std::size_t T = 6;
    // profile A hides inside the passing cloud: the behavior of its
    // struggling students is not separable, which is what disadvantages the
    // group that expresses it most
    config.archetypes = {
        {"A", constant_trajectory(T, {0.15, 0.2}), 0.35, logit(0.95)},
        {"B", constant_trajectory(T, {0.0, 0.0}), 0.35, logit(0.06)},
        {"C", constant_trajectory(T, {2.0, 0.0}), 0.35, logit(0.92)},
        {"D", constant_trajectory(T, {0.5, 0.3}), 0.35, logit(0.07)},
        {"E", constant_trajectory(T, {-0.5, 0.2}), 0.35, logit(0.03)},
    };

    // target cluster shares 15/16/26/24/20 (normalized; they sum to 101)
    std::vector<double> global = {15.0, 16.0, 26.0, 24.0, 20.0};
    for (double& p : global) p /= 101.0;
    // country CO over-expresses the common struggle: 62% of the struggling
    // students hold a CO diploma at the population level
    const std::vector<double> country_co = {0.13, 0.16, 0.41, 0.18, 0.12};
    const std::vector<double> country_rest = residual_row(global, 0.49, country_co, 0.51);
    // females over-express the hidden profile A
    const std::vector<double> delta_f = {0.13, -0.04, 0.0, -0.05, -0.04};
    const std::vector<double> delta_m = scale_row(delta_f, -0.35 / 0.65);

    const std::vector<const std::vector<double>*> gender_delta = {&delta_m, &delta_f};
    const std::vector<const std::vector<double>*> country_row = {&country_co, &country_rest,
                                                                 &country_rest};
    for (std::size_t g = 0; g < 2; ++g) {
        for (std::size_t c = 0; c < 3; ++c) {
            config.coupling.push_back(add_rows(*country_row[c], *gender_delta[g]));
        }
    }
    return config;
}

ScenarioConfig uniform_null() {
    ScenarioConfig config;
    config.name = "uniform-null";
    config.n_students = 400;
    config.demographics = {
        {"gender", {"A", "B"}, {0.5, 0.5}},
        {"region", {"X", "Y"}, {0.5, 0.5}},
    };
    const std::size_t T = 6;
    config.archetypes = {
        {"pass", constant_trajectory(T, {0.0, 0.0}), 0.35, logit(0.04)},
        {"struggle-1", constant_trajectory(T, {2.0, 0.0}), 0.35, logit(0.95)},
        {"struggle-2", constant_trajectory(T, {0.0, 2.0}), 0.35, logit(0.95)},
    };
    const std::vector<double> shares = {0.5, 0.3, 0.2};
    config.coupling.assign(4, shares);  // identical rows: no demographic link
    return config;
}

}  // namespace

ScenarioConfig preset(const std::string& name) {
    if (name == "tuglet-like") return tuglet_like();
    if (name == "flipped-like") return flipped_like();
    if (name == "uniform-null") return uniform_null();
    throw UnknownPreset("unknown preset: " + name);
}

json scenario_to_json(const ScenarioConfig& config) {
    json demographics = json::array();
    for (const auto& attr : config.demographics) {
        demographics.push_back({{"name", attr.name},
                                {"values", attr.values},
                                {"probabilities", attr.probabilities}});
    }
    json archetypes = json::array();
    for (const auto& a : config.archetypes) {
        archetypes.push_back({{"name", a.name},
                              {"mean_trajectory", a.mean_trajectory},
                              {"noise_sigma", a.noise_sigma},
                              {"outcome_logit", a.outcome_logit}});
    }
    return json{{"name", config.name},
                {"n_students", config.n_students},
                {"demographics", demographics},
                {"archetypes", archetypes},
                {"coupling", config.coupling},
                {"seed", config.seed}};
}

ScenarioConfig scenario_from_json(const json& j) {
    ScenarioConfig config;
    config.name = j.at("name").get<std::string>();
    config.n_students = j.at("n_students").get<std::size_t>();
    for (const auto& a : j.at("demographics")) {
        config.demographics.push_back({a.at("name").get<std::string>(),
                                       a.at("values").get<std::vector<std::string>>(),
                                       a.at("probabilities").get<std::vector<double>>()});
    }
    for (const auto& a : j.at("archetypes")) {
        config.archetypes.push_back(
            {a.at("name").get<std::string>(),
             a.at("mean_trajectory").get<std::vector<std::vector<double>>>(),
             a.at("noise_sigma").get<double>(),
             a.at("outcome_logit").get<double>()});
    }
    config.coupling = j.at("coupling").get<std::vector<std::vector<double>>>();
    config.seed = j.at("seed").get<std::uint64_t>();
    return config;
}

}  // namespace fairsample
