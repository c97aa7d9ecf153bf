#pragma once

#include <cstdint>
#include <json.hpp>
#include <string>
#include <vector>

#include "fairsample/dataset.hpp"

namespace fairsample {

enum class Strategy { Equal, Majority, Cascade, Minor, Within };

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& name);

// Per-group target counts. Targets never fall below the original counts:
// this is oversampling only, never undersampling.
struct SamplingPlan {
    GroupSpec spec;
    GroupCounts targets;
    Strategy strategy = Strategy::Equal;
    std::uint64_t seed = 0;
    std::vector<std::string> warnings;
};

struct PlanTargets {
    GroupCounts targets;
    std::vector<std::string> warnings;
};

// Equal: every group is raised to the size of the largest one.
PlanTargets plan_equal(const GroupCounts& counts);

// Majority: the majority group grows by 50% (floor), everything else is
// untouched. Ties broken by canonical key order; warns beyond binary use.
PlanTargets plan_majority(const GroupCounts& counts);

// Cascade: each group is raised to the size of the smallest strictly larger
// group; the largest groups stay fixed.
PlanTargets plan_cascade(const GroupCounts& counts);

// Minor: non-majority groups are raised to the majority size, except groups
// below the noise floor, which stay untouched.
PlanTargets plan_minor(const GroupCounts& counts, std::size_t noise_floor = 10);

// Within: two-stage plan for combined specs. Stage 1 balances the sub-attribute
// cells inside each main-attribute class; stage 2 balances the main classes
// while drawing proportionally from the balanced cells.
struct WithinPlanTargets {
    GroupSpec combined_spec;
    GroupCounts stage1;
    GroupCounts targets;
    std::vector<std::string> warnings;
};

WithinPlanTargets plan_within(const Dataset& dataset, const std::string& main_attribute,
                              const std::vector<std::string>& sub_attributes);

// Builds the full plan for one strategy over one spec. For Within the main
// attribute is chosen as: cluster if present, else the label, else the
// canonically first name.
SamplingPlan make_plan(const Dataset& dataset, const GroupSpec& spec, Strategy strategy,
                       std::uint64_t seed, std::size_t minor_noise_floor = 10);

// The duplicates drawn to satisfy a plan, as indices into the base dataset,
// in draw order (canonical group order, then draw sequence).
struct ResampledDataset {
    std::vector<std::size_t> extra_indices;
};

// Draws (target - original) records per group uniformly with replacement.
// Each group uses its own generator seeded from (plan.seed, group key), so
// groups can be added or resampled independently without disturbing others.
ResampledDataset apply_plan(const Dataset& dataset, const SamplingPlan& plan);

// Base counts plus duplicates per group; equals plan targets after apply_plan.
GroupCounts realized_counts(const Dataset& dataset, const GroupSpec& spec,
                            const ResampledDataset& resampled);

nlohmann::json plan_to_json(const SamplingPlan& plan);

}  // namespace fairsample
