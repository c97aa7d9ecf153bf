#include "fairsample/sampling.hpp"

#include <algorithm>
#include <limits>

#include "fairsample/rng.hpp"

using nlohmann::json;

namespace fairsample {

std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::Equal: return "equal";
        case Strategy::Majority: return "majority";
        case Strategy::Cascade: return "cascade";
        case Strategy::Minor: return "minor";
        case Strategy::Within: return "within";
    }
    return "unknown";
}

Strategy strategy_from_string(const std::string& name) {
    if (name == "equal") return Strategy::Equal;
    if (name == "majority") return Strategy::Majority;
    if (name == "cascade") return Strategy::Cascade;
    if (name == "minor") return Strategy::Minor;
    if (name == "within") return Strategy::Within;
    throw Error("unknown strategy: " + name);
}

namespace {

void require_groups(const GroupCounts& counts) {
    if (counts.empty()) throw EmptyGroups("sampling plan requires at least one group");
    for (const auto& [key, count] : counts) {
        if (count == 0) throw EmptyGroups("group " + key.to_string() + " has zero members");
    }
}

GroupKey majority_of(const GroupCounts& counts) {
    GroupKey majority;
    std::size_t best = 0;
    for (const auto& [key, count] : counts) {
        if (count > best) {  // ties keep the canonically first key
            best = count;
            majority = key;
        }
    }
    return majority;
}

}  // namespace

PlanTargets plan_equal(const GroupCounts& counts) {
    require_groups(counts);
    std::size_t max_count = 0;
    for (const auto& [key, count] : counts) max_count = std::max(max_count, count);
    PlanTargets out;
    for (const auto& [key, count] : counts) out.targets[key] = max_count;
    return out;
}

PlanTargets plan_majority(const GroupCounts& counts) {
    require_groups(counts);
    PlanTargets out;
    out.targets = counts;
    const GroupKey majority = majority_of(counts);
    out.targets[majority] = counts.at(majority) + counts.at(majority) / 2;  // floor(1.5x)
    if (counts.size() > 2) {
        out.warnings.push_back("majority oversampling applied to " +
                               std::to_string(counts.size()) +
                               " groups; intended for binary class structures");
    }
    return out;
}

PlanTargets plan_cascade(const GroupCounts& counts) {
    require_groups(counts);
    PlanTargets out;
    for (const auto& [key, count] : counts) {
        std::size_t smallest_larger = std::numeric_limits<std::size_t>::max();
        for (const auto& [other, other_count] : counts) {
            if (other_count > count) smallest_larger = std::min(smallest_larger, other_count);
        }
        out.targets[key] =
            smallest_larger == std::numeric_limits<std::size_t>::max() ? count : smallest_larger;
    }
    return out;
}

PlanTargets plan_minor(const GroupCounts& counts, std::size_t noise_floor) {
    require_groups(counts);
    PlanTargets out;
    out.targets = counts;
    const GroupKey majority = majority_of(counts);
    const std::size_t majority_count = counts.at(majority);
    for (const auto& [key, count] : counts) {
        if (key == majority) continue;
        if (count < noise_floor) {
            out.warnings.push_back("group " + key.to_string() + " kept at " +
                                   std::to_string(count) + " (below noise floor of " +
                                   std::to_string(noise_floor) + ")");
            continue;
        }
        out.targets[key] = majority_count;
    }
    return out;
}

WithinPlanTargets plan_within(const Dataset& dataset, const std::string& main_attribute,
                              const std::vector<std::string>& sub_attributes) {
    if (sub_attributes.empty()) {
        throw Error("within oversampling requires at least one sub attribute");
    }
    std::vector<std::string> all_names = sub_attributes;
    all_names.push_back(main_attribute);

    WithinPlanTargets out;
    out.combined_spec = GroupSpec(all_names);
    const GroupSpec main_spec({main_attribute});
    const GroupCounts cells = group_counts(dataset, out.combined_spec);
    require_groups(cells);

    // position of the main attribute inside the canonical combined key
    const auto& names = out.combined_spec.names();
    const std::size_t main_pos =
        static_cast<std::size_t>(std::find(names.begin(), names.end(), main_attribute) -
                                 names.begin());

    // stage 1: balance sub-cells to the within-class maximum of each main class
    std::map<std::string, std::size_t> class_max;
    std::map<std::string, std::size_t> class_cells;
    for (const auto& [key, count] : cells) {
        const std::string& main_value = key.values[main_pos];
        class_max[main_value] = std::max(class_max[main_value], count);
        class_cells[main_value] += 1;
    }
    std::map<std::string, std::size_t> class_total;  // post-stage-1 totals
    for (const auto& [key, count] : cells) {
        const std::string& main_value = key.values[main_pos];
        out.stage1[key] = class_max[main_value];
        class_total[main_value] += class_max[main_value];
    }

    // a main class missing some sub value keeps that cell absent
    const std::size_t distinct_sub_cells =
        group_counts(dataset, GroupSpec(sub_attributes)).size();
    for (const auto& [main_value, n_cells] : class_cells) {
        if (n_cells < distinct_sub_cells) {
            out.warnings.push_back("main class " + main_value + " covers only " +
                                   std::to_string(n_cells) + " of " +
                                   std::to_string(distinct_sub_cells) + " sub cells");
        }
    }

    // stage 2: balance main classes to the largest post-stage-1 total, drawing
    // as evenly as possible from the already balanced cells
    std::size_t stage2_total = 0;
    for (const auto& [main_value, total] : class_total) {
        stage2_total = std::max(stage2_total, total);
    }
    out.targets = out.stage1;
    for (const auto& [main_value, total] : class_total) {
        const std::size_t deficit = stage2_total - total;
        if (deficit == 0) continue;
        const std::size_t n_cells = class_cells[main_value];
        const std::size_t base = deficit / n_cells;
        std::size_t remainder = deficit % n_cells;
        for (auto& [key, target] : out.targets) {
            if (key.values[main_pos] != main_value) continue;
            target += base;
            if (remainder > 0) {
                target += 1;
                --remainder;
            }
        }
    }
    return out;
}

SamplingPlan make_plan(const Dataset& dataset, const GroupSpec& spec, Strategy strategy,
                       std::uint64_t seed, std::size_t minor_noise_floor) {
    SamplingPlan plan;
    plan.spec = spec;
    plan.strategy = strategy;
    plan.seed = seed;

    if (strategy == Strategy::Within) {
        if (spec.arity() < 2) {
            throw Error("within oversampling only applies to combined specs");
        }
        std::string main_attribute;
        if (spec.contains(kClusterName)) {
            main_attribute = kClusterName;
        } else if (spec.contains(kLabelName)) {
            main_attribute = kLabelName;
        } else {
            main_attribute = spec.names().front();
        }
        std::vector<std::string> subs;
        for (const auto& name : spec.names()) {
            if (name != main_attribute) subs.push_back(name);
        }
        WithinPlanTargets within = plan_within(dataset, main_attribute, subs);
        plan.targets = std::move(within.targets);
        plan.warnings = std::move(within.warnings);
        return plan;
    }

    const GroupCounts counts = group_counts(dataset, spec);
    PlanTargets result;
    switch (strategy) {
        case Strategy::Equal: result = plan_equal(counts); break;
        case Strategy::Majority: result = plan_majority(counts); break;
        case Strategy::Cascade: result = plan_cascade(counts); break;
        case Strategy::Minor: result = plan_minor(counts, minor_noise_floor); break;
        case Strategy::Within: break;  // handled above
    }
    plan.targets = std::move(result.targets);
    plan.warnings = std::move(result.warnings);
    return plan;
}

ResampledDataset apply_plan(const Dataset& dataset, const SamplingPlan& plan) {
    const GroupPartition parts = partition_by_group(dataset, plan.spec);
    for (const auto& [key, indices] : parts) {
        auto it = plan.targets.find(key);
        if (it == plan.targets.end()) {
            throw PlanGroupMismatch("plan has no target for group " + key.to_string());
        }
        if (it->second < indices.size()) {
            throw TargetBelowOriginal("target " + std::to_string(it->second) + " below " +
                                      std::to_string(indices.size()) + " for group " +
                                      key.to_string());
        }
    }
    for (const auto& [key, target] : plan.targets) {
        if (!parts.count(key) && target > 0) {
            throw PlanGroupMismatch("plan targets absent group " + key.to_string());
        }
    }

    ResampledDataset out;
    for (const auto& [key, indices] : parts) {  // canonical group order
        const std::size_t draws = plan.targets.at(key) - indices.size();
        Rng rng(mix_seed(plan.seed, fnv1a64(key.to_string())));
        for (std::size_t j = 0; j < draws; ++j) {
            out.extra_indices.push_back(indices[rng.bounded(indices.size())]);
        }
    }
    return out;
}

GroupCounts realized_counts(const Dataset& dataset, const GroupSpec& spec,
                            const ResampledDataset& resampled) {
    GroupCounts counts = group_counts(dataset, spec);
    for (std::size_t idx : resampled.extra_indices) {
        counts[group_key_of(dataset, idx, spec)] += 1;
    }
    return counts;
}

json plan_to_json(const SamplingPlan& plan) {
    json targets = json::object();
    for (const auto& [key, target] : plan.targets) targets[key.to_string()] = target;
    json out{{"spec", plan.spec.to_string()},
             {"targets", targets},
             {"strategy", to_string(plan.strategy)},
             {"seed", plan.seed}};
    if (!plan.warnings.empty()) out["warnings"] = plan.warnings;
    return out;
}

}  // namespace fairsample
