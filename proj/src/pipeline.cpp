#include "fairsample/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

#include "fairsample/dataset_io.hpp"
#include "fairsample/rng.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace fairsample {

namespace {

std::string cluster_mode_name(ClusterMode mode) {
    switch (mode) {
        case ClusterMode::Off: return "off";
        case ClusterMode::Fixed: return "fixed";
        case ClusterMode::Auto: return "auto";
    }
    return "off";
}

ClusterMode cluster_mode_from(const std::string& name) {
    if (name == "off") return ClusterMode::Off;
    if (name == "fixed") return ClusterMode::Fixed;
    if (name == "auto") return ClusterMode::Auto;
    throw InvalidConfig("unknown cluster mode: " + name);
}

void write_json(const fs::path& path, const json& j) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingArtifacts("missing artifact: " + path.string());
    json j;
    in >> j;
    return j;
}

}  // namespace

void RunConfig::validate() const {
    if (preset_name.empty() && (records_path.empty() || schema_path.empty())) {
        throw InvalidConfig("either a preset or records+schema paths are required");
    }
    if (!preset_name.empty() && !records_path.empty()) {
        throw InvalidConfig("preset and records paths are mutually exclusive");
    }
    if (folds < 2) throw InvalidConfig("folds must be >= 2");
    if (imbalance_threshold <= 0.0 || imbalance_threshold >= 1.0) {
        throw InvalidConfig("imbalance threshold must lie in (0, 1)");
    }
    if (out_dir.empty()) throw InvalidConfig("an output directory is required");
    predictor.validate();
    for (const auto& spec : forced_specs) {
        if (spec.contains(kClusterName) && cluster_mode == ClusterMode::Off) {
            throw InvalidConfig("forced spec " + spec.to_string() +
                                " needs clustering, but cluster mode is off");
        }
    }
}

std::vector<std::string> RunConfig::audited_or_default(const Dataset& dataset) const {
    if (!audited_attributes.empty()) return audited_attributes;
    return dataset.schema.names();
}

std::vector<Strategy> RunConfig::strategies_or_default() const {
    if (!strategies.empty()) return strategies;
    return {Strategy::Equal, Strategy::Majority, Strategy::Cascade, Strategy::Minor,
            Strategy::Within};
}

json run_config_to_json(const RunConfig& config) {
    json strategies = json::array();
    for (Strategy s : config.strategies) strategies.push_back(to_string(s));
    json forced = json::array();
    for (const auto& spec : config.forced_specs) forced.push_back(spec.names());
    return json{{"preset", config.preset_name},
                {"records", config.records_path},
                {"schema", config.schema_path},
                {"csv", config.csv},
                {"n_students", config.n_students},
                {"audited_attributes", config.audited_attributes},
                {"imbalance_threshold", config.imbalance_threshold},
                {"imbalance_rule", config.imbalance_rule == ImbalanceRule::ShareOfTotal
                                       ? "share-of-total"
                                       : "ratio-to-majority"},
                {"max_combo_arity", config.max_combo_arity},
                {"forced_specs", forced},
                {"strategies", strategies},
                {"cluster_mode", cluster_mode_name(config.cluster_mode)},
                {"cluster_k", config.cluster_k},
                {"cluster_k_min", config.cluster_k_min},
                {"cluster_k_max", config.cluster_k_max},
                {"predictor",
                 {{"kind", config.predictor.kind == ModelKind::External
                               ? "external"
                               : "reference-logistic"},
                  {"learning_rate", config.predictor.learning_rate},
                  {"epochs", config.predictor.epochs},
                  {"l2", config.predictor.l2},
                  {"threshold", config.predictor.threshold},
                  {"external_command", config.predictor.external_command}}},
                {"folds", config.folds},
                {"gap_mode", config.gap_mode == GapMode::Pooled ? "pooled" : "per-fold-macro"},
                {"seed", config.seed},
                {"out_dir", config.out_dir},
                {"workers", config.workers}};
}

RunConfig run_config_from_json(const json& j) {
    RunConfig config;
    config.preset_name = j.at("preset").get<std::string>();
    config.records_path = j.at("records").get<std::string>();
    config.schema_path = j.at("schema").get<std::string>();
    config.csv = j.at("csv").get<bool>();
    config.n_students = j.at("n_students").get<std::size_t>();
    config.audited_attributes = j.at("audited_attributes").get<std::vector<std::string>>();
    config.imbalance_threshold = j.at("imbalance_threshold").get<double>();
    config.imbalance_rule = j.at("imbalance_rule").get<std::string>() == "ratio-to-majority"
                                ? ImbalanceRule::RatioToMajority
                                : ImbalanceRule::ShareOfTotal;
    config.max_combo_arity = j.at("max_combo_arity").get<std::size_t>();
    for (const auto& names : j.at("forced_specs")) {
        config.forced_specs.emplace_back(names.get<std::vector<std::string>>());
    }
    for (const auto& s : j.at("strategies")) {
        config.strategies.push_back(strategy_from_string(s.get<std::string>()));
    }
    config.cluster_mode = cluster_mode_from(j.at("cluster_mode").get<std::string>());
    config.cluster_k = j.at("cluster_k").get<std::size_t>();
    config.cluster_k_min = j.at("cluster_k_min").get<std::size_t>();
    config.cluster_k_max = j.at("cluster_k_max").get<std::size_t>();
    const auto& p = j.at("predictor");
    config.predictor.kind = p.at("kind").get<std::string>() == "external"
                                ? ModelKind::External
                                : ModelKind::ReferenceLogistic;
    config.predictor.learning_rate = p.at("learning_rate").get<double>();
    config.predictor.epochs = p.at("epochs").get<std::size_t>();
    config.predictor.l2 = p.at("l2").get<double>();
    config.predictor.threshold = p.at("threshold").get<double>();
    config.predictor.external_command = p.at("external_command").get<std::string>();
    config.folds = j.at("folds").get<std::size_t>();
    config.gap_mode = j.at("gap_mode").get<std::string>() == "per-fold-macro"
                          ? GapMode::PerFoldMacro
                          : GapMode::Pooled;
    config.seed = j.at("seed").get<std::uint64_t>();
    config.out_dir = j.at("out_dir").get<std::string>();
    config.workers = j.at("workers").get<std::size_t>();
    return config;
}

Dataset acquire_dataset(const RunConfig& config) {
    if (!config.preset_name.empty()) {
        ScenarioConfig scenario = preset(config.preset_name);
        if (config.n_students > 0) scenario.n_students = config.n_students;
        scenario.seed = mix_seed(config.seed, "generate");
        return generate(scenario).dataset;
    }
    if (config.csv) return load_dataset_csv(config.records_path, config.schema_path);
    return load_dataset(config.records_path, config.schema_path);
}

namespace {

// deterministic worker pool: items are claimed by atomic index, results land
// in caller-indexed slots, so scheduling order never shows in the output
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
    if (workers == 0) workers = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    workers = std::min(workers, n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (;;) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= n) return;
                    fn(i);
                }
            } catch (...) {
                errors[w] = std::current_exception();
                next.store(n);  // stop claiming further work
            }
        });
    }
    for (auto& t : pool) t.join();
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

CandidateSet audit_candidates(const Dataset& dataset, const RunConfig& config) {
    CandidateSet candidates =
        build_candidate_set(dataset, config.audited_or_default(dataset),
                            config.max_combo_arity, config.imbalance_threshold,
                            config.imbalance_rule);
    for (const auto& spec : config.forced_specs) {
        if (!candidates.contains(spec)) {
            candidates.specs.push_back(spec);
            candidates.provenance.push_back(CandidateProvenance::ForcedByConfig);
        }
    }
    return candidates;
}

json build_audit_json(const Dataset& dataset, const CandidateSet& candidates,
                      const RunConfig& config) {
    json findings = json::array();
    std::vector<GroupSpec> audited_specs;
    std::vector<std::string> standalone = dataset.schema.names();
    standalone.push_back(kLabelName);
    std::sort(standalone.begin(), standalone.end());
    for (const auto& name : standalone) audited_specs.emplace_back(std::vector{name});
    for (const auto& spec : candidates.specs) {
        if (std::find(audited_specs.begin(), audited_specs.end(), spec) ==
            audited_specs.end()) {
            audited_specs.push_back(spec);
        }
    }
    for (const auto& spec : audited_specs) {
        findings.push_back(finding_to_json(
            detect_imbalance(dataset, spec, config.imbalance_threshold,
                             config.imbalance_rule),
            dataset.records.size()));
    }
    return json{{"threshold", config.imbalance_threshold},
                {"rule", config.imbalance_rule == ImbalanceRule::ShareOfTotal
                             ? "share-of-total"
                             : "ratio-to-majority"},
                {"n_records", dataset.records.size()},
                {"findings", findings},
                {"candidate_set", candidate_set_to_json(candidates)}};
}

EvalOptions eval_options(const Dataset& dataset, const RunConfig& config) {
    EvalOptions options;
    options.folds = config.folds;
    options.seed = config.seed;
    options.predictor = config.predictor;
    options.audited_attributes = config.audited_or_default(dataset);
    options.gap_mode = config.gap_mode;
    options.external_work_dir = (fs::path(config.out_dir) / "external-work").string();
    return options;
}

Dataset cluster_if_needed(const Dataset& dataset, const RunConfig& config,
                          const fs::path& run_dir) {
    if (config.cluster_mode == ClusterMode::Off) return dataset;
    const fs::path clusters_path = run_dir / "clusters.json";
    ClusteringResult result;
    if (fs::exists(clusters_path)) {
        result = clustering_from_json(read_json(clusters_path));
    } else {
        const BehaviorEmbedding embedding = embed_behavior(dataset);
        const std::uint64_t seed = mix_seed(config.seed, "cluster");
        result = config.cluster_mode == ClusterMode::Fixed
                     ? kmeans(embedding, config.cluster_k, seed)
                     : select_k(embedding, config.cluster_k_min, config.cluster_k_max, seed);
        write_json(clusters_path, clustering_to_json(result));
    }
    return assign_clusters(dataset, result);
}

std::string render_report_text(const fs::path& run_dir);

}  // namespace

std::vector<SweepConfiguration> enumerate_sweep(const Dataset& dataset,
                                                const CandidateSet& candidates,
                                                const RunConfig& config) {
    std::vector<SweepConfiguration> sweep;
    sweep.push_back({std::nullopt, "baseline"});

    std::vector<GroupSpec> specs = candidates.specs;
    if (config.cluster_mode != ClusterMode::Off) {
        std::vector<GroupSpec> behavioral;
        behavioral.emplace_back(std::vector<std::string>{kClusterName});
        behavioral.emplace_back(std::vector<std::string>{kClusterName, kLabelName});
        for (const auto& attr : config.audited_or_default(dataset)) {
            behavioral.emplace_back(std::vector<std::string>{kClusterName, attr});
        }
        for (auto& spec : behavioral) {
            if (std::find(specs.begin(), specs.end(), spec) == specs.end()) {
                specs.push_back(std::move(spec));
            }
        }
    }

    for (const auto& spec : specs) {
        for (Strategy strategy : config.strategies_or_default()) {
            if (strategy == Strategy::Within && spec.arity() < 2) continue;
            MitigationSpec mitigation{strategy, spec};
            sweep.push_back({mitigation, config_id_of(mitigation)});
        }
    }
    return sweep;
}

std::filesystem::path cmd_generate(const RunConfig& config) {
    if (config.preset_name.empty()) throw InvalidConfig("generate requires a preset");
    ScenarioConfig scenario = preset(config.preset_name);
    if (config.n_students > 0) scenario.n_students = config.n_students;
    scenario.seed = mix_seed(config.seed, "generate");

    const SyntheticCohort cohort = generate(scenario);
    const fs::path out(config.out_dir);
    fs::create_directories(out);
    save_dataset(cohort.dataset, out / "records.jsonl");
    save_schema(cohort.dataset.schema, out / "schema.json");

    json archetypes = json::object();
    for (const auto& [id, archetype] : cohort.archetype_of) {
        archetypes[id] = {{"index", archetype},
                          {"name", scenario.archetypes[archetype].name}};
    }
    write_json(out / "archetypes.json",
               json{{"scenario", scenario_to_json(scenario)}, {"archetype_of", archetypes}});
    return out;
}

std::filesystem::path cmd_audit(const RunConfig& config) {
    config.validate();
    const fs::path run_dir(config.out_dir);
    fs::create_directories(run_dir);

    Dataset dataset = acquire_dataset(config);
    const CandidateSet candidates = audit_candidates(dataset, config);
    dataset = cluster_if_needed(dataset, config, run_dir);

    json audit = build_audit_json(dataset, candidates, config);
    const FairnessReport baseline =
        evaluate_configuration(dataset, std::nullopt, eval_options(dataset, config));
    audit["baseline_report"] = report_to_json(baseline);

    write_json(run_dir / "config.json", run_config_to_json(config));
    const fs::path audit_path = run_dir / "audit.json";
    write_json(audit_path, audit);
    return audit_path;
}

std::filesystem::path cmd_cluster(const RunConfig& config) {
    config.validate();
    if (config.cluster_mode == ClusterMode::Off) {
        throw InvalidConfig("cluster command requires cluster mode fixed or auto");
    }
    const fs::path run_dir(config.out_dir);
    fs::create_directories(run_dir);
    const Dataset dataset = acquire_dataset(config);
    cluster_if_needed(dataset, config, run_dir);
    write_json(run_dir / "config.json", run_config_to_json(config));
    return run_dir / "clusters.json";
}

std::filesystem::path cmd_mitigate(const RunConfig& config) {
    config.validate();
    const fs::path run_dir(config.out_dir);
    fs::create_directories(run_dir / "reports");
    fs::create_directories(run_dir / "plans");

    Dataset dataset = acquire_dataset(config);
    const CandidateSet candidates = audit_candidates(dataset, config);
    dataset = cluster_if_needed(dataset, config, run_dir);

    write_json(run_dir / "config.json", run_config_to_json(config));
    write_json(run_dir / "audit.json", build_audit_json(dataset, candidates, config));

    const std::vector<SweepConfiguration> sweep = enumerate_sweep(dataset, candidates, config);
    const EvalOptions options = eval_options(dataset, config);

    std::vector<FairnessReport> reports(sweep.size());
    parallel_for(sweep.size(), config.workers, [&](std::size_t i) {
        const SweepConfiguration& entry = sweep[i];
        const fs::path report_path = run_dir / "reports" / (entry.id + ".json");
        if (fs::exists(report_path)) {  // resume: finished configurations are kept
            reports[i] = report_from_json(read_json(report_path));
            return;
        }
        EvalTrace trace;
        reports[i] = evaluate_configuration(dataset, entry.mitigation, options, &trace);
        if (entry.mitigation) {
            json plans = json::array();
            for (const auto& plan : trace.plans) plans.push_back(plan_to_json(plan));
            write_json(run_dir / "plans" / (entry.id + ".json"),
                       json{{"config_id", entry.id}, {"per_fold", plans}});
        }
        write_json(report_path, report_to_json(reports[i]));
    });

    const FairnessReport& baseline = reports.front();
    json selection;
    if (reports.size() > 1) {
        const std::vector<FairnessReport> candidates_only(reports.begin() + 1, reports.end());
        const SelectionResult result = select_technique(candidates_only, baseline);
        selection = selection_to_json(result, baseline, 0.15);
    } else {
        selection = json{{"baseline_config_id", baseline.config_id},
                         {"chosen", baseline.config_id},
                         {"degradation_accepted", false},
                         {"trace", json::array()},
                         {"note", "no mitigation candidates; baseline kept"}};
    }
    write_json(run_dir / "selection.json", selection);

    std::ofstream out(run_dir / "report.txt");
    out << render_report_text(run_dir);
    return run_dir;
}

namespace {

std::string format_number(const json& value) {
    if (value.is_number_integer()) return std::to_string(value.get<long long>());
    std::ostringstream os;
    os.precision(6);
    os << value.get<double>();
    return os.str();
}

void render_table(std::ostream& out, const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> widths;
    for (const auto& row : rows) {
        if (widths.size() < row.size()) widths.resize(row.size(), 0);
        for (std::size_t c = 0; c < row.size(); ++c) {
            widths[c] = std::max(widths[c], row[c].size());
        }
    }
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            out << row[c] << std::string(widths[c] - row[c].size() + 2, ' ');
        }
        out << "\n";
    }
}

std::string render_report_text(const fs::path& run_dir) {
    const json audit = read_json(run_dir / "audit.json");
    const json selection = read_json(run_dir / "selection.json");

    std::vector<std::string> config_ids;
    config_ids.push_back("baseline");
    if (selection.contains("trace")) {
        // trace order is the selection ranking; re-read ids from the report dir
        for (const auto& entry : fs::directory_iterator(run_dir / "reports")) {
            const std::string stem = entry.path().stem().string();
            if (stem != "baseline") config_ids.push_back(stem);
        }
        std::sort(config_ids.begin() + 1, config_ids.end());
    }

    std::ostringstream out;
    out << "fairness mitigation run: " << run_dir.string() << "\n";
    out << "configurations: " << config_ids.size() << "\n\n";

    out << "== imbalance audit (threshold " << format_number(audit.at("threshold"))
        << ", rule " << audit.at("rule").get<std::string>() << ") ==\n";
    std::vector<std::vector<std::string>> audit_rows{{"spec", "majority", "imbalanced",
                                                      "under-represented"}};
    for (const auto& finding : audit.at("findings")) {
        std::string under;
        for (const auto& key : finding.at("under_represented")) {
            if (!under.empty()) under += ", ";
            under += key.get<std::string>();
        }
        audit_rows.push_back({finding.at("spec").get<std::string>(),
                              finding.at("majority").get<std::string>(),
                              finding.at("imbalanced").get<bool>() ? "yes" : "no",
                              under.empty() ? "-" : under});
    }
    render_table(out, audit_rows);
    out << "\n== candidate set ==\n";
    if (audit.at("candidate_set").empty()) {
        out << "(empty)\n";
    } else {
        std::vector<std::vector<std::string>> rows{{"spec", "provenance"}};
        for (const auto& entry : audit.at("candidate_set")) {
            rows.push_back({entry.at("spec").get<std::string>(),
                            entry.at("provenance").get<std::string>()});
        }
        render_table(out, rows);
    }

    out << "\n== configurations ==\n";
    std::vector<std::vector<std::string>> config_rows{
        {"config", "auc_mean", "auc_std", "overall_fnr", "selection_score"}};
    std::vector<json> reports;
    for (const auto& id : config_ids) {
        const json report = read_json(run_dir / "reports" / (id + ".json"));
        config_rows.push_back({report.at("config_id").get<std::string>(),
                               format_number(report.at("auc_mean")),
                               format_number(report.at("auc_std")),
                               format_number(report.at("overall_fnr")),
                               format_number(report.at("selection_score"))});
        reports.push_back(report);
    }
    render_table(out, config_rows);

    // per-attribute FNR/FPR tables over the audited attributes
    std::vector<std::string> attributes;
    for (const auto& [attr, entry] : reports.front().at("per_attribute").items()) {
        attributes.push_back(attr);
    }
    for (const auto& attr : attributes) {
        out << "\n== fnr by group: " << attr << " ==\n";
        std::vector<std::vector<std::string>> rows{
            {"config", "group", "n", "fnr", "fpr", "gap"}};
        for (const auto& report : reports) {
            const json& entry = report.at("per_attribute").at(attr);
            for (const auto& g : entry.at("groups")) {
                const bool reported = g.at("reported").get<bool>();
                std::string fnr = "-", fpr = "-";
                if (!reported) {
                    fnr = fpr = "excluded (<10)";
                } else {
                    if (g.contains("fnr")) fnr = format_number(g.at("fnr"));
                    if (g.contains("fpr")) fpr = format_number(g.at("fpr"));
                }
                rows.push_back({report.at("config_id").get<std::string>(),
                                g.at("key").get<std::string>(),
                                format_number(g.at("n")), fnr, fpr,
                                format_number(entry.at("gap"))});
            }
        }
        render_table(out, rows);
    }

    out << "\n== selection ==\n";
    out << "chosen: " << selection.at("chosen").get<std::string>() << "\n";
    if (selection.contains("degradation_accepted") &&
        selection.at("degradation_accepted").get<bool>()) {
        out << "note: degradation limit exceeded by every candidate; best score kept\n";
    }
    if (!selection.at("trace").empty()) {
        std::vector<std::vector<std::string>> rows{
            {"rank", "config", "selection_score", "overall_fnr", "verdict"}};
        for (const auto& entry : selection.at("trace")) {
            rows.push_back({format_number(entry.at("rank")),
                            entry.at("config_id").get<std::string>(),
                            format_number(entry.at("selection_score")),
                            format_number(entry.at("overall_fnr")),
                            entry.at("verdict").get<std::string>()});
        }
        render_table(out, rows);
    }

    // flags, one line each, deduplicated across configurations
    std::vector<std::string> flags;
    for (const auto& report : reports) {
        for (const auto& flag : report.at("flags")) {
            const std::string text =
                report.at("config_id").get<std::string>() + ": " + flag.get<std::string>();
            if (std::find(flags.begin(), flags.end(), text) == flags.end()) {
                flags.push_back(text);
            }
        }
    }
    if (!flags.empty()) {
        out << "\n== flags ==\n";
        for (const auto& flag : flags) out << flag << "\n";
    }
    return out.str();
}

}  // namespace

std::string cmd_report(const std::filesystem::path& run_dir) {
    if (!fs::exists(run_dir / "selection.json") || !fs::exists(run_dir / "audit.json")) {
        throw MissingArtifacts("run directory " + run_dir.string() +
                               " is missing sweep artifacts");
    }
    const std::string text = render_report_text(run_dir);
    std::ofstream out(run_dir / "report.txt");
    out << text;
    return text;
}

}  // namespace fairsample
