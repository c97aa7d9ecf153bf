#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <sstream>

#include "fairsample/pipeline.hpp"

using namespace fairsample;

namespace {

struct CliOptions {
    std::string config_path;
    std::string preset;
    std::string records;
    std::string schema;
    bool csv = false;
    std::size_t n_students = 0;
    std::string out_dir;
    std::uint64_t seed = 0;
    double threshold = 0.15;
    std::string rule = "share-of-total";
    std::size_t max_arity = 3;
    std::vector<std::string> audited;
    std::string strategies;
    std::string cluster_k = "6";
    std::string cluster_mode;
    std::size_t folds = 10;
    std::string gap_mode = "pooled";
    double learning_rate = 0.05;
    std::size_t epochs = 200;
    double l2 = 1e-3;
    double decision_threshold = 0.5;
    std::string external_command;
    std::size_t workers = 0;
    std::string run_dir;  // report subcommand
};

void add_common_options(CLI::App* cmd, CliOptions& opt) {
    cmd->add_option("--config", opt.config_path, "run config JSON to start from");
    cmd->add_option("--preset", opt.preset, "synthetic preset: flipped-like, tuglet-like, uniform-null");
    cmd->add_option("--records", opt.records, "records file (JSONL, or CSV with --csv)");
    cmd->add_option("--schema", opt.schema, "schema JSON file");
    cmd->add_flag("--csv", opt.csv, "treat the records file as wide-format CSV");
    cmd->add_option("--n", opt.n_students, "override the preset cohort size");
    cmd->add_option("--out", opt.out_dir, "output/run directory");
    cmd->add_option("--seed", opt.seed, "master seed for the whole run");
    cmd->add_option("--threshold", opt.threshold, "imbalance threshold (default 0.15)");
    cmd->add_option("--rule", opt.rule, "imbalance rule: share-of-total | ratio-to-majority");
    cmd->add_option("--max-arity", opt.max_arity, "largest attribute combination to audit");
    cmd->add_option("--audited", opt.audited, "audited attributes (default: all)");
    cmd->add_option("--strategies", opt.strategies,
                    "comma-separated strategies (equal,majority,cascade,minor,within)");
    cmd->add_option("--cluster-k", opt.cluster_k, "cluster count, or 'auto' for selection");
    cmd->add_option("--cluster-mode", opt.cluster_mode, "off | fixed | auto");
    cmd->add_option("--folds", opt.folds, "cross-validation folds (default 10)");
    cmd->add_option("--gap-mode", opt.gap_mode, "pooled | per-fold-macro");
    cmd->add_option("--learning-rate", opt.learning_rate, "predictor learning rate");
    cmd->add_option("--epochs", opt.epochs, "predictor training epochs");
    cmd->add_option("--l2", opt.l2, "predictor L2 penalty");
    cmd->add_option("--decision-threshold", opt.decision_threshold,
                    "probability threshold for hard decisions");
    cmd->add_option("--external-model", opt.external_command,
                    "external scorer: cmd <train> <test> <scores_out>");
    cmd->add_option("--workers", opt.workers, "sweep worker threads (0 = hardware)");
}

RunConfig build_run_config(const CLI::App* cmd, const CliOptions& opt) {
    RunConfig config;
    if (!opt.config_path.empty()) {
        std::ifstream in(opt.config_path);
        if (!in) throw InvalidConfig("cannot open config: " + opt.config_path);
        nlohmann::json j;
        in >> j;
        config = run_config_from_json(j);
    }
    auto given = [cmd](const std::string& flag) { return cmd->count(flag) > 0; };
    if (given("--preset")) config.preset_name = opt.preset;
    if (given("--records")) config.records_path = opt.records;
    if (given("--schema")) config.schema_path = opt.schema;
    if (given("--csv")) config.csv = opt.csv;
    if (given("--n")) config.n_students = opt.n_students;
    if (given("--out")) config.out_dir = opt.out_dir;
    if (given("--seed")) config.seed = opt.seed;
    if (given("--threshold")) config.imbalance_threshold = opt.threshold;
    if (given("--rule")) {
        if (opt.rule != "share-of-total" && opt.rule != "ratio-to-majority") {
            throw InvalidConfig("unknown imbalance rule: " + opt.rule);
        }
        config.imbalance_rule = opt.rule == "ratio-to-majority"
                                    ? ImbalanceRule::RatioToMajority
                                    : ImbalanceRule::ShareOfTotal;
    }
    if (given("--max-arity")) config.max_combo_arity = opt.max_arity;
    if (given("--audited")) config.audited_attributes = opt.audited;
    if (given("--strategies")) {
        config.strategies.clear();
        std::stringstream ss(opt.strategies);
        std::string token;
        while (std::getline(ss, token, ',')) {
            if (!token.empty()) config.strategies.push_back(strategy_from_string(token));
        }
    }
    if (given("--cluster-k")) {
        if (opt.cluster_k == "auto") {
            config.cluster_mode = ClusterMode::Auto;
        } else {
            config.cluster_mode = ClusterMode::Fixed;
            config.cluster_k = std::stoul(opt.cluster_k);
        }
    }
    if (given("--cluster-mode")) {
        if (opt.cluster_mode == "off") config.cluster_mode = ClusterMode::Off;
        else if (opt.cluster_mode == "fixed") config.cluster_mode = ClusterMode::Fixed;
        else if (opt.cluster_mode == "auto") config.cluster_mode = ClusterMode::Auto;
        else throw InvalidConfig("unknown cluster mode: " + opt.cluster_mode);
    }
    if (given("--folds")) config.folds = opt.folds;
    if (given("--gap-mode")) {
        if (opt.gap_mode != "pooled" && opt.gap_mode != "per-fold-macro") {
            throw InvalidConfig("unknown gap mode: " + opt.gap_mode);
        }
        config.gap_mode = opt.gap_mode == "per-fold-macro" ? GapMode::PerFoldMacro
                                                           : GapMode::Pooled;
    }
    if (given("--learning-rate")) config.predictor.learning_rate = opt.learning_rate;
    if (given("--epochs")) config.predictor.epochs = opt.epochs;
    if (given("--l2")) config.predictor.l2 = opt.l2;
    if (given("--decision-threshold")) config.predictor.threshold = opt.decision_threshold;
    if (given("--external-model")) {
        config.predictor.kind = ModelKind::External;
        config.predictor.external_command = opt.external_command;
    }
    if (given("--workers")) config.workers = opt.workers;
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fairness-aware resampling and audit toolkit for at-risk-student detectors"};
    app.require_subcommand(1);

    CliOptions opt;
    CLI::App* cmd_generate_app = app.add_subcommand("generate", "write a synthetic preset cohort");
    CLI::App* cmd_audit_app = app.add_subcommand("audit", "imbalance audit + baseline fairness report");
    CLI::App* cmd_cluster_app = app.add_subcommand("cluster", "behavioral clustering to clusters.json");
    CLI::App* cmd_mitigate_app = app.add_subcommand("mitigate", "full oversampling sweep + selection");
    for (CLI::App* cmd : {cmd_generate_app, cmd_audit_app, cmd_cluster_app, cmd_mitigate_app}) {
        add_common_options(cmd, opt);
    }
    CLI::App* cmd_report_app = app.add_subcommand("report", "re-render report.txt from run artifacts");
    cmd_report_app->add_option("--run", opt.run_dir, "run directory of a finished sweep")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // usage problems exit with 2
    }

    try {
        if (cmd_report_app->parsed()) {
            std::cout << cmd_report(opt.run_dir);
            return 0;
        }
        CLI::App* active = app.get_subcommands().front();
        const RunConfig config = build_run_config(active, opt);
        if (cmd_generate_app->parsed()) {
            std::cout << "cohort written to " << cmd_generate(config).string() << "\n";
        } else if (cmd_audit_app->parsed()) {
            std::cout << "audit written to " << cmd_audit(config).string() << "\n";
        } else if (cmd_cluster_app->parsed()) {
            std::cout << "clusters written to " << cmd_cluster(config).string() << "\n";
        } else if (cmd_mitigate_app->parsed()) {
            const std::filesystem::path run_dir = cmd_mitigate(config);
            std::cout << "sweep written to " << run_dir.string() << "\n";
            std::ifstream in(run_dir / "selection.json");
            nlohmann::json selection;
            in >> selection;
            std::cout << "chosen configuration: " << selection.at("chosen").get<std::string>()
                      << "\n";
        }
        return 0;
    } catch (const MalformedRecord& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const SchemaViolation& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const DuplicateStudentId& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const InconsistentFeatureDim& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const UnknownPreset& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const InvalidConfig& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const MissingArtifacts& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        // opening a missing input file and similar environmental problems
        const std::string what = e.what();
        if (what.rfind("cannot open", 0) == 0) {
            std::cerr << "input error: " << what << "\n";
            return 2;
        }
        std::cerr << "error: " << what << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
}
