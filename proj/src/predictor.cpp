#include "fairsample/predictor.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>

#include "fairsample/dataset_io.hpp"
#include "fairsample/rng.hpp"

using nlohmann::json;

namespace fairsample {

void PredictorConfig::validate() const {
    if (learning_rate <= 0.0) throw InvalidConfig("learning rate must be positive");
    if (epochs < 1) throw InvalidConfig("epochs must be >= 1");
    if (l2 < 0.0) throw InvalidConfig("L2 penalty must be non-negative");
    if (threshold <= 0.0 || threshold >= 1.0) {
        throw InvalidConfig("decision threshold must lie in (0, 1)");
    }
    if (kind == ModelKind::External && external_command.empty()) {
        throw InvalidConfig("external model requires a command");
    }
}

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

namespace {

// log(1 + e^z) without overflow
double log1p_exp(double z) {
    if (z > 0.0) return z + std::log1p(std::exp(-z));
    return std::log1p(std::exp(z));
}

double affine(const std::vector<double>& row, const std::vector<double>& weights,
              double bias) {
    double z = bias;
    for (std::size_t d = 0; d < row.size(); ++d) z += weights[d] * row[d];
    return z;
}

}  // namespace

double logistic_loss(const std::vector<std::vector<double>>& rows,
                     const std::vector<int>& labels, const std::vector<double>& weights,
                     double bias, double l2) {
    const double n = static_cast<double>(rows.size());
    double loss = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double z = affine(rows[i], weights, bias);
        loss += log1p_exp(z) - static_cast<double>(labels[i]) * z;
    }
    loss /= n;
    for (double w : weights) loss += l2 * w * w;
    return loss;
}

void logistic_gradient(const std::vector<std::vector<double>>& rows,
                       const std::vector<int>& labels, const std::vector<double>& weights,
                       double bias, double l2, std::vector<double>& grad_w,
                       double& grad_b) {
    const double n = static_cast<double>(rows.size());
    grad_w.assign(weights.size(), 0.0);
    grad_b = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double residual = sigmoid(affine(rows[i], weights, bias)) -
                                static_cast<double>(labels[i]);
        for (std::size_t d = 0; d < weights.size(); ++d) {
            grad_w[d] += residual * rows[i][d];
        }
        grad_b += residual;
    }
    for (std::size_t d = 0; d < weights.size(); ++d) {
        grad_w[d] = grad_w[d] / n + 2.0 * l2 * weights[d];
    }
    grad_b /= n;
}

TrainedModel train(const std::vector<StudentRecord>& train_records,
                   const PredictorConfig& config, std::size_t feature_dim) {
    config.validate();
    if (train_records.empty()) throw SingleClassFold("empty training fold");
    bool has_pos = false, has_neg = false;
    for (const auto& rec : train_records) (rec.label == 1 ? has_pos : has_neg) = true;
    if (!has_pos || !has_neg) {
        throw SingleClassFold("training fold contains a single label only");
    }

    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    rows.reserve(train_records.size());
    for (const auto& rec : train_records) {
        rows.push_back(embed_record(rec, feature_dim));
        labels.push_back(rec.label);
    }

    TrainedModel model;
    model.config = config;
    model.scaler.fit(rows);
    for (auto& row : rows) row = model.scaler.transform(row);

    const std::size_t dim = 4 * feature_dim;
    Rng rng(mix_seed(config.seed, "init"));
    model.weights.resize(dim);
    for (auto& w : model.weights) w = rng.uniform(-0.01, 0.01);
    model.bias = rng.uniform(-0.01, 0.01);

    std::vector<double> grad_w;
    double grad_b = 0.0;
    model.loss_trace.reserve(config.epochs + 1);
    model.loss_trace.push_back(
        logistic_loss(rows, labels, model.weights, model.bias, config.l2));
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        logistic_gradient(rows, labels, model.weights, model.bias, config.l2, grad_w,
                          grad_b);
        for (std::size_t d = 0; d < dim; ++d) {
            model.weights[d] -= config.learning_rate * grad_w[d];
        }
        model.bias -= config.learning_rate * grad_b;
        const double loss =
            logistic_loss(rows, labels, model.weights, model.bias, config.l2);
        if (!std::isfinite(loss)) throw NonFiniteLoss("training diverged to non-finite loss");
        model.loss_trace.push_back(loss);
    }
    return model;
}

std::vector<double> predict_proba(const TrainedModel& model,
                                  const std::vector<StudentRecord>& records,
                                  std::size_t feature_dim) {
    if (4 * feature_dim != model.weights.size()) {
        throw DimensionMismatch("model trained on embedding dimension " +
                                std::to_string(model.weights.size()) + ", records have " +
                                std::to_string(4 * feature_dim));
    }
    std::vector<double> scores;
    scores.reserve(records.size());
    for (const auto& rec : records) {
        const std::vector<double> row = model.scaler.transform(embed_record(rec, feature_dim));
        scores.push_back(sigmoid(affine(row, model.weights, model.bias)));
    }
    return scores;
}

std::vector<int> predict_label(const TrainedModel& model,
                               const std::vector<StudentRecord>& records,
                               std::size_t feature_dim, double threshold) {
    std::vector<int> labels;
    labels.reserve(records.size());
    for (double score : predict_proba(model, records, feature_dim)) {
        labels.push_back(score >= threshold ? 1 : 0);
    }
    return labels;
}

json model_to_json(const TrainedModel& model) {
    return json{{"weights", model.weights},
                {"bias", model.bias},
                {"scaler", {{"mean", model.scaler.mean}, {"stddev", model.scaler.stddev}}},
                {"config",
                 {{"kind", model.config.kind == ModelKind::External ? "external"
                                                                    : "reference-logistic"},
                  {"learning_rate", model.config.learning_rate},
                  {"epochs", model.config.epochs},
                  {"l2", model.config.l2},
                  {"threshold", model.config.threshold},
                  {"seed", model.config.seed}}}};
}

TrainedModel model_from_json(const json& j) {
    TrainedModel model;
    model.weights = j.at("weights").get<std::vector<double>>();
    model.bias = j.at("bias").get<double>();
    model.scaler.mean = j.at("scaler").at("mean").get<std::vector<double>>();
    model.scaler.stddev = j.at("scaler").at("stddev").get<std::vector<double>>();
    const auto& c = j.at("config");
    model.config.kind = c.at("kind").get<std::string>() == "external"
                            ? ModelKind::External
                            : ModelKind::ReferenceLogistic;
    model.config.learning_rate = c.at("learning_rate").get<double>();
    model.config.epochs = c.at("epochs").get<std::size_t>();
    model.config.l2 = c.at("l2").get<double>();
    model.config.threshold = c.at("threshold").get<double>();
    model.config.seed = c.at("seed").get<std::uint64_t>();
    return model;
}

std::vector<double> score_with_external_model(
    const std::string& command, const AttributeSchema& schema,
    const std::vector<StudentRecord>& train_records,
    const std::vector<StudentRecord>& test_records,
    const std::filesystem::path& work_dir) {
    std::filesystem::create_directories(work_dir);
    const auto train_path = work_dir / "train.jsonl";
    const auto test_path = work_dir / "test.jsonl";
    const auto scores_path = work_dir / "scores.txt";
    save_schema(schema, work_dir / "schema.json");

    auto write_records = [](const std::filesystem::path& path,
                            const std::vector<StudentRecord>& records) {
        std::ofstream out(path);
        if (!out) throw Error("cannot write " + path.string());
        for (const auto& rec : records) out << record_to_json(rec).dump() << "\n";
    };
    write_records(train_path, train_records);
    write_records(test_path, test_records);
    std::filesystem::remove(scores_path);

    const std::string full = command + " " + train_path.string() + " " +
                             test_path.string() + " " + scores_path.string();
    const int status = std::system(full.c_str());
    if (status != 0) {
        throw Error("external model command failed with status " + std::to_string(status));
    }

    std::ifstream in(scores_path);
    if (!in) throw Error("external model wrote no score file: " + scores_path.string());
    std::vector<double> scores;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            scores.push_back(std::stod(line));
        } catch (const std::exception&) {
            throw Error("bad score line from external model: '" + line + "'");
        }
    }
    if (scores.size() != test_records.size()) {
        throw AlignmentMismatch("external model returned " + std::to_string(scores.size()) +
                                " scores for " + std::to_string(test_records.size()) +
                                " test records");
    }
    return scores;
}

}  // namespace fairsample
