#pragma once

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <string>
#include <vector>

#include "fairsample/clustering.hpp"
#include "fairsample/dataset.hpp"

namespace fairsample {

enum class ModelKind { ReferenceLogistic, External };

struct PredictorConfig {
    ModelKind kind = ModelKind::ReferenceLogistic;
    double learning_rate = 0.05;
    std::size_t epochs = 200;
    double l2 = 1e-3;          // penalty on the weights, not the bias
    double threshold = 0.5;    // decision threshold on the sigmoid output
    std::uint64_t seed = 0;
    std::string external_command;  // invoked as: cmd <train> <test> <scores_out>

    void validate() const;
};

struct TrainedModel {
    std::vector<double> weights;  // over the behavior embedding dimensions
    double bias = 0.0;
    Standardizer scaler;          // fitted on the training fold only
    std::vector<double> loss_trace;
    PredictorConfig config;
};

// Mean regularized logistic loss and its analytic gradient at (weights, bias).
// rows are standardized embeddings; exposed so tests can check the gradient
// against finite differences.
double logistic_loss(const std::vector<std::vector<double>>& rows,
                     const std::vector<int>& labels, const std::vector<double>& weights,
                     double bias, double l2);
void logistic_gradient(const std::vector<std::vector<double>>& rows,
                       const std::vector<int>& labels, const std::vector<double>& weights,
                       double bias, double l2, std::vector<double>& grad_w,
                       double& grad_b);

// Full-batch gradient descent on the summary embedding of the given records
// (duplicates from resampling included as-is, which is what re-weights the
// loss). Throws SingleClassFold when only one label is present.
TrainedModel train(const std::vector<StudentRecord>& train_records,
                   const PredictorConfig& config, std::size_t feature_dim);

std::vector<double> predict_proba(const TrainedModel& model,
                                  const std::vector<StudentRecord>& records,
                                  std::size_t feature_dim);
std::vector<int> predict_label(const TrainedModel& model,
                               const std::vector<StudentRecord>& records,
                               std::size_t feature_dim, double threshold);

double sigmoid(double z);

nlohmann::json model_to_json(const TrainedModel& model);
TrainedModel model_from_json(const nlohmann::json& j);

// External-model protocol: writes the train and test records as JSONL, runs
// `command <train_file> <test_file> <scores_file>` and reads one decimal score
// per line, in test order.
std::vector<double> score_with_external_model(
    const std::string& command, const AttributeSchema& schema,
    const std::vector<StudentRecord>& train_records,
    const std::vector<StudentRecord>& test_records,
    const std::filesystem::path& work_dir);

}  // namespace fairsample
