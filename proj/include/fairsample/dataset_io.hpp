#pragma once

#include <filesystem>
#include <json.hpp>
#include <string>

#include "fairsample/dataset.hpp"

namespace fairsample {

// Records file: one JSON object per line with fields student_id, attributes,
// label and behavior (row-major T x D). Schema file: {"attributes": [...]}.

AttributeSchema load_schema(const std::filesystem::path& schema_path);
void save_schema(const AttributeSchema& schema, const std::filesystem::path& schema_path);

Dataset load_dataset(const std::filesystem::path& records_path,
                     const std::filesystem::path& schema_path);
void save_dataset(const Dataset& dataset, const std::filesystem::path& records_path);

// Flat wide-format CSV: student_id,label,<attributes...>,behavior_t{t}_f{f}.
// All records share one T; behavior columns must be complete and row-major.
Dataset load_dataset_csv(const std::filesystem::path& csv_path,
                         const std::filesystem::path& schema_path);

nlohmann::json record_to_json(const StudentRecord& rec);
StudentRecord record_from_json(const nlohmann::json& j, std::size_t line_no);

}  // namespace fairsample
