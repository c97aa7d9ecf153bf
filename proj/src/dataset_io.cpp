#include "fairsample/dataset_io.hpp"

#include <fstream>
#include <sstream>

using nlohmann::json;

namespace fairsample {

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open file: " + path.string());
    return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open file for writing: " + path.string());
    return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.push_back("");
    return fields;
}

}  // namespace

AttributeSchema load_schema(const std::filesystem::path& schema_path) {
    auto in = open_input(schema_path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw MalformedRecord("schema " + schema_path.string() + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("attributes") || !j["attributes"].is_array()) {
        throw SchemaViolation("schema file must be an object with an 'attributes' array");
    }
    AttributeSchema schema;
    for (const auto& a : j["attributes"]) {
        AttributeDef def;
        def.name = a.at("name").get<std::string>();
        for (const auto& v : a.at("values")) def.values.push_back(v.get<std::string>());
        schema.attributes.push_back(std::move(def));
    }
    return schema;
}

void save_schema(const AttributeSchema& schema, const std::filesystem::path& schema_path) {
    json attrs = json::array();
    for (const auto& attr : schema.attributes) {
        attrs.push_back({{"name", attr.name}, {"values", attr.values}});
    }
    auto out = open_output(schema_path);
    out << json{{"attributes", attrs}}.dump(2) << "\n";
}

json record_to_json(const StudentRecord& rec) {
    json attrs = json::object();
    for (const auto& [name, value] : rec.attributes) attrs[name] = value;
    return json{{"student_id", rec.student_id},
                {"attributes", attrs},
                {"label", rec.label},
                {"behavior", rec.behavior}};
}

StudentRecord record_from_json(const json& j, std::size_t line_no) {
    const std::string where = "line " + std::to_string(line_no);
    if (!j.is_object()) throw MalformedRecord(where + ": record is not a JSON object");
    StudentRecord rec;
    try {
        rec.student_id = j.at("student_id").get<std::string>();
        if (!j.at("label").is_number_integer()) {
            throw MalformedRecord(where + ": label must be an integer 0 or 1");
        }
        rec.label = j.at("label").get<int>();
        for (const auto& [name, value] : j.at("attributes").items()) {
            if (!value.is_string()) {
                throw MalformedRecord(where + ": attribute " + name + " must be a string");
            }
            rec.attributes[name] = value.get<std::string>();
        }
        rec.behavior = j.at("behavior").get<std::vector<std::vector<double>>>();
    } catch (const json::exception& e) {
        throw MalformedRecord(where + ": " + e.what());
    }
    return rec;
}

namespace {

Dataset finish_load(AttributeSchema schema, std::vector<StudentRecord> records) {
    Dataset dataset;
    dataset.schema = std::move(schema);
    dataset.records = std::move(records);
    dataset.feature_dim =
        dataset.records.empty() ? 0 : dataset.records.front().behavior.front().size();
    validate_dataset(dataset);
    return dataset;
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& records_path,
                     const std::filesystem::path& schema_path) {
    AttributeSchema schema = load_schema(schema_path);
    auto in = open_input(records_path);

    std::vector<StudentRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw MalformedRecord("line " + std::to_string(line_no) + ": " + e.what());
        }
        StudentRecord rec = record_from_json(j, line_no);
        if (rec.behavior.empty()) {
            throw MalformedRecord("line " + std::to_string(line_no) +
                                  ": behavior requires T >= 1");
        }
        records.push_back(std::move(rec));
    }
    return finish_load(std::move(schema), std::move(records));
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& records_path) {
    auto out = open_output(records_path);
    for (const auto& rec : dataset.records) {
        out << record_to_json(rec).dump() << "\n";
    }
}

Dataset load_dataset_csv(const std::filesystem::path& csv_path,
                         const std::filesystem::path& schema_path) {
    AttributeSchema schema = load_schema(schema_path);
    auto in = open_input(csv_path);

    std::string line;
    if (!std::getline(in, line)) throw MalformedRecord("empty CSV file: " + csv_path.string());
    const std::vector<std::string> header = split_csv_line(line);

    std::size_t id_col = header.size(), label_col = header.size();
    std::map<std::string, std::size_t> attr_cols;
    // behavior columns parsed as behavior_t{t}_f{f}; (t, f) -> column index
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> behavior_cols;
    for (std::size_t c = 0; c < header.size(); ++c) {
        const std::string& name = header[c];
        if (name == "student_id") {
            id_col = c;
        } else if (name == "label") {
            label_col = c;
        } else if (name.rfind("behavior_t", 0) == 0) {
            const auto f_pos = name.find("_f", 10);
            if (f_pos == std::string::npos) {
                throw MalformedRecord("bad behavior column name: " + name);
            }
            try {
                std::size_t t = std::stoul(name.substr(10, f_pos - 10));
                std::size_t f = std::stoul(name.substr(f_pos + 2));
                behavior_cols[{t, f}] = c;
            } catch (const std::exception&) {
                throw MalformedRecord("bad behavior column name: " + name);
            }
        } else {
            attr_cols[name] = c;
        }
    }
    if (id_col == header.size()) throw MalformedRecord("CSV missing student_id column");
    if (label_col == header.size()) throw MalformedRecord("CSV missing label column");
    if (behavior_cols.empty()) throw MalformedRecord("CSV has no behavior_t*_f* columns");

    std::size_t T = 0, D = 0;
    for (const auto& [tf, col] : behavior_cols) {
        T = std::max(T, tf.first + 1);
        D = std::max(D, tf.second + 1);
    }
    if (behavior_cols.size() != T * D) {
        throw MalformedRecord("CSV behavior columns do not form a complete T x D grid");
    }

    std::vector<StudentRecord> records;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::string where = "line " + std::to_string(line_no);
        const std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() != header.size()) {
            throw MalformedRecord(where + ": expected " + std::to_string(header.size()) +
                                  " fields, got " + std::to_string(fields.size()));
        }
        StudentRecord rec;
        rec.student_id = fields[id_col];
        try {
            rec.label = std::stoi(fields[label_col]);
        } catch (const std::exception&) {
            throw MalformedRecord(where + ": bad label value '" + fields[label_col] + "'");
        }
        for (const auto& [name, col] : attr_cols) rec.attributes[name] = fields[col];
        rec.behavior.assign(T, std::vector<double>(D, 0.0));
        for (const auto& [tf, col] : behavior_cols) {
            try {
                rec.behavior[tf.first][tf.second] = std::stod(fields[col]);
            } catch (const std::exception&) {
                throw MalformedRecord(where + ": bad numeric value '" + fields[col] + "'");
            }
        }
        records.push_back(std::move(rec));
    }
    return finish_load(std::move(schema), std::move(records));
}

}  // namespace fairsample
