#include "tigereval/jsonl.hpp"

#include <fstream>
#include <sstream>

#include "tigereval/text.hpp"

namespace tigereval::jsonl {

ordered_json instance_to_json(const core::EvalInstance& instance) {
    ordered_json j;
    j["id"] = instance.id;
    j["task"] = instance.task.name();
    j["instruction"] = instance.instruction;
    j["input"] = instance.input;
    j["hypothesis"] = instance.hypothesis;
    if (instance.reference) j["reference"] = *instance.reference;
    if (instance.system) j["system"] = *instance.system;
    return j;
}

core::EvalInstance instance_from_json(const json& j, bool require_hypothesis) {
    core::EvalInstance instance;
    instance.id = j.at("id").get<std::string>();
    instance.task = core::TaskKind::from_name(j.at("task").get<std::string>());
    instance.instruction = j.at("instruction").get<std::string>();
    instance.input = j.value("input", std::string{});
    instance.hypothesis = j.value("hypothesis", std::string{});
    if (j.contains("reference") && !j.at("reference").is_null())
        instance.reference = j.at("reference").get<std::string>();
    if (j.contains("system") && !j.at("system").is_null())
        instance.system = j.at("system").get<std::string>();
    if (require_hypothesis) core::validate_instance(instance);
    else if (text::trim(instance.instruction).empty())
        throw core::Error("instance '" + instance.id + "': instruction must be non-empty");
    return instance;
}

ordered_json error_to_json(const core::StructuredError& err) {
    ordered_json j;
    j["location"] = err.location;
    j["aspect"] = err.aspect;
    j["explanation"] = err.explanation;
    j["severity"] = std::string(core::to_string(err.severity));
    j["reduction"] = err.reduction;
    return j;
}

core::StructuredError error_from_json(const json& j) {
    core::StructuredError err;
    err.location = j.at("location").get<std::string>();
    err.aspect = j.at("aspect").get<std::string>();
    err.explanation = j.value("explanation", std::string{});
    auto severity = core::severity_from_label(j.at("severity").get<std::string>());
    if (!severity) throw core::Error("invalid severity in error record");
    err.severity = *severity;
    err.reduction = j.at("reduction").get<double>();
    if (text::trim(err.location).empty()) {
        err.location.clear();
        err.whole_output = true;
    }
    return err;
}

ordered_json scored_to_json(const ScoredRow& row) {
    ordered_json j;
    j["id"] = row.id;
    if (row.system) j["system"] = *row.system;
    if (row.score) j["score"] = *row.score;
    else j["score"] = nullptr;
    ordered_json errors = ordered_json::array();
    for (const auto& err : row.errors) errors.push_back(error_to_json(err));
    j["errors"] = std::move(errors);
    j["raw_text"] = row.raw_text;
    return j;
}

ScoredRow scored_from_json(const json& j) {
    ScoredRow row;
    row.id = j.at("id").get<std::string>();
    if (j.contains("system") && !j.at("system").is_null())
        row.system = j.at("system").get<std::string>();
    if (j.contains("score") && !j.at("score").is_null())
        row.score = j.at("score").get<double>();
    if (j.contains("errors")) {
        for (const auto& e : j.at("errors")) row.errors.push_back(error_from_json(e));
    }
    row.raw_text = j.value("raw_text", std::string{});
    return row;
}

ordered_json record_to_json(const curate::CurationRecord& record) {
    ordered_json j = instance_to_json(record.instance);
    j["channel"] = std::string(curate::to_string(record.channel));
    ordered_json errors = ordered_json::array();
    for (const auto& err : record.analysis.errors) errors.push_back(error_to_json(err));
    j["errors"] = std::move(errors);
    j["raw_model_text"] = record.raw_model_text;
    ordered_json provenance = ordered_json::object();
    for (const auto& [key, value] : record.provenance) provenance[key] = value;
    j["provenance"] = std::move(provenance);
    return j;
}

curate::CurationRecord record_from_json(const json& j) {
    curate::CurationRecord record;
    record.instance = instance_from_json(j);
    auto channel = curate::channel_from_string(j.at("channel").get<std::string>());
    if (!channel) throw core::Error("invalid channel in record");
    record.channel = *channel;
    for (const auto& e : j.at("errors")) record.analysis.errors.push_back(error_from_json(e));
    record.raw_model_text = j.value("raw_model_text", std::string{});
    record.analysis.raw_text = record.raw_model_text;
    if (j.contains("provenance")) {
        for (const auto& item : j.at("provenance").items())
            record.provenance[item.key()] = item.value().get<std::string>();
    }
    return record;
}

ordered_json reject_to_json(const curate::BuildReject& reject) {
    ordered_json j;
    j["id"] = reject.instance_id;
    j["reason"] = reject.reason;
    j["message"] = reject.message;
    j["raw_text"] = reject.raw_text;
    return j;
}

GoldRow gold_from_json(const json& j) {
    GoldRow row;
    row.task = j.at("task").get<std::string>();
    row.instance_id = j.at("instance_id").get<std::string>();
    row.system = j.value("system", std::string{"default"});
    const json& rating = j.at("rating");
    row.rating = rating.is_string() ? std::stod(rating.get<std::string>())
                                    : rating.get<double>();
    return row;
}

curate::RealWorldItem real_world_item_from_json(const json& j) {
    curate::RealWorldItem item;
    item.id = j.at("id").get<std::string>();
    item.task = core::TaskKind::from_name(j.at("task").get<std::string>());
    item.instruction = j.at("instruction").get<std::string>();
    item.input = j.value("input", std::string{});
    if (j.contains("system") && !j.at("system").is_null())
        item.system = j.at("system").get<std::string>();
    item.pool.instance_id = item.id;
    item.pool.candidates = j.at("candidates").get<std::vector<std::string>>();
    item.pool.reference = j.value("reference", std::string{});
    return item;
}

void read_jsonl(const std::filesystem::path& path,
                const std::function<void(const json&, std::size_t)>& on_row,
                const std::function<bool(const std::string&, std::size_t)>& on_bad_line) {
    std::ifstream in(path);
    if (!in) throw core::Error("cannot read file: " + path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            if (on_bad_line && on_bad_line(e.what(), lineno)) continue;
            throw core::Error(path.string() + ":" + std::to_string(lineno) +
                              ": malformed JSON line: " + e.what());
        }
        on_row(j, lineno);
    }
}

namespace {

std::vector<std::string> parse_csv_row(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    bool in_quotes = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            fields.push_back(field);
            field.clear();
        } else if (c == '\r') {
            // tolerate CRLF
        } else {
            field += c;
        }
    }
    fields.push_back(field);
    return fields;
}

std::vector<GoldRow> read_gold_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw core::Error("cannot read file: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw core::Error("empty gold CSV: " + path.string());
    auto header = parse_csv_row(line);
    int task_col = -1, id_col = -1, system_col = -1, rating_col = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        std::string name = text::to_lower(std::string(text::trim(header[i])));
        if (name == "task") task_col = static_cast<int>(i);
        else if (name == "instance_id") id_col = static_cast<int>(i);
        else if (name == "system") system_col = static_cast<int>(i);
        else if (name == "rating") rating_col = static_cast<int>(i);
    }
    if (task_col < 0 || id_col < 0 || rating_col < 0)
        throw core::Error("gold CSV must have task, instance_id and rating columns");
    std::vector<GoldRow> rows;
    while (std::getline(in, line)) {
        if (text::trim(line).empty()) continue;
        auto fields = parse_csv_row(line);
        auto get = [&](int col) -> std::string {
            return col >= 0 && static_cast<std::size_t>(col) < fields.size()
                       ? fields[static_cast<std::size_t>(col)]
                       : std::string{};
        };
        GoldRow row;
        row.task = get(task_col);
        row.instance_id = get(id_col);
        row.system = system_col >= 0 && !get(system_col).empty() ? get(system_col)
                                                                 : std::string{"default"};
        row.rating = std::stod(get(rating_col));
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

std::vector<GoldRow> read_gold(const std::filesystem::path& path) {
    if (path.extension() == ".csv") return read_gold_csv(path);
    std::vector<GoldRow> rows;
    read_jsonl(path, [&](const json& j, std::size_t) { rows.push_back(gold_from_json(j)); });
    return rows;
}

void write_text_atomic(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw core::Error("cannot write file: " + tmp.string());
        out << content;
        if (!out) throw core::Error("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

void write_lines_atomic(const std::filesystem::path& path,
                        const std::vector<std::string>& lines) {
    std::string content;
    for (const auto& line : lines) {
        content += line;
        content += '\n';
    }
    write_text_atomic(path, content);
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw core::Error("cannot read config file: " + path.string());
    RunConfig config;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view v = text::trim(line);
        if (v.empty() || v.front() == '#') continue;
        std::size_t eq = v.find('=');
        if (eq == std::string_view::npos)
            throw core::Error(path.string() + ":" + std::to_string(lineno) +
                              ": expected key = value");
        std::string key{text::trim(v.substr(0, eq))};
        std::string value{text::trim(v.substr(eq + 1))};
        apply_config_line(config, key, value);
    }
    return config;
}

void apply_config_line(RunConfig& config, const std::string& key, const std::string& value) {
    auto to_int = [&](const std::string& v) { return std::stoi(v); };
    auto to_double = [&](const std::string& v) { return std::stod(v); };
    auto to_bool = [&](const std::string& v) {
        std::string lower = text::to_lower(v);
        if (lower == "true" || lower == "1" || lower == "yes") return true;
        if (lower == "false" || lower == "0" || lower == "no") return false;
        throw core::Error("invalid boolean: " + v);
    };

    if (key == "endpoint.base_url") config.endpoint.base_url = value;
    else if (key == "endpoint.model_name") config.endpoint.model_name = value;
    else if (key == "endpoint.api_key_env") config.endpoint.api_key_env = value;
    else if (key == "endpoint.timeout_ms") config.endpoint.timeout_ms = to_int(value);
    else if (key == "endpoint.max_retries") config.endpoint.max_retries = to_int(value);
    else if (key == "endpoint.max_concurrency") config.endpoint.max_concurrency = to_int(value);
    else if (key == "endpoint.backoff_base_ms") config.endpoint.backoff_base_ms = to_int(value);
    else if (key == "endpoint.system_prompt") config.endpoint.system_prompt = value;
    else if (key == "generation.temperature") config.generation.temperature = to_double(value);
    else if (key == "generation.top_p") config.generation.top_p = to_double(value);
    else if (key == "generation.max_tokens") config.generation.max_tokens = to_int(value);
    else if (key == "generation.seed") config.generation.seed = std::stoll(value);
    else if (key == "filter.max_output_tokens") config.filter.max_output_tokens = to_int(value);
    else if (key == "filter.minor_max") config.filter.minor_max = to_double(value);
    else if (key == "filter.major_min") config.filter.major_min = to_double(value);
    else if (key == "filter.fuzzy_location") config.filter.fuzzy_location = to_bool(value);
    else if (key == "filter.fuzzy_threshold") config.filter.fuzzy_threshold = to_double(value);
    else if (key == "filter.soft_error_cap") config.filter.soft_error_cap = to_int(value);
    else if (key == "filter.reference_mention_pattern")
        config.filter.reference_mention_patterns.push_back(value);
    else if (key == "templates_dir") config.templates_dir = value;
    else if (key == "task") config.task = core::TaskKind::from_name(value);
    else throw core::Error("unknown config key: " + key);
}

}  // namespace tigereval::jsonl
