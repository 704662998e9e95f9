// JSONL schemas binding the modules into pipelines, the gold-rating
// readers, the flat key=value run configuration, and atomic file output.
#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tigereval/client.hpp"
#include "tigereval/core.hpp"
#include "tigereval/curate.hpp"
#include "tigereval/metaeval.hpp"

namespace tigereval::jsonl {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

// {"id","task","instruction","input","hypothesis","reference"?,"system"?}
ordered_json instance_to_json(const core::EvalInstance& instance);
/// `require_hypothesis` is relaxed for synthetic-channel inputs, where the
/// hypothesis is produced later.
core::EvalInstance instance_from_json(const json& j, bool require_hypothesis = true);

ordered_json error_to_json(const core::StructuredError& err);
core::StructuredError error_from_json(const json& j);

// {"id","system"?,"score","errors":[...],"raw_text"}; score is null when
// the reply failed to parse.
struct ScoredRow {
    std::string id;
    std::optional<std::string> system;
    std::optional<double> score;
    std::vector<core::StructuredError> errors;
    std::string raw_text;
};
ordered_json scored_to_json(const ScoredRow& row);
ScoredRow scored_from_json(const json& j);

ordered_json record_to_json(const curate::CurationRecord& record);
curate::CurationRecord record_from_json(const json& j);

ordered_json reject_to_json(const curate::BuildReject& reject);

// {"task","instance_id","system","rating"}
struct GoldRow {
    std::string task;
    std::string instance_id;
    std::string system;
    double rating = 0.0;
};
GoldRow gold_from_json(const json& j);

// Real-world channel input: instance fields + "candidates" + "reference".
curate::RealWorldItem real_world_item_from_json(const json& j);

/// Reads a JSONL file line by line. Malformed lines are reported through
/// `on_bad_line` (return false to abort) and skipped.
void read_jsonl(const std::filesystem::path& path,
                const std::function<void(const json&, std::size_t)>& on_row,
                const std::function<bool(const std::string&, std::size_t)>& on_bad_line =
                    nullptr);

/// Gold ratings from .jsonl, or from .csv with the same header names.
std::vector<GoldRow> read_gold(const std::filesystem::path& path);

/// Writes lines to a temp file in the same directory, then renames over the
/// target. Creates the parent directory when missing.
void write_lines_atomic(const std::filesystem::path& path,
                        const std::vector<std::string>& lines);
void write_text_atomic(const std::filesystem::path& path, const std::string& content);

struct RunConfig {
    client::EndpointConfig endpoint;
    curate::FilterConfig filter;
    client::GenerationParams generation;
    std::string templates_dir;  // empty = default lookup
    std::optional<core::TaskKind> task;
};

/// Flat "key = value" file ('#' comments). Keys use dotted paths, e.g.
/// endpoint.base_url, generation.temperature, filter.max_output_tokens.
RunConfig load_config(const std::filesystem::path& path);
void apply_config_line(RunConfig& config, const std::string& key, const std::string& value);

}  // namespace tigereval::jsonl
