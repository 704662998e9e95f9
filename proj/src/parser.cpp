#include "tigereval/parser.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <map>
#include <regex>

#include <nlohmann/json.hpp>

#include "tigereval/text.hpp"

namespace tigereval::parser {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string_view to_string(Format f) {
    switch (f) {
        case Format::Enumerated: return "enumerated";
        case Format::Json: return "json";
        case Format::NoErrorDeclared: return "no_error_declared";
    }
    return "unknown";
}

namespace {

enum class FieldKind { Location, Aspect, Explanation, Severity, Reduction };

const char* field_name(FieldKind f) {
    switch (f) {
        case FieldKind::Location: return "error_location";
        case FieldKind::Aspect: return "error_aspect";
        case FieldKind::Explanation: return "explanation";
        case FieldKind::Severity: return "severity";
        case FieldKind::Reduction: return "score_reduction";
    }
    return "";
}

struct KeyMatch {
    FieldKind field;
    int block = 0;
    std::string_view inline_value;  // rest of the key line after ':'
};

// Matches "Error location 3:", "- Score Reduction 1:", etc. at the start of
// a line. Returns nullopt for ordinary text lines.
std::optional<KeyMatch> match_key_line(std::string_view line) {
    static const std::regex key_re(
        R"(^\s*-?\s*(error\s+location|error\s+aspect|explanation|severity|score\s+reduction)\s*(\d+)\s*:(.*)$)",
        std::regex::ECMAScript | std::regex::icase);
    std::cmatch m;
    if (!std::regex_match(line.begin(), line.end(), m, key_re)) return std::nullopt;
    std::string key = text::to_lower(text::collapse_whitespace(m[1].str()));
    FieldKind field;
    if (key == "error location") field = FieldKind::Location;
    else if (key == "error aspect") field = FieldKind::Aspect;
    else if (key == "explanation") field = FieldKind::Explanation;
    else if (key == "severity") field = FieldKind::Severity;
    else field = FieldKind::Reduction;
    KeyMatch out;
    out.field = field;
    out.block = std::stoi(m[2].str());
    out.inline_value = line.substr(static_cast<std::size_t>(m.position(3)));
    return out;
}

double parse_reduction_value(std::string_view raw, int block,
                             std::vector<std::string>& warnings) {
    std::string_view t = text::trim(raw);
    if (t.empty()) throw FieldError(block, "score_reduction", "missing value");
    std::size_t end = 0;
    if (end < t.size() && (t[end] == '-' || t[end] == '+')) ++end;
    bool seen_digit = false, seen_dot = false;
    while (end < t.size()) {
        if (std::isdigit(static_cast<unsigned char>(t[end]))) {
            seen_digit = true;
        } else if (t[end] == '.' && !seen_dot) {
            seen_dot = true;
        } else {
            break;
        }
        ++end;
    }
    if (!seen_digit)
        throw FieldError(block, "score_reduction",
                         "not a number: '" + std::string(t) + "'");
    double value = std::stod(std::string(t.substr(0, end)));
    std::string_view rest = text::trim(t.substr(end));
    // Trailing units or punctuation are tolerated ("4 points", "2.").
    if (!rest.empty() && rest != "." && rest != ",") {
        warnings.push_back("block " + std::to_string(block) +
                           ": trailing text after score reduction ignored: '" +
                           std::string(rest) + "'");
    }
    return value;
}

bool declares_no_error(std::string_view s, const ParserOptions& options) {
    for (const auto& phrase : options.no_error_phrases) {
        if (text::contains_icase(s, phrase)) return true;
    }
    return false;
}

// Extracts the first balanced {...} object, skipping string literals.
std::optional<std::string_view> extract_json_object(std::string_view s) {
    std::size_t start = s.find('{');
    if (start == std::string_view::npos) return std::nullopt;
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = start; i < s.size(); ++i) {
        char c = s[i];
        if (in_string) {
            if (c == '\\') ++i;
            else if (c == '"') in_string = false;
            continue;
        }
        if (c == '"') in_string = true;
        else if (c == '{') ++depth;
        else if (c == '}') {
            if (--depth == 0) return s.substr(start, i - start + 1);
        }
    }
    return std::nullopt;
}

}  // namespace

ParseOutcome parse_enumerated(std::string_view s, const ParserOptions& options) {
    struct Block {
        std::map<FieldKind, std::string> fields;
    };
    std::map<int, Block> blocks;
    std::vector<int> block_order;
    std::vector<std::string> warnings;

    auto lines = text::split_lines(s);
    std::size_t i = 0;
    while (i < lines.size()) {
        auto key = match_key_line(lines[i]);
        if (!key) {
            ++i;  // preamble or stray text between blocks
            continue;
        }
        std::string value{text::trim(key->inline_value)};
        std::size_t j = i + 1;
        while (j < lines.size() && !match_key_line(lines[j])) {
            std::string_view cont = text::trim(lines[j]);
            if (!cont.empty()) {
                if (!value.empty()) value += ' ';
                value += cont;
            }
            ++j;
        }
        auto [it, inserted] = blocks.try_emplace(key->block);
        if (inserted) block_order.push_back(key->block);
        auto [fit, fresh] = it->second.fields.try_emplace(key->field, value);
        if (!fresh) {
            warnings.push_back("block " + std::to_string(key->block) + ": duplicate '" +
                               field_name(key->field) + "'; later value wins");
            fit->second = value;
        }
        i = j;
    }

    if (blocks.empty()) {
        if (declares_no_error(s, options)) {
            ParseOutcome out;
            out.format = Format::NoErrorDeclared;
            out.analysis.raw_text = std::string(s);
            return out;
        }
        throw ParseFailure("no error blocks and no no-error declaration found",
                           std::string(s));
    }

    ParseOutcome out;
    out.format = Format::Enumerated;
    out.analysis.raw_text = std::string(s);
    for (int n : block_order) {
        const Block& block = blocks.at(n);
        core::StructuredError err;

        auto get = [&](FieldKind f) -> const std::string* {
            auto it = block.fields.find(f);
            return it == block.fields.end() ? nullptr : &it->second;
        };

        if (const std::string* loc = get(FieldKind::Location)) err.location = *loc;
        if (text::trim(err.location).empty()) {
            err.location.clear();
            err.whole_output = true;
            warnings.push_back("block " + std::to_string(n) +
                               ": empty location, treated as whole-output error");
        }
        if (const std::string* aspect = get(FieldKind::Aspect)) err.aspect = *aspect;
        else warnings.push_back("block " + std::to_string(n) + ": missing error aspect");
        if (const std::string* expl = get(FieldKind::Explanation)) err.explanation = *expl;
        else warnings.push_back("block " + std::to_string(n) + ": missing explanation");

        const std::string* severity = get(FieldKind::Severity);
        if (severity == nullptr) throw FieldError(n, "severity", "missing field");
        auto parsed = core::severity_from_label(*severity);
        if (!parsed)
            throw FieldError(n, "severity", "expected Major or Minor, got '" + *severity + "'");
        err.severity = *parsed;

        const std::string* reduction = get(FieldKind::Reduction);
        if (reduction == nullptr) throw FieldError(n, "score_reduction", "missing field");
        err.reduction = parse_reduction_value(*reduction, n, warnings);

        out.analysis.errors.push_back(std::move(err));
    }
    out.warnings = std::move(warnings);
    return out;
}

ParseOutcome parse_json(std::string_view s) {
    auto body = extract_json_object(s);
    if (!body) throw ParseFailure("no JSON object found", std::string(s));

    json root;
    try {
        root = json::parse(*body);
    } catch (const json::exception& e) {
        throw ParseFailure(std::string("malformed JSON: ") + e.what(), std::string(s));
    }

    if (!root.is_object() || !root.contains("errors"))
        throw FieldError(0, "errors", "missing top-level key");
    const json& errors = root.at("errors");
    if (!errors.is_object())
        throw FieldError(0, "errors", "value must be a JSON object");

    ParseOutcome out;
    out.analysis.raw_text = std::string(s);
    if (errors.empty()) {
        out.format = Format::NoErrorDeclared;
        return out;
    }
    out.format = Format::Json;

    std::vector<std::pair<long, std::string>> keys;
    for (const auto& item : errors.items()) {
        const std::string& key = item.key();
        long suffix = -1;
        if (key.rfind("error_", 0) == 0) {
            const char* begin = key.c_str() + 6;
            const char* end = key.c_str() + key.size();
            long value = 0;
            auto [ptr, ec] = std::from_chars(begin, end, value);
            if (ec == std::errc() && ptr == end) suffix = value;
        }
        if (suffix < 0) {
            out.warnings.push_back("ignoring unrecognized key under errors: '" + key + "'");
            continue;
        }
        keys.emplace_back(suffix, key);
    }
    std::sort(keys.begin(), keys.end());

    if (keys.empty())
        throw FieldError(0, "errors", "no error_<n> entries found");

    for (const auto& [suffix, key] : keys) {
        const json& entry = errors.at(key);
        int block = static_cast<int>(suffix);
        if (!entry.is_object())
            throw FieldError(block, "error_" + std::to_string(block), "must be an object");

        auto require_string = [&](const char* name) -> std::string {
            if (!entry.contains(name)) throw FieldError(block, name, "missing key");
            const json& v = entry.at(name);
            if (!v.is_string())
                throw FieldError(block, name, "expected a string");
            return v.get<std::string>();
        };

        core::StructuredError err;
        err.location = require_string("error_location");
        if (text::trim(err.location).empty()) {
            err.location.clear();
            err.whole_output = true;
            out.warnings.push_back("block " + std::to_string(block) +
                                   ": empty location, treated as whole-output error");
        }
        err.aspect = require_string("error_aspect");
        err.explanation = require_string("explanation");

        auto severity = core::severity_from_label(require_string("severity"));
        if (!severity)
            throw FieldError(block, "severity", "expected Major or Minor");
        err.severity = *severity;

        if (!entry.contains("score_reduction"))
            throw FieldError(block, "score_reduction", "missing key");
        const json& reduction = entry.at("score_reduction");
        if (reduction.is_number()) {
            err.reduction = reduction.get<double>();
        } else if (reduction.is_string()) {
            try {
                std::size_t used = 0;
                std::string raw = reduction.get<std::string>();
                err.reduction = std::stod(raw, &used);
                if (used != raw.size()) throw std::invalid_argument(raw);
                out.warnings.push_back("block " + std::to_string(block) +
                                       ": numeric string score_reduction accepted");
            } catch (const std::exception&) {
                throw FieldError(block, "score_reduction", "not numeric");
            }
        } else {
            throw FieldError(block, "score_reduction", "not numeric");
        }

        out.analysis.errors.push_back(std::move(err));
    }
    return out;
}

ParseOutcome parse_auto(std::string_view s, const ParserOptions& options) {
    std::string json_error;
    try {
        ParseOutcome out = parse_json(s);
        if (out.format == Format::NoErrorDeclared) out.format = Format::Json;
        return out;
    } catch (const core::Error& e) {
        json_error = e.what();
    }
    try {
        ParseOutcome out = parse_enumerated(s, options);
        if (out.format == Format::NoErrorDeclared) out.format = Format::Enumerated;
        return out;
    } catch (const core::Error& e) {
        throw ParseFailure(std::string("neither format matched (json: ") + json_error +
                               "; enumerated: " + e.what() + ")",
                           std::string(s));
    }
}

std::string render_json(const core::ErrorAnalysis& analysis) {
    if (analysis.errors.empty()) return R"({"errors": {}})";
    ordered_json errors = ordered_json::object();
    int n = 1;
    for (const auto& err : analysis.errors) {
        ordered_json entry;
        entry["error_location"] = err.location;
        entry["error_aspect"] = err.aspect;
        entry["explanation"] = err.explanation;
        entry["severity"] = std::string(core::to_string(err.severity));
        entry["score_reduction"] = err.reduction;
        errors["error_" + std::to_string(n++)] = std::move(entry);
    }
    ordered_json root;
    root["errors"] = std::move(errors);
    return root.dump(2);
}

std::string_view to_string(Verdict v) {
    switch (v) {
        case Verdict::Yes: return "yes";
        case Verdict::No: return "no";
        case Verdict::Indeterminate: return "indeterminate";
    }
    return "unknown";
}

Verdict parse_verdict(std::string_view s) {
    std::size_t i = 0;
    while (i < s.size() && !std::isalpha(static_cast<unsigned char>(s[i]))) ++i;
    std::string_view rest = s.substr(i);
    auto bounded = [&](std::string_view token) {
        if (!text::starts_with_icase(rest, token)) return false;
        if (rest.size() == token.size()) return true;
        return std::isalpha(static_cast<unsigned char>(rest[token.size()])) == 0;
    };
    if (bounded("yes")) return Verdict::Yes;
    if (bounded("no")) return Verdict::No;
    return Verdict::Indeterminate;
}

}  // namespace tigereval::parser
