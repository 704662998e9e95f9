// Parsers for raw model text in the enumerated and JSON error-analysis
// formats, the canonical JSON renderer, and yes/no verdict parsing.
#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "tigereval/core.hpp"

namespace tigereval::parser {

enum class Format { Enumerated, Json, NoErrorDeclared };

std::string_view to_string(Format f);

struct ParseOutcome {
    core::ErrorAnalysis analysis;
    Format format = Format::Enumerated;
    std::vector<std::string> warnings;
};

/// Input did not match the expected format at all. Carries the raw text for
/// audit.
class ParseFailure : public core::Error {
public:
    ParseFailure(const std::string& message, std::string raw)
        : core::Error(message), raw_(std::move(raw)) {}
    const std::string& raw() const { return raw_; }

private:
    std::string raw_;
};

/// A specific field of a specific error block was missing or unparseable.
class FieldError : public core::Error {
public:
    FieldError(int block, std::string field, const std::string& message)
        : core::Error("error block " + std::to_string(block) + ", field '" + field +
                      "': " + message),
          block_(block),
          field_(std::move(field)) {}
    int block() const { return block_; }
    const std::string& field() const { return field_; }

private:
    int block_;
    std::string field_;
};

struct ParserOptions {
    // Phrases (matched case-insensitively as substrings) that declare an
    // error-free output in the enumerated format. Artifact-defined list;
    // the JSON format has its own explicit no-error shape.
    std::vector<std::string> no_error_phrases = {
        "no errors",
        "no error",
        "the output contains no errors",
    };
};

/// Parses "Error location N: ... / Error aspect N: ... / Explanation N: ...
/// / Severity N: ... / Score reduction N: ..." blocks. Keys match
/// case-insensitively, tolerate a leading "-" bullet, and values run to the
/// next key line or end of input. Preamble text (summary lines) is skipped.
ParseOutcome parse_enumerated(std::string_view s, const ParserOptions& options = {});

/// Parses {"errors": {"error_k": {...}}}. Text around the outermost JSON
/// object is stripped and fenced code blocks are unwrapped. {"errors": {}}
/// yields NoErrorDeclared. Error keys are ordered by numeric suffix.
ParseOutcome parse_json(std::string_view s);

/// Tries parse_json first, then parse_enumerated. The outcome's format
/// reports the syntax family that succeeded (Json or Enumerated); an empty
/// analysis conveys a no-error declaration.
ParseOutcome parse_auto(std::string_view s, const ParserOptions& options = {});

/// Canonical JSON serialization matching the formatting template's schema:
/// '{"errors": {}}' when empty, else keys "error_1".. in list order.
std::string render_json(const core::ErrorAnalysis& analysis);

enum class Verdict { Yes, No, Indeterminate };

std::string_view to_string(Verdict v);

/// Leading affirmative/negative token, case-insensitive, tolerating
/// punctuation. Anything else is Indeterminate.
Verdict parse_verdict(std::string_view s);

}  // namespace tigereval::parser
