// Domain types for evaluation instances, aspect taxonomies and structured
// error analyses, plus the additive penalty score and per-error validation.
#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tigereval::core {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidReduction : public Error {
public:
    using Error::Error;
};

class NoBuiltinTaxonomy : public Error {
public:
    using Error::Error;
};

enum class BuiltinTask {
    Summarization,
    Translation,
    Data2Text,
    LongFormQA,
    MathQA,
    InstructionFollowing,
};

/// A generation task. Either one of the six built-in kinds or a custom,
/// user-named task (held-out tasks such as story generation).
class TaskKind {
public:
    TaskKind(BuiltinTask t) : builtin_(t) {}  // NOLINT: implicit by design

    /// Custom task. The name is trimmed; an empty name is an Error.
    static TaskKind custom(std::string_view name);

    /// Maps a serialized task id back to a TaskKind. Canonical ids
    /// ("summarization", "translation", "data2text", "long_form_qa",
    /// "mathqa", "instruction_following") match case-insensitively;
    /// any other non-empty string becomes a custom task.
    static TaskKind from_name(std::string_view name);

    bool is_builtin() const { return builtin_.has_value(); }
    BuiltinTask builtin() const { return *builtin_; }
    const std::string& custom_name() const { return custom_name_; }

    /// Canonical id used in JSONL files and report keys.
    std::string name() const;
    /// Human wording used when a prompt template interpolates ${task}.
    std::string display_name() const;

    friend bool operator==(const TaskKind& a, const TaskKind& b) {
        return a.builtin_ == b.builtin_ && a.custom_name_ == b.custom_name_;
    }
    friend bool operator!=(const TaskKind& a, const TaskKind& b) { return !(a == b); }

private:
    TaskKind() = default;
    std::optional<BuiltinTask> builtin_;
    std::string custom_name_;
};

struct Aspect {
    std::string name;
    std::string definition;
};

/// The ordered aspect set a task's errors are attributed to.
class AspectTaxonomy {
public:
    /// Validates: aspect names non-empty and unique (case-insensitive);
    /// 3..6 aspects for built-in tasks, at least 1 for custom tasks.
    AspectTaxonomy(TaskKind task, std::vector<Aspect> aspects);

    const TaskKind& task() const { return task_; }
    const std::vector<Aspect>& aspects() const { return aspects_; }
    std::size_t size() const { return aspects_.size(); }

    bool contains(std::string_view aspect_name) const;  // case-insensitive

private:
    TaskKind task_;
    std::vector<Aspect> aspects_;
};

/// Aspects for one of the six built-in tasks. Throws NoBuiltinTaxonomy for
/// custom tasks.
AspectTaxonomy builtin_taxonomy(const TaskKind& task);

/// One unit of work for the evaluator: instruction, source input and the
/// system output under evaluation, with an optional reference.
struct EvalInstance {
    std::string id;
    TaskKind task = BuiltinTask::InstructionFollowing;
    std::string instruction;
    std::string input;  // may be empty; some tasks fold context into the instruction
    std::string hypothesis;
    std::optional<std::string> reference;
    std::optional<std::string> system;
};

/// Throws Error if instruction or hypothesis is empty.
void validate_instance(const EvalInstance& instance);

enum class Severity { Major, Minor };

std::string_view to_string(Severity s);
/// Case-insensitive, tolerates surrounding quotes/punctuation. Anything
/// other than Major/Minor yields nullopt.
std::optional<Severity> severity_from_label(std::string_view label);

/// One identified error. `reduction` is the positive penalty magnitude; the
/// signed per-error score is -reduction. Values outside [0.5, 5.0] are
/// representable (parsers keep them) but fail scoring and validation.
struct StructuredError {
    std::string location;
    std::string aspect;
    std::string explanation;
    Severity severity = Severity::Major;
    double reduction = 0.0;
    // Error addressed at the whole output rather than a span. Location is
    // empty in that case.
    bool whole_output = false;
};

struct ErrorAnalysis {
    std::vector<StructuredError> errors;  // source order preserved
    std::string raw_text;                 // verbatim model output this was parsed from
};

/// Sum of signed penalties: 0 for an empty analysis, otherwise negative.
/// Throws InvalidReduction if any reduction falls outside [0.5, 5.0].
double score(const ErrorAnalysis& analysis);

struct ScoredInstance {
    EvalInstance instance;
    ErrorAnalysis analysis;
    double score = 0.0;
};

constexpr double kMinReduction = 0.5;
constexpr double kMaxReduction = 5.0;

enum class ViolationKind {
    HallucinatedLocation,
    IllogicalSeverity,
    AspectUnknown,
    ReferenceMention,
};

std::string_view to_string(ViolationKind kind);

struct Violation {
    ViolationKind kind;
    std::string detail;
};

struct ValidationConfig {
    double minor_max = 3.0;  // Minor errors must not exceed this reduction
    double major_min = 1.5;  // Major errors must reach at least this reduction
    bool fuzzy_location = false;
    double fuzzy_threshold = 0.85;
    std::vector<std::string> reference_mention_patterns = default_reference_mention_patterns();

    static std::vector<std::string> default_reference_mention_patterns();
};

/// Runs the four checks in order: (a) location occurs in the hypothesis
/// under normalized matching, (b) severity/reduction consistency and
/// reduction range, (c) aspect known to the taxonomy when one is given,
/// (d) explanation free of reference-mention patterns. Violations are
/// data, not failures; an empty list means all checks passed.
std::vector<Violation> validate_error(const StructuredError& err,
                                      const std::string& hypothesis,
                                      const AspectTaxonomy* taxonomy,
                                      const ValidationConfig& config);

/// Matching normalization: whitespace runs collapsed to one space, ASCII
/// case folded. Input is expected to be composed (NFC) UTF-8 already.
std::string normalize_for_match(std::string_view s);

/// Location variant: additionally strips leading/trailing punctuation.
std::string normalize_location(std::string_view s);

/// Best 2*LCS/(len_a+len_b) similarity of `location` against same-length
/// windows of `hypothesis`, both already normalized. Used by the fuzzy
/// location mode.
double best_window_similarity(std::string_view hypothesis, std::string_view location);

}  // namespace tigereval::core
