#include "tigereval/core.hpp"

#include <array>
#include <cmath>
#include <regex>

#include "tigereval/text.hpp"

namespace tigereval::core {

namespace {

struct TaskNames {
    BuiltinTask task;
    const char* id;
    const char* display;
};

constexpr std::array<TaskNames, 6> kTaskNames = {{
    {BuiltinTask::Summarization, "summarization", "summarization"},
    {BuiltinTask::Translation, "translation", "translation"},
    {BuiltinTask::Data2Text, "data2text", "data to text"},
    {BuiltinTask::LongFormQA, "long_form_qa", "long-form QA"},
    {BuiltinTask::MathQA, "mathqa", "math QA"},
    {BuiltinTask::InstructionFollowing, "instruction_following", "instruction-following"},
}};

}  // namespace

TaskKind TaskKind::custom(std::string_view name) {
    std::string trimmed{text::trim(name)};
    if (trimmed.empty()) throw Error("custom task name must be non-empty");
    TaskKind t;
    t.custom_name_ = std::move(trimmed);
    return t;
}

TaskKind TaskKind::from_name(std::string_view name) {
    std::string lowered = text::to_lower(text::trim(name));
    for (const auto& entry : kTaskNames) {
        if (lowered == entry.id) return TaskKind(entry.task);
    }
    return custom(name);
}

std::string TaskKind::name() const {
    if (!builtin_) return custom_name_;
    for (const auto& entry : kTaskNames) {
        if (entry.task == *builtin_) return entry.id;
    }
    return {};
}

std::string TaskKind::display_name() const {
    if (!builtin_) return custom_name_;
    for (const auto& entry : kTaskNames) {
        if (entry.task == *builtin_) return entry.display;
    }
    return {};
}

AspectTaxonomy::AspectTaxonomy(TaskKind task, std::vector<Aspect> aspects)
    : task_(std::move(task)), aspects_(std::move(aspects)) {
    if (task_.is_builtin()) {
        if (aspects_.size() < 3 || aspects_.size() > 6)
            throw Error("built-in task taxonomy must have 3..6 aspects");
    } else if (aspects_.empty()) {
        throw Error("custom task taxonomy must have at least one aspect");
    }
    std::vector<std::string> seen;
    for (const auto& a : aspects_) {
        if (text::trim(a.name).empty()) throw Error("aspect name must be non-empty");
        std::string lowered = text::to_lower(a.name);
        for (const auto& other : seen) {
            if (other == lowered) throw Error("duplicate aspect name: " + a.name);
        }
        seen.push_back(std::move(lowered));
    }
}

bool AspectTaxonomy::contains(std::string_view aspect_name) const {
    std::string lowered = text::to_lower(text::trim(aspect_name));
    for (const auto& a : aspects_) {
        if (text::to_lower(a.name) == lowered) return true;
    }
    return false;
}

AspectTaxonomy builtin_taxonomy(const TaskKind& task) {
    if (!task.is_builtin())
        throw NoBuiltinTaxonomy("no built-in taxonomy for custom task '" +
                                task.custom_name() + "'");
    std::vector<Aspect> aspects;
    switch (task.builtin()) {
        case BuiltinTask::Summarization:
            aspects = {
                {"Relevance",
                 "The degree to which the summarized output accurately reflects the key "
                 "points of the input text."},
                {"Fact Consistency",
                 "If the facts in the summary are consistent with the facts in the "
                 "original text."},
                {"Coherence",
                 "Pertains to the logical and meaningful arrangement of ideas in the "
                 "summary."},
                {"Fluency",
                 "Reviews the model-generated output's use of language, including "
                 "grammar, punctuation, and vocabulary that affect the quality of the "
                 "sentences."},
            };
            break;
        case BuiltinTask::Translation:
            aspects = {
                {"Accuracy",
                 "The degree to which the translated text adheres to the original text, "
                 "maintaining the same meaning, context and cultural nuances."},
                {"Fluency", "How naturally the translation reads in the target language."},
                {"Terminology",
                 "The appropriate use of specific terms and jargon related to a "
                 "particular field or industry."},
                {"Style Matching",
                 "Translator's ability to maintain the same style, tone, and voice as "
                 "the original text. Example error types include:"},
            };
            break;
        case BuiltinTask::Data2Text:
            aspects = {
                {"Accuracy",
                 "Deals with the correctness of the information presented by the output."},
                {"Logical Coherence",
                 "How well the output transforms structured data into a comprehensible, "
                 "logical, and engaging text."},
                {"Fluency",
                 "Reviews the model-generated output's use of language, including "
                 "grammar, punctuation, and vocabulary that affect the quality of the "
                 "sentences."},
            };
            break;
        case BuiltinTask::LongFormQA:
            aspects = {
                {"Accuracy", "Evaluates the factual correctness of the answer."},
                {"Completeness",
                 "Evaluates if the answer leaves out any critical parts or details that "
                 "were asked in the question."},
                {"Informativeness",
                 "Assesses the quality of the response in terms of how helpful it is for "
                 "the user to understand the answer."},
                {"Clarity", "Assesses the readability and understandability of the response."},
            };
            break;
        case BuiltinTask::MathQA:
            aspects = {
                {"Problem Understanding",
                 "Assesses how well the output accurately comprehend the text-based "
                 "description of the math problem."},
                {"Problem Formulation",
                 "Involves translating the problem from a textual form into a "
                 "mathematical equation or set of equations that can be solved."},
                {"Computing Accuracy",
                 "Assesses the output's ability to perform the mathematical operations "
                 "accurately to arrive at the correct solution."},
                {"Solution Interpretation",
                 "Involves the how well the output correctly interpret the solution of "
                 "the problem in the context of the original problem statement."},
            };
            break;
        case BuiltinTask::InstructionFollowing:
            aspects = {
                {"Comprehension",
                 "Evaluates how well the output understands the given instruction."},
                {"Accuracy",
                 "Measures the correctness of the output in relation to the instruction "
                 "and the paired input context."},
                {"Informativeness",
                 "Assesses the relevancy and usefulness of the information provided by "
                 "the output."},
                {"Coherence", "Evaluates how logically the output flows and connects."},
            };
            break;
    }
    return AspectTaxonomy(task, std::move(aspects));
}

void validate_instance(const EvalInstance& instance) {
    if (text::trim(instance.instruction).empty())
        throw Error("instance '" + instance.id + "': instruction must be non-empty");
    if (instance.hypothesis.empty())
        throw Error("instance '" + instance.id + "': hypothesis must be non-empty");
}

std::string_view to_string(Severity s) {
    return s == Severity::Major ? "Major" : "Minor";
}

std::optional<Severity> severity_from_label(std::string_view label) {
    std::string_view t = text::trim(label);
    while (!t.empty() && std::ispunct(static_cast<unsigned char>(t.front()))) t.remove_prefix(1);
    while (!t.empty() && std::ispunct(static_cast<unsigned char>(t.back()))) t.remove_suffix(1);
    std::string lowered = text::to_lower(text::trim(t));
    if (lowered == "major") return Severity::Major;
    if (lowered == "minor") return Severity::Minor;
    return std::nullopt;
}

double score(const ErrorAnalysis& analysis) {
    double total = 0.0;
    for (const auto& err : analysis.errors) {
        if (!(err.reduction >= kMinReduction && err.reduction <= kMaxReduction))
            throw InvalidReduction("score reduction " + std::to_string(err.reduction) +
                                   " outside [0.5, 5.0]");
        total += err.reduction;
    }
    return total == 0.0 ? 0.0 : -total;  // avoid -0.0 for empty analyses
}

std::string_view to_string(ViolationKind kind) {
    switch (kind) {
        case ViolationKind::HallucinatedLocation: return "hallucinated_location";
        case ViolationKind::IllogicalSeverity: return "illogical_severity";
        case ViolationKind::AspectUnknown: return "aspect_unknown";
        case ViolationKind::ReferenceMention: return "reference_mention";
    }
    return "unknown";
}

std::vector<std::string> ValidationConfig::default_reference_mention_patterns() {
    return {R"(\b(reference|gold (answer|output)|correct (answer|output|solution))\b)"};
}

std::string normalize_for_match(std::string_view s) {
    return text::to_lower(text::collapse_whitespace(s));
}

std::string normalize_location(std::string_view s) {
    std::string collapsed = text::collapse_whitespace(s);
    std::string_view v{collapsed};
    while (!v.empty() && std::ispunct(static_cast<unsigned char>(v.front()))) v.remove_prefix(1);
    while (!v.empty() && std::ispunct(static_cast<unsigned char>(v.back()))) v.remove_suffix(1);
    return text::to_lower(text::trim(v));
}

double best_window_similarity(std::string_view hypothesis, std::string_view location) {
    if (location.empty()) return hypothesis.empty() ? 1.0 : 0.0;
    if (hypothesis.size() <= location.size()) {
        std::size_t lcs = text::lcs_length(hypothesis, location);
        return 2.0 * static_cast<double>(lcs) /
               static_cast<double>(hypothesis.size() + location.size());
    }
    double best = 0.0;
    const std::size_t w = location.size();
    for (std::size_t start = 0; start + w <= hypothesis.size(); ++start) {
        std::size_t lcs = text::lcs_length(hypothesis.substr(start, w), location);
        double sim = static_cast<double>(lcs) / static_cast<double>(w);
        best = std::max(best, sim);
        if (best == 1.0) break;
    }
    return best;
}

namespace {

bool location_matches(const StructuredError& err, const std::string& hypothesis,
                      const ValidationConfig& config) {
    if (err.whole_output || text::trim(err.location).empty()) {
        // Whole-output criticism has no span to verify.
        return config.fuzzy_location;
    }
    std::string hyp = normalize_for_match(hypothesis);
    std::string loc = normalize_location(err.location);
    if (loc.empty()) return config.fuzzy_location;
    if (hyp.find(loc) != std::string::npos) return true;
    if (!config.fuzzy_location) return false;
    return best_window_similarity(hyp, loc) >= config.fuzzy_threshold;
}

bool severity_consistent(const StructuredError& err, const ValidationConfig& config) {
    if (!(err.reduction >= kMinReduction && err.reduction <= kMaxReduction)) return false;
    if (err.severity == Severity::Minor && err.reduction > config.minor_max) return false;
    if (err.severity == Severity::Major && err.reduction < config.major_min) return false;
    return true;
}

}  // namespace

std::vector<Violation> validate_error(const StructuredError& err,
                                      const std::string& hypothesis,
                                      const AspectTaxonomy* taxonomy,
                                      const ValidationConfig& config) {
    std::vector<Violation> violations;

    if (!location_matches(err, hypothesis, config)) {
        violations.push_back({ViolationKind::HallucinatedLocation,
                              err.whole_output || err.location.empty()
                                  ? "whole-output error has no verifiable location"
                                  : "location not found in hypothesis: " + err.location});
    }

    if (!severity_consistent(err, config)) {
        violations.push_back(
            {ViolationKind::IllogicalSeverity,
             std::string(to_string(err.severity)) + " severity with reduction " +
                 std::to_string(err.reduction)});
    }

    if (taxonomy != nullptr && !taxonomy->contains(err.aspect)) {
        violations.push_back({ViolationKind::AspectUnknown,
                              "aspect not in taxonomy: " + err.aspect});
    }

    for (const auto& pattern : config.reference_mention_patterns) {
        std::regex re(pattern, std::regex::ECMAScript | std::regex::icase);
        if (std::regex_search(err.explanation, re)) {
            violations.push_back({ViolationKind::ReferenceMention,
                                  "explanation matches pattern: " + pattern});
            break;
        }
    }

    return violations;
}

}  // namespace tigereval::core
