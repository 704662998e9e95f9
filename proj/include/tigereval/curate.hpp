// Two-channel curation of (instruction, input, system output, error
// analysis) records, plus the heuristic and LLM-backed filters.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tigereval/client.hpp"
#include "tigereval/core.hpp"
#include "tigereval/parser.hpp"
#include "tigereval/templates.hpp"

namespace tigereval::curate {

struct CandidatePool {
    std::string instance_id;
    std::vector<std::string> candidates;  // at least one
    std::string reference;
};

class ScorerFailure : public core::Error {
public:
    using core::Error::Error;
};

/// Candidate quality scorer. Lower score = worse candidate = preferred
/// hypothesis, regardless of kind.
struct QualityScorer {
    enum class Kind { NgramOverlap, ExternalCommand, EndpointLogScore };
    Kind kind = Kind::NgramOverlap;
    int ngram_order = 2;       // [1, 4]
    std::string command_path;  // reads "candidate\nreference\n" on stdin, prints a float
    std::optional<client::EndpointConfig> endpoint;
};

/// N-gram F1 over whitespace tokens with clipped counts; 0 when either side
/// has no n-grams of the requested order.
double ngram_overlap_f1(const std::string& candidate, const std::string& reference,
                        int order);

/// Scores every candidate against the pool reference and returns the one
/// with the lowest quality score; ties break toward the earliest index.
std::string select_hypothesis(const CandidatePool& pool, const QualityScorer& scorer);

struct SyntheticSpec {
    // Candidate aspects errors may be drawn from (normally the full
    // taxonomy). Per instance a subset of size uniform in
    // [subset_min, subset_max] is sampled without replacement.
    std::vector<core::Aspect> aspect_subset;
    int errors_per_aspect = 1;
    std::uint64_t rng_seed = 0;
    int subset_min = 1;
    int subset_max = 2;
};

struct FilterConfig {
    int max_output_tokens = 1024;
    std::vector<std::string> reference_mention_patterns =
        core::ValidationConfig::default_reference_mention_patterns();
    double minor_max = 3.0;
    double major_min = 1.5;
    bool fuzzy_location = false;
    double fuzzy_threshold = 0.85;
    int soft_error_cap = 10;

    core::ValidationConfig validation() const {
        core::ValidationConfig v;
        v.minor_max = minor_max;
        v.major_min = major_min;
        v.fuzzy_location = fuzzy_location;
        v.fuzzy_threshold = fuzzy_threshold;
        v.reference_mention_patterns = reference_mention_patterns;
        return v;
    }
};

enum class Channel { RealWorld, Synthetic, SyntheticFreeAspect };

std::string_view to_string(Channel c);
std::optional<Channel> channel_from_string(std::string_view s);

enum class FilterReason {
    JsonAnomaly,
    HallucinatedLocation,
    IllogicalSeverity,
    OverlongOutput,
    ReferenceMention,
    LlmRejected,
    AspectUnknown,
};

std::string_view to_string(FilterReason r);
std::optional<FilterReason> reason_from_string(std::string_view s);

struct CurationRecord {
    core::EvalInstance instance;
    core::ErrorAnalysis analysis;
    Channel channel = Channel::RealWorld;
    std::string raw_model_text;
    std::map<std::string, std::string> provenance;  // model, template, ...
};

/// Build-time failure for one input item (unparseable reply, missing
/// sections, transport trouble). Nothing is dropped silently. Parse-class
/// failures carry the reason "json_anomaly".
struct BuildReject {
    std::string instance_id;
    std::string reason;  // "json_anomaly", "transport", "content"
    std::string raw_text;
    std::string message;
};

struct BuildResult {
    std::vector<CurationRecord> records;  // input order
    std::vector<BuildReject> rejects;
    std::vector<std::string> warnings;
};

struct RealWorldItem {
    std::string id;
    core::TaskKind task = core::BuiltinTask::InstructionFollowing;
    std::string instruction;
    std::string input;
    std::optional<std::string> system;
    CandidatePool pool;
};

/// Real-world channel: pick the weakest candidate, run the two-step
/// analysis, parse, and record. Parse failures go to the reject stream.
BuildResult build_real_world(const std::vector<RealWorldItem>& items,
                             const QualityScorer& scorer,
                             const core::AspectTaxonomy& taxonomy,
                             client::ChatClient& chat,
                             const client::GenerationParams& params,
                             const templates::TemplateRegistry& registry,
                             std::map<std::string, std::string> provenance_base = {});

/// Synthetic channel: ask the model to corrupt the reference according to a
/// seeded error plan, then parse the combined reply into (incorrect output,
/// error analysis). The record's hypothesis is the synthesized output.
BuildResult build_synthetic(const std::vector<core::EvalInstance>& instances,
                            const SyntheticSpec& spec,
                            const core::AspectTaxonomy& taxonomy,
                            client::ChatClient& chat,
                            const client::GenerationParams& params,
                            const templates::TemplateRegistry& registry,
                            std::map<std::string, std::string> provenance_base = {});

/// Free-aspect synthetic channel; parsed aspect strings are accepted as-is.
BuildResult build_synthetic_free_aspect(const std::vector<core::EvalInstance>& instances,
                                        int num_errors,
                                        client::ChatClient& chat,
                                        const client::GenerationParams& params,
                                        const templates::TemplateRegistry& registry,
                                        std::map<std::string, std::string> provenance_base = {});

struct FilterStats {
    std::size_t input = 0;
    std::size_t retained = 0;
    std::size_t rejected = 0;
    std::map<FilterReason, std::size_t> by_reason;
    std::vector<std::string> warnings;
};

struct FilterResult {
    std::vector<CurationRecord> retained;
    std::vector<std::pair<CurationRecord, FilterReason>> rejected;
    FilterStats stats;
};

/// Applies the checks in fixed order (JsonAnomaly, HallucinatedLocation,
/// IllogicalSeverity, OverlongOutput, ReferenceMention, AspectUnknown); the
/// first failing check names the rejection reason. Retained + rejected
/// partition the input. AspectUnknown is skipped for the free-aspect
/// channel and for tasks without a built-in taxonomy.
FilterResult heuristic_filter(const std::vector<CurationRecord>& records,
                              const FilterConfig& config,
                              const templates::TemplateRegistry& registry);

struct LlmFilterResult {
    std::vector<CurationRecord> retained;
    std::vector<std::pair<CurationRecord, FilterReason>> rejected;
    std::vector<CurationRecord> pending;  // transport failures, for re-run
    std::vector<std::string> warnings;
};

/// Asks the endpoint whether each analysis is reasonable. "yes" retains,
/// "no" rejects (LlmRejected), anything else retains with a warning.
LlmFilterResult llm_reasonableness_filter(const std::vector<CurationRecord>& records,
                                          client::ChatClient& chat,
                                          const client::GenerationParams& params,
                                          const templates::TemplateRegistry& registry);

/// Splits a synthetic-channel reply at the "Generated incorrect output:"
/// marker and parses the enumerated analysis that follows. Throws
/// ParseFailure when the marker or the analysis is missing.
struct SyntheticReply {
    std::string incorrect_output;
    parser::ParseOutcome analysis;
};
SyntheticReply parse_synthetic_reply(const std::string& reply);

/// One requirement line per planned error:
/// "Error N: a <severity> error of aspect <name> — <definition>".
std::string build_error_requirements(
    const std::vector<std::pair<core::Aspect, core::Severity>>& plan);

/// Seeded per-instance error plan: subset of aspects sampled without
/// replacement, errors_per_aspect entries each, severities sampled
/// uniformly.
std::vector<std::pair<core::Aspect, core::Severity>> sample_error_plan(
    const SyntheticSpec& spec, std::uint64_t instance_index);

}  // namespace tigereval::curate
