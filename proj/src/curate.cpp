#include "tigereval/curate.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

#include "tigereval/text.hpp"

namespace tigereval::curate {

std::string_view to_string(Channel c) {
    switch (c) {
        case Channel::RealWorld: return "real_world";
        case Channel::Synthetic: return "synthetic";
        case Channel::SyntheticFreeAspect: return "synthetic_free_aspect";
    }
    return "unknown";
}

std::optional<Channel> channel_from_string(std::string_view s) {
    if (s == "real_world") return Channel::RealWorld;
    if (s == "synthetic") return Channel::Synthetic;
    if (s == "synthetic_free_aspect") return Channel::SyntheticFreeAspect;
    return std::nullopt;
}

std::string_view to_string(FilterReason r) {
    switch (r) {
        case FilterReason::JsonAnomaly: return "json_anomaly";
        case FilterReason::HallucinatedLocation: return "hallucinated_location";
        case FilterReason::IllogicalSeverity: return "illogical_severity";
        case FilterReason::OverlongOutput: return "overlong_output";
        case FilterReason::ReferenceMention: return "reference_mention";
        case FilterReason::LlmRejected: return "llm_rejected";
        case FilterReason::AspectUnknown: return "aspect_unknown";
    }
    return "unknown";
}

std::optional<FilterReason> reason_from_string(std::string_view s) {
    if (s == "json_anomaly") return FilterReason::JsonAnomaly;
    if (s == "hallucinated_location") return FilterReason::HallucinatedLocation;
    if (s == "illogical_severity") return FilterReason::IllogicalSeverity;
    if (s == "overlong_output") return FilterReason::OverlongOutput;
    if (s == "reference_mention") return FilterReason::ReferenceMention;
    if (s == "llm_rejected") return FilterReason::LlmRejected;
    if (s == "aspect_unknown") return FilterReason::AspectUnknown;
    return std::nullopt;
}

namespace {

std::map<std::string, std::size_t> ngram_counts(const std::string& s, int order) {
    auto tokens = text::tokenize_whitespace(s);
    std::map<std::string, std::size_t> counts;
    if (tokens.size() < static_cast<std::size_t>(order)) return counts;
    for (std::size_t i = 0; i + order <= tokens.size(); ++i) {
        std::string gram;
        for (int k = 0; k < order; ++k) {
            if (k > 0) gram += ' ';
            gram += tokens[i + k];
        }
        ++counts[gram];
    }
    return counts;
}

// Draws uniformly from [0, n) using rejection on raw engine output, so the
// result does not depend on the standard library's distribution details.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % n;
}

double run_external_scorer(const std::string& command, const std::string& candidate,
                           const std::string& reference) {
    static std::atomic<unsigned> counter{0};
    auto tmp = std::filesystem::temp_directory_path() /
               ("tigereval-scorer-" + std::to_string(::getpid()) + "-" +
                std::to_string(counter.fetch_add(1)) + ".txt");
    {
        std::ofstream out(tmp, std::ios::binary);
        out << text::collapse_whitespace(candidate) << "\n"
            << text::collapse_whitespace(reference) << "\n";
    }
    std::string shell = command + " < '" + tmp.string() + "'";
    FILE* pipe = ::popen(shell.c_str(), "r");
    if (pipe == nullptr) {
        std::filesystem::remove(tmp);
        throw ScorerFailure("cannot launch scorer command: " + command);
    }
    std::string output;
    char buffer[256];
    while (std::fgets(buffer, sizeof buffer, pipe) != nullptr) output += buffer;
    int rc = ::pclose(pipe);
    std::filesystem::remove(tmp);
    if (rc != 0)
        throw ScorerFailure("scorer command exited with status " + std::to_string(rc));
    try {
        return std::stod(std::string(text::trim(output)));
    } catch (const std::exception&) {
        throw ScorerFailure("scorer command printed no numeric score: '" + output + "'");
    }
}

double endpoint_log_score(const client::EndpointConfig& config,
                          const std::string& candidate, const std::string& reference) {
    client::ChatClient chat = client::ChatClient::for_config(config);
    std::string prompt =
        "Rate how well the candidate matches the reference on a 0 to 1 scale. "
        "Respond with a single number only.\nReference: " +
        reference + "\nCandidate: " + candidate + "\nScore:";
    client::GenerationParams params;
    params.max_tokens = 16;
    std::string reply;
    try {
        reply = chat.complete({{client::Role::User, prompt}}, params);
    } catch (const core::Error& e) {
        throw ScorerFailure("endpoint scorer failed: " + std::string(e.what()));
    }
    const char* begin = reply.c_str();
    char* end = nullptr;
    for (const char* p = begin; *p != '\0'; ++p) {
        if (std::isdigit(static_cast<unsigned char>(*p)) || *p == '-' || *p == '+') {
            double value = std::strtod(p, &end);
            if (end != p) return value;
        }
    }
    throw ScorerFailure("endpoint scorer reply had no number: '" + reply + "'");
}

}  // namespace

double ngram_overlap_f1(const std::string& candidate, const std::string& reference,
                        int order) {
    if (order < 1 || order > 4) throw core::Error("ngram order must be in [1, 4]");
    auto cand = ngram_counts(candidate, order);
    auto ref = ngram_counts(reference, order);
    std::size_t cand_total = 0, ref_total = 0, matched = 0;
    for (const auto& [gram, count] : cand) cand_total += count;
    for (const auto& [gram, count] : ref) ref_total += count;
    for (const auto& [gram, count] : cand) {
        auto it = ref.find(gram);
        if (it != ref.end()) matched += std::min(count, it->second);
    }
    if (cand_total == 0 || ref_total == 0 || matched == 0) return 0.0;
    double precision = static_cast<double>(matched) / static_cast<double>(cand_total);
    double recall = static_cast<double>(matched) / static_cast<double>(ref_total);
    return 2.0 * precision * recall / (precision + recall);
}

std::string select_hypothesis(const CandidatePool& pool, const QualityScorer& scorer) {
    if (pool.candidates.empty())
        throw core::Error("candidate pool '" + pool.instance_id + "' is empty");
    double best_score = 0.0;
    std::size_t best_index = 0;
    for (std::size_t i = 0; i < pool.candidates.size(); ++i) {
        double quality = 0.0;
        switch (scorer.kind) {
            case QualityScorer::Kind::NgramOverlap:
                quality = ngram_overlap_f1(pool.candidates[i], pool.reference,
                                           scorer.ngram_order);
                break;
            case QualityScorer::Kind::ExternalCommand:
                quality = run_external_scorer(scorer.command_path, pool.candidates[i],
                                              pool.reference);
                break;
            case QualityScorer::Kind::EndpointLogScore:
                if (!scorer.endpoint)
                    throw core::Error("endpoint scorer requires an endpoint config");
                quality = endpoint_log_score(*scorer.endpoint, pool.candidates[i],
                                             pool.reference);
                break;
        }
        if (i == 0 || quality < best_score) {
            best_score = quality;
            best_index = i;
        }
    }
    return pool.candidates[best_index];
}

std::vector<std::pair<core::Aspect, core::Severity>> sample_error_plan(
    const SyntheticSpec& spec, std::uint64_t instance_index) {
    if (spec.aspect_subset.empty())
        throw core::Error("synthetic spec needs at least one candidate aspect");
    if (spec.errors_per_aspect < 1)
        throw core::Error("errors_per_aspect must be positive");
    std::mt19937_64 rng(spec.rng_seed ^ (0x9e3779b97f4a7c15ULL * (instance_index + 1)));

    const std::size_t pool_size = spec.aspect_subset.size();
    std::size_t lo = static_cast<std::size_t>(std::max(1, spec.subset_min));
    std::size_t hi = static_cast<std::size_t>(std::max(1, spec.subset_max));
    lo = std::min(lo, pool_size);
    hi = std::min(std::max(lo, hi), pool_size);
    std::size_t subset_size = lo + static_cast<std::size_t>(bounded(rng, hi - lo + 1));

    // Partial Fisher-Yates over indices: uniform without replacement.
    std::vector<std::size_t> indices(pool_size);
    for (std::size_t i = 0; i < pool_size; ++i) indices[i] = i;
    for (std::size_t i = 0; i < subset_size; ++i) {
        std::size_t j = i + static_cast<std::size_t>(bounded(rng, pool_size - i));
        std::swap(indices[i], indices[j]);
    }

    std::vector<std::pair<core::Aspect, core::Severity>> plan;
    for (std::size_t i = 0; i < subset_size; ++i) {
        for (int k = 0; k < spec.errors_per_aspect; ++k) {
            core::Severity severity =
                bounded(rng, 2) == 0 ? core::Severity::Major : core::Severity::Minor;
            plan.emplace_back(spec.aspect_subset[indices[i]], severity);
        }
    }
    return plan;
}

std::string build_error_requirements(
    const std::vector<std::pair<core::Aspect, core::Severity>>& plan) {
    std::string out;
    int n = 1;
    for (const auto& [aspect, severity] : plan) {
        if (!out.empty()) out += "\n";
        out += "Error " + std::to_string(n++) + ": a " +
               text::to_lower(core::to_string(severity)) + " error of aspect " +
               aspect.name + " — " + aspect.definition;
    }
    return out;
}

SyntheticReply parse_synthetic_reply(const std::string& reply) {
    static const std::string marker = "generated incorrect output:";
    std::string lowered = text::to_lower(reply);
    std::size_t marker_pos = lowered.find(marker);
    if (marker_pos == std::string::npos)
        throw parser::ParseFailure("missing 'Generated incorrect output:' section", reply);
    std::size_t body_start = marker_pos + marker.size();
    std::size_t analysis_start = lowered.find("error location", body_start);

    SyntheticReply out;
    if (analysis_start == std::string::npos) {
        out.incorrect_output = std::string(text::trim(reply.substr(body_start)));
        out.analysis = parser::parse_enumerated(reply.substr(body_start));
    } else {
        out.incorrect_output =
            std::string(text::trim(reply.substr(body_start, analysis_start - body_start)));
        out.analysis = parser::parse_enumerated(reply.substr(analysis_start));
    }
    if (out.incorrect_output.empty())
        throw parser::ParseFailure("synthesized incorrect output is empty", reply);
    return out;
}

namespace {

struct ItemOutcome {
    std::optional<CurationRecord> record;
    std::optional<BuildReject> reject;
};

BuildReject transport_reject(const std::string& id, const std::string& kind,
                             const std::string& message) {
    BuildReject r;
    r.instance_id = id;
    r.reason = kind;
    r.message = message;
    return r;
}

}  // namespace

BuildResult build_real_world(const std::vector<RealWorldItem>& items,
                             const QualityScorer& scorer,
                             const core::AspectTaxonomy& taxonomy,
                             client::ChatClient& chat,
                             const client::GenerationParams& params,
                             const templates::TemplateRegistry& registry,
                             std::map<std::string, std::string> provenance_base) {
    // Hypothesis selection is local and cheap; do it up front so the
    // parallel phase only talks to the endpoint.
    std::vector<core::EvalInstance> instances;
    instances.reserve(items.size());
    for (const auto& item : items) {
        core::EvalInstance instance;
        instance.id = item.id;
        instance.task = item.task;
        instance.instruction = item.instruction;
        instance.input = item.input;
        instance.system = item.system;
        instance.reference = item.pool.reference;
        instance.hypothesis = select_hypothesis(item.pool, scorer);
        instances.push_back(std::move(instance));
    }

    provenance_base["model"] = chat.config().model_name;

    std::vector<ItemOutcome> outcomes(items.size());
    client::run_bounded(items.size(), chat.config().max_concurrency, [&](std::size_t i) {
        const core::EvalInstance& instance = instances[i];
        std::string free_text, formatted;
        try {
            std::tie(free_text, formatted) =
                chat.two_step_error_analysis(instance, taxonomy, params, registry);
        } catch (const client::AuthError&) {
            throw;  // config class, abort the build
        } catch (const core::Error& e) {
            outcomes[i].reject = transport_reject(instance.id, "transport", e.what());
            return;
        }

        parser::ParseOutcome parsed;
        std::string source_text;
        try {
            parsed = parser::parse_auto(formatted);
            source_text = formatted;
        } catch (const core::Error&) {
            try {
                parsed = parser::parse_auto(free_text);
                source_text = free_text;
            } catch (const core::Error& e) {
                BuildReject reject;
                reject.instance_id = instance.id;
                reject.reason = "json_anomaly";
                reject.raw_text = formatted;
                reject.message = e.what();
                outcomes[i].reject = std::move(reject);
                return;
            }
        }

        CurationRecord record;
        record.instance = instance;
        record.analysis = std::move(parsed.analysis);
        record.channel = Channel::RealWorld;
        record.raw_model_text = source_text;
        record.provenance = provenance_base;
        record.provenance["template"] =
            std::string(templates::id_name(client::generation_template_for(instance.task)));
        outcomes[i].record = std::move(record);
    });

    BuildResult result;
    for (auto& outcome : outcomes) {
        if (outcome.record) result.records.push_back(std::move(*outcome.record));
        if (outcome.reject) result.rejects.push_back(std::move(*outcome.reject));
    }
    return result;
}

namespace {

BuildResult build_synthetic_impl(const std::vector<core::EvalInstance>& instances,
                                 client::ChatClient& chat,
                                 const client::GenerationParams& params,
                                 const templates::TemplateRegistry& registry,
                                 std::map<std::string, std::string> provenance_base,
                                 Channel channel, templates::TemplateId template_id,
                                 const std::function<templates::TemplateContext(
                                     const core::EvalInstance&, std::size_t)>& make_ctx) {
    for (const auto& instance : instances) {
        if (!instance.reference || instance.reference->empty())
            throw core::Error("synthetic channel requires a reference for instance '" +
                              instance.id + "'");
    }
    provenance_base["model"] = chat.config().model_name;
    provenance_base["template"] = std::string(templates::id_name(template_id));

    std::vector<std::string> prompts(instances.size());
    for (std::size_t i = 0; i < instances.size(); ++i)
        prompts[i] = registry.render(template_id, make_ctx(instances[i], i));

    std::vector<ItemOutcome> outcomes(instances.size());
    client::run_bounded(instances.size(), chat.config().max_concurrency, [&](std::size_t i) {
        const core::EvalInstance& instance = instances[i];
        std::string reply;
        try {
            reply = chat.complete({{client::Role::User, prompts[i]}}, params);
        } catch (const client::AuthError&) {
            throw;
        } catch (const core::Error& e) {
            outcomes[i].reject = transport_reject(instance.id, "transport", e.what());
            return;
        }

        try {
            SyntheticReply parsed = parse_synthetic_reply(reply);
            CurationRecord record;
            record.instance = instance;
            record.instance.hypothesis = parsed.incorrect_output;
            record.analysis = std::move(parsed.analysis.analysis);
            record.channel = channel;
            record.raw_model_text = reply;
            record.provenance = provenance_base;
            outcomes[i].record = std::move(record);
        } catch (const core::Error& e) {
            BuildReject reject;
            reject.instance_id = instance.id;
            reject.reason = "json_anomaly";
            reject.raw_text = reply;
            reject.message = e.what();
            outcomes[i].reject = std::move(reject);
        }
    });

    BuildResult result;
    for (auto& outcome : outcomes) {
        if (outcome.record) result.records.push_back(std::move(*outcome.record));
        if (outcome.reject) result.rejects.push_back(std::move(*outcome.reject));
    }
    return result;
}

}  // namespace

BuildResult build_synthetic(const std::vector<core::EvalInstance>& instances,
                            const SyntheticSpec& spec,
                            const core::AspectTaxonomy& taxonomy,
                            client::ChatClient& chat,
                            const client::GenerationParams& params,
                            const templates::TemplateRegistry& registry,
                            std::map<std::string, std::string> provenance_base) {
    if (spec.aspect_subset.size() > taxonomy.size())
        throw core::Error("aspect subset larger than the taxonomy");
    return build_synthetic_impl(
        instances, chat, params, registry, std::move(provenance_base), Channel::Synthetic,
        templates::TemplateId::SyntheticError,
        [&](const core::EvalInstance& instance, std::size_t index) {
            auto plan = sample_error_plan(spec, index);
            return templates::TemplateContext{
                {"generation_instruction", instance.instruction},
                {"input_context", instance.input},
                {"reference_output", *instance.reference},
                {"error_requirements", build_error_requirements(plan)},
            };
        });
}

BuildResult build_synthetic_free_aspect(const std::vector<core::EvalInstance>& instances,
                                        int num_errors,
                                        client::ChatClient& chat,
                                        const client::GenerationParams& params,
                                        const templates::TemplateRegistry& registry,
                                        std::map<std::string, std::string> provenance_base) {
    if (num_errors < 1) throw core::Error("num_errors must be positive");
    return build_synthetic_impl(
        instances, chat, params, registry, std::move(provenance_base),
        Channel::SyntheticFreeAspect, templates::TemplateId::SyntheticFreeAspect,
        [&](const core::EvalInstance& instance, std::size_t) {
            return templates::TemplateContext{
                {"instruction", instance.instruction},
                {"input", instance.input},
                {"output", *instance.reference},
                {"num_errors", std::to_string(num_errors)},
            };
        });
}

namespace {

std::size_t prompt_token_count(const CurationRecord& record,
                               const templates::TemplateRegistry& registry) {
    templates::TemplateContext ctx = {
        {"generation_instruction", record.instance.instruction},
        {"input_context", record.instance.input},
        {"hypothesis_output", record.instance.hypothesis},
    };
    std::string prompt = registry.render(templates::TemplateId::TigerscoreInference, ctx);
    return text::count_whitespace_tokens(prompt) +
           text::count_whitespace_tokens(record.instance.hypothesis);
}

}  // namespace

FilterResult heuristic_filter(const std::vector<CurationRecord>& records,
                              const FilterConfig& config,
                              const templates::TemplateRegistry& registry) {
    FilterResult result;
    result.stats.input = records.size();
    core::ValidationConfig validation = config.validation();
    std::map<std::string, core::AspectTaxonomy> taxonomy_cache;

    for (const auto& record : records) {
        std::optional<FilterReason> reason;

        // JsonAnomaly: stored raw text must still parse, and reductions must
        // be actual numbers.
        for (const auto& err : record.analysis.errors) {
            if (!std::isfinite(err.reduction)) {
                reason = FilterReason::JsonAnomaly;
                break;
            }
        }
        if (!reason && !record.raw_model_text.empty()) {
            try {
                parser::parse_auto(record.raw_model_text);
            } catch (const core::Error&) {
                reason = FilterReason::JsonAnomaly;
            }
        }

        if (!reason) {
            const core::AspectTaxonomy* taxonomy = nullptr;
            if (record.channel != Channel::SyntheticFreeAspect &&
                record.instance.task.is_builtin()) {
                std::string key = record.instance.task.name();
                auto it = taxonomy_cache.find(key);
                if (it == taxonomy_cache.end())
                    it = taxonomy_cache
                             .emplace(key, core::builtin_taxonomy(record.instance.task))
                             .first;
                taxonomy = &it->second;
            }

            bool hallucinated = false, illogical = false, mentions_reference = false,
                 unknown_aspect = false;
            for (const auto& err : record.analysis.errors) {
                for (const auto& violation : core::validate_error(
                         err, record.instance.hypothesis, taxonomy, validation)) {
                    switch (violation.kind) {
                        case core::ViolationKind::HallucinatedLocation:
                            hallucinated = true;
                            break;
                        case core::ViolationKind::IllogicalSeverity:
                            illogical = true;
                            break;
                        case core::ViolationKind::ReferenceMention:
                            mentions_reference = true;
                            break;
                        case core::ViolationKind::AspectUnknown:
                            unknown_aspect = true;
                            break;
                    }
                }
            }
            bool overlong = prompt_token_count(record, registry) >
                            static_cast<std::size_t>(config.max_output_tokens);

            if (hallucinated) reason = FilterReason::HallucinatedLocation;
            else if (illogical) reason = FilterReason::IllogicalSeverity;
            else if (overlong) reason = FilterReason::OverlongOutput;
            else if (mentions_reference) reason = FilterReason::ReferenceMention;
            else if (unknown_aspect) reason = FilterReason::AspectUnknown;
        }

        if (record.analysis.errors.size() >
            static_cast<std::size_t>(config.soft_error_cap)) {
            result.stats.warnings.push_back(
                "record '" + record.instance.id + "' has " +
                std::to_string(record.analysis.errors.size()) + " errors (soft cap " +
                std::to_string(config.soft_error_cap) + ")");
        }

        if (reason) {
            result.rejected.emplace_back(record, *reason);
            ++result.stats.by_reason[*reason];
        } else {
            result.retained.push_back(record);
        }
    }
    result.stats.retained = result.retained.size();
    result.stats.rejected = result.rejected.size();
    return result;
}

LlmFilterResult llm_reasonableness_filter(const std::vector<CurationRecord>& records,
                                          client::ChatClient& chat,
                                          const client::GenerationParams& params,
                                          const templates::TemplateRegistry& registry) {
    std::vector<std::string> prompts(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        templates::TemplateContext ctx = {
            {"instruction", records[i].instance.instruction},
            {"input", records[i].instance.input},
            {"output", records[i].instance.hypothesis},
            {"error_analysis", parser::render_json(records[i].analysis)},
        };
        prompts[i] = registry.render(templates::TemplateId::ReasonablenessCheck, ctx);
    }

    enum class Outcome { Retain, Reject, Pending };
    std::vector<Outcome> outcomes(records.size(), Outcome::Pending);
    std::vector<std::string> warnings_per(records.size());

    client::run_bounded(records.size(), chat.config().max_concurrency, [&](std::size_t i) {
        std::string reply;
        try {
            reply = chat.complete({{client::Role::User, prompts[i]}}, params);
        } catch (const client::AuthError&) {
            throw;
        } catch (const core::Error&) {
            outcomes[i] = Outcome::Pending;
            return;
        }
        switch (parser::parse_verdict(reply)) {
            case parser::Verdict::Yes:
                outcomes[i] = Outcome::Retain;
                break;
            case parser::Verdict::No:
                outcomes[i] = Outcome::Reject;
                break;
            case parser::Verdict::Indeterminate:
                outcomes[i] = Outcome::Retain;
                warnings_per[i] = "record '" + records[i].instance.id +
                                  "': indeterminate verdict '" +
                                  std::string(text::trim(reply)).substr(0, 80) +
                                  "', retained";
                break;
        }
    });

    LlmFilterResult result;
    for (std::size_t i = 0; i < records.size(); ++i) {
        switch (outcomes[i]) {
            case Outcome::Retain:
                result.retained.push_back(records[i]);
                break;
            case Outcome::Reject:
                result.rejected.emplace_back(records[i], FilterReason::LlmRejected);
                break;
            case Outcome::Pending:
                result.pending.push_back(records[i]);
                break;
        }
        if (!warnings_per[i].empty()) result.warnings.push_back(warnings_per[i]);
    }
    return result;
}

}  // namespace tigereval::curate
