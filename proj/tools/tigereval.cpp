// tigereval — command-line surface for scoring, curation, filtering and
// correlation reporting. Exit codes: 0 success, 1 config/IO/transport
// fatal, 2 completed with data-level failures.

#include <ctime>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tigereval/client.hpp"
#include "tigereval/core.hpp"
#include "tigereval/curate.hpp"
#include "tigereval/jsonl.hpp"
#include "tigereval/metaeval.hpp"
#include "tigereval/parser.hpp"
#include "tigereval/templates.hpp"
#include "tigereval/text.hpp"

namespace {

namespace core = tigereval::core;
namespace parser = tigereval::parser;
namespace templates = tigereval::templates;
namespace client = tigereval::client;
namespace curate = tigereval::curate;
namespace metaeval = tigereval::metaeval;
namespace jsonl = tigereval::jsonl;
namespace text = tigereval::text;

using nlohmann::json;
using nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitFatal = 1;
constexpr int kExitDataFailures = 2;

struct CommonOptions {
    std::string config_file;
    std::string endpoint_url;
    std::string model;
    std::string templates_dir;
    std::optional<long long> seed;
    std::optional<int> concurrency;
    std::optional<int> max_retries;
    std::optional<int> timeout_ms;
};

void add_common_options(CLI::App* cmd, CommonOptions& options) {
    cmd->add_option("--config", options.config_file, "flat key=value config file");
    cmd->add_option("--endpoint,--transport", options.endpoint_url,
                    "endpoint URL, or mock:<fixture.jsonl> for offline runs");
    cmd->add_option("--model", options.model, "model name sent to the endpoint");
    cmd->add_option("--templates", options.templates_dir, "prompt template directory");
    cmd->add_option("--seed", options.seed, "generation / sampling seed");
    cmd->add_option("--concurrency", options.concurrency, "max in-flight requests");
    cmd->add_option("--max-retries", options.max_retries, "transient-failure retries");
    cmd->add_option("--timeout-ms", options.timeout_ms, "per-request timeout");
}

jsonl::RunConfig resolve_config(const CommonOptions& options) {
    jsonl::RunConfig config;
    if (!options.config_file.empty()) config = jsonl::load_config(options.config_file);
    if (!options.endpoint_url.empty()) config.endpoint.base_url = options.endpoint_url;
    if (!options.model.empty()) config.endpoint.model_name = options.model;
    if (!options.templates_dir.empty()) config.templates_dir = options.templates_dir;
    if (options.seed) config.generation.seed = *options.seed;
    if (options.concurrency) config.endpoint.max_concurrency = *options.concurrency;
    if (options.max_retries) config.endpoint.max_retries = *options.max_retries;
    if (options.timeout_ms) config.endpoint.timeout_ms = *options.timeout_ms;
    return config;
}

templates::TemplateRegistry load_registry(const jsonl::RunConfig& config) {
    if (!config.templates_dir.empty())
        return templates::TemplateRegistry::load(config.templates_dir);
    return templates::TemplateRegistry::load(templates::default_template_dir());
}

bool is_mock(const jsonl::RunConfig& config) {
    return config.endpoint.base_url.rfind("mock:", 0) == 0;
}

std::string now_rfc3339() {
    std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%FT%TZ", std::gmtime(&t));
    return buf;
}

// ---------------------------------------------------------------- score --

struct ScoreRowOutcome {
    jsonl::ScoredRow row;
    bool failed = false;
};

int cmd_score(const CommonOptions& options, const std::string& input,
              const std::string& output) {
    jsonl::RunConfig config = resolve_config(options);
    templates::TemplateRegistry registry = load_registry(config);
    if (config.endpoint.base_url.empty()) {
        std::cerr << "score: no endpoint configured (--endpoint)\n";
        return kExitFatal;
    }
    client::ChatClient chat = client::ChatClient::for_config(config.endpoint);

    std::vector<core::EvalInstance> instances;
    jsonl::read_jsonl(input, [&](const json& j, std::size_t) {
        instances.push_back(jsonl::instance_from_json(j));
    });

    std::vector<ScoreRowOutcome> outcomes(instances.size());
    std::optional<std::string> fatal;
    std::mutex fatal_mutex;
    client::run_bounded(instances.size(), config.endpoint.max_concurrency,
                        [&](std::size_t i) {
        ScoreRowOutcome& out = outcomes[i];
        out.row.id = instances[i].id;
        out.row.system = instances[i].system;
        try {
            core::ScoredInstance scored =
                chat.single_step_score(instances[i], config.generation, registry);
            out.row.score = scored.score;
            out.row.errors = scored.analysis.errors;
            out.row.raw_text = scored.analysis.raw_text;
        } catch (const parser::ParseFailure& e) {
            out.failed = true;
            out.row.raw_text = e.raw();
            std::cerr << "score: instance '" << instances[i].id
                      << "': " << e.what() << "\n";
        } catch (const client::ContentError& e) {
            out.failed = true;
            std::cerr << "score: instance '" << instances[i].id
                      << "': " << e.what() << "\n";
        } catch (const core::InvalidReduction& e) {
            out.failed = true;
            std::cerr << "score: instance '" << instances[i].id
                      << "': " << e.what() << "\n";
        } catch (const client::AuthError& e) {
            std::lock_guard<std::mutex> lock(fatal_mutex);
            if (!fatal) fatal = std::string("AuthError: ") + e.what();
        } catch (const client::TransportError& e) {
            std::lock_guard<std::mutex> lock(fatal_mutex);
            if (!fatal) fatal = std::string("TransportError: ") + e.what();
        } catch (const core::Error& e) {
            std::lock_guard<std::mutex> lock(fatal_mutex);
            if (!fatal) fatal = e.what();
        }
    });
    if (fatal) {
        std::cerr << "score: " << *fatal << "\n";
        return kExitFatal;
    }

    std::vector<std::string> lines;
    bool any_failed = false;
    for (const auto& out : outcomes) {
        lines.push_back(jsonl::scored_to_json(out.row).dump());
        any_failed = any_failed || out.failed;
    }
    jsonl::write_lines_atomic(output, lines);
    std::cout << "scored=" << outcomes.size() << " failures="
              << std::count_if(outcomes.begin(), outcomes.end(),
                               [](const auto& o) { return o.failed; })
              << "\n";
    return any_failed ? kExitDataFailures : kExitOk;
}

// --------------------------------------------------------------- sanity --

int cmd_sanity(const CommonOptions& options, const std::string& input,
               const std::string& output, const std::string& markdown_path) {
    jsonl::RunConfig config = resolve_config(options);
    templates::TemplateRegistry registry = load_registry(config);
    if (config.endpoint.base_url.empty()) {
        std::cerr << "sanity: no endpoint configured (--endpoint)\n";
        return kExitFatal;
    }
    client::ChatClient chat = client::ChatClient::for_config(config.endpoint);

    std::vector<core::EvalInstance> instances;
    jsonl::read_jsonl(input, [&](const json& j, std::size_t) {
        core::EvalInstance inst = jsonl::instance_from_json(j, /*require_hypothesis=*/false);
        if (!inst.reference || inst.reference->empty())
            throw core::Error("sanity requires a reference for instance '" + inst.id + "'");
        inst.hypothesis = *inst.reference;  // y' := y
        instances.push_back(std::move(inst));
    });

    std::vector<std::optional<double>> scores(instances.size());
    std::optional<std::string> fatal;
    std::mutex fatal_mutex;
    client::run_bounded(instances.size(), config.endpoint.max_concurrency,
                        [&](std::size_t i) {
        try {
            scores[i] = chat.single_step_score(instances[i], config.generation, registry).score;
        } catch (const parser::ParseFailure& e) {
            std::cerr << "sanity: instance '" << instances[i].id << "': " << e.what() << "\n";
        } catch (const client::ContentError& e) {
            std::cerr << "sanity: instance '" << instances[i].id << "': " << e.what() << "\n";
        } catch (const client::AuthError& e) {
            std::lock_guard<std::mutex> lock(fatal_mutex);
            if (!fatal) fatal = std::string("AuthError: ") + e.what();
        } catch (const client::TransportError& e) {
            std::lock_guard<std::mutex> lock(fatal_mutex);
            if (!fatal) fatal = std::string("TransportError: ") + e.what();
        } catch (const core::Error& e) {
            std::lock_guard<std::mutex> lock(fatal_mutex);
            if (!fatal) fatal = e.what();
        }
    });
    if (fatal) {
        std::cerr << "sanity: " << *fatal << "\n";
        return kExitFatal;
    }

    std::map<std::string, std::vector<double>> by_task;
    bool any_failed = false;
    for (std::size_t i = 0; i < instances.size(); ++i) {
        if (scores[i]) by_task[instances[i].task.name()].push_back(*scores[i]);
        else any_failed = true;
    }
    if (by_task.empty()) {
        std::cerr << "sanity: no instance scored successfully\n";
        return kExitFatal;
    }

    metaeval::SanityReport report = metaeval::reference_sanity(by_task);
    std::string markdown = metaeval::to_markdown(report);
    if (!output.empty())
        jsonl::write_text_atomic(output, metaeval::to_json(report).dump(2) + "\n");
    if (!markdown_path.empty()) jsonl::write_text_atomic(markdown_path, markdown);
    std::cout << markdown;
    return any_failed ? kExitDataFailures : kExitOk;
}

// --------------------------------------------------------------- curate --

struct CurateOptions {
    std::string channel;
    std::string input;
    std::string output;
    int errors_per_aspect = 1;
    int subset_min = 1;
    int subset_max = 2;
    int num_errors = 3;
};

int cmd_curate(const CommonOptions& options, const CurateOptions& curate_options) {
    jsonl::RunConfig config = resolve_config(options);
    templates::TemplateRegistry registry = load_registry(config);
    if (config.endpoint.base_url.empty()) {
        std::cerr << "curate: no endpoint configured (--endpoint)\n";
        return kExitFatal;
    }
    client::ChatClient chat = client::ChatClient::for_config(config.endpoint);

    std::map<std::string, std::string> provenance;
    if (!is_mock(config)) provenance["created_at"] = now_rfc3339();

    curate::BuildResult result;
    if (curate_options.channel == "real") {
        std::vector<curate::RealWorldItem> items;
        jsonl::read_jsonl(curate_options.input, [&](const json& j, std::size_t) {
            items.push_back(jsonl::real_world_item_from_json(j));
        });
        if (items.empty()) throw core::Error("curate: no input items");
        for (const auto& item : items) {
            if (item.pool.reference.empty())
                throw core::Error("curate: real-world channel requires a reference in "
                                  "every pool (item '" + item.id + "')");
            if (item.task != items.front().task)
                throw core::Error("curate: all items must share one task");
        }
        core::AspectTaxonomy taxonomy = core::builtin_taxonomy(items.front().task);
        curate::QualityScorer scorer;  // bigram-F1 default
        result = curate::build_real_world(items, scorer, taxonomy, chat,
                                          config.generation, registry, provenance);
    } else if (curate_options.channel == "synthetic" ||
               curate_options.channel == "free") {
        std::vector<core::EvalInstance> instances;
        jsonl::read_jsonl(curate_options.input, [&](const json& j, std::size_t) {
            instances.push_back(jsonl::instance_from_json(j, /*require_hypothesis=*/false));
        });
        if (instances.empty()) throw core::Error("curate: no input instances");
        if (curate_options.channel == "synthetic") {
            for (const auto& inst : instances) {
                if (inst.task != instances.front().task)
                    throw core::Error("curate: all instances must share one task");
            }
            core::AspectTaxonomy taxonomy = core::builtin_taxonomy(instances.front().task);
            curate::SyntheticSpec spec;
            spec.aspect_subset = taxonomy.aspects();
            spec.errors_per_aspect = curate_options.errors_per_aspect;
            spec.rng_seed = static_cast<std::uint64_t>(options.seed.value_or(0));
            spec.subset_min = curate_options.subset_min;
            spec.subset_max = curate_options.subset_max;
            result = curate::build_synthetic(instances, spec, taxonomy, chat,
                                             config.generation, registry, provenance);
        } else {
            result = curate::build_synthetic_free_aspect(instances,
                                                         curate_options.num_errors, chat,
                                                         config.generation, registry,
                                                         provenance);
        }
    } else {
        std::cerr << "curate: unknown channel '" << curate_options.channel
                  << "' (expected real|synthetic|free)\n";
        return kExitFatal;
    }

    std::vector<std::string> record_lines;
    for (const auto& record : result.records)
        record_lines.push_back(jsonl::record_to_json(record).dump());
    jsonl::write_lines_atomic(curate_options.output, record_lines);

    std::vector<std::string> reject_lines;
    for (const auto& reject : result.rejects)
        reject_lines.push_back(jsonl::reject_to_json(reject).dump());
    jsonl::write_lines_atomic(curate_options.output + ".rejects.jsonl", reject_lines);

    for (const auto& warning : result.warnings) std::cerr << "curate: " << warning << "\n";
    std::cout << "channel=" << curate_options.channel << " records="
              << result.records.size() << " rejects=" << result.rejects.size() << "\n";
    return kExitOk;
}

// --------------------------------------------------------------- filter --

int cmd_filter(const CommonOptions& options, const std::string& input,
               const std::string& output, std::string rejects_path, int max_bad_lines) {
    jsonl::RunConfig config = resolve_config(options);
    templates::TemplateRegistry registry = load_registry(config);
    if (rejects_path.empty()) rejects_path = output + ".rejects.jsonl";

    std::vector<curate::CurationRecord> records;
    int bad_lines = 0;
    bool too_many_bad = false;
    jsonl::read_jsonl(
        input,
        [&](const json& j, std::size_t lineno) {
            try {
                records.push_back(jsonl::record_from_json(j));
            } catch (const std::exception& e) {
                ++bad_lines;
                std::cerr << "filter: line " << lineno << ": " << e.what() << "\n";
                if (bad_lines > max_bad_lines) too_many_bad = true;
            }
        },
        [&](const std::string& message, std::size_t lineno) {
            ++bad_lines;
            std::cerr << "filter: line " << lineno << ": " << message << "\n";
            if (bad_lines > max_bad_lines) too_many_bad = true;
            return !too_many_bad;
        });
    if (too_many_bad) {
        std::cerr << "filter: " << bad_lines << " malformed line(s), limit "
                  << max_bad_lines << "\n";
        return kExitFatal;
    }

    curate::FilterResult result = curate::heuristic_filter(records, config.filter, registry);

    std::vector<std::string> retained_lines;
    for (const auto& record : result.retained)
        retained_lines.push_back(jsonl::record_to_json(record).dump());
    jsonl::write_lines_atomic(output, retained_lines);

    std::vector<std::string> reject_lines;
    for (const auto& [record, reason] : result.rejected) {
        ordered_json j = jsonl::record_to_json(record);
        j["reject_reason"] = std::string(curate::to_string(reason));
        reject_lines.push_back(j.dump());
    }
    jsonl::write_lines_atomic(rejects_path, reject_lines);

    for (const auto& warning : result.stats.warnings)
        std::cerr << "filter: " << warning << "\n";

    double retention = records.empty()
                           ? 100.0
                           : 100.0 * static_cast<double>(result.stats.retained) /
                                 static_cast<double>(result.stats.input);
    std::cout << "input=" << result.stats.input << " retained=" << result.stats.retained
              << " rejected=" << result.stats.rejected << " retention=";
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.2f%%", retention);
    std::cout << buf << "\n";
    for (const auto& [reason, count] : result.stats.by_reason)
        std::cout << "rejected." << curate::to_string(reason) << "=" << count << "\n";
    return kExitOk;
}

// ------------------------------------------------------------- evaluate --

std::vector<metaeval::BaselineGroup> load_baselines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw core::Error("cannot read baselines file: " + path);
    json root = json::parse(in);
    std::vector<metaeval::BaselineGroup> groups;
    for (const auto& g : root.at("groups")) {
        metaeval::BaselineGroup group;
        group.label = g.at("label").get<std::string>();
        for (const auto& m : g.at("members")) {
            metaeval::BaselineGroup::Member member;
            member.name = m.value("name", std::string{});
            for (const auto& item : m.at("per_task").items()) {
                metaeval::Triple t;
                t.kendall = item.value().value("kendall", 0.0);
                t.spearman = item.value().value("spearman", 0.0);
                t.pearson = item.value().value("pearson", 0.0);
                member.per_task[item.key()] = t;
            }
            if (m.contains("average")) {
                metaeval::Triple t;
                t.kendall = m["average"].value("kendall", 0.0);
                t.spearman = m["average"].value("spearman", 0.0);
                t.pearson = m["average"].value("pearson", 0.0);
                member.average = t;
            }
            group.members.push_back(std::move(member));
        }
        groups.push_back(std::move(group));
    }
    return groups;
}

int cmd_evaluate(const std::string& scored_path, const std::string& gold_path,
                 const std::string& output, const std::string& markdown_path,
                 const std::string& baselines_path, const std::string& group_by) {
    std::map<std::pair<std::string, std::string>, double> scores;
    std::size_t unscored_rows = 0;
    jsonl::read_jsonl(scored_path, [&](const json& j, std::size_t) {
        jsonl::ScoredRow row = jsonl::scored_from_json(j);
        if (!row.score) {
            ++unscored_rows;
            return;
        }
        auto key = std::make_pair(row.id, row.system.value_or("default"));
        if (scores.count(key) != 0)
            std::cerr << "evaluate: duplicate scored row for (" << key.first << ", "
                      << key.second << "); later row wins\n";
        scores[key] = *row.score;
    });
    if (unscored_rows > 0)
        std::cerr << "evaluate: " << unscored_rows << " scored row(s) had null score\n";

    std::vector<jsonl::GoldRow> gold = jsonl::read_gold(gold_path);
    std::map<std::string, std::vector<metaeval::PairedSample>> by_task;
    std::vector<std::string> unmatched;
    for (const auto& row : gold) {
        auto it = scores.find({row.instance_id, row.system});
        if (it == scores.end()) {
            unmatched.push_back(row.task + "/" + row.instance_id + "/" + row.system);
            continue;
        }
        metaeval::PairedSample sample;
        sample.metric_score = it->second;
        sample.gold = row.rating;
        sample.instance_id = row.instance_id;
        sample.system = row.system;
        by_task[row.task].push_back(std::move(sample));
    }
    if (!unmatched.empty()) {
        std::cerr << "evaluate: " << unmatched.size() << " gold key(s) had no scored row:";
        for (const auto& key : unmatched) std::cerr << " " << key;
        std::cerr << "\n";
    }

    std::map<std::string, metaeval::TaskCorrelation> per_task;
    std::vector<std::string> degenerate;
    for (const auto& [task, samples] : by_task) {
        if (samples.size() < 2) {
            std::cerr << "evaluate: task '" << task << "' has fewer than 2 joined samples\n";
            degenerate.push_back(task);
            continue;
        }
        try {
            if (group_by == "system") {
                std::map<std::string, std::vector<metaeval::PairedSample>> by_system;
                for (const auto& s : samples) by_system[s.system].push_back(s);
                metaeval::TaskCorrelation sum;
                std::size_t groups = 0;
                for (const auto& [system, group_samples] : by_system) {
                    if (group_samples.size() < 2) continue;
                    try {
                        metaeval::TaskCorrelation c = metaeval::correlate_task(group_samples);
                        sum.kendall += c.kendall;
                        sum.spearman += c.spearman;
                        sum.pearson += c.pearson;
                        ++groups;
                    } catch (const metaeval::DegenerateInput&) {
                        std::cerr << "evaluate: task '" << task << "' system '" << system
                                  << "' degenerate, skipped\n";
                    }
                }
                if (groups == 0) throw metaeval::DegenerateInput("all system groups degenerate");
                sum.kendall /= static_cast<double>(groups);
                sum.spearman /= static_cast<double>(groups);
                sum.pearson /= static_cast<double>(groups);
                sum.n = samples.size();
                per_task[task] = sum;
            } else {
                per_task[task] = metaeval::correlate_task(samples);
            }
        } catch (const metaeval::DegenerateInput& e) {
            std::cerr << "evaluate: task '" << task << "': " << e.what() << "\n";
            degenerate.push_back(task);
        }
    }
    if (per_task.empty()) {
        std::cerr << "evaluate: no task has enough joined, non-degenerate samples\n";
        return kExitFatal;
    }

    std::vector<metaeval::BaselineGroup> baselines;
    if (!baselines_path.empty()) baselines = load_baselines(baselines_path);

    metaeval::CorrelationReport report =
        metaeval::build_report(per_task, degenerate, baselines);
    std::string markdown = metaeval::to_markdown(report);
    if (!output.empty())
        jsonl::write_text_atomic(output, metaeval::to_json(report).dump(2) + "\n");
    if (!markdown_path.empty()) jsonl::write_text_atomic(markdown_path, markdown);
    std::cout << markdown;
    for (const auto& warning : report.warnings) std::cerr << "evaluate: " << warning << "\n";
    return kExitOk;
}

// ------------------------------------------------------------ templates --

int cmd_templates(const CommonOptions& options, const std::string& action,
                  const std::string& id_name_arg,
                  const std::vector<std::string>& bindings,
                  std::string manifest_path, bool update_manifest) {
    jsonl::RunConfig config = resolve_config(options);
    templates::TemplateRegistry registry = load_registry(config);

    if (action == "list") {
        for (templates::TemplateId id : templates::kAllTemplateIds)
            std::cout << templates::id_name(id) << "\n";
        return kExitOk;
    }
    if (action == "render") {
        auto id = templates::id_from_name(id_name_arg);
        if (!id) {
            std::cerr << "templates: unknown template id '" << id_name_arg << "'\n";
            return kExitFatal;
        }
        templates::TemplateContext ctx;
        for (const auto& binding : bindings) {
            std::size_t eq = binding.find('=');
            if (eq == std::string::npos) {
                std::cerr << "templates: --bind expects name=value, got '" << binding << "'\n";
                return kExitFatal;
            }
            ctx[binding.substr(0, eq)] = binding.substr(eq + 1);
        }
        std::vector<std::string> warnings;
        std::cout << registry.render(*id, ctx, &warnings);
        for (const auto& warning : warnings)
            std::cerr << "templates: warning: " << warning << "\n";
        return kExitOk;
    }
    if (action == "verify") {
        if (manifest_path.empty())
            manifest_path = (registry.dir() / "manifest.json").string();
        if (update_manifest) {
            registry.write_manifest(manifest_path);
            std::cout << "manifest written: " << manifest_path << "\n";
            return kExitOk;
        }
        std::vector<std::string> problems = registry.verify_against(manifest_path);
        for (const auto& problem : problems) std::cerr << "templates: " << problem << "\n";
        if (!problems.empty()) return kExitFatal;
        std::cout << "templates verified: 12 ok\n";
        return kExitOk;
    }
    std::cerr << "templates: unknown action '" << action
              << "' (expected list|render|verify)\n";
    return kExitFatal;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Reference-free error-analysis evaluation toolkit"};
    app.require_subcommand(1);

    CommonOptions score_common, sanity_common, curate_common, filter_common,
        templates_common;

    auto* score = app.add_subcommand("score", "score instances via the endpoint");
    std::string score_input, score_output;
    add_common_options(score, score_common);
    score->add_option("--input", score_input, "EvalInstance JSONL")->required();
    score->add_option("--output", score_output, "scored JSONL")->required();

    auto* sanity = app.add_subcommand("sanity", "score gold references as hypotheses");
    std::string sanity_input, sanity_output, sanity_markdown;
    add_common_options(sanity, sanity_common);
    sanity->add_option("--input", sanity_input, "instances with references")->required();
    sanity->add_option("--output", sanity_output, "sanity report JSON");
    sanity->add_option("--markdown", sanity_markdown, "sanity report markdown");

    auto* curate_cmd = app.add_subcommand("curate", "build curation records");
    CurateOptions curate_options;
    add_common_options(curate_cmd, curate_common);
    curate_cmd->add_option("--channel", curate_options.channel, "real|synthetic|free")
        ->required();
    curate_cmd->add_option("--input", curate_options.input, "channel input JSONL")
        ->required();
    curate_cmd->add_option("--output", curate_options.output, "records JSONL")->required();
    curate_cmd->add_option("--errors-per-aspect", curate_options.errors_per_aspect,
                           "synthetic errors per sampled aspect");
    curate_cmd->add_option("--subset-min", curate_options.subset_min,
                           "min sampled aspects per instance");
    curate_cmd->add_option("--subset-max", curate_options.subset_max,
                           "max sampled aspects per instance");
    curate_cmd->add_option("--num-errors", curate_options.num_errors,
                           "free-aspect channel error budget");

    auto* filter = app.add_subcommand("filter", "heuristic-filter curation records");
    std::string filter_input, filter_output, filter_rejects;
    int max_bad_lines = 0;
    add_common_options(filter, filter_common);
    filter->add_option("--input", filter_input, "records JSONL")->required();
    filter->add_option("--output", filter_output, "retained records JSONL")->required();
    filter->add_option("--rejects", filter_rejects, "rejects JSONL (default <output>.rejects.jsonl)");
    filter->add_option("--max-bad-lines", max_bad_lines, "malformed input lines tolerated");

    auto* evaluate = app.add_subcommand("evaluate", "correlate scores against gold ratings");
    std::string eval_scored, eval_gold, eval_output, eval_markdown, eval_baselines,
        eval_group_by;
    evaluate->add_option("--scored", eval_scored, "scored JSONL")->required();
    evaluate->add_option("--gold", eval_gold, "gold ratings JSONL or CSV")->required();
    evaluate->add_option("--output", eval_output, "report JSON");
    evaluate->add_option("--markdown", eval_markdown, "report markdown");
    evaluate->add_option("--baselines", eval_baselines, "baseline groups JSON for delta rows");
    evaluate->add_option("--group-by", eval_group_by,
                         "'system' averages per-system coefficients instead of pooling");

    auto* templates_cmd = app.add_subcommand("templates", "inspect the template registry");
    std::string templates_action, templates_id, templates_manifest;
    std::vector<std::string> templates_bindings;
    bool templates_update = false;
    add_common_options(templates_cmd, templates_common);
    templates_cmd->add_option("action", templates_action, "list|render|verify")->required();
    templates_cmd->add_option("--id", templates_id, "template id for render");
    templates_cmd->add_option("--bind", templates_bindings, "name=value placeholder binding");
    templates_cmd->add_option("--manifest", templates_manifest, "manifest path for verify");
    templates_cmd->add_flag("--update-manifest", templates_update,
                            "write the manifest instead of checking it");

    CLI11_PARSE(app, argc, argv);

    try {
        if (score->parsed()) return cmd_score(score_common, score_input, score_output);
        if (sanity->parsed())
            return cmd_sanity(sanity_common, sanity_input, sanity_output, sanity_markdown);
        if (curate_cmd->parsed()) return cmd_curate(curate_common, curate_options);
        if (filter->parsed())
            return cmd_filter(filter_common, filter_input, filter_output, filter_rejects,
                              max_bad_lines);
        if (evaluate->parsed())
            return cmd_evaluate(eval_scored, eval_gold, eval_output, eval_markdown,
                                eval_baselines, eval_group_by);
        if (templates_cmd->parsed())
            return cmd_templates(templates_common, templates_action, templates_id,
                                 templates_bindings, templates_manifest, templates_update);
    } catch (const client::AuthError& e) {
        std::cerr << "fatal: " << e.what() << "\n";
        return kExitFatal;
    } catch (const client::TransportError& e) {
        std::cerr << "fatal: TransportError: " << e.what() << "\n";
        return kExitFatal;
    } catch (const templates::MissingPlaceholder& e) {
        std::cerr << "fatal: " << e.what() << "\n";
        return kExitFatal;
    } catch (const core::Error& e) {
        std::cerr << "fatal: " << e.what() << "\n";
        return kExitFatal;
    } catch (const std::exception& e) {
        std::cerr << "fatal: " << e.what() << "\n";
        return kExitFatal;
    }
    return kExitOk;
}
