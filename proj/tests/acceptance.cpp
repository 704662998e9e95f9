// Acceptance suite. Each criterion prints one [PASS]/[FAIL] line; the
// process exits non-zero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <random>
#include <sstream>
#include <sys/wait.h>
#include <vector>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "tigereval/client.hpp"
#include "tigereval/core.hpp"
#include "tigereval/curate.hpp"
#include "tigereval/metaeval.hpp"
#include "tigereval/parser.hpp"
#include "tigereval/templates.hpp"

using namespace tigereval;
using nlohmann::json;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(const std::string& name, bool pass, const std::string& detail) {
    std::cout << (pass ? "[PASS] " : "[FAIL] ") << name << ": " << detail << "\n";
    if (!pass) ++failures;
}

double elapsed_ms(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::string read_fixture(const std::string& name) {
    std::ifstream in(std::string(TIGEREVAL_FIXTURE_DIR) + "/" + name);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

int run_cli(const std::string& args, const fs::path& log) {
    std::string command =
        std::string(TIGEREVAL_CLI_BIN) + " " + args + " > " + log.string() + " 2>&1";
    int status = std::system(command.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// --- criterion 1: correlation oracle suite -------------------------------

void correlation_oracle_suite() {
    auto start = Clock::now();
    std::mt19937 rng(424242);
    std::uniform_int_distribution<std::size_t> size_dist(2, 200);
    int mismatches = 0;
    double worst = 0.0;
    for (int round = 0; round < 500; ++round) {
        bool with_ties = round % 2 == 0;
        std::size_t n = size_dist(rng);
        auto draw = [&](bool ties) {
            std::vector<double> v(n);
            if (ties) {
                std::uniform_int_distribution<int> d(0, 5);
                for (auto& x : v) x = d(rng);
            } else {
                std::uniform_real_distribution<double> d(-50.0, 50.0);
                for (auto& x : v) x = d(rng);
            }
            bool constant = true;
            for (double x : v) constant = constant && x == v[0];
            if (constant) v[0] += 1.0;
            return v;
        };
        auto xs = draw(with_ties);
        auto ys = draw(with_ties);
        double dk = std::fabs(metaeval::kendall(xs, ys) - oracles::kendall_bruteforce(xs, ys));
        double ds = std::fabs(metaeval::spearman(xs, ys) - oracles::spearman_oracle(xs, ys));
        double dp = std::fabs(metaeval::pearson(xs, ys) - oracles::pearson_onepass(xs, ys));
        worst = std::max({worst, dk, ds, dp});
        if (dk > 1e-9 || ds > 1e-9 || dp > 1e-9) ++mismatches;
    }
    double ms = elapsed_ms(start);
    std::ostringstream detail;
    detail << "500 random pairs, worst deviation " << worst << ", " << ms << " ms";
    report("correlation-oracle-suite", mismatches == 0 && ms < 5000.0, detail.str());
}

// --- criterion 2: kendall spot values ------------------------------------

void kendall_spot_values() {
    std::vector<double> x = {1, 2, 3, 4};
    std::vector<double> y = {1, 3, 2, 4};
    std::vector<double> reversed = {4, 3, 2, 1};
    double k = metaeval::kendall(x, y);
    double r = metaeval::kendall(x, reversed);
    bool pass = std::fabs(k - 2.0 / 3.0) <= 1e-12 && r == -1.0;
    std::ostringstream detail;
    detail << "tau([1,2,3,4],[1,3,2,4]) = " << k << ", reversal = " << r;
    report("kendall-spot-values", pass, detail.str());
}

// --- criterion 3: case-study fixture -------------------------------------

void case_study_fixture() {
    auto start = Clock::now();
    std::string raw = read_fixture("case_study_analysis.txt");
    bool pass = false;
    std::string detail;
    try {
        auto outcome = parser::parse_auto(raw);
        const auto& errors = outcome.analysis.errors;
        double total = core::score(outcome.analysis);
        pass = errors.size() == 2 && errors[0].aspect == "Accuracy" &&
               errors[1].aspect == "Informativeness" &&
               errors[0].severity == core::Severity::Major &&
               errors[1].severity == core::Severity::Minor &&
               errors[0].reduction == 4.0 && errors[1].reduction == 2.0 &&
               total == -6.0;
        std::ostringstream d;
        d << errors.size() << " errors, score " << total << ", " << elapsed_ms(start)
          << " ms";
        detail = d.str();
    } catch (const std::exception& e) {
        detail = std::string("exception: ") + e.what();
    }
    pass = pass && elapsed_ms(start) < 100.0;
    report("case-study-fixture", pass, detail);
}

// --- criterion 4: json round-trip property --------------------------------

void json_round_trip() {
    std::mt19937 rng(31337);
    auto random_text = [&](std::size_t max_len) {
        std::string s;
        std::size_t len = rng() % max_len;
        for (std::size_t i = 0; i < len; ++i) {
            switch (rng() % 10) {
                case 0: s += '"'; break;
                case 1: s += '\\'; break;
                case 2: s += '\n'; break;
                case 3: s += '\t'; break;
                case 4: s += "\xc3\xa9"; break;
                case 5: s += "\xe2\x82\xac"; break;
                default: s += static_cast<char>(32 + rng() % 95); break;
            }
        }
        return s;
    };
    int failures_here = 0;
    for (int round = 0; round < 1000; ++round) {
        core::ErrorAnalysis analysis;
        std::size_t count = rng() % 11;
        for (std::size_t i = 0; i < count; ++i) {
            core::StructuredError err;
            err.location = "L" + random_text(24);
            err.aspect = "A" + random_text(12);
            err.explanation = random_text(48);
            err.severity = rng() % 2 == 0 ? core::Severity::Major : core::Severity::Minor;
            err.reduction = 0.5 + (rng() % 45001) / 10000.0;  // [0.5, 5.0]
            analysis.errors.push_back(std::move(err));
        }
        try {
            auto outcome = parser::parse_json(parser::render_json(analysis));
            bool equal = outcome.analysis.errors.size() == analysis.errors.size();
            for (std::size_t i = 0; equal && i < analysis.errors.size(); ++i) {
                const auto& a = analysis.errors[i];
                const auto& b = outcome.analysis.errors[i];
                equal = a.location == b.location && a.aspect == b.aspect &&
                        a.explanation == b.explanation && a.severity == b.severity &&
                        a.reduction == b.reduction;
            }
            if (!equal) ++failures_here;
        } catch (const std::exception&) {
            ++failures_here;
        }
    }
    std::ostringstream detail;
    detail << "1000 analyses, " << failures_here << " round-trip failures";
    report("json-round-trip", failures_here == 0, detail.str());
}

// --- criterion 5: planted-violation filter --------------------------------

void planted_violation_filter() {
    auto registry = templates::TemplateRegistry::load(templates::default_template_dir());
    auto clean = [&](const std::string& id) {
        curate::CurationRecord record;
        record.instance.id = id;
        record.instance.task = core::BuiltinTask::InstructionFollowing;
        record.instance.instruction = "Answer the color question.";
        record.instance.input = "What color is the clear daytime sky?";
        record.instance.hypothesis = "The clear daytime sky is green.";
        record.channel = curate::Channel::Synthetic;
        core::StructuredError err;
        err.location = "green";
        err.aspect = "Accuracy";
        err.explanation = "The sky is blue in daytime; replace green with blue.";
        err.severity = core::Severity::Major;
        err.reduction = 2.0;
        record.analysis.errors.push_back(err);
        return record;
    };

    std::vector<curate::CurationRecord> corpus;
    for (int i = 0; i < 60; ++i) corpus.push_back(clean("clean-" + std::to_string(i)));
    for (int i = 0; i < 10; ++i) {
        auto r = clean("halluc-" + std::to_string(i));
        r.analysis.errors[0].location = "purple elephants";
        corpus.push_back(r);
    }
    for (int i = 0; i < 10; ++i) {
        auto r = clean("severity-" + std::to_string(i));
        r.analysis.errors[0].severity = core::Severity::Minor;
        r.analysis.errors[0].reduction = 4.0;
        corpus.push_back(r);
    }
    for (int i = 0; i < 10; ++i) {
        auto r = clean("overlong-" + std::to_string(i));
        std::string big = "tok";
        for (int k = 0; k < 1300; ++k) big += " tok";
        r.instance.hypothesis = big;
        r.analysis.errors[0].location = "tok tok";
        corpus.push_back(r);
    }
    for (int i = 0; i < 10; ++i) {
        auto r = clean("refmention-" + std::to_string(i));
        r.analysis.errors[0].explanation = "Wrong because the reference output says blue.";
        corpus.push_back(r);
    }

    curate::FilterConfig config;
    auto result = curate::heuristic_filter(corpus, config, registry);
    auto count = [&](curate::FilterReason reason) -> std::size_t {
        auto it = result.stats.by_reason.find(reason);
        return it == result.stats.by_reason.end() ? 0 : it->second;
    };
    bool counts_ok = result.retained.size() == 60 && result.rejected.size() == 40 &&
                     count(curate::FilterReason::HallucinatedLocation) == 10 &&
                     count(curate::FilterReason::IllogicalSeverity) == 10 &&
                     count(curate::FilterReason::OverlongOutput) == 10 &&
                     count(curate::FilterReason::ReferenceMention) == 10;

    auto again = curate::heuristic_filter(result.retained, config, registry);
    bool idempotent =
        again.retained.size() == result.retained.size() && again.rejected.empty();
    bool same_records = true;
    for (std::size_t i = 0; i < again.retained.size() && same_records; ++i)
        same_records = again.retained[i].instance.id == result.retained[i].instance.id;

    std::ostringstream detail;
    detail << "retained " << result.retained.size() << "/100, reasons ("
           << count(curate::FilterReason::HallucinatedLocation) << ","
           << count(curate::FilterReason::IllogicalSeverity) << ","
           << count(curate::FilterReason::OverlongOutput) << ","
           << count(curate::FilterReason::ReferenceMention) << "), idempotent="
           << (idempotent && same_records ? "yes" : "no");
    report("planted-violation-filter", counts_ok && idempotent && same_records,
           detail.str());
}

// --- criterion 6: end-to-end offline pipeline -----------------------------

struct PipelineFiles {
    std::string records, retained, rejects, scored, report;
};

bool run_pipeline(const fs::path& dir, const fs::path& inputs, PipelineFiles* out,
                  std::string* error) {
    fs::create_directories(dir);
    fs::path log = dir / "cli.log";

    fs::path records = dir / "records.jsonl";
    fs::path retained = dir / "retained.jsonl";
    fs::path scored = dir / "scored.jsonl";
    fs::path report = dir / "report.json";

    if (run_cli("curate --channel synthetic --seed 7 --transport mock:" +
                    (inputs / "fixtures_curate.jsonl").string() + " --input " +
                    (inputs / "instances.jsonl").string() + " --output " +
                    records.string(),
                log) != 0) {
        *error = "curate failed: " + slurp(log);
        return false;
    }
    if (run_cli("filter --input " + records.string() + " --output " + retained.string(),
                log) != 0) {
        *error = "filter failed: " + slurp(log);
        return false;
    }
    if (run_cli("score --transport mock:" + (inputs / "fixtures_score.jsonl").string() +
                    " --input " + retained.string() + " --output " + scored.string(),
                log) != 0) {
        *error = "score failed: " + slurp(log);
        return false;
    }
    if (run_cli("evaluate --scored " + scored.string() + " --gold " +
                    (inputs / "gold.jsonl").string() + " --output " + report.string(),
                log) != 0) {
        *error = "evaluate failed: " + slurp(log);
        return false;
    }
    out->records = slurp(records);
    out->retained = slurp(retained);
    out->rejects = slurp(fs::path(records.string() + ".rejects.jsonl"));
    out->scored = slurp(scored);
    out->report = slurp(report);
    return true;
}

void end_to_end_pipeline() {
    auto start = Clock::now();
    fs::path base = fs::temp_directory_path() / "tigereval-acceptance-e2e";
    fs::remove_all(base);
    fs::path inputs = base / "inputs";
    fs::create_directories(inputs);

    const char* markers[] = {"gate-one", "gate-two", "gate-three", "gate-four"};
    std::string instances;
    for (const char* marker : markers) {
        instances += json{{"id", std::string("inst-") + marker},
                          {"task", "instruction_following"},
                          {"instruction", std::string("Describe ") + marker + "."},
                          {"input", ""},
                          {"reference", std::string("The ") + marker + " opens at dawn."}}
                         .dump() +
                     "\n";
    }
    write_file(inputs / "instances.jsonl", instances);

    // curate replies: valid synthetic outputs whose analyses survive filtering
    std::string curate_fixtures;
    for (const char* marker : markers) {
        std::string hypothesis = std::string("The ") + marker + " stays sealed at dawn.";
        std::string reply = "Generated incorrect output: " + hypothesis +
                            "\n\nError location 1: stays sealed\nError aspect 1: Accuracy\n"
                            "Explanation 1: It opens at dawn, not sealed.\n"
                            "Severity 1: Major\nScore reduction 1: 2\n";
        curate_fixtures +=
            json{{"contains", json::array({marker})}, {"reply", reply}}.dump() + "\n";
    }
    write_file(inputs / "fixtures_curate.jsonl", curate_fixtures);

    // score replies: totals 1, 2, 3, 4 -> scores -1, -2, -3, -4
    double totals[] = {1.0, 2.0, 3.0, 4.0};
    std::string score_fixtures;
    for (int i = 0; i < 4; ++i) {
        json reply_json = {
            {"errors",
             {{"error_1",
               {{"error_location", "stays sealed"},
                {"error_aspect", "Accuracy"},
                {"explanation", "should open at dawn"},
                {"severity", totals[i] >= 1.5 ? "Major" : "Minor"},
                {"score_reduction", totals[i]}}}}}};
        score_fixtures += json{{"contains", json::array({markers[i]})},
                               {"reply", reply_json.dump()}}
                              .dump() +
                          "\n";
    }
    write_file(inputs / "fixtures_score.jsonl", score_fixtures);

    // gold designed so (metric, gold) realizes the 0.6667 kendall pattern
    double ratings[] = {4.0, 2.0, 3.0, 1.0};
    std::string gold;
    for (int i = 0; i < 4; ++i) {
        gold += json{{"task", "instruction_following"},
                     {"instance_id", std::string("inst-") + markers[i]},
                     {"system", "default"},
                     {"rating", ratings[i]}}
                    .dump() +
                "\n";
    }
    write_file(inputs / "gold.jsonl", gold);

    PipelineFiles run_a, run_b;
    std::string error;
    if (!run_pipeline(base / "run-a", inputs, &run_a, &error) ||
        !run_pipeline(base / "run-b", inputs, &run_b, &error)) {
        report("end-to-end-pipeline", false, error.substr(0, 400));
        return;
    }

    bool identical = run_a.records == run_b.records && run_a.retained == run_b.retained &&
                     run_a.rejects == run_b.rejects && run_a.scored == run_b.scored &&
                     run_a.report == run_b.report;
    bool nonempty = !run_a.records.empty() && !run_a.retained.empty() &&
                    !run_a.scored.empty() && !run_a.report.empty();

    bool kendall_ok = false;
    double kendall_value = 0.0;
    std::size_t retained_lines =
        static_cast<std::size_t>(std::count(run_a.retained.begin(), run_a.retained.end(), '\n'));
    try {
        json report_json = json::parse(run_a.report);
        kendall_value =
            report_json["per_task"]["instruction_following"]["kendall"].get<double>();
        kendall_ok = std::fabs(kendall_value - 2.0 / 3.0) < 1e-9;
    } catch (const std::exception& e) {
        error = e.what();
    }
    double ms = elapsed_ms(start);
    std::ostringstream detail;
    detail << "two runs byte-identical=" << (identical ? "yes" : "no") << ", retained "
           << retained_lines << "/4, kendall " << kendall_value << ", " << ms << " ms";
    report("end-to-end-pipeline",
           identical && nonempty && retained_lines == 4 && kendall_ok && ms < 10000.0,
           detail.str());
}

// --- criterion 7: sanity-report arithmetic --------------------------------

void sanity_arithmetic() {
    std::map<std::string, std::vector<double>> scores;
    scores["task"] = {0.0, -1.0, -3.0, -6.0};
    auto sanity = metaeval::reference_sanity(scores);
    std::string markdown = metaeval::to_markdown(sanity);
    bool pass = std::fabs(sanity.per_task.at("task").frac_zero - 25.0) < 1e-12 &&
                std::fabs(sanity.per_task.at("task").frac_above_minus2 - 50.0) < 1e-12 &&
                markdown.find("= 0") != std::string::npos &&
                markdown.find("> -2") != std::string::npos &&
                markdown.find("25.00") != std::string::npos &&
                markdown.find("50.00") != std::string::npos;
    std::ostringstream detail;
    detail << "frac_zero " << sanity.per_task.at("task").frac_zero << ", frac_above "
           << sanity.per_task.at("task").frac_above_minus2 << ", both columns present";
    report("sanity-report-arithmetic", pass, detail.str());
}

// --- criterion 8: template registry ---------------------------------------

void template_registry() {
    bool pass = true;
    std::string detail = "12 templates rendered clean";
    try {
        auto registry = templates::TemplateRegistry::load(templates::default_template_dir());
        for (templates::TemplateId id : templates::kAllTemplateIds) {
            templates::TemplateContext ctx;
            for (const auto& name : registry.placeholders(id)) ctx[name] = "value";
            std::string rendered = registry.render(id, ctx);
            if (rendered.find("${") != std::string::npos) {
                pass = false;
                detail = "residual placeholder in " + std::string(templates::id_name(id));
            }
        }
        std::string json_format = registry.render(
            templates::TemplateId::JsonFormat, {{"aspects_list", "Accuracy, Fluency"}});
        if (json_format.find("Choose only one from") == std::string::npos ||
            json_format.find(R"({"errors": {}})") == std::string::npos) {
            pass = false;
            detail = "json_format missing verbatim fragments";
        }
    } catch (const std::exception& e) {
        pass = false;
        detail = std::string("exception: ") + e.what();
    }
    report("template-registry", pass, detail);
}

// --- criterion 9: client retry contract -----------------------------------

void client_retry_contract() {
    bool pass = true;
    std::string detail;
    try {
        client::EndpointConfig config;
        config.base_url = "mock:unused";
        config.api_key_env = "";
        config.max_retries = 3;
        config.backoff_base_ms = 4;

        auto flaky = std::make_shared<client::MockTransport>(std::vector<client::MockEntry>{
            {std::nullopt, {}, "", 503, 2, 0},
            {std::nullopt, {}, "third time lucky", 200, -1, 0},
        });
        client::ChatClient chat(flaky, config);
        chat.set_sleeper([](int) {});
        std::vector<client::Attempt> attempts;
        client::GenerationParams params;
        params.seed = 1;
        std::string reply = chat.complete({{client::Role::User, "go"}}, params, &attempts);
        bool monotone = true;
        for (std::size_t i = 1; i < attempts.size(); ++i)
            monotone = monotone && attempts[i].base_delay_ms >= attempts[i - 1].base_delay_ms;
        if (reply != "third time lucky" || attempts.size() != 3 || !monotone) {
            pass = false;
            detail = "retry sequence wrong (attempts " + std::to_string(attempts.size()) + ")";
        }

        auto denied = std::make_shared<client::MockTransport>(
            std::vector<client::MockEntry>{{std::nullopt, {}, "", 401, -1, 0}});
        client::ChatClient auth_chat(denied, config);
        std::vector<client::Attempt> auth_attempts;
        bool auth_threw = false;
        try {
            auth_chat.complete({{client::Role::User, "go"}}, params, &auth_attempts);
        } catch (const client::AuthError&) {
            auth_threw = true;
        }
        if (!auth_threw || auth_attempts.size() != 1) {
            pass = false;
            detail += " 401 handling wrong (attempts " +
                      std::to_string(auth_attempts.size()) + ")";
        }
        if (pass)
            detail = "success on attempt 3 with non-decreasing backoff; 401 aborted after 1";
    } catch (const std::exception& e) {
        pass = false;
        detail = std::string("exception: ") + e.what();
    }
    report("client-retry-contract", pass, detail);
}

}  // namespace

int main() {
    correlation_oracle_suite();
    kendall_spot_values();
    case_study_fixture();
    json_round_trip();
    planted_violation_filter();
    end_to_end_pipeline();
    sanity_arithmetic();
    template_registry();
    client_retry_contract();
    std::cout << (failures == 0 ? "ALL CRITERIA PASSED" : "CRITERIA FAILED") << " ("
              << (9 - failures) << "/9)\n";
    return failures == 0 ? 0 : 1;
}
