#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "tigereval/jsonl.hpp"

using namespace tigereval;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
    fs::path dir = fs::temp_directory_path() / "tigereval-jsonl-tests";
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("instance schema round-trips") {
    core::EvalInstance instance;
    instance.id = "i-1";
    instance.task = core::BuiltinTask::Translation;
    instance.instruction = "Translate to English.";
    instance.input = "Bonjour";
    instance.hypothesis = "Hello";
    instance.reference = "Hello there";
    instance.system = "sys-a";

    auto j = jsonl::instance_to_json(instance);
    auto back = jsonl::instance_from_json(j);
    CHECK(back.id == instance.id);
    CHECK(back.task == instance.task);
    CHECK(back.instruction == instance.instruction);
    CHECK(back.input == instance.input);
    CHECK(back.hypothesis == instance.hypothesis);
    CHECK(back.reference == instance.reference);
    CHECK(back.system == instance.system);

    // optional fields are omitted, not nulled
    instance.reference.reset();
    instance.system.reset();
    auto j2 = jsonl::instance_to_json(instance);
    CHECK_FALSE(j2.contains("reference"));
    CHECK_FALSE(j2.contains("system"));
}

TEST_CASE("instance parsing enforces invariants") {
    jsonl::json j = {{"id", "x"},
                     {"task", "mathqa"},
                     {"instruction", "Solve."},
                     {"input", ""},
                     {"hypothesis", ""}};
    CHECK_THROWS_AS(jsonl::instance_from_json(j), core::Error);
    CHECK_NOTHROW(jsonl::instance_from_json(j, /*require_hypothesis=*/false));
}

TEST_CASE("scored row schema round-trips, including null scores") {
    jsonl::ScoredRow row;
    row.id = "i-2";
    row.system = "sys";
    row.score = -3.5;
    core::StructuredError err;
    err.location = "bad span";
    err.aspect = "Accuracy";
    err.explanation = "why";
    err.severity = core::Severity::Minor;
    err.reduction = 3.5;
    row.errors.push_back(err);
    row.raw_text = "raw reply";

    auto j = jsonl::scored_to_json(row);
    auto back = jsonl::scored_from_json(j);
    CHECK(back.id == row.id);
    REQUIRE(back.score.has_value());
    CHECK(*back.score == -3.5);
    REQUIRE(back.errors.size() == 1);
    CHECK(back.errors[0].severity == core::Severity::Minor);
    CHECK(back.errors[0].reduction == 3.5);

    jsonl::ScoredRow failed;
    failed.id = "i-3";
    failed.raw_text = "gibberish";
    auto jf = jsonl::scored_to_json(failed);
    CHECK(jf["score"].is_null());
    auto back_failed = jsonl::scored_from_json(jf);
    CHECK_FALSE(back_failed.score.has_value());
}

TEST_CASE("curation record schema round-trips") {
    curate::CurationRecord record;
    record.instance.id = "r-1";
    record.instance.task = core::BuiltinTask::Summarization;
    record.instance.instruction = "Summarize.";
    record.instance.hypothesis = "A summary with a flaw.";
    record.instance.reference = "A reference.";
    record.channel = curate::Channel::Synthetic;
    core::StructuredError err;
    err.location = "a flaw";
    err.aspect = "Relevance";
    err.explanation = "why";
    err.severity = core::Severity::Major;
    err.reduction = 2.0;
    record.analysis.errors.push_back(err);
    record.raw_model_text = "Error location 1: a flaw\nError aspect 1: Relevance\n"
                            "Explanation 1: why\nSeverity 1: Major\nScore reduction 1: 2";
    record.provenance = {{"model", "m"}, {"template", "synthetic_error"}};

    auto j = jsonl::record_to_json(record);
    auto back = jsonl::record_from_json(j);
    CHECK(back.instance.id == record.instance.id);
    CHECK(back.channel == curate::Channel::Synthetic);
    REQUIRE(back.analysis.errors.size() == 1);
    CHECK(back.analysis.errors[0].location == "a flaw");
    CHECK(back.provenance.at("model") == "m");
    CHECK(back.raw_model_text == record.raw_model_text);
}

TEST_CASE("records serialize stably for byte comparison") {
    curate::CurationRecord record;
    record.instance.id = "stable";
    record.instance.task = core::BuiltinTask::MathQA;
    record.instance.instruction = "Solve.";
    record.instance.hypothesis = "42";
    record.channel = curate::Channel::RealWorld;
    std::string once = jsonl::record_to_json(record).dump();
    std::string twice = jsonl::record_to_json(record).dump();
    CHECK(once == twice);
}

TEST_CASE("build rejects serialize with a reason field") {
    curate::BuildReject reject;
    reject.instance_id = "r1";
    reject.reason = "json_anomaly";
    reject.raw_text = "garbled reply";
    reject.message = "missing marker";
    auto j = jsonl::reject_to_json(reject);
    CHECK(j["id"] == "r1");
    CHECK(j["reason"] == "json_anomaly");
    CHECK(j["raw_text"] == "garbled reply");
}

TEST_CASE("gold rows parse from jsonl and csv alike") {
    auto dir = scratch_dir();
    {
        std::ofstream out(dir / "gold.jsonl");
        out << R"({"task": "translation", "instance_id": "i1", "system": "s1", "rating": 3.5})"
            << "\n";
        out << R"({"task": "translation", "instance_id": "i2", "rating": 1})" << "\n";
    }
    auto rows = jsonl::read_gold(dir / "gold.jsonl");
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].rating == 3.5);
    CHECK(rows[1].system == "default");

    {
        std::ofstream out(dir / "gold.csv");
        out << "task,instance_id,system,rating\n";
        out << "translation,i1,s1,3.5\n";
        out << R"(translation,"i,2",s2,-1.25)" << "\n";
    }
    auto csv_rows = jsonl::read_gold(dir / "gold.csv");
    REQUIRE(csv_rows.size() == 2);
    CHECK(csv_rows[0].rating == 3.5);
    CHECK(csv_rows[1].instance_id == "i,2");
    CHECK(csv_rows[1].rating == -1.25);
}

TEST_CASE("read_jsonl reports malformed lines") {
    auto dir = scratch_dir();
    {
        std::ofstream out(dir / "bad.jsonl");
        out << R"({"ok": 1})" << "\n";
        out << "{{{{\n";
        out << R"({"ok": 2})" << "\n";
    }
    std::size_t rows = 0, bad = 0;
    jsonl::read_jsonl(
        dir / "bad.jsonl", [&](const jsonl::json&, std::size_t) { ++rows; },
        [&](const std::string&, std::size_t) {
            ++bad;
            return true;
        });
    CHECK(rows == 2);
    CHECK(bad == 1);

    CHECK_THROWS_AS(
        jsonl::read_jsonl(dir / "bad.jsonl", [](const jsonl::json&, std::size_t) {}),
        core::Error);
}

TEST_CASE("atomic writes produce complete files") {
    auto dir = scratch_dir();
    auto path = dir / "atomic.jsonl";
    jsonl::write_lines_atomic(path, {"{\"a\": 1}", "{\"b\": 2}"});
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "{\"a\": 1}");
    std::getline(in, line);
    CHECK(line == "{\"b\": 2}");
    CHECK_FALSE(fs::exists(dir / "atomic.jsonl.tmp"));
}

TEST_CASE("config files parse dotted keys") {
    auto dir = scratch_dir();
    auto path = dir / "run.conf";
    {
        std::ofstream out(path);
        out << "# comment line\n";
        out << "endpoint.base_url = mock:fixtures.jsonl\n";
        out << "endpoint.model_name = my-model\n";
        out << "endpoint.max_retries = 5\n";
        out << "generation.temperature = 0.7\n";
        out << "generation.seed = 42\n";
        out << "filter.max_output_tokens = 512\n";
        out << "filter.fuzzy_location = true\n";
        out << "task = translation\n";
    }
    auto config = jsonl::load_config(path);
    CHECK(config.endpoint.base_url == "mock:fixtures.jsonl");
    CHECK(config.endpoint.model_name == "my-model");
    CHECK(config.endpoint.max_retries == 5);
    CHECK(config.generation.temperature == 0.7);
    REQUIRE(config.generation.seed.has_value());
    CHECK(*config.generation.seed == 42);
    CHECK(config.filter.max_output_tokens == 512);
    CHECK(config.filter.fuzzy_location);
    REQUIRE(config.task.has_value());
    CHECK(config.task->is_builtin());

    jsonl::RunConfig bad;
    CHECK_THROWS_AS(jsonl::apply_config_line(bad, "nonsense.key", "1"), core::Error);
}

TEST_CASE("every jsonl line is a single valid utf-8 object") {
    std::mt19937 rng(77);
    for (int round = 0; round < 50; ++round) {
        jsonl::ScoredRow row;
        row.id = "id-" + std::to_string(rng());
        row.score = -static_cast<double>(rng() % 100) / 10.0;
        row.raw_text = "text with\nnewline and \"quotes\" and \xe2\x82\xac";
        std::string line = jsonl::scored_to_json(row).dump();
        CHECK(line.find('\n') == std::string::npos);
        auto parsed = jsonl::json::parse(line);
        CHECK(parsed.at("id") == row.id);
    }
}
