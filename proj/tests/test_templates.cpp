#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "tigereval/templates.hpp"

using namespace tigereval;

namespace {

const templates::TemplateRegistry& registry() {
    static templates::TemplateRegistry instance =
        templates::TemplateRegistry::load(templates::default_template_dir());
    return instance;
}

templates::TemplateContext full_context(templates::TemplateId id) {
    templates::TemplateContext ctx;
    for (const auto& name : registry().placeholders(id)) ctx[name] = "<" + name + ">";
    return ctx;
}

}  // namespace

TEST_CASE("registry loads all twelve templates") {
    for (templates::TemplateId id : templates::kAllTemplateIds) {
        CHECK_FALSE(registry().text(id).empty());
        CHECK_FALSE(registry().placeholders(id).empty());
    }
    CHECK(templates::id_from_name("tigerscore_inference") ==
          templates::TemplateId::TigerscoreInference);
    CHECK_FALSE(templates::id_from_name("bogus").has_value());
}

TEST_CASE("rendering with a complete context leaves no placeholder syntax") {
    for (templates::TemplateId id : templates::kAllTemplateIds) {
        std::string rendered = registry().render(id, full_context(id));
        CHECK(rendered.find("${") == std::string::npos);
    }
}

TEST_CASE("inference template embeds the hypothesis after its banner") {
    templates::TemplateContext ctx = {
        {"generation_instruction", "Answer the question."},
        {"input_context", "When did X happen?"},
        {"hypothesis_output", "X happened in 1903."},
    };
    std::string rendered =
        registry().render(templates::TemplateId::TigerscoreInference, ctx);
    auto banner = rendered.find("Model-generated Output:");
    auto hypothesis = rendered.find("X happened in 1903.");
    REQUIRE(banner != std::string::npos);
    REQUIRE(hypothesis != std::string::npos);
    CHECK(banner < hypothesis);
}

TEST_CASE("missing bindings raise MissingPlaceholder with all unbound names") {
    templates::TemplateContext ctx = {
        {"generation_instruction", "Answer the question."},
        {"input_context", "When did X happen?"},
    };
    try {
        registry().render(templates::TemplateId::TigerscoreInference, ctx);
        CHECK(false);
    } catch (const templates::MissingPlaceholder& e) {
        REQUIRE(e.names().size() == 1);
        CHECK(e.names()[0] == "hypothesis_output");
    }
}

TEST_CASE("unknown bindings warn by default and throw in strict mode") {
    templates::TemplateContext ctx = full_context(templates::TemplateId::JsonFormat);
    ctx["unrelated"] = "x";
    std::vector<std::string> warnings;
    registry().render(templates::TemplateId::JsonFormat, ctx, &warnings);
    REQUIRE(warnings.size() == 1);
    CHECK_THROWS_AS(registry().render(templates::TemplateId::JsonFormat, ctx, nullptr, true),
                    core::Error);
}

TEST_CASE("json format template carries the published fragments") {
    templates::TemplateContext ctx = {{"aspects_list", "Accuracy, Fluency"}};
    std::string rendered = registry().render(templates::TemplateId::JsonFormat, ctx);
    CHECK(rendered.find("Choose only one from Accuracy, Fluency") != std::string::npos);
    CHECK(rendered.find(R"({"errors": {}})") != std::string::npos);
}

TEST_CASE("free-aspect template interpolates the error budget") {
    templates::TemplateContext ctx = {
        {"instruction", "Write a poem."},
        {"input", ""},
        {"output", "Roses are red."},
        {"num_errors", "3"},
    };
    std::string rendered =
        registry().render(templates::TemplateId::SyntheticFreeAspect, ctx);
    CHECK(rendered.find("up to 3 errors") != std::string::npos);
}

TEST_CASE("rendering distinct hypotheses yields distinct outputs") {
    templates::TemplateContext a = full_context(templates::TemplateId::TigerscoreInference);
    templates::TemplateContext b = a;
    b["hypothesis_output"] = "something else entirely";
    CHECK(registry().render(templates::TemplateId::TigerscoreInference, a) !=
          registry().render(templates::TemplateId::TigerscoreInference, b));
}

TEST_CASE("placeholder extraction matches the checked-in manifest") {
    auto manifest_path = templates::default_template_dir() / "manifest.json";
    auto problems = registry().verify_against(manifest_path);
    for (const auto& problem : problems) MESSAGE(problem);
    CHECK(problems.empty());
}

TEST_CASE("tampered template files fail verification") {
    namespace fs = std::filesystem;
    fs::path tmp = fs::temp_directory_path() / "tigereval-tampered-templates";
    fs::remove_all(tmp);
    fs::copy(templates::default_template_dir(), tmp);
    {
        std::ofstream out(tmp / "json_format.txt", std::ios::app);
        out << "\nExtra tampered line ${rogue_placeholder}\n";
    }
    auto tampered = templates::TemplateRegistry::load(tmp);
    auto problems = tampered.verify_against(tmp / "manifest.json");
    CHECK_FALSE(problems.empty());
    fs::remove_all(tmp);
}

TEST_CASE("aspects_block renders both styles") {
    auto instruct = core::builtin_taxonomy(core::BuiltinTask::InstructionFollowing);
    CHECK(templates::aspects_block(instruct, templates::AspectStyle::NamesOnly) ==
          "Comprehension, Accuracy, Informativeness, Coherence");

    auto translation = core::builtin_taxonomy(core::BuiltinTask::Translation);
    std::string block =
        templates::aspects_block(translation, templates::AspectStyle::NamesWithDefinitions);
    CHECK(block.rfind("Accuracy:", 0) == 0);
    CHECK(std::count(block.begin(), block.end(), '\n') == 3);  // 4 lines

    core::AspectTaxonomy solo(core::TaskKind::custom("x"), {{"Only", "the one"}});
    CHECK(templates::aspects_block(solo, templates::AspectStyle::NamesWithDefinitions) ==
          "Only: the one");
}
