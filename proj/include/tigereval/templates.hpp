// Registry and renderer for the prompt templates shipped as data files.
// Placeholders use the ${name} syntax with names in [a-z_]+.
#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tigereval/core.hpp"

namespace tigereval::templates {

enum class TemplateId {
    TigerscoreInference,
    GenSumm,
    GenTrans,
    GenD2T,
    GenMathQA,
    GenLFQA,
    GenInstruct,
    JsonFormat,
    SyntheticError,
    SyntheticFreeAspect,
    ReasonablenessCheck,
    HallucinationCheck,
};

constexpr std::array<TemplateId, 12> kAllTemplateIds = {
    TemplateId::TigerscoreInference, TemplateId::GenSumm,
    TemplateId::GenTrans,            TemplateId::GenD2T,
    TemplateId::GenMathQA,           TemplateId::GenLFQA,
    TemplateId::GenInstruct,         TemplateId::JsonFormat,
    TemplateId::SyntheticError,      TemplateId::SyntheticFreeAspect,
    TemplateId::ReasonablenessCheck, TemplateId::HallucinationCheck,
};

std::string_view id_name(TemplateId id);  // snake_case, also the file stem
std::optional<TemplateId> id_from_name(std::string_view name);

using TemplateContext = std::map<std::string, std::string>;

class MissingPlaceholder : public core::Error {
public:
    explicit MissingPlaceholder(std::vector<std::string> names);
    const std::vector<std::string>& names() const { return names_; }

private:
    std::vector<std::string> names_;
};

class RegistryError : public core::Error {
public:
    using core::Error::Error;
};

class TemplateRegistry {
public:
    /// Loads all twelve template files (<snake_case_id>.txt) from `dir`.
    /// Throws RegistryError if any file is missing or unreadable.
    static TemplateRegistry load(const std::filesystem::path& dir);

    const std::string& text(TemplateId id) const;

    /// Placeholder names in order of first occurrence, deduplicated.
    const std::vector<std::string>& placeholders(TemplateId id) const;

    /// Substitutes every ${name}. Throws MissingPlaceholder listing all
    /// unbound names. Bindings for names absent from the template produce
    /// warnings (or throw when `strict_unknown`).
    std::string render(TemplateId id, const TemplateContext& ctx,
                       std::vector<std::string>* warnings = nullptr,
                       bool strict_unknown = false) const;

    /// Placeholder list plus content hash per template, as stored in the
    /// manifest file.
    struct ManifestEntry {
        std::vector<std::string> placeholders;
        std::string content_hash;  // fnv1a64 of the raw file bytes, hex
    };
    std::map<std::string, ManifestEntry> manifest() const;

    /// Compares the loaded templates against a manifest JSON file; returns
    /// one message per discrepancy (empty means clean).
    std::vector<std::string> verify_against(const std::filesystem::path& manifest_file) const;
    void write_manifest(const std::filesystem::path& manifest_file) const;

    const std::filesystem::path& dir() const { return dir_; }

private:
    TemplateRegistry() = default;
    std::filesystem::path dir_;
    std::array<std::string, 12> texts_;
    std::array<std::vector<std::string>, 12> placeholders_;
};

/// Extracts ${name} placeholders from arbitrary template text.
std::vector<std::string> extract_placeholders(std::string_view text);

enum class AspectStyle { NamesOnly, NamesWithDefinitions };

/// NamesOnly: "A, B, C". NamesWithDefinitions: one "Name: definition" line
/// per aspect, in taxonomy order.
std::string aspects_block(const core::AspectTaxonomy& taxonomy, AspectStyle style);

/// $TIGEREVAL_TEMPLATES when set, else the directory compiled in at build
/// time.
std::filesystem::path default_template_dir();

}  // namespace tigereval::templates
