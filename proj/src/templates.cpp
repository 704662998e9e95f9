#include "tigereval/templates.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tigereval/text.hpp"

namespace tigereval::templates {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr std::array<const char*, 12> kIdNames = {
    "tigerscore_inference", "gen_summ",
    "gen_trans",            "gen_d2t",
    "gen_mathqa",           "gen_lfqa",
    "gen_instruct",         "json_format",
    "synthetic_error",      "synthetic_free_aspect",
    "reasonableness_check", "hallucination_check",
};

std::size_t index_of(TemplateId id) { return static_cast<std::size_t>(id); }

bool is_name_char(char c) { return (c >= 'a' && c <= 'z') || c == '_'; }

}  // namespace

std::string_view id_name(TemplateId id) { return kIdNames[index_of(id)]; }

std::optional<TemplateId> id_from_name(std::string_view name) {
    for (std::size_t i = 0; i < kIdNames.size(); ++i) {
        if (name == kIdNames[i]) return kAllTemplateIds[i];
    }
    return std::nullopt;
}

MissingPlaceholder::MissingPlaceholder(std::vector<std::string> names)
    : core::Error([&names] {
          std::string msg = "missing placeholder binding(s):";
          for (const auto& n : names) msg += " " + n;
          return msg;
      }()),
      names_(std::move(names)) {}

std::vector<std::string> extract_placeholders(std::string_view text) {
    std::vector<std::string> names;
    std::size_t i = 0;
    while (i + 1 < text.size()) {
        if (text[i] != '$' || text[i + 1] != '{') {
            ++i;
            continue;
        }
        std::size_t j = i + 2;
        while (j < text.size() && is_name_char(text[j])) ++j;
        if (j > i + 2 && j < text.size() && text[j] == '}') {
            std::string name{text.substr(i + 2, j - i - 2)};
            if (std::find(names.begin(), names.end(), name) == names.end())
                names.push_back(std::move(name));
            i = j + 1;
        } else {
            ++i;
        }
    }
    return names;
}

TemplateRegistry TemplateRegistry::load(const std::filesystem::path& dir) {
    TemplateRegistry registry;
    registry.dir_ = dir;
    for (std::size_t i = 0; i < kIdNames.size(); ++i) {
        std::filesystem::path file = dir / (std::string(kIdNames[i]) + ".txt");
        std::ifstream in(file, std::ios::binary);
        if (!in)
            throw RegistryError("cannot read template file: " + file.string());
        std::ostringstream buf;
        buf << in.rdbuf();
        registry.texts_[i] = buf.str();
        registry.placeholders_[i] = extract_placeholders(registry.texts_[i]);
    }
    return registry;
}

const std::string& TemplateRegistry::text(TemplateId id) const {
    return texts_[index_of(id)];
}

const std::vector<std::string>& TemplateRegistry::placeholders(TemplateId id) const {
    return placeholders_[index_of(id)];
}

std::string TemplateRegistry::render(TemplateId id, const TemplateContext& ctx,
                                     std::vector<std::string>* warnings,
                                     bool strict_unknown) const {
    const std::string& tmpl = texts_[index_of(id)];
    const auto& known = placeholders_[index_of(id)];

    for (const auto& [name, value] : ctx) {
        (void)value;
        if (std::find(known.begin(), known.end(), name) == known.end()) {
            std::string msg = "binding '" + name + "' has no placeholder in template '" +
                              std::string(id_name(id)) + "'";
            if (strict_unknown) throw core::Error("unknown placeholder: " + msg);
            if (warnings != nullptr) warnings->push_back(std::move(msg));
        }
    }

    std::string out;
    out.reserve(tmpl.size());
    std::vector<std::string> missing;
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (i + 1 < tmpl.size() && tmpl[i] == '$' && tmpl[i + 1] == '{') {
            std::size_t j = i + 2;
            while (j < tmpl.size() && is_name_char(tmpl[j])) ++j;
            if (j > i + 2 && j < tmpl.size() && tmpl[j] == '}') {
                std::string name{tmpl.substr(i + 2, j - i - 2)};
                auto it = ctx.find(name);
                if (it == ctx.end()) {
                    if (std::find(missing.begin(), missing.end(), name) == missing.end())
                        missing.push_back(name);
                } else {
                    out += it->second;
                }
                i = j + 1;
                continue;
            }
        }
        out.push_back(tmpl[i++]);
    }
    if (!missing.empty()) throw MissingPlaceholder(std::move(missing));
    return out;
}

std::map<std::string, TemplateRegistry::ManifestEntry> TemplateRegistry::manifest() const {
    std::map<std::string, ManifestEntry> out;
    for (std::size_t i = 0; i < kIdNames.size(); ++i) {
        out[kIdNames[i]] = ManifestEntry{placeholders_[i], text::fnv1a64_hex(texts_[i])};
    }
    return out;
}

std::vector<std::string> TemplateRegistry::verify_against(
    const std::filesystem::path& manifest_file) const {
    std::ifstream in(manifest_file);
    if (!in)
        throw RegistryError("cannot read manifest: " + manifest_file.string());
    json stored;
    try {
        in >> stored;
    } catch (const json::exception& e) {
        throw RegistryError("malformed manifest: " + std::string(e.what()));
    }

    std::vector<std::string> problems;
    auto current = manifest();
    for (const auto& [name, entry] : current) {
        if (!stored.contains(name)) {
            problems.push_back("template '" + name + "' missing from manifest");
            continue;
        }
        const json& m = stored.at(name);
        std::vector<std::string> manifest_placeholders =
            m.value("placeholders", std::vector<std::string>{});
        if (manifest_placeholders != entry.placeholders) {
            problems.push_back("template '" + name + "': placeholder set drifted from manifest");
        }
        std::string manifest_hash = m.value("content_hash", std::string{});
        if (manifest_hash != entry.content_hash) {
            problems.push_back("template '" + name + "': content hash mismatch (file " +
                               entry.content_hash + ", manifest " + manifest_hash + ")");
        }
    }
    for (const auto& item : stored.items()) {
        if (current.find(item.key()) == current.end())
            problems.push_back("manifest lists unknown template '" + item.key() + "'");
    }
    return problems;
}

void TemplateRegistry::write_manifest(const std::filesystem::path& manifest_file) const {
    ordered_json out;
    for (const auto& [name, entry] : manifest()) {
        ordered_json e;
        e["placeholders"] = entry.placeholders;
        e["content_hash"] = entry.content_hash;
        out[name] = std::move(e);
    }
    std::ofstream f(manifest_file, std::ios::binary);
    if (!f)
        throw RegistryError("cannot write manifest: " + manifest_file.string());
    f << out.dump(2) << "\n";
}

std::string aspects_block(const core::AspectTaxonomy& taxonomy, AspectStyle style) {
    std::string out;
    bool first = true;
    for (const auto& aspect : taxonomy.aspects()) {
        if (style == AspectStyle::NamesOnly) {
            if (!first) out += ", ";
            out += aspect.name;
        } else {
            if (!first) out += "\n";
            out += aspect.name + ": " + aspect.definition;
        }
        first = false;
    }
    return out;
}

std::filesystem::path default_template_dir() {
    if (const char* env = std::getenv("TIGEREVAL_TEMPLATES"); env != nullptr && *env != '\0')
        return env;
#ifdef TIGEREVAL_DEFAULT_TEMPLATE_DIR
    return TIGEREVAL_DEFAULT_TEMPLATE_DIR;
#else
    return "templates";
#endif
}

}  // namespace tigereval::templates
