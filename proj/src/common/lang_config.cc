#include "refneed/common/lang_config.h"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "refneed/common/errors.h"
#include "refneed/common/unicode.h"

namespace refneed {

// Defined in the generated default_lang_config.cc.
extern const char* const kDefaultLangConfigJson;

namespace {

using nlohmann::json;

std::vector<std::string> string_list(const json& obj, const std::string& lang,
                                     const char* key, bool required) {
  if (!obj.contains(key)) {
    if (required) {
      throw ConfigError("language '" + lang + "' is missing '" + key + "'");
    }
    return {};
  }
  const json& value = obj.at(key);
  if (!value.is_array()) {
    throw ConfigError("language '" + lang + "': '" + key +
                      "' must be a list of strings");
  }
  std::vector<std::string> out;
  for (const json& item : value) {
    if (!item.is_string()) {
      throw ConfigError("language '" + lang + "': '" + key +
                        "' must be a list of strings");
    }
    out.push_back(item.get<std::string>());
  }
  return out;
}

}  // namespace

std::string canonical_template_name(std::string_view name) {
  std::string spaced(name);
  for (char& c : spaced) {
    if (c == '_') c = ' ';
  }
  std::string collapsed = unicode::collapse_whitespace(spaced);
  constexpr std::string_view kPrefix = "template:";
  if (collapsed.size() >= kPrefix.size()) {
    std::string head = unicode::to_lower(collapsed.substr(0, kPrefix.size()));
    if (head == kPrefix) {
      collapsed = std::string(unicode::trim(collapsed.substr(kPrefix.size())));
    }
  }
  if (collapsed.empty()) return collapsed;
  std::size_t pos = 0;
  const char32_t first = unicode::decode(collapsed, pos);
  std::string out;
  unicode::append_utf8(out, unicode::to_upper_simple(first));
  out.append(collapsed, pos);
  return out;
}

std::string normalize_section_title(std::string_view title) {
  return unicode::to_lower(unicode::collapse_whitespace(title));
}

LangConfig LangConfig::from_json(std::string_view text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("language config is not valid JSON: ") +
                      e.what());
  }
  if (!root.is_object()) {
    throw ConfigError("language config must be a JSON object");
  }
  LangConfig config;
  for (const auto& [code, obj] : root.items()) {
    if (!code.empty() && code.front() == '_') continue;
    if (code.empty() || !obj.is_object()) {
      throw ConfigError("language entry '" + code + "' must be an object");
    }
    LanguageSettings s;
    s.code = code;
    for (const auto& t : string_list(obj, code, "featured_templates", true)) {
      s.featured_templates.insert(canonical_template_name(t));
    }
    for (const auto& t : string_list(obj, code, "excluded_sections", true)) {
      s.excluded_sections.insert(normalize_section_title(t));
    }
    for (const auto& t : string_list(obj, code, "citation_templates", true)) {
      s.citation_templates.insert(canonical_template_name(t));
    }
    for (const auto& p : string_list(obj, code, "file_prefixes", false)) {
      s.file_prefixes.push_back(unicode::to_lower(p));
    }
    for (const auto& p : string_list(obj, code, "category_prefixes", false)) {
      s.category_prefixes.push_back(unicode::to_lower(p));
    }
    // Cross-wiki prefixes are valid everywhere.
    for (const char* p : {"file", "image"}) s.file_prefixes.emplace_back(p);
    s.category_prefixes.emplace_back("category");
    for (const auto& a : string_list(obj, code, "abbreviations", false)) {
      s.abbreviations.insert(unicode::to_lower(a));
    }
    if (obj.contains("extra_terminators")) {
      if (!obj.at("extra_terminators").is_string()) {
        throw ConfigError("language '" + code +
                          "': extra_terminators must be a string");
      }
      s.extra_terminators =
          unicode::to_u32(obj.at("extra_terminators").get<std::string>());
    }
    if (obj.contains("numeric_ordinals")) {
      s.numeric_ordinals = obj.at("numeric_ordinals").get<bool>();
    }
    const std::string unit = obj.value("length_unit", std::string("words"));
    if (unit == "words") {
      s.length_unit = LengthUnit::kWords;
    } else if (unit == "chars") {
      s.length_unit = LengthUnit::kChars;
    } else {
      throw ConfigError("language '" + code + "': unknown length_unit '" +
                        unit + "'");
    }
    config.langs_.emplace(code, std::move(s));
  }
  if (config.langs_.empty()) {
    throw ConfigError("language config defines no languages");
  }
  return config;
}

LangConfig LangConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open language config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_json(buffer.str());
}

const LangConfig& LangConfig::defaults() {
  static const LangConfig config = from_json(kDefaultLangConfigJson);
  return config;
}

const LanguageSettings& LangConfig::at(std::string_view lang) const {
  auto it = langs_.find(lang);
  if (it == langs_.end()) {
    throw UnknownLanguage("unsupported language '" + std::string(lang) + "'");
  }
  return it->second;
}

bool LangConfig::supports(std::string_view lang) const {
  return langs_.find(lang) != langs_.end();
}

std::vector<std::string> LangConfig::languages() const {
  std::vector<std::string> out;
  for (const auto& [code, _] : langs_) out.push_back(code);
  return out;
}

}  // namespace refneed
