#ifndef REFNEED_COMMON_LANG_CONFIG_H_
#define REFNEED_COMMON_LANG_CONFIG_H_

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace refneed {

enum class LengthUnit { kWords, kChars };

// Settings for one wiki language edition. Template names are stored in
// canonical form (see canonical_template_name), section titles and
// abbreviations lowercased.
struct LanguageSettings {
  std::string code;
  std::set<std::string> featured_templates;
  std::set<std::string> excluded_sections;
  std::set<std::string> citation_templates;
  std::vector<std::string> file_prefixes;      // lowercased
  std::vector<std::string> category_prefixes;  // lowercased
  std::set<std::string> abbreviations;
  std::u32string extra_terminators;
  bool numeric_ordinals = false;
  LengthUnit length_unit = LengthUnit::kWords;

  std::string wiki_db() const { return code + "wiki"; }
};

// Language settings keyed by wiki code. The file format is a JSON object
// mapping each code to an object with the keys featured_templates,
// excluded_sections, citation_templates (required) and file_prefixes,
// category_prefixes, abbreviations, extra_terminators, numeric_ordinals,
// length_unit ("words" | "chars") (optional). Keys starting with "_" are
// ignored.
class LangConfig {
 public:
  static LangConfig from_json(std::string_view text);
  static LangConfig load(const std::filesystem::path& path);

  // Settings for the ten evaluation languages, compiled in from
  // config/languages.json.
  static const LangConfig& defaults();

  // Throws UnknownLanguage.
  const LanguageSettings& at(std::string_view lang) const;
  bool supports(std::string_view lang) const;
  std::vector<std::string> languages() const;

 private:
  std::map<std::string, LanguageSettings, std::less<>> langs_;
};

// MediaWiki template-name normalization: underscores become spaces,
// whitespace is collapsed and trimmed, an optional "Template:" prefix is
// dropped and the first letter is uppercased.
std::string canonical_template_name(std::string_view name);

// Section-title normalization: whitespace collapsed, trimmed, lowercased.
std::string normalize_section_title(std::string_view title);

}  // namespace refneed

#endif  // REFNEED_COMMON_LANG_CONFIG_H_
