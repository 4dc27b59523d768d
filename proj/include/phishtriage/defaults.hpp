#pragma once

#include <string_view>

// Data files from data/ embedded at build time, plus their pinned
// version labels (bumped whenever the files change).
namespace phishtriage::defaults {

inline constexpr std::string_view kStopwordsVersion = "stopwords-v1";
inline constexpr std::string_view kLexiconVersion = "trigger-lexicon-v1";
inline constexpr std::string_view kRulesVersion = "intent-rules-v1";
inline constexpr std::string_view kRegistryVersion = "intent-tags-v1";

std::string_view stopwords_text();
std::string_view trigger_lexicon_tsv();
std::string_view intent_rules_json();
std::string_view intent_tags_json();
std::string_view baseline_json();

}  // namespace phishtriage::defaults
