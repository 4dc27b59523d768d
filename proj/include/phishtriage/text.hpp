#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "phishtriage/email.hpp"

namespace phishtriage {

// Removes markup from HTML: tags dropped, script/style/head contents
// removed entirely, character entities decoded, whitespace collapsed
// (runs containing a blank line become "\n\n", runs with a newline "\n",
// anything else a single space). Block-level tag boundaries turn into
// paragraph breaks so they stay sentence-safe. Applied to a fixed point,
// so the result is stable under re-application.
std::string strip_html(std::string_view html);

// Whitespace-split tokens with leading/trailing punctuation stripped;
// tokens reduced to empty are dropped. Offsets are byte offsets into
// `text` shifted by `base_offset`.
std::vector<Token> tokenize(std::string_view text, std::size_t base_offset = 0);

// Deterministic rule-based sentence splitting: after '.', '!' or '?'
// followed by whitespace and an ASCII uppercase letter or digit (with an
// abbreviation guard), and at paragraph breaks (a whitespace run holding
// two or more newlines). Token-free chunks merge into a neighbour so the
// gaps between sentences are whitespace-only. Sentences that would still
// have zero tokens are not retained.
std::vector<Sentence> segment_sentences(std::string_view text);

// Builds an EmailBody (sentences + token totals) over already-clean text.
EmailBody make_body(std::string text);

namespace utf8 {

// Replaces invalid UTF-8 sequences with U+FFFD.
std::string sanitize(std::string_view bytes);

// Decodes one code point starting at i; advances i. Invalid bytes decode
// as U+FFFD and advance by one.
char32_t decode(std::string_view s, std::size_t& i);

void append(std::string& out, char32_t cp);

bool is_space(char32_t cp);

}  // namespace utf8

// ASCII lowercase (non-ASCII bytes pass through).
std::string ascii_lower(std::string_view s);

}  // namespace phishtriage
