#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace phishtriage {

// One leaf MIME part: declared content type (lowercased, no parameters),
// raw content bytes after transfer decoding, and the declared charset.
struct BodyPart {
    std::string content_type;
    std::string content;
    std::string charset;

    bool operator==(const BodyPart&) const = default;
};

// Parsed email before body extraction. Headers keep arrival order;
// lookup is case-insensitive.
struct RawEmail {
    std::string id;
    std::vector<std::pair<std::string, std::string>> headers;
    std::vector<BodyPart> body_parts;

    // First value of the named header, or empty string.
    std::string header(const std::string& name) const;

    bool operator==(const RawEmail&) const = default;
};

// A token with its byte range in the enclosing text (range covers the
// token after punctuation stripping, so text.substr(start, end-start) == text_of_token).
struct Token {
    std::string text;
    std::size_t char_start = 0;
    std::size_t char_end = 0;

    bool operator==(const Token&) const = default;
};

struct Sentence {
    std::size_t index = 0;
    std::size_t char_start = 0;  // byte offsets into the enclosing text
    std::size_t char_end = 0;
    std::string text;  // verbatim slice [char_start, char_end)
    std::vector<Token> tokens;

    bool operator==(const Sentence&) const = default;
};

// Cleaned plain text of one email plus its sentence/token structure.
struct EmailBody {
    std::string text;
    std::vector<Sentence> sentences;
    std::size_t total_tokens = 0;

    bool operator==(const EmailBody&) const = default;
};

}  // namespace phishtriage
