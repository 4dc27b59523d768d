#include "phishtriage/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <unordered_map>
#include <unordered_set>

namespace phishtriage {

namespace utf8 {

static constexpr char32_t kReplacement = 0xFFFD;

char32_t decode(std::string_view s, std::size_t& i) {
    unsigned char b0 = static_cast<unsigned char>(s[i]);
    if (b0 < 0x80) {
        ++i;
        return b0;
    }
    auto cont = [&](std::size_t k) {
        return i + k < s.size() &&
               (static_cast<unsigned char>(s[i + k]) & 0xC0) == 0x80;
    };
    if ((b0 & 0xE0) == 0xC0 && cont(1)) {
        char32_t cp = (b0 & 0x1Fu) << 6 |
                      (static_cast<unsigned char>(s[i + 1]) & 0x3Fu);
        i += 2;
        return cp < 0x80 ? kReplacement : cp;
    }
    if ((b0 & 0xF0) == 0xE0 && cont(1) && cont(2)) {
        char32_t cp = (b0 & 0x0Fu) << 12 |
                      (static_cast<unsigned char>(s[i + 1]) & 0x3Fu) << 6 |
                      (static_cast<unsigned char>(s[i + 2]) & 0x3Fu);
        i += 3;
        if (cp < 0x800 || (cp >= 0xD800 && cp <= 0xDFFF)) return kReplacement;
        return cp;
    }
    if ((b0 & 0xF8) == 0xF0 && cont(1) && cont(2) && cont(3)) {
        char32_t cp = (b0 & 0x07u) << 18 |
                      (static_cast<unsigned char>(s[i + 1]) & 0x3Fu) << 12 |
                      (static_cast<unsigned char>(s[i + 2]) & 0x3Fu) << 6 |
                      (static_cast<unsigned char>(s[i + 3]) & 0x3Fu);
        i += 4;
        if (cp < 0x10000 || cp > 0x10FFFF) return kReplacement;
        return cp;
    }
    ++i;
    return kReplacement;
}

void append(std::string& out, char32_t cp) {
    if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) cp = kReplacement;
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

std::string sanitize(std::string_view bytes) {
    std::string out;
    out.reserve(bytes.size());
    std::size_t i = 0;
    while (i < bytes.size()) {
        std::size_t before = i;
        char32_t cp = decode(bytes, i);
        if (cp == kReplacement &&
            !(i - before == 3 &&
              bytes.compare(before, 3, "\xEF\xBF\xBD") == 0)) {
            append(out, kReplacement);
        } else {
            out.append(bytes.substr(before, i - before));
        }
    }
    return out;
}

bool is_space(char32_t cp) {
    switch (cp) {
        case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
        case 0x85: case 0xA0: case 0x1680:
        case 0x2028: case 0x2029: case 0x202F: case 0x205F: case 0x3000:
            return true;
        default:
            return cp >= 0x2000 && cp <= 0x200A;
    }
}

}  // namespace utf8

std::string ascii_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

namespace {

bool is_strippable_punct(char32_t cp) {
    if (cp < 0x80) {
        return std::ispunct(static_cast<int>(cp)) != 0;
    }
    switch (cp) {
        case 0xA1: case 0xBF: case 0xAB: case 0xBB: case 0xB7:
        case 0x2018: case 0x2019: case 0x201A: case 0x201C: case 0x201D:
        case 0x201E: case 0x2022: case 0x2026: case 0x2039: case 0x203A:
            return true;
        default:
            return cp >= 0x2010 && cp <= 0x2015;
    }
}

}  // namespace

std::vector<Token> tokenize(std::string_view text, std::size_t base_offset) {
    std::vector<Token> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        std::size_t start = i;
        char32_t cp = utf8::decode(text, i);
        if (utf8::is_space(cp)) continue;

        // Collect codepoint boundaries of one whitespace-delimited word.
        std::vector<std::pair<std::size_t, std::size_t>> cps;  // [start,end) per cp
        std::vector<char32_t> vals;
        cps.emplace_back(start, i);
        vals.push_back(cp);
        while (i < text.size()) {
            std::size_t s = i;
            char32_t c = utf8::decode(text, i);
            if (utf8::is_space(c)) break;
            cps.emplace_back(s, i);
            vals.push_back(c);
        }
        std::size_t lo = 0, hi = cps.size();
        while (lo < hi && is_strippable_punct(vals[lo])) ++lo;
        while (hi > lo && is_strippable_punct(vals[hi - 1])) --hi;
        if (lo < hi) {
            std::size_t s = cps[lo].first;
            std::size_t e = cps[hi - 1].second;
            tokens.push_back(Token{std::string(text.substr(s, e - s)),
                                   base_offset + s, base_offset + e});
        }
    }
    return tokens;
}

// ---------------------------------------------------------------------------
// strip_html
// ---------------------------------------------------------------------------

namespace {

const std::unordered_set<std::string>& block_tags() {
    static const std::unordered_set<std::string> kTags = {
        "address", "article", "aside",   "blockquote", "center",  "dd",
        "div",     "dl",      "dt",      "fieldset",   "figcaption",
        "figure",  "footer",  "form",    "h1",         "h2",      "h3",
        "h4",      "h5",      "h6",      "header",     "hr",      "li",
        "main",    "nav",     "ol",      "p",          "pre",     "section",
        "table",   "tbody",   "td",      "tfoot",      "th",      "thead",
        "tr",      "ul"};
    return kTags;
}

const std::unordered_map<std::string, char32_t>& named_entities() {
    static const std::unordered_map<std::string, char32_t> kEntities = {
        {"amp", '&'},     {"lt", '<'},      {"gt", '>'},
        {"quot", '"'},    {"apos", '\''},   {"nbsp", ' '},
        {"copy", 0xA9},   {"reg", 0xAE},    {"trade", 0x2122},
        {"hellip", 0x2026}, {"mdash", 0x2014}, {"ndash", 0x2013},
        {"lsquo", 0x2018}, {"rsquo", 0x2019}, {"ldquo", 0x201C},
        {"rdquo", 0x201D}, {"bull", 0x2022}, {"middot", 0xB7},
        {"pound", 0xA3},  {"euro", 0x20AC}, {"yen", 0xA5},
        {"cent", 0xA2},   {"sect", 0xA7},   {"deg", 0xB0},
        {"laquo", 0xAB},  {"raquo", 0xBB},  {"times", 0xD7},
        {"divide", 0xF7}, {"frac12", 0xBD}, {"szlig", 0xDF}};
    return kEntities;
}

// Case-insensitive search for ASCII needle.
std::size_t find_ci(std::string_view hay, std::string_view needle,
                    std::size_t from) {
    if (needle.empty() || hay.size() < needle.size()) return std::string::npos;
    for (std::size_t i = from; i + needle.size() <= hay.size(); ++i) {
        bool ok = true;
        for (std::size_t k = 0; k < needle.size(); ++k) {
            char a = hay[i + k];
            char b = needle[k];
            if (a >= 'A' && a <= 'Z') a = static_cast<char>(a - 'A' + 'a');
            if (b >= 'A' && b <= 'Z') b = static_cast<char>(b - 'A' + 'a');
            if (a != b) { ok = false; break; }
        }
        if (ok) return i;
    }
    return std::string::npos;
}

// Skips an already-opened tag body up to and including '>', honouring
// quoted attribute values. Returns position after '>', or npos when the
// tag never closes (treated as terminated by end of text).
std::size_t skip_tag(std::string_view s, std::size_t i) {
    char quote = 0;
    for (; i < s.size(); ++i) {
        char c = s[i];
        if (quote) {
            if (c == quote) quote = 0;
        } else if (c == '"' || c == '\'') {
            quote = c;
        } else if (c == '>') {
            return i + 1;
        }
    }
    return std::string::npos;
}

struct TextSink {
    std::string out;
    bool pending = false;
    int pending_newlines = 0;

    void whitespace(int newlines) {
        pending = true;
        pending_newlines += newlines;
    }

    void flush() {
        if (!pending) return;
        pending = false;
        int n = pending_newlines;
        pending_newlines = 0;
        if (out.empty()) return;  // drop leading whitespace
        if (n >= 2) {
            out += "\n\n";
        } else if (n == 1) {
            out += '\n';
        } else {
            out += ' ';
        }
    }

    void text(char32_t cp) {
        if (utf8::is_space(cp)) {
            whitespace(cp == '\n' ? 1 : 0);
            return;
        }
        flush();
        utf8::append(out, cp);
    }
};

// Parses a character entity at s[i] (s[i] == '&'). On success appends the
// decoded character to sink and returns the position after ';'. Otherwise
// returns npos and the caller emits '&' literally.
std::size_t consume_entity(std::string_view s, std::size_t i, TextSink& sink) {
    std::size_t j = i + 1;
    if (j >= s.size()) return std::string::npos;
    char32_t cp = 0;
    if (s[j] == '#') {
        ++j;
        bool hex = j < s.size() && (s[j] == 'x' || s[j] == 'X');
        if (hex) ++j;
        std::size_t digits = 0;
        for (; j < s.size() && digits < 8; ++j, ++digits) {
            char c = s[j];
            unsigned v;
            if (c >= '0' && c <= '9') v = static_cast<unsigned>(c - '0');
            else if (hex && c >= 'a' && c <= 'f') v = static_cast<unsigned>(c - 'a' + 10);
            else if (hex && c >= 'A' && c <= 'F') v = static_cast<unsigned>(c - 'A' + 10);
            else break;
            cp = cp * (hex ? 16 : 10) + v;
        }
        if (digits == 0 || j >= s.size() || s[j] != ';') return std::string::npos;
    } else {
        std::size_t start = j;
        while (j < s.size() && j - start < 10 &&
               std::isalnum(static_cast<unsigned char>(s[j]))) {
            ++j;
        }
        if (j >= s.size() || s[j] != ';') return std::string::npos;
        auto it = named_entities().find(std::string(s.substr(start, j - start)));
        if (it == named_entities().end()) return std::string::npos;
        cp = it->second;
    }
    // Control characters (other than tab/newline) degrade to a space.
    if (cp == '\t' || cp == '\n' || cp == '\r' ||
        (cp >= 0x20 && !(cp >= 0x7F && cp <= 0x9F))) {
        sink.text(cp);
    } else {
        sink.whitespace(0);
    }
    return j + 1;
}

std::string strip_pass(std::string_view html) {
    TextSink sink;
    std::size_t i = 0;
    const std::size_t n = html.size();
    while (i < n) {
        char c = html[i];
        if (c == '<') {
            std::size_t j = i + 1;
            if (j < n && html[j] == '!') {
                if (html.compare(j, 3, "!--") == 0) {
                    std::size_t end = html.find("-->", j + 3);
                    i = end == std::string::npos ? n : end + 3;
                } else {
                    std::size_t end = skip_tag(html, j);
                    i = end == std::string::npos ? n : end;
                }
                continue;
            }
            bool closing = j < n && html[j] == '/';
            if (closing) ++j;
            std::size_t name_start = j;
            while (j < n && (std::isalnum(static_cast<unsigned char>(html[j])) ||
                             html[j] == '-')) {
                ++j;
            }
            if (j == name_start) {
                // '<' not opening a tag: literal text.
                sink.text('<');
                ++i;
                continue;
            }
            std::string name = ascii_lower(html.substr(name_start, j - name_start));
            std::size_t after = skip_tag(html, j);
            bool self_closing =
                after != std::string::npos && after >= 2 && html[after - 2] == '/';
            i = after == std::string::npos ? n : after;
            if (!closing && !self_closing &&
                (name == "script" || name == "style" || name == "head")) {
                std::size_t close = find_ci(html, "</" + name, i);
                if (close == std::string::npos) {
                    i = n;
                } else {
                    std::size_t end = skip_tag(html, close + 2 + name.size());
                    i = end == std::string::npos ? n : end;
                }
                continue;
            }
            if (name == "br") {
                sink.whitespace(1);
            } else if (block_tags().count(name)) {
                sink.whitespace(2);
            }
            continue;
        }
        if (c == '&') {
            std::size_t after = consume_entity(html, i, sink);
            if (after != std::string::npos) {
                i = after;
                continue;
            }
            sink.text('&');
            ++i;
            continue;
        }
        char32_t cp = utf8::decode(html, i);
        sink.text(cp);
    }
    return std::move(sink.out);
}

}  // namespace

std::string strip_html(std::string_view html) {
    // One pass is not stable when decoded entities re-form markup
    // ("&lt;b&gt;" -> "<b>"); iterate to a fixed point. Terminates: a
    // changing pass shrinks the text or only normalizes whitespace.
    std::string cur = strip_pass(html);
    for (std::size_t guard = 0; guard <= html.size() + 2; ++guard) {
        std::string next = strip_pass(cur);
        if (next == cur) break;
        cur = std::move(next);
    }
    return cur;
}

// ---------------------------------------------------------------------------
// Sentence segmentation
// ---------------------------------------------------------------------------

namespace {

bool is_ascii_ws(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
           c == '\v';
}

const std::unordered_set<std::string>& abbreviation_guard() {
    static const std::unordered_set<std::string> kGuard = {
        "mr.", "mrs.", "dr.", "e.g.", "i.e.", "vs."};
    return kGuard;
}

// True when the '.' at position i ends a guarded abbreviation.
bool guarded_abbreviation(std::string_view text, std::size_t i) {
    std::size_t start = i;
    while (start > 0 && !is_ascii_ws(text[start - 1])) --start;
    std::string word(text.substr(start, i + 1 - start));
    // Ignore opening punctuation such as '(' or '"'.
    std::size_t lo = 0;
    while (lo + 1 < word.size() &&
           std::ispunct(static_cast<unsigned char>(word[lo])) &&
           word[lo] != '.') {
        ++lo;
    }
    return abbreviation_guard().count(ascii_lower(word.substr(lo))) > 0;
}

}  // namespace

std::vector<Sentence> segment_sentences(std::string_view text) {
    const std::size_t n = text.size();
    std::vector<std::size_t> splits;  // chunk boundaries (byte positions)

    std::size_t i = 0;
    while (i < n) {
        char c = text[i];
        if (c == '.' || c == '!' || c == '?') {
            std::size_t j = i + 1;
            std::size_t ws_start = j;
            while (j < n) {
                std::size_t k = j;
                char32_t cp = utf8::decode(text, k);
                if (!utf8::is_space(cp)) break;
                j = k;
            }
            bool has_ws = j > ws_start;
            bool next_starts_sentence =
                j < n && ((text[j] >= 'A' && text[j] <= 'Z') ||
                          (text[j] >= '0' && text[j] <= '9'));
            if (has_ws && next_starts_sentence &&
                !(c == '.' && guarded_abbreviation(text, i))) {
                splits.push_back(i + 1);
            }
            ++i;
            continue;
        }
        if (is_ascii_ws(c)) {
            // Paragraph break: a whitespace run holding >= 2 newlines.
            std::size_t run_start = i;
            int newlines = 0;
            while (i < n) {
                std::size_t k = i;
                char32_t cp = utf8::decode(text, k);
                if (!utf8::is_space(cp)) break;
                if (cp == '\n') ++newlines;
                i = k;
            }
            if (newlines >= 2) {
                if (run_start > 0) splits.push_back(run_start);
            }
            continue;
        }
        ++i;
    }

    splits.push_back(n);

    struct Chunk {
        std::size_t start, end;
        bool has_tokens;
    };
    std::vector<Chunk> chunks;
    std::size_t prev = 0;
    for (std::size_t split : splits) {
        std::size_t s = prev, e = split;
        prev = split;
        // trim whitespace
        while (s < e) {
            std::size_t k = s;
            if (!utf8::is_space(utf8::decode(text, k))) break;
            s = k;
        }
        while (e > s) {
            // scan back one codepoint (ASCII fast path; multibyte rare here)
            std::size_t k = e - 1;
            while (k > s && (static_cast<unsigned char>(text[k]) & 0xC0) == 0x80) --k;
            std::size_t k2 = k;
            if (!utf8::is_space(utf8::decode(text, k2))) break;
            e = k;
        }
        if (s >= e) continue;
        bool has = !tokenize(text.substr(s, e - s)).empty();
        chunks.push_back({s, e, has});
    }

    // Token-free chunks (bare punctuation) merge into a neighbour so that
    // the gaps between sentences stay whitespace-only.
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    bool carry = false;
    std::size_t carry_start = 0;
    for (const Chunk& ch : chunks) {
        if (ch.has_tokens) {
            ranges.emplace_back(carry ? carry_start : ch.start, ch.end);
            carry = false;
        } else if (!ranges.empty()) {
            ranges.back().second = ch.end;
        } else if (!carry) {
            carry = true;
            carry_start = ch.start;
        }
    }
    if (carry && !ranges.empty()) {
        // unreachable by construction (carry only before first range)
        ranges.back().second = std::max(ranges.back().second, carry_start);
    }

    std::vector<Sentence> sentences;
    sentences.reserve(ranges.size());
    for (auto [s, e] : ranges) {
        Sentence sent;
        sent.index = sentences.size();
        sent.char_start = s;
        sent.char_end = e;
        sent.text = std::string(text.substr(s, e - s));
        sent.tokens = tokenize(sent.text, s);
        if (sent.tokens.empty()) continue;
        sentences.push_back(std::move(sent));
    }
    for (std::size_t k = 0; k < sentences.size(); ++k) sentences[k].index = k;
    return sentences;
}

EmailBody make_body(std::string text) {
    EmailBody body;
    body.sentences = segment_sentences(text);
    body.text = std::move(text);
    for (const Sentence& s : body.sentences) body.total_tokens += s.tokens.size();
    return body;
}

}  // namespace phishtriage
