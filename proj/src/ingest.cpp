#include "phishtriage/ingest.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "phishtriage/errors.hpp"
#include "phishtriage/text.hpp"

namespace phishtriage {

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

bool iequals(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(a[i])) !=
            std::tolower(static_cast<unsigned char>(b[i]))) {
            return false;
        }
    }
    return true;
}

// --- transfer encodings ---

std::string decode_base64(std::string_view in) {
    static constexpr std::string_view alphabet =
        "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::array<int, 256> table;
    table.fill(-1);
    for (int i = 0; i < 64; ++i) {
        table[static_cast<unsigned char>(alphabet[i])] = i;
    }
    std::string out;
    out.reserve(in.size() / 4 * 3);
    unsigned acc = 0;
    int bits = 0;
    for (char c : in) {
        if (c == '=') break;
        int v = table[static_cast<unsigned char>(c)];
        if (v < 0) continue;  // whitespace and stray bytes
        acc = (acc << 6) | static_cast<unsigned>(v);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<char>((acc >> bits) & 0xFF));
        }
    }
    return out;
}

std::string decode_quoted_printable(std::string_view in) {
    std::string out;
    out.reserve(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) {
        char c = in[i];
        if (c != '=') {
            out.push_back(c);
            continue;
        }
        if (i + 1 < in.size() && (in[i + 1] == '\n' || in[i + 1] == '\r')) {
            // soft line break
            ++i;
            if (in[i] == '\r' && i + 1 < in.size() && in[i + 1] == '\n') ++i;
            continue;
        }
        auto hex = [](char h) -> int {
            if (h >= '0' && h <= '9') return h - '0';
            if (h >= 'a' && h <= 'f') return h - 'a' + 10;
            if (h >= 'A' && h <= 'F') return h - 'A' + 10;
            return -1;
        };
        if (i + 2 < in.size()) {
            int hi = hex(in[i + 1]), lo = hex(in[i + 2]);
            if (hi >= 0 && lo >= 0) {
                out.push_back(static_cast<char>(hi * 16 + lo));
                i += 2;
                continue;
            }
        }
        out.push_back(c);  // malformed escape kept verbatim
    }
    return out;
}

std::string apply_transfer_encoding(std::string_view content,
                                    std::string_view encoding) {
    std::string enc = ascii_lower(trim(encoding));
    if (enc == "base64") return decode_base64(content);
    if (enc == "quoted-printable") return decode_quoted_printable(content);
    return std::string(content);  // 7bit/8bit/binary/unknown
}

// --- charsets ---

// Windows-1252 mapping for 0x80-0x9F; remaining high bytes are Latin-1.
constexpr std::array<char32_t, 32> kCp1252High = {
    0x20AC, 0xFFFD, 0x201A, 0x0192, 0x201E, 0x2026, 0x2020, 0x2021,
    0x02C6, 0x2030, 0x0160, 0x2039, 0x0152, 0xFFFD, 0x017D, 0xFFFD,
    0xFFFD, 0x2018, 0x2019, 0x201C, 0x201D, 0x2022, 0x2013, 0x2014,
    0x02DC, 0x2122, 0x0161, 0x203A, 0x0153, 0xFFFD, 0x017E, 0xFFFD};

std::string decode_8bit(std::string_view bytes) {
    std::string out;
    out.reserve(bytes.size());
    for (char c : bytes) {
        auto b = static_cast<unsigned char>(c);
        if (b < 0x80) {
            out.push_back(c);
        } else if (b < 0xA0) {
            utf8::append(out, kCp1252High[b - 0x80]);
        } else {
            utf8::append(out, b);
        }
    }
    return out;
}

bool valid_utf8(std::string_view s) {
    std::size_t i = 0;
    while (i < s.size()) {
        std::size_t before = i;
        char32_t cp = utf8::decode(s, i);
        if (cp == 0xFFFD && s.compare(before, i - before, "\xEF\xBF\xBD") != 0) {
            return false;
        }
    }
    return true;
}

std::string normalize_newlines(std::string text) {
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '\r') {
            out.push_back('\n');
            if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
        } else {
            out.push_back(text[i]);
        }
    }
    return out;
}

std::string normalize_charset_name(std::string_view cs) {
    std::string out;
    for (char c : cs) {
        if (c == '"' || c == '\'' || std::isspace(static_cast<unsigned char>(c)))
            continue;
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}

}  // namespace

std::string decode_text(std::string_view bytes, std::string_view charset) {
    std::string cs = normalize_charset_name(charset);
    std::string decoded;
    if (cs == "utf-8" || cs == "utf8" || cs == "us-ascii" || cs == "ascii") {
        decoded = valid_utf8(bytes) ? std::string(bytes) : decode_8bit(bytes);
    } else if (cs == "iso-8859-1" || cs == "latin1" || cs == "latin-1" ||
               cs == "iso-8859-15" || cs == "windows-1252" || cs == "cp1252") {
        decoded = decode_8bit(bytes);
    } else if (valid_utf8(bytes)) {
        decoded = std::string(bytes);
    } else {
        decoded = decode_8bit(bytes);
    }
    return normalize_newlines(std::move(decoded));
}

// ---------------------------------------------------------------------------
// RFC-822 / MIME parsing
// ---------------------------------------------------------------------------

std::string RawEmail::header(const std::string& name) const {
    for (const auto& [k, v] : headers) {
        if (iequals(k, name)) return v;
    }
    return {};
}

namespace {

using HeaderList = std::vector<std::pair<std::string, std::string>>;

// Splits "headers\n\nbody". Returns false when no separator exists.
bool split_header_block(std::string_view raw, std::string_view& header_block,
                        std::string_view& body) {
    std::size_t i = 0;
    while (i < raw.size()) {
        std::size_t eol = raw.find('\n', i);
        std::size_t line_end = eol == std::string::npos ? raw.size() : eol;
        std::size_t len = line_end - i;
        if (len > 0 && raw[line_end - 1] == '\r') --len;
        if (len == 0) {
            header_block = raw.substr(0, i);
            body = eol == std::string::npos ? std::string_view{}
                                            : raw.substr(eol + 1);
            return true;
        }
        if (eol == std::string::npos) break;
        i = eol + 1;
    }
    return false;
}

HeaderList parse_headers(std::string_view block) {
    HeaderList out;
    std::size_t i = 0;
    while (i < block.size()) {
        std::size_t eol = block.find('\n', i);
        std::size_t end = eol == std::string::npos ? block.size() : eol;
        std::string_view line = block.substr(i, end - i);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        i = eol == std::string::npos ? block.size() : eol + 1;
        if (line.empty()) continue;
        if ((line[0] == ' ' || line[0] == '\t') && !out.empty()) {
            // folded continuation
            out.back().second += ' ';
            out.back().second += trim(line);
            continue;
        }
        std::size_t colon = line.find(':');
        if (colon == std::string::npos || colon == 0) continue;  // tolerated
        out.emplace_back(trim(line.substr(0, colon)), trim(line.substr(colon + 1)));
    }
    return out;
}

std::string header_of(const HeaderList& headers, std::string_view name) {
    for (const auto& [k, v] : headers) {
        if (iequals(k, name)) return v;
    }
    return {};
}

struct ContentType {
    std::string type;  // lowercased "text/plain"
    std::string charset;
    std::string boundary;
};

ContentType parse_content_type(std::string_view value) {
    ContentType ct;
    std::size_t semi = value.find(';');
    ct.type = ascii_lower(trim(value.substr(0, semi)));
    if (ct.type.empty()) ct.type = "text/plain";
    std::string_view rest = semi == std::string::npos ? std::string_view{}
                                                      : value.substr(semi + 1);
    while (!rest.empty()) {
        std::size_t next = rest.find(';');
        std::string_view param = rest.substr(0, next);
        rest = next == std::string::npos ? std::string_view{}
                                         : rest.substr(next + 1);
        std::size_t eq = param.find('=');
        if (eq == std::string::npos) continue;
        std::string key = ascii_lower(trim(param.substr(0, eq)));
        std::string val = trim(param.substr(eq + 1));
        if (val.size() >= 2 && val.front() == '"' && val.back() == '"') {
            val = val.substr(1, val.size() - 2);
        }
        if (key == "charset") ct.charset = val;
        if (key == "boundary") ct.boundary = val;
    }
    return ct;
}

void collect_leaf_parts(const HeaderList& headers, std::string_view body,
                        std::vector<BodyPart>& parts, int depth) {
    ContentType ct = parse_content_type(header_of(headers, "Content-Type"));
    if (depth < 16 && ct.type.rfind("multipart/", 0) == 0 && !ct.boundary.empty()) {
        std::string open = "--" + ct.boundary;
        std::string close = open + "--";
        std::vector<std::string_view> sections;
        std::size_t i = 0;
        std::size_t current = std::string::npos;  // start of the open section
        bool done = false;
        while (i <= body.size() && !done) {
            std::size_t eol = body.find('\n', i);
            std::size_t end = eol == std::string::npos ? body.size() : eol;
            std::string_view line = body.substr(i, end - i);
            if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
            bool is_close = line.rfind(close, 0) == 0;
            bool is_open = !is_close && line.rfind(open, 0) == 0;
            if (is_open || is_close) {
                if (current != std::string::npos) {
                    std::size_t sec_end = i;
                    // strip the line break that belongs to the boundary
                    if (sec_end > current && body[sec_end - 1] == '\n') --sec_end;
                    if (sec_end > current && body[sec_end - 1] == '\r') --sec_end;
                    sections.push_back(body.substr(current, sec_end - current));
                }
                if (is_close) done = true;
                current = eol == std::string::npos ? body.size() : eol + 1;
            }
            if (eol == std::string::npos) break;
            i = eol + 1;
        }
        if (!done && current != std::string::npos && current <= body.size()) {
            sections.push_back(body.substr(current));  // missing end boundary
        }
        for (std::string_view section : sections) {
            std::string_view part_headers, part_body;
            if (split_header_block(section, part_headers, part_body)) {
                collect_leaf_parts(parse_headers(part_headers), part_body, parts,
                                   depth + 1);
            } else {
                // headerless section: treat the whole of it as plain text
                parts.push_back(BodyPart{"text/plain", std::string(section), ""});
            }
        }
        return;
    }
    std::string content = apply_transfer_encoding(
        body, header_of(headers, "Content-Transfer-Encoding"));
    parts.push_back(BodyPart{ct.type, std::move(content), ct.charset});
}

RawEmail parse_rfc822(std::string_view raw) {
    std::string_view header_block, body;
    if (!split_header_block(raw, header_block, body)) {
        throw UnparseableMessage("no header/body separator found");
    }
    RawEmail email;
    email.id = "rfc822:0";
    email.headers = parse_headers(header_block);
    if (!trim(body).empty()) {
        collect_leaf_parts(email.headers, body, email.body_parts, 0);
    }
    return email;
}

RawEmail parse_jsonl_record(std::string_view raw) {
    nlohmann::json j = nlohmann::json::parse(raw, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw UnparseableMessage("jsonl record is not a JSON object");
    }
    RawEmail email;
    email.id = j.value("id", std::string{});
    if (email.id.empty()) email.id = "jsonl:record";
    if (j.contains("headers") && j["headers"].is_object()) {
        for (const auto& [k, v] : j["headers"].items()) {
            email.headers.emplace_back(
                k, v.is_string() ? v.get<std::string>() : v.dump());
        }
    }
    std::string body = j.value("body", std::string{});
    if (!body.empty()) {
        email.body_parts.push_back(BodyPart{"text/plain", std::move(body), "utf-8"});
    }
    return email;
}

}  // namespace

RawEmail parse_email(std::string_view raw_bytes, EmailFormat format) {
    if (raw_bytes.empty()) throw UnparseableMessage("empty message");
    switch (format) {
        case EmailFormat::rfc822:
            return parse_rfc822(raw_bytes);
        case EmailFormat::jsonl_record:
            return parse_jsonl_record(raw_bytes);
    }
    throw UnsupportedFormat("unknown email format");
}

EmailBody extract_body(const RawEmail& email) {
    auto textual = [](const BodyPart& p) {
        return p.content_type.empty() || p.content_type.rfind("text/", 0) == 0;
    };

    auto body_from = [](std::string text) -> std::optional<EmailBody> {
        EmailBody body = make_body(std::move(text));
        if (body.sentences.empty()) return std::nullopt;
        return body;
    };

    for (const BodyPart& p : email.body_parts) {
        if (p.content_type.empty() || p.content_type == "text/plain") {
            if (auto b = body_from(decode_text(p.content, p.charset))) {
                return *b;
            }
        }
    }
    for (const BodyPart& p : email.body_parts) {
        if (p.content_type == "text/html") {
            if (auto b = body_from(strip_html(decode_text(p.content, p.charset)))) {
                return *b;
            }
        }
    }
    // Fall back to every decodable textual part, in order.
    std::string combined;
    for (const BodyPart& p : email.body_parts) {
        if (!textual(p)) continue;
        std::string text = p.content_type == "text/html"
                               ? strip_html(decode_text(p.content, p.charset))
                               : decode_text(p.content, p.charset);
        if (trim(text).empty()) continue;
        if (!combined.empty()) combined += "\n\n";
        combined += text;
    }
    if (auto b = body_from(std::move(combined))) return *b;
    throw EmptyBody("no decodable textual content");
}

// ---------------------------------------------------------------------------
// Corpus streaming
// ---------------------------------------------------------------------------

namespace {

class MboxStream final : public CorpusStream {
public:
    explicit MboxStream(const std::filesystem::path& path) : in_(path) {
        if (!in_) throw CorpusNotFound("cannot open mbox: " + path.string());
    }

    std::optional<RawEmail> next() override {
        while (auto message = next_message()) {
            std::string id = "mbox:" + std::to_string(ordinal_++);
            try {
                RawEmail email = parse_email(*message, EmailFormat::rfc822);
                email.id = id;
                record_yield();
                return email;
            } catch (const UnparseableMessage& e) {
                record_skip(id, e.what());
            }
        }
        return std::nullopt;
    }

private:
    std::optional<std::string> next_message() {
        std::string message;
        bool started = pending_separator_;
        pending_separator_ = false;
        std::string line;
        while (std::getline(in_, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            bool separator = line.rfind("From ", 0) == 0;
            if (!started) {
                if (separator) started = true;
                continue;
            }
            if (separator) {
                pending_separator_ = true;
                return message;
            }
            if (line.rfind(">From ", 0) == 0) line.erase(0, 1);
            message += line;
            message.push_back('\n');
        }
        if (started) return message;
        return std::nullopt;
    }

    std::ifstream in_;
    bool pending_separator_ = false;
    std::size_t ordinal_ = 0;
};

class EmlDirStream final : public CorpusStream {
public:
    explicit EmlDirStream(const std::filesystem::path& path) {
        std::error_code ec;
        if (!std::filesystem::is_directory(path, ec)) {
            throw CorpusNotFound("not a directory: " + path.string());
        }
        for (const auto& entry : std::filesystem::directory_iterator(path)) {
            if (entry.is_regular_file()) files_.push_back(entry.path());
        }
        std::sort(files_.begin(), files_.end(),
                  [](const auto& a, const auto& b) {
                      return a.filename().string() < b.filename().string();
                  });
    }

    std::optional<RawEmail> next() override {
        while (index_ < files_.size()) {
            const std::filesystem::path& file = files_[index_++];
            std::string id = "eml_dir:" + file.filename().string();
            std::ifstream in(file, std::ios::binary);
            std::ostringstream content;
            content << in.rdbuf();
            try {
                RawEmail email = parse_email(content.str(), EmailFormat::rfc822);
                email.id = id;
                record_yield();
                return email;
            } catch (const UnparseableMessage& e) {
                record_skip(id, e.what());
            }
        }
        return std::nullopt;
    }

private:
    std::vector<std::filesystem::path> files_;
    std::size_t index_ = 0;
};

class JsonlStream final : public CorpusStream {
public:
    explicit JsonlStream(const std::filesystem::path& path) : in_(path) {
        if (!in_) throw CorpusNotFound("cannot open jsonl: " + path.string());
    }

    std::optional<RawEmail> next() override {
        std::string line;
        while (std::getline(in_, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (trim(line).empty()) continue;
            std::string id = "jsonl:" + std::to_string(ordinal_++);
            try {
                RawEmail email = parse_email(line, EmailFormat::jsonl_record);
                email.id = id;
                record_yield();
                return email;
            } catch (const UnparseableMessage& e) {
                record_skip(id, e.what());
            }
        }
        return std::nullopt;
    }

private:
    std::ifstream in_;
    std::size_t ordinal_ = 0;
};

}  // namespace

std::unique_ptr<CorpusStream> load_corpus(const std::filesystem::path& path,
                                          CorpusFormat format) {
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) {
        throw CorpusNotFound("no such path: " + path.string());
    }
    switch (format) {
        case CorpusFormat::mbox:
            return std::make_unique<MboxStream>(path);
        case CorpusFormat::eml_dir:
            return std::make_unique<EmlDirStream>(path);
        case CorpusFormat::jsonl:
            return std::make_unique<JsonlStream>(path);
    }
    throw UnsupportedFormat("unknown corpus format");
}

namespace {

// Portable bounded uniform draw (rejection sampling on mt19937_64, which
// the standard pins bit-exactly).
std::uint64_t bounded_rand(std::mt19937_64& rng, std::uint64_t bound) {
    std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
        std::uint64_t r = rng();
        if (r >= threshold) return r % bound;
    }
}

}  // namespace

std::vector<RawEmail> sample_corpus(CorpusStream& corpus, std::size_t n,
                                    std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<std::pair<std::size_t, RawEmail>> reservoir;
    reservoir.reserve(n);
    std::size_t i = 0;
    while (auto email = corpus.next()) {
        if (reservoir.size() < n) {
            reservoir.emplace_back(i, std::move(*email));
        } else {
            std::uint64_t j = bounded_rand(rng, i + 1);
            if (j < n) reservoir[j] = {i, std::move(*email)};
        }
        ++i;
    }
    std::sort(reservoir.begin(), reservoir.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<RawEmail> out;
    out.reserve(reservoir.size());
    for (auto& [ord, email] : reservoir) out.push_back(std::move(email));
    return out;
}

}  // namespace phishtriage
