#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "phishtriage/email.hpp"

namespace phishtriage {

enum class EmailFormat { rfc822, jsonl_record };
enum class CorpusFormat { mbox, eml_dir, jsonl };

// Parses one raw message. rfc822 input must contain a header/body
// separator (blank line); multipart MIME yields one BodyPart per leaf
// part with transfer encoding already decoded. jsonl_record input is one
// JSON object {"id","headers","body"} whose body is already plain text.
RawEmail parse_email(std::string_view raw_bytes, EmailFormat format);

// Selects the body text (text/plain, else stripped text/html, else the
// concatenation of all decodable textual parts), decodes it per the
// declared charset with UTF-8 and permissive 8-bit fallbacks, and
// segments it. Throws EmptyBody when no sentence survives cleaning.
EmailBody extract_body(const RawEmail& email);

// Streaming corpus reader. Malformed messages are skipped and counted,
// never abort the stream.
class CorpusStream {
public:
    using SkipHandler =
        std::function<void(const std::string& id, const std::string& reason)>;

    virtual ~CorpusStream() = default;
    virtual std::optional<RawEmail> next() = 0;

    std::size_t skipped_count() const { return skipped_; }
    std::size_t yielded_count() const { return yielded_; }
    void set_skip_handler(SkipHandler handler) { on_skip_ = std::move(handler); }

protected:
    void record_skip(const std::string& id, const std::string& reason) {
        ++skipped_;
        if (on_skip_) on_skip_(id, reason);
    }
    void record_yield() { ++yielded_; }

private:
    std::size_t skipped_ = 0;
    std::size_t yielded_ = 0;
    SkipHandler on_skip_;
};

// Opens a corpus for streaming. Ids are "<format>:<ordinal>" for mbox and
// jsonl (ordinal = position in the stream, counting skipped messages) and
// "eml_dir:<filename>" for directories. Throws CorpusNotFound.
std::unique_ptr<CorpusStream> load_corpus(const std::filesystem::path& path,
                                          CorpusFormat format);

// Uniform reservoir sample of min(n, corpus size) emails, returned in
// corpus order. Deterministic for a given (corpus order, n, seed) on any
// platform.
std::vector<RawEmail> sample_corpus(CorpusStream& corpus, std::size_t n,
                                    std::uint64_t seed);

// Decodes text bytes: declared charset first, then strict UTF-8, then a
// permissive 8-bit decode with replacement characters. Line endings are
// normalized to '\n'.
std::string decode_text(std::string_view bytes, std::string_view charset);

}  // namespace phishtriage
