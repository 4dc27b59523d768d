#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "phishtriage/email.hpp"
#include "phishtriage/intents.hpp"
#include "phishtriage/summarize.hpp"
#include "phishtriage/triggers.hpp"

namespace phishtriage {

enum class BackendTask { summarize, classify_triggers, tag_intents };

std::string_view task_name(BackendTask task);

struct TransportSpec {
    enum class Kind { subprocess_stdio, tcp };
    Kind kind = Kind::subprocess_stdio;
    std::vector<std::string> argv;  // subprocess command line
    std::string host;
    std::uint16_t port = 0;

    // "stdio:<command line>" or "tcp:<host>:<port>".
    static TransportSpec parse(std::string_view text);
    std::string describe() const;
};

inline constexpr std::chrono::milliseconds kDefaultBackendTimeout{30000};

// One NDJSON protocol-v1 connection. Multiple requests may be in flight
// (ids are matched on arrival, so out-of-order completion is fine) and
// concurrent callers share the connection: one waiter at a time acts as
// the reader, the rest sleep on a condition variable.
class BackendConnection {
public:
    static std::unique_ptr<BackendConnection> open(
        const TransportSpec& transport,
        std::chrono::milliseconds timeout = kDefaultBackendTimeout);

    ~BackendConnection();
    BackendConnection(const BackendConnection&) = delete;
    BackendConnection& operator=(const BackendConnection&) = delete;

    // Sends {"v":1,"id":N,"task":...,"payload":...} and waits for the
    // matching response. Returns the result object; a protocol-level
    // {"error":...} response raises RemoteBackendError.
    nlohmann::json invoke(BackendTask task, nlohmann::json payload);

    const std::string& describe() const { return description_; }

private:
    BackendConnection() = default;

    nlohmann::json await_response(std::uint64_t id,
                                  std::chrono::steady_clock::time_point deadline);
    // Reads one chunk and files complete lines into pending_. Caller must
    // hold the lock; it is released while blocked on the descriptor.
    void read_some(std::unique_lock<std::mutex>& lock,
                   std::chrono::steady_clock::time_point deadline);
    void process_line(std::string line);
    void write_line(const std::string& line);

    int in_fd_ = -1;   // we write requests here
    int out_fd_ = -1;  // we read responses here
    long child_pid_ = -1;
    std::chrono::milliseconds timeout_{kDefaultBackendTimeout};
    std::string description_;

    std::mutex mutex_;
    std::condition_variable cv_;
    bool reader_active_ = false;
    std::string poisoned_;  // non-empty once the stream is unusable
    std::uint64_t next_id_ = 1;
    std::map<std::uint64_t, nlohmann::json> pending_;  // undelivered responses
    std::map<std::uint64_t, bool> outstanding_;        // sent, not delivered
    std::size_t line_number_ = 0;
    std::string read_buffer_;
};

// --- task-level result validation (spec: validate_response) ---

// classify_triggers: {"distributions":[[7 reals]...]} — one per sentence,
// non-negative, sum within 1e-3 of 1 (renormalized).
std::vector<TriggerVector> validate_triggers_response(
    const nlohmann::json& result, std::size_t n_sentences);

// tag_intents: {"spans":[[{token_start,token_end,tag,confidence}...]...]} —
// bounds checked against the sentences, tags must be registered. Spans
// below the confidence cutoff are dropped after validation.
std::vector<std::vector<IntentSpan>> validate_intents_response(
    const nlohmann::json& result, const std::vector<Sentence>& sentences,
    const TagRegistry& registry, double confidence_cutoff = 0.5);

// summarize: {"selected":[indices]} — in range, no duplicates.
std::vector<std::size_t> validate_summarize_response(
    const nlohmann::json& result, std::size_t n_sentences);

// --- seam adapters ---

class ExternalSummarizer final : public SummarizerBackend {
public:
    explicit ExternalSummarizer(BackendConnection& conn) : conn_(&conn) {}
    std::string id() const override {
        return "external:" + conn_->describe();
    }
    std::vector<std::size_t> select(const EmailBody& body,
                                    std::size_t budget) override;

private:
    BackendConnection* conn_;
};

class ExternalTriggerBackend final : public TriggerBackend {
public:
    explicit ExternalTriggerBackend(BackendConnection& conn) : conn_(&conn) {}
    std::string id() const override {
        return "external:" + conn_->describe();
    }
    std::vector<TriggerDistribution> classify(
        const std::vector<Sentence>& sentences) override;

private:
    BackendConnection* conn_;
};

class ExternalIntentBackend final : public IntentBackend {
public:
    explicit ExternalIntentBackend(BackendConnection& conn,
                                   const TagRegistry& registry =
                                       TagRegistry::builtin())
        : conn_(&conn), registry_(&registry) {}
    std::string id() const override {
        return "external:" + conn_->describe();
    }
    std::vector<std::vector<IntentSpan>> tag(
        const std::vector<Sentence>& sentences) override;

private:
    BackendConnection* conn_;
    const TagRegistry* registry_;
};

}  // namespace phishtriage
