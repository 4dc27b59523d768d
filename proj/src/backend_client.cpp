#include "phishtriage/backend_client.hpp"

#include <errno.h>
#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <string.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <set>

#include "phishtriage/errors.hpp"

namespace phishtriage {

std::string_view task_name(BackendTask task) {
    switch (task) {
        case BackendTask::summarize: return "summarize";
        case BackendTask::classify_triggers: return "classify_triggers";
        case BackendTask::tag_intents: return "tag_intents";
    }
    return "unknown";
}

TransportSpec TransportSpec::parse(std::string_view text) {
    TransportSpec spec;
    if (text.rfind("stdio:", 0) == 0) {
        spec.kind = Kind::subprocess_stdio;
        std::string_view rest = text.substr(6);
        std::size_t i = 0;
        while (i < rest.size()) {
            while (i < rest.size() && rest[i] == ' ') ++i;
            std::size_t start = i;
            while (i < rest.size() && rest[i] != ' ') ++i;
            if (i > start) spec.argv.emplace_back(rest.substr(start, i - start));
        }
        if (spec.argv.empty()) {
            throw BackendUnavailable("empty stdio command in transport spec");
        }
        return spec;
    }
    if (text.rfind("tcp:", 0) == 0) {
        spec.kind = Kind::tcp;
        std::string_view rest = text.substr(4);
        std::size_t colon = rest.rfind(':');
        if (colon == std::string_view::npos || colon == 0 ||
            colon + 1 >= rest.size()) {
            throw BackendUnavailable("tcp transport needs host:port, got \"" +
                                     std::string(text) + "\"");
        }
        spec.host = std::string(rest.substr(0, colon));
        int port = 0;
        for (char c : rest.substr(colon + 1)) {
            if (c < '0' || c > '9') port = -1;
            if (port >= 0) port = port * 10 + (c - '0');
        }
        if (port <= 0 || port > 65535) {
            throw BackendUnavailable("invalid tcp port in \"" +
                                     std::string(text) + "\"");
        }
        spec.port = static_cast<std::uint16_t>(port);
        return spec;
    }
    throw BackendUnavailable(
        "transport must be stdio:<command> or tcp:<host>:<port>, got \"" +
        std::string(text) + "\"");
}

std::string TransportSpec::describe() const {
    if (kind == Kind::subprocess_stdio) {
        std::string out = "stdio:";
        for (std::size_t i = 0; i < argv.size(); ++i) {
            if (i) out += ' ';
            out += argv[i];
        }
        return out;
    }
    return "tcp:" + host + ":" + std::to_string(port);
}

namespace {

void ignore_sigpipe_once() {
    static const bool done = [] {
        ::signal(SIGPIPE, SIG_IGN);
        return true;
    }();
    (void)done;
}

int connect_tcp(const std::string& host, std::uint16_t port,
                std::chrono::milliseconds timeout, const std::string& where) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    std::string service = std::to_string(port);
    if (::getaddrinfo(host.c_str(), service.c_str(), &hints, &res) != 0) {
        throw BackendUnavailable("cannot resolve " + where);
    }
    int fd = -1;
    std::string last_error = "no addresses";
    for (addrinfo* ai = res; ai; ai = ai->ai_next) {
        fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_NONBLOCK,
                      ai->ai_protocol);
        if (fd < 0) continue;
        int rc = ::connect(fd, ai->ai_addr, ai->ai_addrlen);
        if (rc == 0) break;
        if (errno == EINPROGRESS) {
            pollfd p{fd, POLLOUT, 0};
            rc = ::poll(&p, 1, static_cast<int>(timeout.count()));
            if (rc > 0) {
                int err = 0;
                socklen_t len = sizeof err;
                ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
                if (err == 0) break;
                last_error = ::strerror(err);
            } else {
                last_error = rc == 0 ? "connect timeout" : ::strerror(errno);
            }
        } else {
            last_error = ::strerror(errno);
        }
        ::close(fd);
        fd = -1;
    }
    ::freeaddrinfo(res);
    if (fd < 0) {
        throw BackendUnavailable("cannot connect to " + where + ": " +
                                 last_error);
    }
    int flags = ::fcntl(fd, F_GETFL, 0);
    ::fcntl(fd, F_SETFL, flags & ~O_NONBLOCK);
    return fd;
}

}  // namespace

std::unique_ptr<BackendConnection> BackendConnection::open(
    const TransportSpec& transport, std::chrono::milliseconds timeout) {
    ignore_sigpipe_once();
    auto conn = std::unique_ptr<BackendConnection>(new BackendConnection());
    conn->timeout_ = timeout;
    conn->description_ = transport.describe();

    if (transport.kind == TransportSpec::Kind::tcp) {
        int fd = connect_tcp(transport.host, transport.port, timeout,
                             conn->description_);
        conn->in_fd_ = fd;
        conn->out_fd_ = fd;
        return conn;
    }

    int to_child[2], from_child[2];
    if (::pipe(to_child) != 0 || ::pipe(from_child) != 0) {
        throw BackendUnavailable("pipe() failed for " + conn->description_);
    }
    pid_t pid = ::fork();
    if (pid < 0) {
        throw BackendUnavailable("fork() failed for " + conn->description_);
    }
    if (pid == 0) {
        ::dup2(to_child[0], STDIN_FILENO);
        ::dup2(from_child[1], STDOUT_FILENO);
        ::close(to_child[0]);
        ::close(to_child[1]);
        ::close(from_child[0]);
        ::close(from_child[1]);
        std::vector<char*> argv;
        for (const std::string& a : transport.argv) {
            argv.push_back(const_cast<char*>(a.c_str()));
        }
        argv.push_back(nullptr);
        ::execvp(argv[0], argv.data());
        ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    conn->in_fd_ = to_child[1];
    conn->out_fd_ = from_child[0];
    conn->child_pid_ = pid;
    return conn;
}

BackendConnection::~BackendConnection() {
    if (in_fd_ >= 0) ::close(in_fd_);
    if (out_fd_ >= 0 && out_fd_ != in_fd_) ::close(out_fd_);
    if (child_pid_ > 0) {
        int status = 0;
        // closing stdin asks the server to exit; reap it either way
        if (::waitpid(static_cast<pid_t>(child_pid_), &status, WNOHANG) == 0) {
            ::kill(static_cast<pid_t>(child_pid_), SIGTERM);
            ::waitpid(static_cast<pid_t>(child_pid_), &status, 0);
        }
    }
}

void BackendConnection::write_line(const std::string& line) {
    std::size_t off = 0;
    while (off < line.size()) {
        ssize_t n = ::write(in_fd_, line.data() + off, line.size() - off);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw BackendUnavailable("write to " + description_ + " failed: " +
                                     ::strerror(errno));
        }
        off += static_cast<std::size_t>(n);
    }
}

nlohmann::json BackendConnection::invoke(BackendTask task,
                                         nlohmann::json payload) {
    std::uint64_t id;
    std::chrono::steady_clock::time_point deadline;
    {
        std::unique_lock lock(mutex_);
        id = next_id_++;
        nlohmann::json request;
        request["v"] = 1;
        request["id"] = id;
        request["task"] = task_name(task);
        request["payload"] = std::move(payload);
        outstanding_[id] = true;
        write_line(request.dump() + "\n");
        deadline = std::chrono::steady_clock::now() + timeout_;
    }

    nlohmann::json response = await_response(id, deadline);

    if (response.contains("error")) {
        const auto& err = response["error"];
        throw RemoteBackendError(err.value("code", std::string("unknown")),
                                 err.value("message", std::string{}));
    }
    return response.at("result");
}

nlohmann::json BackendConnection::await_response(
    std::uint64_t id, std::chrono::steady_clock::time_point deadline) {
    std::unique_lock lock(mutex_);
    for (;;) {
        if (auto it = pending_.find(id); it != pending_.end()) {
            nlohmann::json response = std::move(it->second);
            pending_.erase(it);
            outstanding_.erase(id);
            cv_.notify_all();
            return response;
        }
        if (!poisoned_.empty()) {
            outstanding_.erase(id);
            throw ProtocolError(poisoned_);
        }
        if (reader_active_) {
            if (cv_.wait_until(lock, deadline) == std::cv_status::timeout) {
                outstanding_.erase(id);
                throw BackendTimeout("no response from " + description_ +
                                     " within timeout");
            }
            continue;
        }
        reader_active_ = true;
        try {
            read_some(lock, deadline);
        } catch (const ProtocolError& e) {
            reader_active_ = false;
            poisoned_ = e.what();
            outstanding_.erase(id);
            cv_.notify_all();
            throw;
        } catch (...) {
            reader_active_ = false;
            outstanding_.erase(id);
            cv_.notify_all();
            throw;
        }
        reader_active_ = false;
        cv_.notify_all();
    }
}

void BackendConnection::read_some(std::unique_lock<std::mutex>& lock,
                                  std::chrono::steady_clock::time_point deadline) {
    // Drain complete lines already buffered before touching the fd.
    bool processed = false;
    for (;;) {
        std::size_t eol = read_buffer_.find('\n');
        if (eol == std::string::npos) break;
        std::string line = read_buffer_.substr(0, eol);
        read_buffer_.erase(0, eol + 1);
        process_line(std::move(line));
        processed = true;
    }
    if (processed) return;

    lock.unlock();
    char chunk[4096];
    ssize_t n = 0;
    try {
        for (;;) {
            auto now = std::chrono::steady_clock::now();
            if (now >= deadline) {
                throw BackendTimeout("no response from " + description_ +
                                     " within timeout");
            }
            auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
                deadline - now);
            pollfd p{out_fd_, POLLIN, 0};
            int rc = ::poll(&p, 1, static_cast<int>(remaining.count()) + 1);
            if (rc == 0) {
                throw BackendTimeout("no response from " + description_ +
                                     " within timeout");
            }
            if (rc < 0) {
                if (errno == EINTR) continue;
                throw BackendUnavailable("poll on " + description_ + " failed");
            }
            n = ::read(out_fd_, chunk, sizeof chunk);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw BackendUnavailable("read from " + description_ +
                                         " failed: " + ::strerror(errno));
            }
            if (n == 0) {
                throw BackendUnavailable("backend " + description_ +
                                         " closed the connection");
            }
            break;
        }
    } catch (...) {
        lock.lock();
        throw;
    }
    lock.lock();
    read_buffer_.append(chunk, static_cast<std::size_t>(n));
}

void BackendConnection::process_line(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ++line_number_;
    if (line.empty()) return;

    nlohmann::json msg = nlohmann::json::parse(line, nullptr, false);
    if (msg.is_discarded() || !msg.is_object()) {
        throw ProtocolError("non-JSON line " + std::to_string(line_number_) +
                            " from " + description_);
    }
    if (!msg.contains("id") || !msg["id"].is_number_unsigned()) {
        throw ProtocolError("response without id on line " +
                            std::to_string(line_number_));
    }
    std::uint64_t rid = msg["id"].get<std::uint64_t>();
    bool has_result = msg.contains("result");
    bool has_error = msg.contains("error");
    if (has_result == has_error) {
        throw ProtocolError(
            "response must carry exactly one of result/error (line " +
            std::to_string(line_number_) + ")");
    }
    if (pending_.count(rid)) {
        throw ProtocolError("duplicate response id " + std::to_string(rid));
    }
    if (!outstanding_.count(rid)) {
        bool ever_sent = rid >= 1 && rid < next_id_;
        throw ProtocolError(std::string(ever_sent ? "duplicate response id "
                                                  : "unknown response id ") +
                            std::to_string(rid));
    }
    pending_[rid] = std::move(msg);
}

// ---------------------------------------------------------------------------
// Result validation
// ---------------------------------------------------------------------------

std::vector<TriggerVector> validate_triggers_response(
    const nlohmann::json& result, std::size_t n_sentences) {
    if (!result.is_object() || !result.contains("distributions") ||
        !result["distributions"].is_array()) {
        throw BackendViolation("malformed_result",
                               "classify_triggers needs a distributions array");
    }
    const auto& dists = result["distributions"];
    if (dists.size() != n_sentences) {
        throw BackendViolation("result_count_mismatch",
                               "expected " + std::to_string(n_sentences) +
                                   " distributions, got " +
                                   std::to_string(dists.size()));
    }
    std::vector<TriggerVector> out;
    out.reserve(n_sentences);
    for (const auto& row : dists) {
        if (!row.is_array() || row.size() != kNumTriggerClasses) {
            throw BackendViolation("malformed_result",
                                   "distribution must have 7 entries");
        }
        TriggerVector v{};
        for (std::size_t c = 0; c < kNumTriggerClasses; ++c) {
            if (!row[c].is_number()) {
                throw BackendViolation("malformed_result",
                                       "probabilities must be numbers");
            }
            v[c] = row[c].get<double>();
        }
        out.push_back(validate_distribution(v));
    }
    return out;
}

std::vector<std::vector<IntentSpan>> validate_intents_response(
    const nlohmann::json& result, const std::vector<Sentence>& sentences,
    const TagRegistry& registry, double confidence_cutoff) {
    if (!result.is_object() || !result.contains("spans") ||
        !result["spans"].is_array()) {
        throw BackendViolation("malformed_result",
                               "tag_intents needs a spans array");
    }
    const auto& rows = result["spans"];
    if (rows.size() != sentences.size()) {
        throw BackendViolation("result_count_mismatch",
                               "expected spans for " +
                                   std::to_string(sentences.size()) +
                                   " sentences, got " +
                                   std::to_string(rows.size()));
    }
    std::vector<std::vector<IntentSpan>> out(sentences.size());
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        if (!rows[i].is_array()) {
            throw BackendViolation("malformed_result",
                                   "per-sentence spans must be an array");
        }
        for (const auto& item : rows[i]) {
            if (!item.is_object() || !item.contains("token_start") ||
                !item.contains("token_end") || !item.contains("tag")) {
                throw BackendViolation("malformed_result",
                                       "span needs token_start/token_end/tag");
            }
            IntentSpan span;
            span.sentence_index = i;
            if (!item["token_start"].is_number_unsigned() ||
                !item["token_end"].is_number_unsigned()) {
                throw BackendViolation("span_out_of_bounds",
                                       "token range must be non-negative");
            }
            span.token_start = item["token_start"].get<std::size_t>();
            span.token_end = item["token_end"].get<std::size_t>();
            span.tag = item["tag"].get<std::string>();
            span.confidence = item.value("confidence", 1.0);
            if (span.token_start >= span.token_end ||
                span.token_end > sentences[i].tokens.size()) {
                throw BackendViolation(
                    "span_out_of_bounds",
                    "[" + std::to_string(span.token_start) + "," +
                        std::to_string(span.token_end) + ") in sentence " +
                        std::to_string(i) + " of " +
                        std::to_string(sentences[i].tokens.size()) + " tokens");
            }
            if (!(span.confidence >= 0.0 && span.confidence <= 1.0)) {
                throw BackendViolation("confidence_out_of_range",
                                       std::to_string(span.confidence));
            }
            if (!registry.contains(span.tag)) {
                throw BackendViolation("unregistered_tag", span.tag);
            }
            if (span.confidence >= confidence_cutoff) {
                out[i].push_back(std::move(span));
            }
        }
    }
    return out;
}

std::vector<std::size_t> validate_summarize_response(
    const nlohmann::json& result, std::size_t n_sentences) {
    if (!result.is_object() || !result.contains("selected") ||
        !result["selected"].is_array()) {
        throw BackendViolation("malformed_result",
                               "summarize needs a selected array");
    }
    std::vector<std::size_t> indices;
    std::set<std::size_t> seen;
    for (const auto& item : result["selected"]) {
        if (!item.is_number_unsigned()) {
            throw BackendViolation("index_out_of_range",
                                   "selected entries must be non-negative ints");
        }
        std::size_t idx = item.get<std::size_t>();
        if (idx >= n_sentences) {
            throw BackendViolation("index_out_of_range", std::to_string(idx));
        }
        if (!seen.insert(idx).second) {
            throw BackendViolation("duplicate_index", std::to_string(idx));
        }
        indices.push_back(idx);
    }
    return indices;
}

// ---------------------------------------------------------------------------
// Seam adapters
// ---------------------------------------------------------------------------

namespace {

nlohmann::json sentence_texts(const std::vector<Sentence>& sentences) {
    nlohmann::json arr = nlohmann::json::array();
    for (const Sentence& s : sentences) arr.push_back(s.text);
    return arr;
}

}  // namespace

std::vector<std::size_t> ExternalSummarizer::select(const EmailBody& body,
                                                    std::size_t budget) {
    nlohmann::json payload;
    payload["sentences"] = sentence_texts(body.sentences);
    nlohmann::json counts = nlohmann::json::array();
    for (const Sentence& s : body.sentences) counts.push_back(s.tokens.size());
    payload["token_counts"] = std::move(counts);
    payload["budget"] = budget;
    nlohmann::json result = conn_->invoke(BackendTask::summarize,
                                          std::move(payload));
    return validate_summarize_response(result, body.sentences.size());
}

std::vector<TriggerDistribution> ExternalTriggerBackend::classify(
    const std::vector<Sentence>& sentences) {
    nlohmann::json payload;
    payload["sentences"] = sentence_texts(sentences);
    nlohmann::json classes = nlohmann::json::array();
    for (std::string_view name : kTriggerClassNames) classes.push_back(name);
    payload["classes"] = std::move(classes);
    nlohmann::json result =
        conn_->invoke(BackendTask::classify_triggers, std::move(payload));
    std::vector<TriggerVector> vectors =
        validate_triggers_response(result, sentences.size());
    std::vector<TriggerDistribution> out;
    out.reserve(vectors.size());
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        out.push_back(TriggerDistribution{i, vectors[i]});
    }
    return out;
}

std::vector<std::vector<IntentSpan>> ExternalIntentBackend::tag(
    const std::vector<Sentence>& sentences) {
    nlohmann::json payload;
    payload["sentences"] = sentence_texts(sentences);
    nlohmann::json tokens = nlohmann::json::array();
    for (const Sentence& s : sentences) {
        nlohmann::json row = nlohmann::json::array();
        for (const Token& t : s.tokens) row.push_back(t.text);
        tokens.push_back(std::move(row));
    }
    payload["tokens"] = std::move(tokens);
    payload["tags"] = registry_->tags();
    nlohmann::json result =
        conn_->invoke(BackendTask::tag_intents, std::move(payload));
    return validate_intents_response(result, sentences, *registry_);
}

}  // namespace phishtriage
