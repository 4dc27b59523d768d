#pragma once

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstring>
#include <random>
#include <string>
#include <vector>

#include "phishtriage/email.hpp"
#include "phishtriage/text.hpp"

namespace testsupport {

struct CommandResult {
    std::string out;
    std::string err;
    int exit_code = -1;
};

// Runs a command with optional stdin bytes, capturing stdout/stderr.
inline CommandResult run_command(const std::vector<std::string>& argv,
                                 const std::string& stdin_bytes = {}) {
    int in_pipe[2], out_pipe[2], err_pipe[2];
    if (::pipe(in_pipe) || ::pipe(out_pipe) || ::pipe(err_pipe)) {
        return {"", "pipe failed", -1};
    }
    pid_t pid = ::fork();
    if (pid == 0) {
        ::dup2(in_pipe[0], 0);
        ::dup2(out_pipe[1], 1);
        ::dup2(err_pipe[1], 2);
        for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1],
                       err_pipe[0], err_pipe[1]}) {
            ::close(fd);
        }
        std::vector<char*> args;
        for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
        args.push_back(nullptr);
        ::execvp(args[0], args.data());
        ::_exit(127);
    }
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    ::close(err_pipe[1]);

    std::size_t off = 0;
    while (off < stdin_bytes.size()) {
        ssize_t n = ::write(in_pipe[1], stdin_bytes.data() + off,
                            stdin_bytes.size() - off);
        if (n <= 0) break;
        off += static_cast<std::size_t>(n);
    }
    ::close(in_pipe[1]);

    CommandResult result;
    pollfd fds[2] = {{out_pipe[0], POLLIN, 0}, {err_pipe[0], POLLIN, 0}};
    bool open_out = true, open_err = true;
    char buf[4096];
    while (open_out || open_err) {
        fds[0].events = open_out ? POLLIN : 0;
        fds[1].events = open_err ? POLLIN : 0;
        if (::poll(fds, 2, 30000) <= 0) break;
        if (open_out && (fds[0].revents & (POLLIN | POLLHUP))) {
            ssize_t n = ::read(out_pipe[0], buf, sizeof buf);
            if (n <= 0) open_out = false;
            else result.out.append(buf, static_cast<std::size_t>(n));
        }
        if (open_err && (fds[1].revents & (POLLIN | POLLHUP))) {
            ssize_t n = ::read(err_pipe[0], buf, sizeof buf);
            if (n <= 0) open_err = false;
            else result.err.append(buf, static_cast<std::size_t>(n));
        }
    }
    ::close(out_pipe[0]);
    ::close(err_pipe[0]);
    int status = 0;
    ::waitpid(pid, &status, 0);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

// Independent oracle: dense solve of (I - d P^T) s = (1-d)/n * 1, the
// stationary point of the damped walk. Plain Gaussian elimination.
inline std::vector<double> dense_stationary(
    const std::vector<std::vector<double>>& sim, double damping = 0.85) {
    const std::size_t n = sim.size();
    std::vector<double> row_sum(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (double v : sim[i]) row_sum[i] += v;
    }
    // A = I - d P^T
    std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
    for (std::size_t j = 0; j < n; ++j) a[j][j] = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double pij = row_sum[i] > 0.0
                             ? sim[i][j] / row_sum[i]
                             : 1.0 / static_cast<double>(n);
            a[j][i] -= damping * pij;
        }
    }
    std::vector<double> b(n, (1.0 - damping) / static_cast<double>(n));
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r) {
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        }
        std::swap(a[col], a[pivot]);
        std::swap(b[col], b[pivot]);
        for (std::size_t r = col + 1; r < n; ++r) {
            double f = a[r][col] / a[col][col];
            for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> s(n, 0.0);
    for (std::size_t r = n; r-- > 0;) {
        double acc = b[r];
        for (std::size_t c = r + 1; c < n; ++c) acc -= a[r][c] * s[c];
        s[r] = acc / a[r][r];
    }
    return s;
}

inline const std::vector<std::string>& plain_vocab() {
    static const std::vector<std::string> words = {
        "report",  "window",  "garden",  "coffee", "stapler", "ticket",
        "meeting", "summary", "project", "kitten", "yellow",  "harbor",
        "pencil",  "stream",  "bridge",  "planet", "circle",  "bottle",
        "market",  "lantern", "forest",  "puzzle", "saddle",  "mirror",
        "carpet",  "engine",  "anchor",  "violet", "summit",  "cradle",
        "hammer",  "races",   "folder",  "magnet", "helmet",  "donkey",
        "tunnel",  "sketch",  "napkin",  "rocket"};
    return words;
}

// Random multi-sentence body built from plain words; every sentence ends
// ". " and starts uppercase, so segmentation is exact and total_tokens
// equals the generated word count.
inline phishtriage::EmailBody random_body(std::mt19937_64& rng,
                                          std::size_t min_tokens,
                                          std::size_t max_tokens,
                                          std::size_t max_sentence_words = 15) {
    std::uniform_int_distribution<std::size_t> total_dist(min_tokens, max_tokens);
    std::size_t target = total_dist(rng);
    const auto& vocab = plain_vocab();
    std::string text;
    std::size_t emitted = 0;
    while (emitted < target) {
        std::uniform_int_distribution<std::size_t> len_dist(
            3, std::min(max_sentence_words, std::max<std::size_t>(3, target - emitted)));
        std::size_t len = std::min(len_dist(rng), target - emitted);
        if (len < 1) len = 1;
        for (std::size_t w = 0; w < len; ++w) {
            std::string word = vocab[rng() % vocab.size()];
            if (w == 0) word[0] = static_cast<char>(word[0] - 'a' + 'A');
            if (w) text += ' ';
            text += word;
        }
        text += ". ";
        emitted += len;
    }
    return phishtriage::make_body(text);
}

}  // namespace testsupport
