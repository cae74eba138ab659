#pragma once

#include "ifit/core/errors.hpp"
#include "ifit/core/simulator.hpp"
#include "ifit/core/types.hpp"

#include <nlohmann/json.hpp>

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

namespace ifit::cli {

/// Simulator backed by an external executable speaking newline-delimited
/// JSON: request {"theta":[...],"seed":N}, response {"t":[...]}. A pool of
/// child processes serves concurrent calls, one request in flight per child.
class SubprocessSimulator final : public Simulator {
public:
    static constexpr std::chrono::milliseconds kDefaultTimeout{60000};

    SubprocessSimulator(std::string executable, Bounds bounds, std::size_t q, std::size_t pool_size = 1,
                        std::chrono::milliseconds timeout = kDefaultTimeout)
        : exe_(std::move(executable)), bounds_(std::move(bounds)), q_(q), timeout_(timeout),
          children_(std::max<std::size_t>(pool_size, 1)) {
        if (q_ == 0) throw ConfigError("subprocess simulator: q must be positive");
        if (::access(exe_.c_str(), X_OK) != 0) throw ConfigError("subprocess simulator: '" + exe_ + "' is not executable");
        ::signal(SIGPIPE, SIG_IGN);
        for (std::size_t i = 0; i < children_.size(); ++i) idle_.push_back(i);
    }

    SubprocessSimulator(const SubprocessSimulator&) = delete;
    SubprocessSimulator& operator=(const SubprocessSimulator&) = delete;

    ~SubprocessSimulator() override {
        for (auto& c : children_) stop(c);
    }

    const Bounds& bounds() const override { return bounds_; }
    std::size_t dim_stat() const override { return q_; }

    /// Number of child processes started so far (restarts included).
    std::size_t spawn_count() const {
        std::lock_guard lock(mutex_);
        return spawned_;
    }

    Vector simulate(const Vector& theta, RngStream rng) const override {
        const std::size_t slot = acquire();
        struct Release {
            const SubprocessSimulator* self;
            std::size_t slot;
            ~Release() { self->release(slot); }
        } release{this, slot};
        Child& child = children_[slot];

        nlohmann::json req;
        req["theta"] = std::vector<double>(theta.data(), theta.data() + theta.size());
        req["seed"] = rng.key();
        const std::string line = req.dump() + "\n";

        std::string reply;
        bool ok = false;
        for (int attempt = 0; attempt < 2 && !ok; ++attempt) {
            if (child.pid <= 0) start(child);
            ok = exchange(child, line, reply);
            if (!ok) stop(child);
        }
        if (!ok) throw ProtocolError("external simulator timed out or exited twice for one request", theta);
        return parse_reply(reply, theta);
    }

private:
    struct Child {
        pid_t pid = -1;
        int to_child = -1;
        int from_child = -1;
        std::string buffer;
    };

    std::size_t acquire() const {
        std::unique_lock lock(mutex_);
        available_.wait(lock, [&] { return !idle_.empty(); });
        const std::size_t slot = idle_.back();
        idle_.pop_back();
        return slot;
    }

    void release(std::size_t slot) const {
        {
            std::lock_guard lock(mutex_);
            idle_.push_back(slot);
        }
        available_.notify_one();
    }

    void start(Child& c) const {
        int in_pipe[2];
        int out_pipe[2];
        if (::pipe2(in_pipe, O_CLOEXEC) != 0) throw Error(std::string("pipe failed: ") + std::strerror(errno));
        if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
            ::close(in_pipe[0]);
            ::close(in_pipe[1]);
            throw Error(std::string("pipe failed: ") + std::strerror(errno));
        }
        const pid_t pid = ::fork();
        if (pid < 0) throw Error(std::string("fork failed: ") + std::strerror(errno));
        if (pid == 0) {
            ::dup2(in_pipe[0], STDIN_FILENO);
            ::dup2(out_pipe[1], STDOUT_FILENO);
            ::execl(exe_.c_str(), exe_.c_str(), static_cast<char*>(nullptr));
            ::_exit(127);
        }
        ::close(in_pipe[0]);
        ::close(out_pipe[1]);
        c.pid = pid;
        c.to_child = in_pipe[1];
        c.from_child = out_pipe[0];
        c.buffer.clear();
        std::lock_guard lock(mutex_);
        ++spawned_;
    }

    static void stop(Child& c) {
        if (c.to_child >= 0) ::close(c.to_child);
        if (c.from_child >= 0) ::close(c.from_child);
        if (c.pid > 0) {
            ::kill(c.pid, SIGKILL);
            ::waitpid(c.pid, nullptr, 0);
        }
        c = Child{};
    }

    /// Sends one request and reads one line. False on timeout, EOF or a
    /// broken pipe (the caller restarts the child).
    bool exchange(Child& c, const std::string& line, std::string& reply) const {
        std::size_t sent = 0;
        while (sent < line.size()) {
            const ssize_t n = ::write(c.to_child, line.data() + sent, line.size() - sent);
            if (n < 0 && errno == EINTR) continue;
            if (n <= 0) return false;
            sent += static_cast<std::size_t>(n);
        }
        const auto deadline = std::chrono::steady_clock::now() + timeout_;
        for (;;) {
            const auto nl = c.buffer.find('\n');
            if (nl != std::string::npos) {
                reply = c.buffer.substr(0, nl);
                c.buffer.erase(0, nl + 1);
                return true;
            }
            const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
            if (left.count() <= 0) return false;
            pollfd pfd{c.from_child, POLLIN, 0};
            const int rc = ::poll(&pfd, 1, static_cast<int>(left.count()));
            if (rc < 0 && errno == EINTR) continue;
            if (rc <= 0) return false;
            char buf[4096];
            const ssize_t n = ::read(c.from_child, buf, sizeof buf);
            if (n < 0 && errno == EINTR) continue;
            if (n <= 0) return false;
            c.buffer.append(buf, static_cast<std::size_t>(n));
        }
    }

    Vector parse_reply(const std::string& reply, const Vector& theta) const {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(reply);
        } catch (const nlohmann::json::exception&) {
            throw ProtocolError("external simulator sent malformed JSON: " + reply.substr(0, 200), theta);
        }
        if (!j.is_object() || !j.contains("t") || !j["t"].is_array())
            throw ProtocolError("external simulator reply lacks a \"t\" array", theta);
        std::vector<double> t;
        try {
            t = j["t"].get<std::vector<double>>();
        } catch (const nlohmann::json::exception&) {
            throw ProtocolError("external simulator reply has non-numeric \"t\" entries", theta);
        }
        if (t.size() != q_) {
            std::ostringstream os;
            os << "external simulator returned " << t.size() << " statistics, expected " << q_;
            throw ProtocolError(os.str(), theta);
        }
        return Eigen::Map<const Vector>(t.data(), static_cast<Eigen::Index>(t.size()));
    }

    std::string exe_;
    Bounds bounds_;
    std::size_t q_;
    std::chrono::milliseconds timeout_;
    mutable std::vector<Child> children_;
    mutable std::vector<std::size_t> idle_;
    mutable std::mutex mutex_;
    mutable std::condition_variable available_;
    mutable std::size_t spawned_ = 0;
};

}  // namespace ifit::cli
