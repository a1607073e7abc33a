#pragma once

#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "kpsearch/fitness.hpp"
#include "kpsearch/sut.hpp"
#include "kpsearch/types.hpp"

namespace kpsearch {

// A response from the detector process that does not follow the wire format.
struct ProtocolError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ExternalSutConfig {
    std::string command;        // whitespace-separated program + arguments
    std::size_t key_points = 27;
    int timeout_ms = 10000;     // per response line
};

inline std::vector<std::string> tokenize_command(const std::string& command) {
    std::vector<std::string> tokens;
    std::string current;
    for (char c : command) {
        if (c == ' ' || c == '\t') {
            if (!current.empty()) tokens.push_back(std::move(current));
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

// Drives one detector process over pipes. Each evaluation writes one JSON
// request line to the child's stdin and expects exactly one JSON response
// line on its stdout:
//
//   -> {"hello": 1, "k": <key-points>}        once, at startup
//   <- {"ok": true}
//   -> {"roll": r, "pitch": p, "yaw": y, "model_id": m}
//   <- {"actual": [[x,y] | null, ...], "predicted": [[x,y], ...],
//       "face_width": w, "face_height": h}
//
// Anything else, including a timeout or the child exiting, raises
// ProtocolError and the caller's run stops with an error status.
class ExternalSut final : public Sut {
public:
    explicit ExternalSut(ExternalSutConfig config) : config_(std::move(config)) {
        spawn();
        handshake();
    }

    ExternalSut(const ExternalSut&) = delete;
    ExternalSut& operator=(const ExternalSut&) = delete;

    ~ExternalSut() override { shutdown(); }

    std::size_t key_point_count() const override { return config_.key_points; }
    std::uint64_t evaluations() const override { return evaluations_; }

    EvaluatedTestCase evaluate(const ImageCharacteristics& ic) override {
        ++evaluations_;
        nlohmann::json request{{"roll", ic.roll},
                               {"pitch", ic.pitch},
                               {"yaw", ic.yaw},
                               {"model_id", ic.model_id}};
        send_line(request.dump());
        nlohmann::json response = parse_line(read_line());

        EvaluatedTestCase test;
        test.ic = ic;
        parse_response(response, test.truth, test.prediction);
        test.fitness = fitness_vector(test.truth, test.prediction);
        return test;
    }

private:
    void spawn() {
        std::vector<std::string> tokens = tokenize_command(config_.command);
        if (tokens.empty()) throw ConfigError("external sut: empty command");

        int to_child[2], from_child[2];
        if (pipe(to_child) != 0 || pipe(from_child) != 0) {
            throw SutError("external sut: pipe failed");
        }
        pid_ = fork();
        if (pid_ < 0) throw SutError("external sut: fork failed");
        if (pid_ == 0) {
            dup2(to_child[0], STDIN_FILENO);
            dup2(from_child[1], STDOUT_FILENO);
            close(to_child[0]);
            close(to_child[1]);
            close(from_child[0]);
            close(from_child[1]);
            std::vector<char*> argv;
            argv.reserve(tokens.size() + 1);
            for (auto& t : tokens) argv.push_back(t.data());
            argv.push_back(nullptr);
            execvp(argv[0], argv.data());
            _exit(127);
        }
        close(to_child[0]);
        close(from_child[1]);
        write_fd_ = to_child[1];
        read_fd_ = from_child[0];
    }

    void handshake() {
        nlohmann::json hello{{"hello", 1}, {"k", config_.key_points}};
        send_line(hello.dump());
        nlohmann::json ack = parse_line(read_line());
        if (!ack.is_object() || !ack.contains("ok") || !ack["ok"].is_boolean() ||
            !ack["ok"].get<bool>()) {
            throw ProtocolError("external sut: bad handshake acknowledgement");
        }
    }

    void shutdown() {
        if (write_fd_ >= 0) close(write_fd_);
        if (read_fd_ >= 0) close(read_fd_);
        write_fd_ = read_fd_ = -1;
        if (pid_ <= 0) return;
        // A conforming detector exits on stdin EOF; give it a moment, then
        // make sure.
        for (int i = 0; i < 20; ++i) {
            int status = 0;
            pid_t r = waitpid(pid_, &status, WNOHANG);
            if (r == pid_ || r < 0) {
                pid_ = -1;
                return;
            }
            usleep(10000);
        }
        kill(pid_, SIGKILL);
        waitpid(pid_, nullptr, 0);
        pid_ = -1;
    }

    void send_line(std::string line) {
        line.push_back('\n');
        // Writing to a child that already exited raises SIGPIPE, which under
        // the default disposition kills the whole host process instead of
        // failing this one evaluation. Block the signal on this thread for
        // the duration, swallow the instance the failed write generated, and
        // let EPIPE surface as a ProtocolError like any other broken reply.
        sigset_t pipe_only, saved;
        sigemptyset(&pipe_only);
        sigaddset(&pipe_only, SIGPIPE);
        pthread_sigmask(SIG_BLOCK, &pipe_only, &saved);
        std::size_t sent = 0;
        int write_errno = 0;
        while (sent < line.size()) {
            ssize_t n = write(write_fd_, line.data() + sent, line.size() - sent);
            if (n < 0) {
                if (errno == EINTR) continue;
                write_errno = errno;
                break;
            }
            sent += static_cast<std::size_t>(n);
        }
        if (write_errno == EPIPE) {
            timespec zero{0, 0};
            while (sigtimedwait(&pipe_only, nullptr, &zero) > 0) {
            }
        }
        pthread_sigmask(SIG_SETMASK, &saved, nullptr);
        if (write_errno != 0) {
            throw ProtocolError(std::string("external sut: write failed: ") +
                                std::strerror(write_errno));
        }
    }

    std::string read_line() {
        auto deadline =
            std::chrono::steady_clock::now() + std::chrono::milliseconds(config_.timeout_ms);
        for (;;) {
            auto newline = buffer_.find('\n');
            if (newline != std::string::npos) {
                std::string line = buffer_.substr(0, newline);
                buffer_.erase(0, newline + 1);
                return line;
            }
            auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
                deadline - std::chrono::steady_clock::now());
            if (remaining.count() <= 0) {
                throw ProtocolError("external sut: response timeout");
            }
            pollfd pfd{read_fd_, POLLIN, 0};
            int ready = poll(&pfd, 1, static_cast<int>(remaining.count()));
            if (ready < 0) {
                if (errno == EINTR) continue;
                throw ProtocolError(std::string("external sut: poll failed: ") +
                                    std::strerror(errno));
            }
            if (ready == 0) throw ProtocolError("external sut: response timeout");
            char chunk[4096];
            ssize_t n = read(read_fd_, chunk, sizeof chunk);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw ProtocolError(std::string("external sut: read failed: ") +
                                    std::strerror(errno));
            }
            if (n == 0) throw ProtocolError("external sut: process closed its output");
            buffer_.append(chunk, static_cast<std::size_t>(n));
        }
    }

    static nlohmann::json parse_line(const std::string& line) {
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) throw ProtocolError("external sut: response is not valid JSON");
        return j;
    }

    static double finite_number(const nlohmann::json& j, const char* what) {
        if (!j.is_number()) throw ProtocolError(std::string("external sut: ") + what +
                                                " is not a number");
        double v = j.get<double>();
        if (!std::isfinite(v)) throw ProtocolError(std::string("external sut: ") + what +
                                                   " is not finite");
        return v;
    }

    static Point2D point(const nlohmann::json& j, const char* what) {
        if (!j.is_array() || j.size() != 2) {
            throw ProtocolError(std::string("external sut: ") + what + " is not an [x, y] pair");
        }
        return {finite_number(j[0], what), finite_number(j[1], what)};
    }

    void parse_response(const nlohmann::json& j, GroundTruth& truth, Prediction& pred) const {
        if (!j.is_object()) throw ProtocolError("external sut: response is not an object");
        for (const char* key : {"actual", "predicted", "face_width", "face_height"}) {
            if (!j.contains(key)) {
                throw ProtocolError(std::string("external sut: response missing ") + key);
            }
        }
        const auto& actual = j["actual"];
        const auto& predicted = j["predicted"];
        if (!actual.is_array() || actual.size() != config_.key_points) {
            throw ProtocolError("external sut: actual must list every key-point");
        }
        if (!predicted.is_array() || predicted.size() != config_.key_points) {
            throw ProtocolError("external sut: predicted must list every key-point");
        }
        truth.positions.clear();
        for (const auto& e : actual) {
            if (e.is_null()) {
                truth.positions.push_back(std::nullopt);
            } else {
                truth.positions.push_back(point(e, "actual entry"));
            }
        }
        pred.positions.clear();
        for (const auto& e : predicted) pred.positions.push_back(point(e, "predicted entry"));
        truth.face_width = finite_number(j["face_width"], "face_width");
        truth.face_height = finite_number(j["face_height"], "face_height");
        if (truth.face_width <= 0.0 || truth.face_height <= 0.0) {
            throw ProtocolError("external sut: face dimensions must be positive");
        }
    }

    ExternalSutConfig config_;
    pid_t pid_ = -1;
    int write_fd_ = -1;
    int read_fd_ = -1;
    std::string buffer_;
    std::uint64_t evaluations_ = 0;
};

}  // namespace kpsearch
