#pragma once

#include <poll.h>
#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "florence2_interfaces/error_code.hpp"

namespace florence2_bridge {

/// Child process with piped stdin/stdout; stderr is inherited.
class Subprocess {
 public:
  using Env = std::vector<std::pair<std::string, std::string>>;

  static Subprocess spawn(const std::vector<std::string>& argv, const Env& env = {}) {
    if (argv.empty()) throw std::invalid_argument("empty argv");
    int to_child[2];
    int from_child[2];
    if (pipe(to_child) != 0) throw std::system_error(errno, std::generic_category(), "pipe");
    if (pipe(from_child) != 0) {
      close(to_child[0]);
      close(to_child[1]);
      throw std::system_error(errno, std::generic_category(), "pipe");
    }

    std::vector<char*> args;
    for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);

    pid_t pid = fork();
    if (pid < 0) throw std::system_error(errno, std::generic_category(), "fork");
    if (pid == 0) {
      dup2(to_child[0], STDIN_FILENO);
      dup2(from_child[1], STDOUT_FILENO);
      close(to_child[0]);
      close(to_child[1]);
      close(from_child[0]);
      close(from_child[1]);
      for (const auto& [key, value] : env) setenv(key.c_str(), value.c_str(), 1);
      execvp(args[0], args.data());
      _exit(127);
    }
    close(to_child[0]);
    close(from_child[1]);
    return Subprocess(pid, to_child[1], from_child[0]);
  }

  Subprocess(Subprocess&& other) noexcept
      : pid_(std::exchange(other.pid_, -1)),
        stdin_fd_(std::exchange(other.stdin_fd_, -1)),
        stdout_fd_(std::exchange(other.stdout_fd_, -1)),
        buffer_(std::move(other.buffer_)) {}

  Subprocess& operator=(Subprocess&& other) noexcept {
    if (this != &other) {
      terminate();
      pid_ = std::exchange(other.pid_, -1);
      stdin_fd_ = std::exchange(other.stdin_fd_, -1);
      stdout_fd_ = std::exchange(other.stdout_fd_, -1);
      buffer_ = std::move(other.buffer_);
    }
    return *this;
  }

  ~Subprocess() { terminate(); }

  pid_t pid() const { return pid_; }

  void write_all(std::string_view bytes) {
    while (!bytes.empty()) {
      ssize_t n = ::write(stdin_fd_, bytes.data(), bytes.size());
      if (n < 0) {
        if (errno == EINTR) continue;
        throw std::system_error(errno, std::generic_category(), "write to child");
      }
      bytes.remove_prefix(static_cast<std::size_t>(n));
    }
  }

  /// Next '\n'-terminated line without the terminator. nullopt on timeout;
  /// throws when the child closed its stdout.
  std::optional<std::string> read_line(std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    while (true) {
      if (auto pos = buffer_.find('\n'); pos != std::string::npos) {
        std::string line = buffer_.substr(0, pos);
        buffer_.erase(0, pos + 1);
        return line;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) return std::nullopt;
      pollfd pfd{stdout_fd_, POLLIN, 0};
      int ready = poll(&pfd, 1, static_cast<int>(left.count()));
      if (ready < 0) {
        if (errno == EINTR) continue;
        throw std::system_error(errno, std::generic_category(), "poll");
      }
      if (ready == 0) return std::nullopt;
      char chunk[4096];
      ssize_t n = ::read(stdout_fd_, chunk, sizeof(chunk));
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) {
        throw florence2_interfaces::Error(florence2_interfaces::ErrorCode::kInferenceFailure,
                                          "child process closed its output");
      }
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  bool running() {
    if (pid_ <= 0) return false;
    int status = 0;
    pid_t r = waitpid(pid_, &status, WNOHANG);
    if (r == pid_) {
      exit_status_ = decode(status);
      pid_ = -1;
      return false;
    }
    return r == 0;
  }

  /// SIGTERM, then SIGKILL after the grace period. Returns the exit status.
  int terminate(std::chrono::milliseconds grace = std::chrono::milliseconds(2000)) {
    if (stdin_fd_ >= 0) {
      close(stdin_fd_);
      stdin_fd_ = -1;
    }
    if (pid_ > 0) {
      kill(pid_, SIGTERM);
      const auto deadline = std::chrono::steady_clock::now() + grace;
      while (running() && std::chrono::steady_clock::now() < deadline) {
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
      }
      if (pid_ > 0) {
        kill(pid_, SIGKILL);
        int status = 0;
        waitpid(pid_, &status, 0);
        exit_status_ = decode(status);
        pid_ = -1;
      }
    }
    if (stdout_fd_ >= 0) {
      close(stdout_fd_);
      stdout_fd_ = -1;
    }
    return exit_status_;
  }

 private:
  Subprocess(pid_t pid, int in, int out) : pid_(pid), stdin_fd_(in), stdout_fd_(out) {}

  static int decode(int status) {
    if (WIFEXITED(status)) return WEXITSTATUS(status);
    if (WIFSIGNALED(status)) return 128 + WTERMSIG(status);
    return -1;
  }

  pid_t pid_ = -1;
  int stdin_fd_ = -1;
  int stdout_fd_ = -1;
  std::string buffer_;
  int exit_status_ = -1;
};

}  // namespace florence2_bridge
