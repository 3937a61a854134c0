#pragma once
// Newline-delimited JSON channel to an external model process.
//
//   child  -> parent (once): {"input_dim":d,"output_dim":t}
//   parent -> child:         {"id":<int>,"x":[<d floats>]}
//   child  -> parent:        {"id":<int>,"y":[<t floats>]}
//
// The child exits when its stdin is closed.

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "rsreg/error.hpp"
#include "rsreg/format.hpp"
#include "rsreg/region.hpp"

namespace rsreg::models {

class SubprocessChannel {
 public:
  using Clock = std::chrono::steady_clock;

  SubprocessChannel(const std::string& command, std::chrono::milliseconds timeout)
      : command_(command), timeout_(timeout) {
    if (command.empty()) throw DomainError("subprocess model: empty command");
    spawn();
    read_handshake();
  }

  SubprocessChannel(const SubprocessChannel&) = delete;
  SubprocessChannel& operator=(const SubprocessChannel&) = delete;

  ~SubprocessChannel() { shutdown(); }

  std::size_t input_dim() const { return input_dim_; }
  std::size_t output_dim() const { return output_dim_; }
  const std::string& stderr_text() const { return stderr_buf_; }

  /// One request line per input; waits for all replies or the batch timeout.
  std::vector<Vector> call(std::span<const Vector> xs) {
    if (broken_) fail("model process is no longer usable");
    std::vector<Vector> replies(xs.size());
    if (xs.empty()) return replies;

    const std::int64_t first_id = next_id_;
    std::string outbox;
    for (const auto& x : xs) {
      if (x.size() != input_dim_) {
        throw DomainError("subprocess model: input has " + std::to_string(x.size()) +
                          " components, expected " + std::to_string(input_dim_));
      }
      outbox += request_line(next_id_++, x);
    }

    std::vector<char> filled(xs.size(), 0);
    std::size_t received = 0;
    std::size_t written = 0;
    const auto deadline = Clock::now() + timeout_;
    while (received < xs.size()) {
      pollfd fds[3];
      nfds_t nfds = 0;
      fds[nfds++] = {out_fd_, POLLIN, 0};
      fds[nfds++] = {err_fd_ >= 0 ? err_fd_ : -1, POLLIN, 0};
      const bool want_write = written < outbox.size();
      if (want_write) fds[nfds++] = {in_fd_, POLLOUT, 0};

      wait_on(fds, nfds, deadline, "waiting for model replies");

      if (fds[1].revents & (POLLIN | POLLHUP)) drain_stderr();
      if (want_write && (fds[2].revents & POLLOUT)) {
        const ssize_t n = ::send(in_fd_, outbox.data() + written, outbox.size() - written,
                                 MSG_NOSIGNAL | MSG_DONTWAIT);
        if (n > 0) {
          written += static_cast<std::size_t>(n);
        } else if (n < 0 && errno != EAGAIN && errno != EWOULDBLOCK && errno != EINTR) {
          fail(std::string("write to model process failed: ") + std::strerror(errno));
        }
      } else if (want_write && (fds[2].revents & (POLLERR | POLLHUP))) {
        fail("model process closed its input");
      }
      if (fds[0].revents & (POLLIN | POLLHUP | POLLERR)) {
        if (!fill_stdout()) fail("model process exited before replying");
        std::string line;
        while (take_line(line)) {
          auto [id, y] = parse_reply(line);
          const std::int64_t slot = id - first_id;
          if (slot < 0 || slot >= static_cast<std::int64_t>(xs.size()) || filled[slot]) {
            fail("model reply has unexpected id " + std::to_string(id));
          }
          filled[slot] = 1;
          replies[slot] = std::move(y);
          ++received;
        }
      }
    }
    return replies;
  }

 private:
  static std::string request_line(std::int64_t id, const Vector& x) {
    std::string line = "{\"id\":" + std::to_string(id) + ",\"x\":[";
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (!std::isfinite(x[i])) throw DomainError("subprocess model: non-finite input");
      if (i) line += ',';
      line += format_double(x[i]);
    }
    line += "]}\n";
    return line;
  }

  void spawn() {
    int in_pair[2];
    int out_pipe[2];
    int err_pipe[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, in_pair) != 0) {
      throw TransportError(std::string("socketpair: ") + std::strerror(errno));
    }
    if (::pipe2(out_pipe, O_CLOEXEC) != 0 || ::pipe2(err_pipe, O_CLOEXEC) != 0) {
      throw TransportError(std::string("pipe: ") + std::strerror(errno));
    }
    pid_ = ::fork();
    if (pid_ < 0) throw TransportError(std::string("fork: ") + std::strerror(errno));
    if (pid_ == 0) {
      ::dup2(in_pair[1], STDIN_FILENO);
      ::dup2(out_pipe[1], STDOUT_FILENO);
      ::dup2(err_pipe[1], STDERR_FILENO);
      ::execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(in_pair[1]);
    ::close(out_pipe[1]);
    ::close(err_pipe[1]);
    in_fd_ = in_pair[0];
    out_fd_ = out_pipe[0];
    err_fd_ = err_pipe[0];
    for (int fd : {in_fd_, out_fd_, err_fd_}) {
      ::fcntl(fd, F_SETFL, ::fcntl(fd, F_GETFL) | O_NONBLOCK);
    }
  }

  void read_handshake() {
    const auto deadline = Clock::now() + timeout_;
    std::string line;
    while (!take_line(line)) {
      pollfd fds[2] = {{out_fd_, POLLIN, 0}, {err_fd_, POLLIN, 0}};
      wait_on(fds, 2, deadline, "waiting for model handshake");
      if (fds[1].revents & (POLLIN | POLLHUP)) drain_stderr();
      if (fds[0].revents & (POLLIN | POLLHUP | POLLERR)) {
        if (!fill_stdout()) fail("model process exited before handshake");
      }
    }
    try {
      const auto j = nlohmann::json::parse(line);
      input_dim_ = j.at("input_dim").get<std::size_t>();
      output_dim_ = j.at("output_dim").get<std::size_t>();
    } catch (const std::exception& e) {
      fail("malformed handshake '" + line + "': " + e.what());
    }
    if (input_dim_ == 0 || output_dim_ == 0) fail("handshake reports zero dimension");
  }

  std::pair<std::int64_t, Vector> parse_reply(const std::string& line) {
    try {
      const auto j = nlohmann::json::parse(line);
      auto id = j.at("id").get<std::int64_t>();
      auto y = j.at("y").get<Vector>();
      if (y.size() != output_dim_) {
        fail("reply has " + std::to_string(y.size()) + " outputs, expected " +
             std::to_string(output_dim_));
      }
      return {id, std::move(y)};
    } catch (const TransportError&) {
      throw;
    } catch (const std::exception& e) {
      fail("malformed reply '" + line.substr(0, 200) + "': " + e.what());
    }
    return {};
  }

  void wait_on(pollfd* fds, nfds_t nfds, Clock::time_point deadline, const char* what) {
    for (;;) {
      const auto left =
          std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
      if (left.count() <= 0) {
        fail(std::string("timeout after ") + std::to_string(timeout_.count()) + " ms " + what);
      }
      const int rc = ::poll(fds, nfds, static_cast<int>(std::min<std::int64_t>(left.count(), 1000)));
      if (rc > 0) return;
      if (rc < 0 && errno != EINTR) fail(std::string("poll: ") + std::strerror(errno));
    }
  }

  // false on EOF
  bool fill_stdout() {
    char buf[65536];
    for (;;) {
      const ssize_t n = ::read(out_fd_, buf, sizeof buf);
      if (n > 0) {
        stdout_buf_.append(buf, static_cast<std::size_t>(n));
        continue;
      }
      if (n == 0) return stdout_buf_.find('\n') != std::string::npos;
      if (errno == EINTR) continue;
      return true;  // EAGAIN
    }
  }

  void drain_stderr() {
    if (err_fd_ < 0) return;
    char buf[4096];
    for (;;) {
      const ssize_t n = ::read(err_fd_, buf, sizeof buf);
      if (n > 0) {
        if (stderr_buf_.size() < kStderrCap) stderr_buf_.append(buf, static_cast<std::size_t>(n));
        continue;
      }
      if (n == 0) {
        ::close(err_fd_);
        err_fd_ = -1;
      }
      return;
    }
  }

  bool take_line(std::string& line) {
    const auto pos = stdout_buf_.find('\n');
    if (pos == std::string::npos) return false;
    line.assign(stdout_buf_, 0, pos);
    stdout_buf_.erase(0, pos + 1);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  }

  [[noreturn]] void fail(const std::string& what) {
    broken_ = true;
    drain_stderr();
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    drain_stderr();
    shutdown();
    std::string msg = "subprocess model '" + command_ + "': " + what;
    if (exit_status_ >= 0) msg += " (exit status " + std::to_string(exit_status_) + ")";
    if (!stderr_buf_.empty()) msg += "; stderr: " + stderr_buf_;
    throw TransportError(msg);
  }

  void shutdown() {
    if (in_fd_ >= 0) {
      ::close(in_fd_);
      in_fd_ = -1;
    }
    if (pid_ > 0) {
      int status = 0;
      pid_t done = 0;
      for (int i = 0; i < 100 && done == 0; ++i) {
        done = ::waitpid(pid_, &status, WNOHANG);
        if (done == 0) std::this_thread::sleep_for(std::chrono::milliseconds(10));
      }
      if (done == 0) {
        ::kill(pid_, SIGKILL);
        ::waitpid(pid_, &status, 0);
      }
      if (done > 0 && WIFEXITED(status)) exit_status_ = WEXITSTATUS(status);
      pid_ = -1;
    }
    if (out_fd_ >= 0) {
      ::close(out_fd_);
      out_fd_ = -1;
    }
    if (err_fd_ >= 0) {
      ::close(err_fd_);
      err_fd_ = -1;
    }
  }

  static constexpr std::size_t kStderrCap = 16384;

  std::string command_;
  std::chrono::milliseconds timeout_;
  pid_t pid_ = -1;
  int in_fd_ = -1;
  int out_fd_ = -1;
  int err_fd_ = -1;
  int exit_status_ = -1;
  bool broken_ = false;
  std::int64_t next_id_ = 0;
  std::size_t input_dim_ = 0;
  std::size_t output_dim_ = 0;
  std::string stdout_buf_;
  std::string stderr_buf_;
};

}  // namespace rsreg::models
