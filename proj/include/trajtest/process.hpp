// Copyright 2026 The trajtest Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include "trajtest/error.hpp"
#include "trajtest/sut.hpp"
#include "trajtest/wire.hpp"

namespace trajtest
{

/// Child process running `sh -c command` with line-oriented stdin/stdout pipes. stderr is
/// inherited.
class Subprocess
{
public:
  explicit Subprocess(const std::string & command)
  {
    static std::once_flag ignore_sigpipe;
    std::call_once(ignore_sigpipe, [] {::signal(SIGPIPE, SIG_IGN);});
    int to_child[2];
    int from_child[2];
    if (::pipe2(to_child, O_CLOEXEC) != 0) {throw IoError("pipe: " + std::string(std::strerror(errno)));}
    if (::pipe2(from_child, O_CLOEXEC) != 0) {
      ::close(to_child[0]);
      ::close(to_child[1]);
      throw IoError("pipe: " + std::string(std::strerror(errno)));
    }
    pid_ = ::fork();
    if (pid_ < 0) {
      for (int fd : {to_child[0], to_child[1], from_child[0], from_child[1]}) {::close(fd);}
      throw IoError("fork: " + std::string(std::strerror(errno)));
    }
    if (pid_ == 0) {
      ::setpgid(0, 0);
      ::dup2(to_child[0], STDIN_FILENO);
      ::dup2(from_child[1], STDOUT_FILENO);
      ::signal(SIGPIPE, SIG_DFL);
      ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char *>(nullptr));
      ::_exit(127);
    }
    ::setpgid(pid_, pid_);
    ::close(to_child[0]);
    ::close(from_child[1]);
    in_ = to_child[1];
    out_ = from_child[0];
  }

  Subprocess(const Subprocess &) = delete;
  Subprocess & operator=(const Subprocess &) = delete;

  ~Subprocess() {terminate();}

  pid_t pid() const noexcept {return pid_;}

  void write_line(std::string_view line)
  {
    std::string buf(line);
    buf.push_back('\n');
    std::size_t done = 0;
    while (done < buf.size()) {
      const ssize_t n = ::write(in_, buf.data() + done, buf.size() - done);
      if (n < 0) {
        if (errno == EINTR) {continue;}
        throw IoError("write to predictor: " + std::string(std::strerror(errno)));
      }
      done += static_cast<std::size_t>(n);
    }
  }

  /// Next line without its newline, or nullopt on timeout. Throws IoError at end of stream.
  std::optional<std::string> read_line(std::chrono::milliseconds timeout)
  {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
      if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') {line.pop_back();}
        return line;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) {return std::nullopt;}
      pollfd pfd{out_, POLLIN, 0};
      const int ready = ::poll(&pfd, 1, static_cast<int>(left.count()));
      if (ready < 0) {
        if (errno == EINTR) {continue;}
        throw IoError("poll: " + std::string(std::strerror(errno)));
      }
      if (ready == 0) {return std::nullopt;}
      char chunk[65536];
      const ssize_t n = ::read(out_, chunk, sizeof(chunk));
      if (n < 0) {
        if (errno == EINTR) {continue;}
        throw IoError("read from predictor: " + std::string(std::strerror(errno)));
      }
      if (n == 0) {throw IoError("predictor closed its output");}
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  /// Closes stdin, gives the child a moment to exit, then kills it.
  void terminate() noexcept
  {
    if (in_ >= 0) {::close(in_);}
    if (out_ >= 0) {::close(out_);}
    in_ = out_ = -1;
    if (pid_ <= 0) {return;}
    int status = 0;
    for (int i = 0; i < 20; ++i) {
      if (::waitpid(pid_, &status, WNOHANG) == pid_) {
        pid_ = -1;
        return;
      }
      ::usleep(5000);
    }
    // The command may have forked (pipelines, wrappers): kill its whole process group.
    ::kill(-pid_, SIGKILL);
    ::waitpid(pid_, &status, 0);
    pid_ = -1;
  }

private:
  pid_t pid_{-1};
  int in_{-1};
  int out_{-1};
  std::string buffer_;
};

/// Predictor behind an external command that speaks the wire protocol. A crashed or hung
/// process is restarted on the next call.
class ExternalProcessSut : public Predictor
{
public:
  explicit ExternalProcessSut(std::string command,
    std::chrono::milliseconds timeout = std::chrono::seconds(120))
  : command_(std::move(command)), timeout_(timeout)
  {
    start();
  }

  SutResponse predict(const SutRequest & req) override
  {
    validate_request(req);
    if (!proc_) {start();}
    std::optional<std::string> line;
    try {
      proc_->write_line(wire::encode_request(req).dump());
      line = proc_->read_line(timeout_);
    } catch (const IoError & e) {
      proc_.reset();
      throw SutError(req.scene_id, std::string("predictor process failed: ") + e.what());
    }
    if (!line) {
      proc_.reset();
      throw SutError(req.scene_id, "predictor timed out after " +
              std::to_string(timeout_.count()) + " ms");
    }
    wire::json msg;
    try {
      msg = wire::json::parse(*line);
    } catch (const wire::json::exception & e) {
      throw SutError(req.scene_id, std::string("response is not JSON: ") + e.what(), *line);
    }
    return wire::decode_response(msg, req, *line);
  }

  bool provides_prob_map() const override {return provides_prob_map_;}
  std::string name() const override {return "cmd:" + command_;}

private:
  void start()
  {
    auto proc = std::make_unique<Subprocess>(command_);
    const auto fail = [&](const std::string & why, const std::string & raw = {}) {
        throw SutError("<handshake>", "predictor '" + command_ + "' " + why, raw);
      };
    std::optional<std::string> line;
    try {
      proc->write_line(wire::hello().dump());
      line = proc->read_line(timeout_);
    } catch (const IoError & e) {
      fail(std::string("failed during handshake: ") + e.what());
    }
    if (!line) {fail("did not answer hello");}
    wire::json msg;
    try {
      msg = wire::json::parse(*line);
    } catch (const wire::json::exception &) {
      fail("answered hello with something that is not JSON", *line);
    }
    if (!msg.is_object() || msg.value("type", "") != "ready") {
      fail("answered hello without 'ready'", *line);
    }
    provides_prob_map_ = msg.value("provides_prob_map", false);
    proc_ = std::move(proc);
  }

  std::string command_;
  std::chrono::milliseconds timeout_;
  std::unique_ptr<Subprocess> proc_;
  bool provides_prob_map_{false};
};

}  // namespace trajtest
