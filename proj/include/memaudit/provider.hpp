// Copyright 2026 The memaudit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <netdb.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>
#include <istream>
#include <memory>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>

#include "memaudit/codec.hpp"
#include "memaudit/error.hpp"
#include "memaudit/ngram.hpp"

namespace memaudit {

/// Anything that can report perplexity(sequence) > 0.
class PerplexityProvider {
 public:
  virtual ~PerplexityProvider() = default;
  virtual double perplexity(std::string_view seq) = 0;
  /// Short description for report echoes.
  virtual std::string describe() const = 0;
};

class NgramPerplexity final : public PerplexityProvider {
 public:
  explicit NgramPerplexity(std::shared_ptr<const NgramModel> model) : model_(std::move(model)) {}

  double perplexity(std::string_view seq) override { return model_->perplexity(seq); }
  std::string describe() const override {
    return "ngram(order=" + std::to_string(model_->order()) + ", k=" + format_double(model_->smoothing()) +
           ", fingerprint=" + model_->fingerprint() + ")";
  }
  const NgramModel& model() const noexcept { return *model_; }

 private:
  std::shared_ptr<const NgramModel> model_;
};

// Wire protocol, one request in flight per connection:
//   request:  "PPL " base64(sequence) "\n"
//   response: decimal perplexity "\n"

inline std::string encode_request(std::string_view seq) { return "PPL " + base64_encode(seq) + "\n"; }

/// Parses one response line (without its newline). Rejects anything that is
/// not a finite positive decimal, carrying the raw line in the error.
inline double parse_response(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  auto v = parse_double(line);
  if (!v) throw ProtocolError("malformed perplexity response", std::string(line));
  if (!std::isfinite(*v)) throw ProtocolError("non-finite perplexity", std::string(line));
  if (*v <= 0.0) throw ProtocolError("non-positive perplexity", std::string(line));
  return *v;
}

/// Serves requests from `in` until end of input. A request that cannot be
/// answered gets an "ERR <reason>" line, which clients reject as malformed.
inline void serve_perplexity(PerplexityProvider& provider, std::istream& in, std::ostream& out) {
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string reply;
    if (line.rfind("PPL ", 0) != 0) {
      reply = "ERR expected PPL request";
    } else if (auto seq = base64_decode(std::string_view(line).substr(4)); !seq) {
      reply = "ERR bad base64";
    } else {
      try {
        reply = format_double(provider.perplexity(*seq));
      } catch (const std::exception& e) {
        reply = std::string("ERR ") + e.what();
        for (auto& c : reply) {
          if (c == '\n' || c == '\r') c = ' ';
        }
      }
    }
    out << reply << '\n' << std::flush;
  }
}

namespace detail {

// Line-oriented client over a pair of file descriptors.
class FdChannel {
 public:
  FdChannel(int read_fd, int write_fd) : read_fd_(read_fd), write_fd_(write_fd) {}
  FdChannel(const FdChannel&) = delete;
  FdChannel& operator=(const FdChannel&) = delete;

  ~FdChannel() { close_all(); }

  void close_all() {
    if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
    if (read_fd_ >= 0) ::close(read_fd_);
    read_fd_ = write_fd_ = -1;
  }

  void send(std::string_view data) {
    while (!data.empty()) {
      const ssize_t n = ::write(write_fd_, data.data(), data.size());
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) throw ProtocolError(std::string("write to perplexity provider failed: ") + std::strerror(errno), "");
      data.remove_prefix(static_cast<std::size_t>(n));
    }
  }

  std::string receive_line() {
    for (;;) {
      if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return line;
      }
      char chunk[4096];
      const ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
      if (n < 0 && errno == EINTR) continue;
      if (n < 0) throw ProtocolError(std::string("read from perplexity provider failed: ") + std::strerror(errno), buffer_);
      if (n == 0) throw ProtocolError("perplexity provider closed the connection", buffer_);
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 private:
  int read_fd_;
  int write_fd_;
  std::string buffer_;
};

inline void ignore_sigpipe() {
  static const bool done = [] {
    ::signal(SIGPIPE, SIG_IGN);
    return true;
  }();
  (void)done;
}

}  // namespace detail

/// Client for a provider reached through the wire protocol.
class ExternalPerplexity final : public PerplexityProvider {
 public:
  ExternalPerplexity(std::string endpoint, int read_fd, int write_fd, pid_t child)
      : endpoint_(std::move(endpoint)), channel_(read_fd, write_fd), child_(child) {}

  ~ExternalPerplexity() override {
    channel_.close_all();
    if (child_ > 0) {
      int status = 0;
      ::waitpid(child_, &status, 0);
    }
  }

  double perplexity(std::string_view seq) override {
    channel_.send(encode_request(seq));
    return parse_response(channel_.receive_line());
  }

  std::string describe() const override { return "external(" + endpoint_ + ")"; }

 private:
  std::string endpoint_;
  detail::FdChannel channel_;
  pid_t child_;
};

namespace detail {

inline std::unique_ptr<PerplexityProvider> connect_tcp(const std::string& endpoint) {
  // endpoint = "tcp://host:port"
  const std::string rest = endpoint.substr(6);
  const auto colon = rest.rfind(':');
  if (colon == std::string::npos) throw InvalidArgument("expected tcp://host:port, got '" + endpoint + "'");
  const std::string host = rest.substr(0, colon);
  const std::string port = rest.substr(colon + 1);
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res); rc != 0) {
    throw ProtocolError("cannot resolve " + endpoint + ": " + ::gai_strerror(rc), "");
  }
  int fd = -1;
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw ProtocolError("cannot connect to " + endpoint, "");
  ignore_sigpipe();
  return std::make_unique<ExternalPerplexity>(endpoint, fd, fd, -1);
}

inline std::unique_ptr<PerplexityProvider> spawn_process(const std::string& command) {
  int to_child[2], from_child[2];
  if (::pipe(to_child) != 0) throw ProtocolError("pipe failed", "");
  if (::pipe(from_child) != 0) {
    ::close(to_child[0]);
    ::close(to_child[1]);
    throw ProtocolError("pipe failed", "");
  }
  const pid_t pid = ::fork();
  if (pid < 0) throw ProtocolError("fork failed", "");
  if (pid == 0) {
    ::dup2(to_child[0], STDIN_FILENO);
    ::dup2(from_child[1], STDOUT_FILENO);
    ::close(to_child[0]);
    ::close(to_child[1]);
    ::close(from_child[0]);
    ::close(from_child[1]);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(to_child[0]);
  ::close(from_child[1]);
  ignore_sigpipe();
  return std::make_unique<ExternalPerplexity>(command, from_child[0], to_child[1], pid);
}

}  // namespace detail

/// "tcp://host:port" connects to a socket; anything else is run as a shell
/// command speaking the protocol on its standard input and output.
inline std::unique_ptr<PerplexityProvider> open_external_provider(const std::string& endpoint) {
  if (endpoint.empty()) throw InvalidArgument("empty provider endpoint");
  if (endpoint.rfind("tcp://", 0) == 0) return detail::connect_tcp(endpoint);
  return detail::spawn_process(endpoint);
}

}  // namespace memaudit
