// Copyright 2026 The memaudit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace memaudit {

// Base of every error raised by the library. Subclasses only narrow the
// category so callers (mainly the CLI) can map failures to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class ProtocolError : public Error {
 public:
  ProtocolError(const std::string& what, std::string payload)
      : Error(what + " (payload: \"" + payload + "\")"), payload_(std::move(payload)) {}

  const std::string& payload() const noexcept { return payload_; }

 private:
  std::string payload_;
};

}  // namespace memaudit
