// Copyright (c) 2026 The matsod authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace matsod {

enum class ErrorKind {
  kInvalidArgument,  // bad flag, bad config value, violated precondition
  kShape,            // tensors or images that do not line up
  kIo,               // unreadable / unwritable files
  kFormat,           // corrupt or incompatible checkpoint / manifest
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace matsod
