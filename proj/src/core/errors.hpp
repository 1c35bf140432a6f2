// Copyright (c) 2026 The clfake Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace clfake {

enum class ErrorKind {
  config,
  domain,
  numeric,
  io,
  ingestion,
  not_found,
  unavailable,
  validation,
  insufficient_data,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define CLFAKE_DEFINE_ERROR(Name, Kind)                                    \
  class Name : public Error {                                              \
   public:                                                                 \
    explicit Name(const std::string& what) : Error(ErrorKind::Kind, what) {} \
  };

CLFAKE_DEFINE_ERROR(ConfigError, config)
CLFAKE_DEFINE_ERROR(DomainError, domain)
CLFAKE_DEFINE_ERROR(IoError, io)
CLFAKE_DEFINE_ERROR(IngestionError, ingestion)
CLFAKE_DEFINE_ERROR(NotFoundError, not_found)
CLFAKE_DEFINE_ERROR(UnavailableError, unavailable)
CLFAKE_DEFINE_ERROR(ValidationError, validation)
CLFAKE_DEFINE_ERROR(InsufficientDataError, insufficient_data)

#undef CLFAKE_DEFINE_ERROR

// Carries the offending sample (forward pass) or epoch (training) index when
// one is known; -1 otherwise.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what, long index = -1)
      : Error(ErrorKind::numeric, what), index_(index) {}

  long index() const noexcept { return index_; }

 private:
  long index_;
};

}  // namespace clfake
