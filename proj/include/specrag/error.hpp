#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>

namespace specrag {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad or inconsistent caller input (empty query, k out of range, dim mismatch).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Malformed input file: archive, XML, JSON lines, index file.
class ParseError : public Error {
public:
    ParseError(std::string file, std::uint64_t offset, const std::string& what)
        : Error(file + " @" + std::to_string(offset) + ": " + what),
          file_(std::move(file)),
          offset_(offset) {}

    const std::string& file() const noexcept { return file_; }
    std::uint64_t offset() const noexcept { return offset_; }

private:
    std::string file_;
    std::uint64_t offset_;
};

/// Misconfiguration that retrying cannot fix (missing endpoint, dimension mismatch).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Network failure talking to a backend. `attempts` counts requests sent,
/// `next_backoff_ms` is what the next retry would have waited.
class TransportError : public Error {
public:
    TransportError(const std::string& what, int status = 0, int attempts = 1,
                   std::int64_t next_backoff_ms = 0)
        : Error(what), status_(status), attempts_(attempts), next_backoff_ms_(next_backoff_ms) {}

    int status() const noexcept { return status_; }
    int attempts() const noexcept { return attempts_; }
    std::int64_t next_backoff_ms() const noexcept { return next_backoff_ms_; }
    bool retryable() const noexcept { return status_ == 0 || status_ == 429 || status_ >= 500; }

private:
    int status_;
    int attempts_;
    std::int64_t next_backoff_ms_;
};

/// Backend answered, but not in the expected shape.
class ProtocolError : public Error {
public:
    using Error::Error;
};

class AuthorizationError : public Error {
public:
    using Error::Error;
};

class NotFound : public Error {
public:
    using Error::Error;
};

/// Request conflicts with current state (resolving a resolved request).
class StateError : public Error {
public:
    using Error::Error;
};

/// Wraps a failure inside one pipeline stage ("embed", "retrieve", "complete").
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& what, bool transport)
        : Error(stage + ": " + what), stage_(std::move(stage)), transport_(transport) {}

    const std::string& stage() const noexcept { return stage_; }
    bool is_transport() const noexcept { return transport_; }

private:
    std::string stage_;
    bool transport_;
};

}  // namespace specrag
