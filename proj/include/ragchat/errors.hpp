#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace ragchat {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ArgumentError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Filesystem or persistence failure.
class StorageError : public Error {
public:
    using Error::Error;
};

/// Malformed persisted data; carries the byte offset where decoding failed.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// A persisted file written by an incompatible major format version.
class MigrationError : public Error {
public:
    using Error::Error;
};

/// A remote peer answered with a body that does not follow the wire protocol.
class ProtocolError : public Error {
public:
    using Error::Error;
};

/// A remote call failed after the retry budget was spent.
class BackendError : public Error {
public:
    BackendError(const std::string& what, std::vector<std::string> attempt_log, bool retriable)
        : Error(what), attempt_log_(std::move(attempt_log)), retriable_(retriable) {}

    int attempts() const noexcept { return static_cast<int>(attempt_log_.size()); }
    const std::vector<std::string>& attempt_log() const noexcept { return attempt_log_; }
    bool retriable() const noexcept { return retriable_; }

private:
    std::vector<std::string> attempt_log_;
    bool retriable_;
};

class EmptyStoreError : public Error {
public:
    EmptyStoreError() : Error("vector store is empty") {}
};

}  // namespace ragchat
