#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace soc {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid model, session or mapping parameters.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Argument outside the operation's domain (off-grid site, non-finite input).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Relaxation exceeded its sweep cap.
class DivergenceError : public Error {
public:
    using Error::Error;
};

/// Not enough (or degenerate) data for an estimate.
class EstimationError : public Error {
public:
    using Error::Error;
};

/// Audio too short or otherwise unusable as a grain corpus.
class IngestionError : public Error {
public:
    using Error::Error;
};

/// Malformed file; carries the byte offset where parsing failed.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : Error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

/// Malformed or unknown protocol line; carries the offending byte range [begin, end).
class ProtocolError : public Error {
public:
    ProtocolError(const std::string& what, std::size_t begin, std::size_t end)
        : Error(what + " (bytes " + std::to_string(begin) + ".." + std::to_string(end) + ")"),
          begin_(begin), end_(end) {}
    std::size_t begin() const { return begin_; }
    std::size_t end() const { return end_; }

private:
    std::size_t begin_;
    std::size_t end_;
};

}  // namespace soc
