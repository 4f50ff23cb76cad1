#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace pairscale {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file. line() is 1-based; 0 when not line-oriented.
class ParseError : public Error {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : Error(file + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

// Matchups (or entities) still lacking a usable resolution.
class UnresolvedError : public ValidationError {
 public:
  UnresolvedError(const std::string& what, std::vector<std::string> keys)
      : ValidationError(what), keys_(std::move(keys)) {}
  const std::vector<std::string>& keys() const noexcept { return keys_; }

 private:
  std::vector<std::string> keys_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// A judge call failed after all retries. key() identifies the matchup so the
// job can be resumed.
class TransportError : public Error {
 public:
  TransportError(const std::string& what, std::string key)
      : Error(what + " [" + key + "]"), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

class MissingRecordError : public Error {
 public:
  using Error::Error;
};

class IdentifiabilityError : public Error {
 public:
  IdentifiabilityError(const std::string& what, std::vector<std::vector<std::string>> components)
      : Error(what), components_(std::move(components)) {}
  const std::vector<std::vector<std::string>>& components() const noexcept { return components_; }

 private:
  std::vector<std::vector<std::string>> components_;
};

class LookupError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

// A pipeline stage's inputs are missing or no longer match the manifest.
class StaleStageError : public Error {
 public:
  StaleStageError(const std::string& what, std::string stage)
      : Error(what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace pairscale
