#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

namespace mags {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed configuration or a precondition the caller was responsible for.
struct ConfigError : Error {
  std::string key;
  ConfigError(const std::string& message, std::string key_ = {})
      : Error(key_.empty() ? message : key_ + ": " + message), key(std::move(key_)) {}
};

// Bad input data (dataset lines, report files, images).
struct DataError : Error {
  std::optional<std::size_t> line;
  explicit DataError(const std::string& message, std::optional<std::size_t> line_ = std::nullopt)
      : Error(line_ ? "line " + std::to_string(*line_) + ": " + message : message), line(line_) {}
};

// Wire call failed: unreachable endpoint, timeout, non-2xx status, undecodable body.
struct TransportError : Error {
  using Error::Error;
};

// Scoring could not complete for one sample (judge failure).
struct RewardError : Error {
  std::string sample_id;
  RewardError(const std::string& message, std::string sample_id_)
      : Error("sample " + sample_id_ + ": " + message), sample_id(std::move(sample_id_)) {}
};

}  // namespace mags
