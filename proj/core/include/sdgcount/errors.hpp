#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sdgcount {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on tensor or grid geometry was violated.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or a numerically invalid state.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Errors that carry an itemized list (one entry per offending key/file).
class ItemizedError : public Error {
 public:
  ItemizedError(const std::string& summary, std::vector<std::string> items)
      : Error(compose(summary, items)), items_(std::move(items)) {}

  const std::vector<std::string>& items() const noexcept { return items_; }

 private:
  static std::string compose(const std::string& summary,
                             const std::vector<std::string>& items) {
    std::string msg = summary;
    for (const auto& item : items) {
      msg += "\n  - ";
      msg += item;
    }
    return msg;
  }

  std::vector<std::string> items_;
};

/// Invalid configuration: unknown keys, out-of-range values.
class ConfigError : public ItemizedError {
 public:
  using ItemizedError::ItemizedError;
  explicit ConfigError(const std::string& message) : ItemizedError(message, {}) {}
};

/// Invalid or missing input data: annotations, manifests, images.
class DataError : public ItemizedError {
 public:
  using ItemizedError::ItemizedError;
  explicit DataError(const std::string& message) : ItemizedError(message, {}) {}
};

}  // namespace sdgcount
