#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace ieqa {

/// Input did not satisfy a documented contract (bad manifest, invalid
/// scores, rejected submission). Maps to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what, std::vector<std::string> details = {})
      : std::runtime_error(what), details_(std::move(details)) {}

  const std::vector<std::string>& details() const noexcept { return details_; }

 private:
  std::vector<std::string> details_;
};

/// Malformed structured text (manifest, ratings table, config, checkpoint).
class ParseError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// A statistic is undefined for the given data (constant series, zero
/// variance, no pairs).
class DegenerateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ieqa
