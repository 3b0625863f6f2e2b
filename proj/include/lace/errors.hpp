#pragma once

#include <stdexcept>
#include <string>

namespace lace {

// Bad input: unknown variant, invalid parameters, dimension mismatch.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A configured work budget would be exceeded. `limit` names the parameter.
class ResourceError : public std::runtime_error {
 public:
  ResourceError(std::string limit, const std::string& what)
      : std::runtime_error(what), limit_(std::move(limit)) {}
  const std::string& limit() const { return limit_; }

 private:
  std::string limit_;
};

// Internal consistency failure; indicates a bug or a corrupted history.
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class InsufficientDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lace
