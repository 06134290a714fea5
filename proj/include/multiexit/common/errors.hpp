#pragma once

#include <stdexcept>
#include <string>

namespace multiexit {

// Error taxonomy shared by every module. All of these derive from
// std::runtime_error so callers can catch broadly or by kind.

class DimensionError : public std::runtime_error {
 public:
  explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

class ContractError : public std::runtime_error {
 public:
  explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

class IndexError : public std::runtime_error {
 public:
  explicit IndexError(const std::string& msg) : std::runtime_error(msg) {}
};

class PlacementError : public std::runtime_error {
 public:
  explicit PlacementError(const std::string& msg) : std::runtime_error(msg) {}
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class TopologyError : public std::runtime_error {
 public:
  explicit TopologyError(const std::string& msg) : std::runtime_error(msg) {}
};

class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

class InfeasibleError : public std::runtime_error {
 public:
  explicit InfeasibleError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace multiexit
