#pragma once

#include <stdexcept>
#include <string>

namespace holomc {

struct DistanceTooLarge : std::runtime_error {
  explicit DistanceTooLarge(const std::string& what) : std::runtime_error(what) {}
};

struct NonPositiveTime : std::runtime_error {
  explicit NonPositiveTime(const std::string& what) : std::runtime_error(what) {}
};

struct ChartUndefined : std::runtime_error {
  explicit ChartUndefined(const std::string& what) : std::runtime_error(what) {}
};

struct NotContractible : std::runtime_error {
  explicit NotContractible(const std::string& what) : std::runtime_error(what) {}
};

struct ProposalFailure : std::runtime_error {
  explicit ProposalFailure(const std::string& what) : std::runtime_error(what) {}
};

struct EmptySample : std::runtime_error {
  explicit EmptySample(const std::string& what) : std::runtime_error(what) {}
};

struct DimensionMismatch : std::runtime_error {
  explicit DimensionMismatch(const std::string& what) : std::runtime_error(what) {}
};

struct LiftDefect : std::runtime_error {
  explicit LiftDefect(const std::string& what) : std::runtime_error(what) {}
};

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace holomc
