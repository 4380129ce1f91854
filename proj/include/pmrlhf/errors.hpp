#pragma once

#include <stdexcept>
#include <string>

namespace pmrlhf {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An input lies outside the mathematical domain of an operation
// (non-finite reward, beta <= 0, zero reference mass where one is required).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Caller broke a structural precondition (size mismatch, bad index).
class ContractError : public Error {
 public:
  using Error::Error;
};

// A conditional probability p_i / (p_i + p_j) with p_i + p_j == 0.
class UndefinedConditionalError : public Error {
 public:
  using Error::Error;
};

// Configuration problems: enumeration bounds, empty regular sets, degenerate
// samplers.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace pmrlhf
