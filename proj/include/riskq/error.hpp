#pragma once

#include <stdexcept>
#include <string>

namespace riskq {

// Base of every exception thrown by the library. The CLI maps the concrete
// type onto a process exit code, so keep the hierarchy flat.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Incompatible layer shapes or an input of the wrong dimension.
class ShapeError : public Error {
public:
  using Error::Error;
};

// Non-finite or out-of-range input values.
class InputError : public Error {
public:
  using Error::Error;
};

// Invalid user configuration (property parameters, ball, budgets, flags).
class ConfigError : public Error {
public:
  using Error::Error;
};

// A documented precondition was violated by the caller.
class ContractError : public Error {
public:
  using Error::Error;
};

// Malformed, unsupported or version-mismatched model file.
class ModelError : public Error {
public:
  using Error::Error;
};

class UnsupportedLayerError : public ModelError {
public:
  using ModelError::ModelError;
};

class VersionError : public ModelError {
public:
  using ModelError::ModelError;
};

// An optimizer could not start (non-finite objective at the start point,
// infeasible start for the constrained solver).
class StartError : public Error {
public:
  using Error::Error;
};

// The centre of a ball already violates the property, so no positive safe
// radius exists.
class CenterAtRiskError : public Error {
public:
  using Error::Error;
};

} // namespace riskq
