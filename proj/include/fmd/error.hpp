#pragma once

#include <stdexcept>
#include <string>

namespace fmd {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CatalogError : public Error {
 public:
  using Error::Error;
};

// A modifier found no compatible node, or a fragment is self-contradictory.
class BindingError : public Error {
 public:
  using Error::Error;
};

class OracleError : public Error {
 public:
  using Error::Error;
};

// No indoor rule covers the scene. The search treats such sets as inadmissible.
class UnmatchableError : public OracleError {
 public:
  using OracleError::OracleError;
};

class BudgetExhausted : public Error {
 public:
  using Error::Error;
};

class TransportError : public Error {
 public:
  using Error::Error;
};

class GpError : public Error {
 public:
  using Error::Error;
};

class SpaceExhausted : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace fmd
