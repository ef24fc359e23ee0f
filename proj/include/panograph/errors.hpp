#pragma once

#include <stdexcept>
#include <string>

namespace panograph {

// Base class for all toolkit errors. The CLI maps ParseError/ValidationError
// to exit code 2 and everything else to exit code 1.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : Error {
  using Error::Error;
};
struct ValidationError : Error {
  using Error::Error;
};
struct GenerationError : Error {
  using Error::Error;
};
struct GeometryError : Error {
  using Error::Error;
};
struct DisconnectedError : Error {
  using Error::Error;
};
struct NumericalError : Error {
  using Error::Error;
};
struct ShapeError : Error {
  using Error::Error;
};
struct DegenerateError : Error {
  using Error::Error;
};
struct DimensionError : Error {
  using Error::Error;
};

}  // namespace panograph
