#pragma once

#include <stdexcept>
#include <string>

namespace mfm {

inline constexpr const char* kVersion = "mfm 0.1.0";

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape or dimension disagreement in a kernel or layer.
struct ShapeError : Error {
  using Error::Error;
};

// Invalid dataset spec, missing samples, malformed files.
struct DataError : Error {
  using Error::Error;
};

// File-level failures: magic mismatch, truncation, unwritable paths.
struct IoError : Error {
  using Error::Error;
};

// Bad experiment config: unknown keys, unparseable values.
struct ConfigError : Error {
  using Error::Error;
};

// A training step produced a non-finite loss or inconsistent state.
struct TrainError : Error {
  using Error::Error;
};

}  // namespace mfm
