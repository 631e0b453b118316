#pragma once

#include <stdexcept>
#include <string>

namespace premir {

// Bad flags, unknown config keys, out-of-range hyper-parameters.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data (FASTA, CSV, model files).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values during training or evaluation.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace premir
