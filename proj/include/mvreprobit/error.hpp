#ifndef MVREPROBIT_ERROR_HPP
#define MVREPROBIT_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mvreprobit {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input: malformed data, config or precondition violation. CLI exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Numerical breakdown inside a kernel. CLI exit code 3.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class DecompositionError : public NumericalError {
 public:
  DecompositionError(std::size_t pivot, double value)
      : NumericalError("cholesky: non-positive pivot " + std::to_string(value) +
                       " at index " + std::to_string(pivot)),
        pivot_(pivot) {}

  std::size_t pivot() const { return pivot_; }

 private:
  std::size_t pivot_;
};

}  // namespace mvreprobit

#endif  // MVREPROBIT_ERROR_HPP
