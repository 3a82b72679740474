#ifndef TRUELIFT_ERRORS_H_
#define TRUELIFT_ERRORS_H_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace truelift {

// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad arguments or configuration supplied by the caller.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Malformed CSV / JSON input. `line` is 1-based, 0 when not applicable.
class ParseError : public ValidationError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : ValidationError(line > 0 ? "line " + std::to_string(line) + ": " + what
                                 : what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// A bin lacks treatment or control rows, so its lift is undefined.
class EmptyArmInBin : public Error {
 public:
  EmptyArmInBin(int bin, const std::string& what) : Error(what), bin_(bin) {}
  // 1-based bin index.
  int bin() const { return bin_; }

 private:
  int bin_;
};

// Too few distinct prediction values for the requested number of bins.
class DegeneratePredictions : public Error {
 public:
  using Error::Error;
};

// An operation was called outside its precondition (e.g. migration of a
// middle-segment row).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

// NaN / infinity showed up in a loss or parameter vector.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace truelift

#endif  // TRUELIFT_ERRORS_H_
