#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nscomp {

// Base for every error raised by the toolkit. The CLI maps UsageError to exit
// code 2 and everything else to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// A quantity is undefined for the given input (zero matrix, zero activation).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

class SizeError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double last_iterate, std::size_t iterations)
      : Error(what), last_iterate_(last_iterate), iterations_(iterations) {}
  double last_iterate() const { return last_iterate_; }
  std::size_t iterations() const { return iterations_; }

 private:
  double last_iterate_;
  std::size_t iterations_;
};

class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, std::size_t epoch) : Error(what), epoch_(epoch) {}
  std::size_t epoch() const { return epoch_; }

 private:
  std::size_t epoch_;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace nscomp
