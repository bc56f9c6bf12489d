#pragma once

#include <stdexcept>
#include <string>

namespace fuzzdl {

// Bad or inconsistent input: files, vocab lookups, shape mismatches.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Query text that does not parse; carries the byte offset of the problem.
class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t pos)
      : DataError(what), pos_(pos) {}
  std::size_t position() const noexcept { return pos_; }

 private:
  std::size_t pos_;
};

// Training produced a non-finite loss or gradient.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The query sampler ran out of retries before reaching the requested count.
class SamplerExhausted : public DataError {
 public:
  SamplerExhausted(const std::string& message, int achieved, int requested)
      : DataError(message), achieved_(achieved), requested_(requested) {}
  int achieved() const noexcept { return achieved_; }
  int requested() const noexcept { return requested_; }

 private:
  int achieved_;
  int requested_;
};

}  // namespace fuzzdl
