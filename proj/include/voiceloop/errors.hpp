#pragma once

#include <stdexcept>
#include <string>

namespace voiceloop {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Violated precondition on caller-supplied data (shapes, ids, empty input).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// A non-finite value appeared in a forward or backward pass.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Malformed or truncated file.
class FormatError : public Error {
 public:
  using Error::Error;
};

class OovError : public Error {
 public:
  explicit OovError(std::string word)
      : Error("word not in dictionary: '" + word + "'"), word_(std::move(word)) {}
  const std::string& word() const { return word_; }

 private:
  std::string word_;
};

class InventoryError : public Error {
 public:
  using Error::Error;
};

}  // namespace voiceloop
