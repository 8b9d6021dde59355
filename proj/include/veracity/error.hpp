#pragma once

#include <stdexcept>
#include <string>

namespace veracity {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input data violates a corpus contract (empty class, bad split fraction...).
class CorpusError : public Error {
 public:
  using Error::Error;
};

// A label was mapped into a regime that has no class for it.
class DomainError : public Error {
 public:
  using Error::Error;
};

// A persisted file failed validation on load.
class LoadError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

class MetricError : public Error {
 public:
  using Error::Error;
};

}  // namespace veracity
