#pragma once

#include <stdexcept>
#include <string>

namespace leomon {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// File ingestion
class IoError : public Error {
 public:
  using Error::Error;
};

class MalformedRecord : public Error {
 public:
  MalformedRecord(const std::string& what, long line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

class NonUniformSampling : public Error {
 public:
  using Error::Error;
};

// Orbit construction
class NoVisibilityWindow : public Error {
 public:
  using Error::Error;
};

// Stability statistics
class InsufficientData : public Error {
 public:
  using Error::Error;
};

class UnsupportedExponent : public Error {
 public:
  using Error::Error;
};

// Estimation
class SingularGeometry : public Error {
 public:
  using Error::Error;
};

// Survey
class UnusableBin : public Error {
 public:
  using Error::Error;
};

class UnsupportedConfiguration : public Error {
 public:
  using Error::Error;
};

}  // namespace leomon
