#pragma once

#include <stdexcept>
#include <string>

namespace mramsim {

// Domain errors map to CLI exit code 1, IoError to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ProfileError : public Error {
 public:
  ProfileError(std::string field, const std::string& what)
      : Error("invalid profile field '" + field + "': " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class AddressError : public Error {
 public:
  using Error::Error;
};

class TimingError : public Error {
 public:
  using Error::Error;
};

class CalibrationError : public Error {
 public:
  using Error::Error;
};

class AllocationError : public Error {
 public:
  using Error::Error;
};

class TranslationFault : public Error {
 public:
  using Error::Error;
};

// Malformed input files, unreadable paths, bad command lines.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace mramsim
