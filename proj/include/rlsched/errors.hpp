#pragma once

#include <stdexcept>
#include <string>

namespace rlsched {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// workload
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};
class EmptyTrace : public Error { public: using Error::Error; };
class InsufficientJobs : public Error { public: using Error::Error; };
class ConfigError : public Error { public: using Error::Error; };

// simulator / heuristics
class IllegalAction : public Error { public: using Error::Error; };
class EmptyQueue : public Error { public: using Error::Error; };

// neural
class NoLegalAction : public Error { public: using Error::Error; };
class ModelError : public Error { public: using Error::Error; };

// trainer
class MissingUserInfo : public Error { public: using Error::Error; };
class TrainingDiverged : public Error { public: using Error::Error; };

}  // namespace rlsched
