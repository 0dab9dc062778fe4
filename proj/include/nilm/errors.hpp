#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace nilm {

// Base of every error raised by the pipeline.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ingest
class FileUnreadable : public Error {
 public:
  explicit FileUnreadable(const std::string& path)
      : Error("cannot read file: " + path), path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class EmptySeries : public Error {
 public:
  explicit EmptySeries(const std::string& source)
      : Error("no readings in " + source) {}
};

class DuplicateChannel : public Error {
 public:
  explicit DuplicateChannel(int id)
      : Error("duplicate channel " + std::to_string(id)), id_(id) {}
  int channel() const noexcept { return id_; }

 private:
  int id_;
};

class MissingChannel : public Error {
 public:
  explicit MissingChannel(int id)
      : Error("missing channel " + std::to_string(id)), id_(id) {}
  int channel() const noexcept { return id_; }

 private:
  int id_;
};

// preprocess
class EmptyGrid : public Error {
 public:
  EmptyGrid() : Error("grid spans zero slots") {}
};

class GridMismatch : public Error {
 public:
  using Error::Error;
};

class ArityMismatch : public Error {
 public:
  using Error::Error;
};

class UnfilledGaps : public Error {
 public:
  using Error::Error;
};

// knowledge
class NoOnEvents : public Error {
 public:
  explicit NoOnEvents(const std::string& appliance)
      : Error("appliance never turns on: " + appliance) {}
};

// prompt
class ConfigMismatch : public Error {
 public:
  using Error::Error;
};

class LengthMismatch : public Error {
 public:
  using Error::Error;
};

// client
class AuthError : public Error {
 public:
  using Error::Error;
};

class RateLimited : public Error {
 public:
  using Error::Error;
};

class Timeout : public Error {
 public:
  using Error::Error;
};

class TransportError : public Error {
 public:
  using Error::Error;
};

class UnparseablePrompt : public Error {
 public:
  using Error::Error;
};

// driver / metrics / harness
class ContextLongerThanWindow : public Error {
 public:
  ContextLongerThanWindow(std::size_t context, std::size_t window)
      : Error("context length " + std::to_string(context) +
              " exceeds window size " + std::to_string(window)) {}
};

class EmptyRun : public Error {
 public:
  using Error::Error;
};

class InvalidConfig : public Error {
 public:
  using Error::Error;
};

}  // namespace nilm
