#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace conind {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file. Carries the 1-based line number when known (0 otherwise).
class InputError : public Error {
 public:
  InputError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + (line ? ":" + std::to_string(line) : std::string()) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class UnknownConcept : public Error {
 public:
  explicit UnknownConcept(const std::string& concept_label)
      : Error("unknown concept '" + concept_label + "'"), concept_(concept_label) {}

  const std::string& concept_label() const noexcept { return concept_; }

 private:
  std::string concept_;
};

class UnknownImage : public Error {
 public:
  explicit UnknownImage(const std::string& image_id)
      : Error("unknown image '" + image_id + "'") {}
};

class CycleError : public Error {
 public:
  using Error::Error;
};

/// Neuron whose maximum activation is zero; thresholds would be degenerate.
class DeadNeuron : public Error {
 public:
  explicit DeadNeuron(std::size_t neuron)
      : Error("neuron " + std::to_string(neuron) + " is dead (max activation 0)"), neuron_(neuron) {}

  std::size_t neuron() const noexcept { return neuron_; }

 private:
  std::size_t neuron_;
};

/// All pooled values identical; the rank-sum variance is zero.
class DegenerateSample : public Error {
 public:
  using Error::Error;
};

}  // namespace conind
