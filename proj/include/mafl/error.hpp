#pragma once

#include <stdexcept>
#include <string>

namespace mafl {

// Invalid model, channel or controller parameter.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Query outside the domain an object was built for (e.g. past a trace horizon).
class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// k > 0 elements requested over a zero-rate link.
class InfeasibleTransmission : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Field-level configuration problems; the message starts with "section.key:".
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace mafl
