#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace freqlab {

// Operands live in incompatible spaces (dimension mismatch, D too small).
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An outcome or copy index outside its range.
class IndexError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// A dense construction would exceed the configured size cap.
class ResourceError : public std::runtime_error {
 public:
  ResourceError(const std::string& what, std::size_t requested, std::size_t cap)
      : std::runtime_error(what), requested_(requested), cap_(cap) {}

  std::size_t requested() const noexcept { return requested_; }
  std::size_t cap() const noexcept { return cap_; }

 private:
  std::size_t requested_;
  std::size_t cap_;
};

// An input violates an operation's precondition (non-unitary rotation,
// contexts that do not share an eigenvector, inequivalent sequences, ...).
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Least-squares system without enough independent equations.
class UnderdeterminedError : public std::runtime_error {
 public:
  UnderdeterminedError(const std::string& what, std::size_t rank, std::size_t required)
      : std::runtime_error(what), rank_(rank), required_(required) {}

  std::size_t rank() const noexcept { return rank_; }
  std::size_t required() const noexcept { return required_; }

 private:
  std::size_t rank_;
  std::size_t required_;
};

// A computed quantity broke an invariant that should hold by construction.
class ConsistencyError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace freqlab
