#pragma once

#include <stdexcept>
#include <string>

namespace kdv {

/// Argument outside the documented contract (bad grid sizes, non-finite data).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Argument outside the mathematical domain of an operator (poles, |x| range, lambda range).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Input data violates a compatibility requirement, e.g. f(0) != 0 for a negative-order operator.
class PreconditionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A computed quantity failed an internal consistency check (imaginary residue, branch jump).
class ConsistencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Linear algebra or time stepping failed (singular banded factorization, Picard non-convergence).
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace kdv
