#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pqsched {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument is outside the domain of the operation (negative horizon,
/// malformed schedule, non-stochastic matrix, ...).
class InputError : public Error {
 public:
  using Error::Error;
};

/// The configuration is well-formed but the requested mode is not supported.
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

/// Model construction would exceed the (state, action) pair budget.
class BudgetError : public Error {
 public:
  /// `lower_bound` marks `pairs` as a floor known before the actions were counted.
  BudgetError(std::size_t pairs, std::size_t budget, bool lower_bound = false)
      : Error("model needs " + std::string(lower_bound ? "at least " : "") + std::to_string(pairs) +
              " (state, action) pairs, budget is " +
              std::to_string(budget) +
              "; reduce capacity, block size or max_total, or raise the budget"),
        pairs_(pairs),
        budget_(budget) {}

  std::size_t pairs() const noexcept { return pairs_; }
  std::size_t budget() const noexcept { return budget_; }

 private:
  std::size_t pairs_;
  std::size_t budget_;
};

/// Iterative method failed to converge, or a linear system was singular.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// The chain induced by a policy has more than one recurrent class.
class ChainStructureError : public NumericalError {
 public:
  ChainStructureError(std::size_t first, std::size_t second)
      : NumericalError("policy induces several recurrent classes; states " + std::to_string(first) +
                       " and " + std::to_string(second) + " do not communicate"),
        first_(first),
        second_(second) {}

  std::size_t first_state() const noexcept { return first_; }
  std::size_t second_state() const noexcept { return second_; }

 private:
  std::size_t first_;
  std::size_t second_;
};

}  // namespace pqsched
