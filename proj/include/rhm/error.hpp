#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace rhm {

/// Invalid argument or parameter combination.
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Parameters are individually valid but no unambiguous grammar exists for them.
class InfeasibleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or incomplete document (grammar, dataset, config).
class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A loaded object violates a structural invariant (e.g. a repeated rhs tuple).
class InvariantError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A context or sequence cannot be parsed under the grammar.
class UnparseableError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An exact computation would exceed the configured enumeration budget.
class BudgetError : public std::runtime_error {
public:
    BudgetError(std::uint64_t required, std::uint64_t budget)
        : std::runtime_error("enumeration budget exceeded: requires " + std::to_string(required) +
                             " states, budget is " + std::to_string(budget)),
          required_(required),
          budget_(budget) {}

    std::uint64_t required() const noexcept { return required_; }
    std::uint64_t budget() const noexcept { return budget_; }

private:
    std::uint64_t required_;
    std::uint64_t budget_;
};

}  // namespace rhm
