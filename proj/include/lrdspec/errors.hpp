#pragma once

#include <stdexcept>
#include <string>

namespace lrdspec {

/// A computation could not produce a trustworthy number (non-convergence,
/// degenerate input for an estimator). Configuration mistakes use
/// std::invalid_argument instead.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace lrdspec
