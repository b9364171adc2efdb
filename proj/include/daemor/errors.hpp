// Copyright (c) the daemor authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef DAEMOR_ERRORS_HPP
#define DAEMOR_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace daemor {

/// Base class for all library failures.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed input: dimension mismatches, bad grammar trees, bad files.
struct InvalidInput : Error {
  using Error::Error;
};

/// A matrix required to be (semi)definite failed its factorization.
/// The message names the offending operator and the parameter point.
struct DefinitenessError : Error {
  using Error::Error;
};

/// An iteration exhausted its budget without meeting its tolerance,
/// or an invariant check on the iterates failed.
struct ConvergenceError : Error {
  using Error::Error;
};

/// A linear system or restricted operator was numerically singular.
struct SingularSystemError : Error {
  using Error::Error;
};

/// Serialization of an in-process-only object (callback coefficient) was
/// requested, or a bundle on disk violates the format contract.
struct SerializationError : Error {
  using Error::Error;
};

}  // namespace daemor

#endif  // DAEMOR_ERRORS_HPP
