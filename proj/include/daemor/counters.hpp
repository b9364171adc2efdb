// Copyright (c) the daemor authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef DAEMOR_COUNTERS_HPP
#define DAEMOR_COUNTERS_HPP

#include <atomic>
#include <cstdint>

namespace daemor {

/// Process-wide instrumentation of matrix factorizations, used to verify the
/// offline/online cost split (the online path must never factorize a shifted
/// full-order pencil under the cheap algebraic treatments).
struct SolveCounters {
  std::atomic<std::int64_t> shifted_full{0};   // LU of (aE + bA) at full order N
  std::atomic<std::int64_t> mass_block{0};     // Cholesky of a differential block E(mu)
  std::atomic<std::int64_t> schur_block{0};    // factorization of G^T E^-1 G
  std::atomic<std::int64_t> dense_small{0};    // dense reduced-order factorizations

  void reset() {
    shifted_full = 0;
    mass_block = 0;
    schur_block = 0;
    dense_small = 0;
  }
};

inline SolveCounters& solve_counters() {
  static SolveCounters c;
  return c;
}

}  // namespace daemor

#endif  // DAEMOR_COUNTERS_HPP
