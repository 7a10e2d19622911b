#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mtm/rng.hpp"
#include "mtm/token_set.hpp"

namespace mtm {

/// Fingerprint field for token sets over [N]: the smallest prime q >= 2N.
/// A set S is fingerprinted as sum_{t in S} x^t mod q at a random point
/// x in [1, q-1]. Two distinct sets collide on at most N of the q-1 points,
/// so a single trial errs with probability <= N/(q-1) <= 1/2.
struct FingerprintField {
  uint64_t q = 0;
  uint32_t value_bits = 0;  // bits to ship one fingerprint value
};

FingerprintField fingerprint_field(uint32_t N);

/// Trial count for EQTest inside Transfer(epsilon):
/// c = ceil(log2(ceil(log2 N) / epsilon)), at least 1.
uint32_t eqtest_trials(uint32_t N, double epsilon);

struct EqResult {
  bool equal = false;
  uint64_t bits_used = 0;
};

/// Randomized set-equality test restricted to tokens in [lo, hi].
/// One-sided: equal inputs always report equal; unequal inputs report equal
/// with probability <= 2^-trials. Each trial costs 2 * value_bits (both
/// sides exchange their fingerprint value); unequal trials end the test
/// early. Both endpoints draw the evaluation points from the same pair
/// stream, so no coordination bits are needed.
EqResult eq_test_range(const TokenSet& a, const TokenSet& b, uint32_t lo, uint32_t hi,
                       uint32_t trials, uint32_t N, Rng& pair_rng);

EqResult eq_test(const TokenSet& a, const TokenSet& b, uint32_t trials, uint32_t N,
                 Rng& pair_rng);

enum class TransferOutcome {
  kNone,    // sets (apparently) equal, nothing to move
  kAToB,    // a owns the token, b learns it
  kBToA,
};

struct TransferStep {
  uint32_t lo = 0, hi = 0;
  bool reported_equal = false;
};

struct TransferResult {
  TransferOutcome outcome = TransferOutcome::kNone;
  uint32_t token = 0;  // valid unless outcome == kNone
  uint64_t bits_used = 0;
  uint32_t eq_calls = 0;
};

/// Worst-case control bits for one transfer call: ceil(log2 N) EQTest calls
/// of `trials` fingerprint exchanges each, plus two ownership bits.
uint64_t transfer_bit_bound(uint32_t N, double epsilon);

/// Binary search over [1, N] for the smallest token held by exactly one of
/// the two sets, moving the interval by set-equality tests on prefixes.
/// With all EQTest calls correct, returns that token and its direction; on
/// equal sets the search converges and the ownership epilogue yields kNone
/// with probability 1. Overall failure probability <= epsilon.
/// `steps` (optional) records each tested interval for test introspection.
TransferResult transfer(const TokenSet& a, const TokenSet& b, double epsilon, uint32_t N,
                        Rng& pair_rng, std::vector<TransferStep>* steps = nullptr);

}  // namespace mtm
