#include "mtm/transfer.hpp"

#include <cmath>

#include "mtm/errors.hpp"

namespace mtm {

namespace {

bool is_prime(uint64_t x) {
  if (x < 2) return false;
  for (uint64_t d = 2; d * d <= x; ++d)
    if (x % d == 0) return false;
  return true;
}

uint32_t ceil_log2(uint64_t x) {
  uint32_t b = 0;
  uint64_t v = 1;
  while (v < x) {
    v <<= 1;
    ++b;
  }
  return b;
}

void check_sets(const TokenSet& a, const TokenSet& b, uint32_t N) {
  if (N < 2) throw ConfigError("transfer: N must be >= 2");
  if ((!a.empty() && *std::prev(a.end()) > N) || (!b.empty() && *std::prev(b.end()) > N))
    throw ConfigError("transfer: token outside [1, N]");
}

// sum_{t in S, lo <= t <= hi} pow[t] mod q
uint64_t char_poly_eval(const TokenSet& s, uint32_t lo, uint32_t hi, uint64_t q,
                        const std::vector<uint64_t>& pow) {
  uint64_t acc = 0;
  for (auto it = s.lower(lo), end = s.upper(hi); it != end; ++it) {
    acc += pow[*it];
    if (acc >= q) acc -= q;
  }
  return acc;
}

}  // namespace

FingerprintField fingerprint_field(uint32_t N) {
  uint64_t q = 2ULL * N;
  while (!is_prime(q)) ++q;
  return FingerprintField{q, ceil_log2(q)};
}

uint32_t eqtest_trials(uint32_t N, double epsilon) {
  if (!(epsilon > 0.0) || epsilon >= 1.0) throw ConfigError("transfer: epsilon must be in (0,1)");
  const uint32_t logn = std::max<uint32_t>(1, ceil_log2(N));
  uint32_t c = 1;
  while (std::ldexp(epsilon, static_cast<int>(c)) < static_cast<double>(logn)) ++c;
  return c;
}

EqResult eq_test_range(const TokenSet& a, const TokenSet& b, uint32_t lo, uint32_t hi,
                       uint32_t trials, uint32_t N, Rng& pair_rng) {
  if (trials < 1) throw ConfigError("eq_test: trials must be >= 1");
  check_sets(a, b, N);
  const FingerprintField f = fingerprint_field(N);
  std::vector<uint64_t> pow(static_cast<size_t>(N) + 1);
  EqResult res{true, 0};
  for (uint32_t t = 0; t < trials; ++t) {
    const uint64_t x = 1 + pair_rng.next_below(f.q - 1);
    pow[0] = 1;
    for (uint32_t i = 1; i <= N; ++i) pow[i] = (pow[i - 1] * x) % f.q;
    const uint64_t va = char_poly_eval(a, lo, hi, f.q, pow);
    const uint64_t vb = char_poly_eval(b, lo, hi, f.q, pow);
    res.bits_used += 2ULL * f.value_bits;
    if (va != vb) {
      res.equal = false;
      break;  // both sides saw the mismatch; later trials are pointless
    }
  }
  return res;
}

EqResult eq_test(const TokenSet& a, const TokenSet& b, uint32_t trials, uint32_t N,
                 Rng& pair_rng) {
  return eq_test_range(a, b, 1, N, trials, N, pair_rng);
}

uint64_t transfer_bit_bound(uint32_t N, double epsilon) {
  const FingerprintField f = fingerprint_field(N);
  const uint64_t calls = ceil_log2(N);
  return calls * eqtest_trials(N, epsilon) * 2ULL * f.value_bits + 2;
}

TransferResult transfer(const TokenSet& a, const TokenSet& b, double epsilon, uint32_t N,
                        Rng& pair_rng, std::vector<TransferStep>* steps) {
  check_sets(a, b, N);
  const uint32_t c = eqtest_trials(N, epsilon);

  // Search invariant: if the symmetric difference is non-empty and every
  // EQTest answered correctly so far, its minimum lies in [lo, hi]. Testing
  // the prefix [lo, mid] halves the interval each step: unequal means the
  // minimum is at most mid, equal means [lo, mid] agrees and the minimum (if
  // any) is past mid.
  uint32_t lo = 1, hi = N;
  TransferResult res;
  while (lo < hi) {
    const uint32_t mid = lo + (hi - lo) / 2;
    EqResult eq = eq_test_range(a, b, lo, mid, c, N, pair_rng);
    res.bits_used += eq.bits_used;
    ++res.eq_calls;
    if (steps) steps->push_back({lo, mid, eq.equal});
    if (eq.equal)
      lo = mid + 1;
    else
      hi = mid;
  }

  // Ownership epilogue: one bit each direction. Equal sets drift to lo = N
  // here and both or neither own it, which correctly degenerates to kNone.
  const bool in_a = a.contains(lo);
  const bool in_b = b.contains(lo);
  res.bits_used += 2;
  if (in_a == in_b) {
    res.outcome = TransferOutcome::kNone;
  } else {
    res.outcome = in_a ? TransferOutcome::kAToB : TransferOutcome::kBToA;
    res.token = lo;
  }
  return res;
}

}  // namespace mtm
