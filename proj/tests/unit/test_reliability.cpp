#include <doctest.h>

#include "msbft/reliability.hpp"
#include "msbft/types.hpp"
#include "oracles.hpp"

using namespace msbft;

namespace {

Real from_rational(const oracle::Rational& r) {
  return Real(boost::multiprecision::numerator(r)) / Real(boost::multiprecision::denominator(r));
}

bool close(const Real& a, const Real& b, double rel = 1e-40) {
  if (b == 0) return a == 0;
  return boost::multiprecision::abs(a - b) / boost::multiprecision::abs(b) < rel;
}

}  // namespace

TEST_CASE("q_exact examples") {
  CHECK(q_exact(5, 5, to_real(0.3)) == 1);
  CHECK(q_exact(0, 3, to_real(0.1)) == Real("0.729"));
  CHECK_THROWS_AS(q_exact(4, 3, to_real(0.1)), PreconditionError);
  CHECK_THROWS_AS(q_exact(1, 3, Real(0)), PreconditionError);
}

TEST_CASE("p_exact agrees with the rational oracle") {
  for (int s : {7, 14, 16, 48}) {
    for (int t : {0, 1, 2, 5}) {
      for (auto [num, den] : std::vector<std::pair<int, int>>{{1, 1000000}, {1, 10000}, {3, 100}}) {
        const Real exact = from_rational(oracle::tail(t, s, num, den));
        CHECK(close(p_exact(t, s, Real(num) / den), exact));
      }
    }
  }
  const Real p27 = p_exact(2, 7, to_real(1e-4));
  CHECK(close(p27, from_rational(oracle::tail(2, 7, 1, 10000))));
  CHECK(to_string(p27, 3) == "3.499e-11");
  CHECK(p27 < 40 * to_real(1e-4) * to_real(1e-4));
}

TEST_CASE("q + p = 1 and monotonicity") {
  for (double pd : {1e-6, 1e-4, 0.01}) {
    const Real p = to_real(pd);
    for (int s = 7; s <= 64; s += 19) {
      for (int t = 0; t < s; t += 3) {
        CHECK(close(q_exact(t, s, p) + p_exact(t, s, p), Real(1), 1e-45));
        CHECK(p_exact(t + 1, s, p) <= p_exact(t, s, p));
        CHECK(p_exact(t, s + 1, p) >= p_exact(t, s, p));
        CHECK(p_exact(t, s, p * 2) >= p_exact(t, s, p));
      }
    }
  }
}

TEST_CASE("truncated tail only drops negligible terms") {
  const Real p = to_real(1e-4);
  TailOptions opt;
  opt.truncate = true;
  const Real full = p_exact(3, 200, p);
  const Real cut = p_exact(3, 200, p, opt);
  CHECK(cut <= full);
  CHECK(close(cut, full, 1e-3));
}

TEST_CASE("tail bound examples") {
  const auto r = tail_bound(2, 7, to_real(1e-4), 2);
  CHECK(r.bound_regime);
  CHECK(r.bound >= r.exact);
  const auto r14 = tail_bound(2, 14, to_real(1e-4), 2);
  CHECK(r14.exact < 160 * to_real(1e-4) * to_real(1e-4));
  const auto loose = tail_bound(1, 100, to_real(0.01), 2);
  CHECK_FALSE(loose.bound_regime);
  CHECK_THROWS_AS(tail_bound(1, 7, to_real(1e-4), 1), PreconditionError);
}

TEST_CASE("exact tail stays below the ratio bound on the grid") {
  for (int t = 1; t <= 8; ++t) {
    for (int s = 8; s <= 128; s += 11) {
      for (double pd : {1e-6, 1e-5, 1e-4}) {
        const auto r = tail_bound(t, s, to_real(pd), 2);
        if (r.bound_regime) CHECK(r.exact < r.bound);
      }
    }
  }
}

TEST_CASE("Stirling form and closed forms") {
  // The Stirling expression approximates the t-th binomial term, which
  // exceeds the tail past t by a factor of about (t+1)/((s-t)p).
  const auto r = tail_bound(2, 7, to_real(1e-4), 2);
  const Real ratio = r.approx / r.exact;
  CHECK(to_string(ratio, 4) == "7.2940e+03");
  for (int s : {6, 9, 15, 30}) {
    for (double pd : {1e-6, 1e-4}) {
      const Real p = to_real(pd);
      CHECK(p_exact(s / 3, s, p) <= clique_tail_closed_form(s, p));
      CHECK(p_exact(s / 3, 2 * s, p) <= pair_tail_closed_form(s, p));
    }
  }
}

TEST_CASE("broadcast reliability") {
  const auto head = broadcast_reliability(16, 1000000, to_real(1e-4));
  CHECK(head.nu_exact <= to_real(1e-9));
  CHECK(head.nu_exact <= head.nu_closed_form);
  CHECK(head.warnings.empty());
  CHECK(broadcast_reliability(16, 1000000, to_real(1e-12)).nu_exact < to_real(1e-40));

  // s=7, n=343: 49 clique terms and 48 pair terms against the rational oracle.
  const auto r = broadcast_reliability(7, 343, to_real(1e-4));
  const auto q7 = 1 - oracle::tail(2, 7, 1, 10000);
  const auto q14 = 1 - oracle::tail(2, 14, 1, 10000);
  const Real nu = from_rational(1 - oracle::power(q7, 49) * oracle::power(q14, 48));
  CHECK(close(r.nu_exact, nu, 1e-30));
  CHECK(to_string(r.nu_exact, 6) == "1.917208e-08");
  CHECK_FALSE(broadcast_reliability(7, 343, to_real(1e-3)).warnings.empty());
  CHECK_THROWS_AS(broadcast_reliability(7, 100, to_real(1e-4)), PreconditionError);

  const auto j = reliability_to_json(head);
  for (const char* key : {"exact_nu", "bound_nu", "approx_nu", "flags", "inputs"}) CHECK(j.contains(key));
}

TEST_CASE("closed form dominates on the grid where the ratio flag holds") {
  for (int s : {7, 14, 16, 32}) {
    for (double pd : {1e-6, 1e-5, 1e-4}) {
      if (!tail_bound(s / 3, s, to_real(pd), 2).bound_regime) continue;
      const auto r = broadcast_reliability(s, static_cast<std::uint64_t>(s) * 1000, to_real(pd));
      CHECK(r.nu_exact <= r.nu_closed_form);
    }
  }
}

TEST_CASE("secure communication reliability") {
  const std::vector<std::uint64_t> sizes{16, 32, 64, 128, 256, 512, 1024};
  const Real p = to_real(1e-4);
  const auto strict = securecomm_reliability(1024, sizes, p);
  const auto zero = securecomm_reliability(1024, sizes, p, {0, 0});
  CHECK(strict.nu_tolerant == zero.nu_tolerant);
  CHECK(strict.nu_strict == strict.nu_tolerant);
  // Larger layers contribute less.
  for (std::size_t l = 1; l < sizes.size(); ++l) {
    CHECK(strict.layers[l].nu_strict <= strict.layers[l - 1].nu_strict);
  }
  // Strict product against the rational oracle: 1 - prod (1 - P(floor(s/3), s))^(n/s).
  // Kept at n=256 so the exact rationals stay small.
  const std::vector<std::uint64_t> small{16, 32, 64, 128, 256};
  oracle::Rational keep = 1;
  for (auto s : small) keep *= oracle::power(1 - oracle::tail(static_cast<int>(s / 3), static_cast<int>(s), 1, 10000), 256 / s);
  CHECK(close(securecomm_reliability(256, small, p).nu_strict, from_rational(1 - keep), 1e-25));

  Real previous = strict.layers[0].nu_tolerant;
  for (int t = 1; t <= 3; ++t) {
    const auto r = securecomm_reliability(1024, sizes, p, {t});
    CHECK(r.layers[0].nu_tolerant <= previous);
    CHECK(r.nu_tolerant <= strict.nu_strict);
    CHECK(r.layers[0].bound_regime);
    CHECK(r.layers[0].nu_tolerant < r.layers[0].nu_bound * 10);
    previous = r.layers[0].nu_tolerant;
  }
  CHECK_THROWS_AS(securecomm_reliability(1000, sizes, p), PreconditionError);
  CHECK(reliability_to_json(strict)["layers"].size() == 7);
}
