#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_dec_float.hpp>
#include <nlohmann/json.hpp>

namespace msbft {

/// 50 significant decimal digits.
using Real = boost::multiprecision::cpp_dec_float_50;

/// Converts through the shortest decimal string that round-trips, so 1e-4
/// becomes exactly 0.0001 rather than the nearest binary double.
Real to_real(double x);
std::string to_string(const Real& x, int digits = 12);

/// C(s,i) p^i (1-p)^(s-i).
Real binomial_term(int i, int s, const Real& p);

struct TailOptions {
  // Sum only the first ceil(beta*p*s) + t terms of the tail.
  bool truncate = false;
  double beta = 2.0;
};

/// Probability of at most t faults among s nodes with per-node rate p.
Real q_exact(int t, int s, const Real& p);
/// Probability of more than t faults, summed directly (no 1 - q cancellation).
Real p_exact(int t, int s, const Real& p, const TailOptions& options = {});

struct TailResult {
  Real exact;   // p_exact(t, s, p)
  Real approx;  // stirling_tail_approx(t, s, p)
  Real bound;   // C(s,t) p^t (1-p)^(s-t) / (beta - 1)
  bool bound_regime = false;  // p <= 1/(beta*s + 1)
};

/// Geometric-series bound on the tail: adjacent terms shrink by
/// (s-i)p / ((i+1)(1-p)) <= 1/beta once p <= 1/(beta*s + 1).
TailResult tail_bound(int t, int s, const Real& p, const Real& beta);

/// sqrt(1/(2 pi t)) (e s p / t)^t (1-p)^(s-t): the large-s Stirling form of
/// the t-th binomial term. t = 0 gives (1-p)^s.
Real stirling_tail_approx(int t, int s, const Real& p);
/// (3ep)^(s/3) and (6ep)^(s/3).
Real clique_tail_closed_form(int s, const Real& p);
Real pair_tail_closed_form(int s, const Real& p);

struct BroadcastReliability {
  int s = 0;
  std::uint64_t n = 0;
  Real p;
  Real clique_tail;  // P(floor(s/3), s)
  Real pair_tail;    // P(floor(s/3), 2s)
  Real nu_exact;     // 1 - (1 - clique_tail)^(n/s) (1 - pair_tail)^(n/s - 1)
  Real nu_closed_form;  // 1 - (1 - (6ep)^(s/3))^(n/s)
  // 1 - (1 - sqrt(3/(2 pi s)) ((3ep)^(s/3) + (6ep)^(s/3)))^(n/s)
  Real nu_approx;
  std::vector<std::string> warnings;
};

BroadcastReliability broadcast_reliability(int s, std::uint64_t n, const Real& p);

struct LayerReliability {
  std::uint64_t size = 0;       // s_l
  std::uint64_t instances = 0;  // r_l = n / s_l
  int fault_bound = 0;          // floor(alpha(s_l) s_l)
  int tolerated = 0;            // t_l
  Real instance_failure;        // p_l = P(fault_bound, s_l)
  Real nu_strict;               // 1 - (1 - p_l)^r_l
  Real nu_tolerant;             // 1 - sum_{t <= t_l} C(r_l,t) (1-p_l)^(r_l-t) p_l^t
  Real nu_bound;                // C(r_l,t_l) p_l^t_l (1-p_l)^(r_l-t_l) / (s_l - 1), t_l >= 1
  bool bound_regime = false;    // p_l <= 1/(n+1)
};

struct SecureCommReliability {
  std::uint64_t n = 0;
  Real p;
  std::vector<LayerReliability> layers;
  Real nu_strict;
  Real nu_tolerant;
  std::vector<std::string> warnings;
};

/// Layer sizes s_0..s_{L-1} (each dividing n), per-layer resilience and
/// tolerated instance failures (missing entries are 1/3 and 0).
SecureCommReliability securecomm_reliability(std::uint64_t n, const std::vector<std::uint64_t>& sizes,
                                             const Real& p, const std::vector<int>& tolerated = {},
                                             const std::vector<double>& alpha = {});

nlohmann::json reliability_to_json(const BroadcastReliability& r);
nlohmann::json reliability_to_json(const SecureCommReliability& r);

}  // namespace msbft
