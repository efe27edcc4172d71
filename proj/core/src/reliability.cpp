#include "msbft/reliability.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include <boost/math/constants/constants.hpp>

#include "msbft/types.hpp"

namespace msbft {

namespace {

constexpr double kAssumedRate = 1e-4;

void check_tail_args(int t, int s, const Real& p) {
  if (s < 0 || t < 0 || t > s) {
    throw PreconditionError("tail needs 0 <= t <= s (t=" + std::to_string(t) +
                            ", s=" + std::to_string(s) + ")");
  }
  if (!(p > 0 && p < 1)) throw PreconditionError("tail needs 0 < p < 1");
}

Real choose(int s, int i) {
  Real c = 1;
  for (int k = 1; k <= i; ++k) c = c * (s - i + k) / k;
  return c;
}

int floor_alpha(double alpha, std::uint64_t s) {
  return static_cast<int>(std::floor(alpha * static_cast<double>(s) + 1e-9));
}

void rate_warning(const Real& p, std::vector<std::string>& warnings) {
  if (p > to_real(kAssumedRate)) {
    warnings.push_back("p = " + to_string(p, 6) + " exceeds the assumed per-node rate 1e-4");
  }
}

std::string to_number(const Real& x) { return to_string(x, 17); }

}  // namespace

Real to_real(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return Real(std::string(buf, res.ptr));
}

std::string to_string(const Real& x, int digits) {
  std::ostringstream out;
  out.precision(digits);
  out << std::scientific << x;
  return out.str();
}

Real binomial_term(int i, int s, const Real& p) {
  using boost::multiprecision::pow;
  return choose(s, i) * pow(p, i) * pow(Real(1) - p, s - i);
}

Real q_exact(int t, int s, const Real& p) {
  check_tail_args(t, s, p);
  if (t == s) return 1;
  Real sum = 0;
  Real term = boost::multiprecision::pow(Real(1) - p, s);
  const Real ratio = p / (Real(1) - p);
  for (int i = 0; i <= t; ++i) {
    sum += term;
    term = term * (s - i) / (i + 1) * ratio;
  }
  return sum;
}

Real p_exact(int t, int s, const Real& p, const TailOptions& options) {
  check_tail_args(t, s, p);
  int last = s;
  if (options.truncate) {
    const auto span = static_cast<int>(std::ceil(options.beta * p.convert_to<double>() * s)) + t;
    last = std::min(s, t + std::max(span, 1));
  }
  if (t >= last) return 0;
  Real sum = 0;
  Real term = binomial_term(t + 1, s, p);
  const Real ratio = p / (Real(1) - p);
  for (int i = t + 1; i <= last; ++i) {
    sum += term;
    term = term * (s - i) / (i + 1) * ratio;
  }
  return sum;
}

TailResult tail_bound(int t, int s, const Real& p, const Real& beta) {
  if (!(beta > 1)) throw PreconditionError("tail bound needs beta > 1");
  TailResult r;
  r.exact = p_exact(t, s, p);
  r.approx = stirling_tail_approx(t, s, p);
  r.bound = binomial_term(t, s, p) / (beta - 1);
  r.bound_regime = p <= Real(1) / (beta * s + 1);
  return r;
}

Real stirling_tail_approx(int t, int s, const Real& p) {
  using boost::multiprecision::pow;
  using boost::multiprecision::sqrt;
  check_tail_args(t, s, p);
  const Real q_part = pow(Real(1) - p, s - t);
  if (t == 0) return q_part;
  const Real pi = boost::math::constants::pi<Real>();
  const Real e = boost::math::constants::e<Real>();
  return sqrt(Real(1) / (2 * pi * t)) * pow(e * s * p / t, t) * q_part;
}

Real clique_tail_closed_form(int s, const Real& p) {
  const Real e = boost::math::constants::e<Real>();
  return boost::multiprecision::pow(3 * e * p, Real(s) / 3);
}

Real pair_tail_closed_form(int s, const Real& p) {
  const Real e = boost::math::constants::e<Real>();
  return boost::multiprecision::pow(6 * e * p, Real(s) / 3);
}

BroadcastReliability broadcast_reliability(int s, std::uint64_t n, const Real& p) {
  using boost::multiprecision::exp;
  using boost::multiprecision::log;
  using boost::multiprecision::pow;
  if (s < 1 || n % static_cast<std::uint64_t>(s) != 0) {
    throw PreconditionError("broadcast reliability needs s dividing n");
  }
  BroadcastReliability r;
  r.s = s;
  r.n = n;
  r.p = p;
  rate_warning(p, r.warnings);
  const int t = s / 3;
  const std::uint64_t cliques = n / s;
  r.clique_tail = p_exact(t, s, p);
  r.pair_tail = p_exact(t, 2 * s, p);
  const Real log_r = Real(cliques) * log(Real(1) - r.clique_tail) +
                     Real(cliques - 1) * log(Real(1) - r.pair_tail);
  r.nu_exact = Real(1) - exp(log_r);
  r.nu_closed_form = Real(1) - pow(Real(1) - pair_tail_closed_form(s, p), Real(cliques));
  const Real pi = boost::math::constants::pi<Real>();
  const Real per_clique = boost::multiprecision::sqrt(Real(3) / (2 * pi * s)) *
                          (clique_tail_closed_form(s, p) + pair_tail_closed_form(s, p));
  r.nu_approx = Real(1) - pow(Real(1) - per_clique, Real(cliques));
  return r;
}

SecureCommReliability securecomm_reliability(std::uint64_t n, const std::vector<std::uint64_t>& sizes,
                                             const Real& p, const std::vector<int>& tolerated,
                                             const std::vector<double>& alpha) {
  using boost::multiprecision::exp;
  using boost::multiprecision::log;
  if (sizes.empty()) throw PreconditionError("stack descriptor needs at least one layer");
  SecureCommReliability r;
  r.n = n;
  r.p = p;
  rate_warning(p, r.warnings);
  Real log_strict = 0;
  Real log_tolerant = 0;
  for (std::size_t l = 0; l < sizes.size(); ++l) {
    const std::uint64_t s = sizes[l];
    if (s == 0 || n % s != 0 || (l > 0 && s % sizes[l - 1] != 0)) {
      throw PreconditionError("inconsistent stack descriptor at layer " + std::to_string(l));
    }
    LayerReliability layer;
    layer.size = s;
    layer.instances = n / s;
    layer.fault_bound = floor_alpha(l < alpha.size() ? alpha[l] : 1.0 / 3.0, s);
    layer.tolerated = l < tolerated.size() ? tolerated[l] : 0;
    if (layer.tolerated < 0 || static_cast<std::uint64_t>(layer.tolerated) > layer.instances) {
      throw PreconditionError("tolerated failures out of range at layer " + std::to_string(l));
    }
    layer.instance_failure = p_exact(layer.fault_bound, static_cast<int>(s), p);
    const int r_l = static_cast<int>(layer.instances);
    if (layer.instance_failure > 0) {
      layer.nu_strict = p_exact(0, r_l, layer.instance_failure);
      layer.nu_tolerant = layer.tolerated >= r_l ? Real(0) : p_exact(layer.tolerated, r_l, layer.instance_failure);
      if (layer.tolerated >= 1 && s > 1) {
        layer.nu_bound = binomial_term(layer.tolerated, r_l, layer.instance_failure) / Real(s - 1);
      }
    }
    layer.bound_regime = layer.instance_failure <= Real(1) / Real(n + 1);
    log_strict += log(Real(1) - layer.nu_strict);
    log_tolerant += log(Real(1) - layer.nu_tolerant);
    r.layers.push_back(layer);
  }
  r.nu_strict = Real(1) - exp(log_strict);
  r.nu_tolerant = Real(1) - exp(log_tolerant);
  return r;
}

nlohmann::json reliability_to_json(const BroadcastReliability& r) {
  return {{"inputs", {{"s", r.s}, {"n", r.n}, {"p", to_number(r.p)}}},
          {"exact_nu", to_number(r.nu_exact)},
          {"bound_nu", to_number(r.nu_closed_form)},
          {"approx_nu", to_number(r.nu_approx)},
          {"clique_tail", to_number(r.clique_tail)},
          {"pair_tail", to_number(r.pair_tail)},
          {"flags", {{"exact_within_bound", r.nu_exact <= r.nu_closed_form}}},
          {"warnings", r.warnings}};
}

nlohmann::json reliability_to_json(const SecureCommReliability& r) {
  auto layers = nlohmann::json::array();
  for (const auto& l : r.layers) {
    layers.push_back({{"s", l.size},
                      {"instances", l.instances},
                      {"fault_bound", l.fault_bound},
                      {"tolerated", l.tolerated},
                      {"instance_failure", to_number(l.instance_failure)},
                      {"nu_strict", to_number(l.nu_strict)},
                      {"nu_tolerant", to_number(l.nu_tolerant)},
                      {"bound_nu", to_number(l.nu_bound)},
                      {"flags", {{"bound_regime", l.bound_regime}}}});
  }
  return {{"inputs", {{"n", r.n}, {"p", to_number(r.p)}}},
          {"exact_nu", to_number(r.nu_tolerant)},
          {"strict_nu", to_number(r.nu_strict)},
          {"layers", layers},
          {"warnings", r.warnings}};
}

}  // namespace msbft
