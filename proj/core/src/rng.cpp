#include "npl/rng.hpp"

#include <cmath>

#include "npl/errors.hpp"

namespace npl {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

double stirling_tail(double k) {
  // tail of log k! beyond the Stirling core, used by the BTRS bound
  static const double tbl[] = {
      0.0810614667953272,  0.0413406959554092,  0.0276779256849983,
      0.02079067210376509, 0.0166446911898211,  0.0138761288230707,
      0.0118967099458917,  0.0104112652619720,  0.00925546218271273,
      0.00833056343336287};
  if (k < 10.0) return tbl[static_cast<int>(k)];
  double kp1sq = (k + 1.0) * (k + 1.0);
  return (1.0 / 12 - (1.0 / 360 - 1.0 / 1260 / kp1sq) / kp1sq) / (k + 1.0);
}
}  // namespace

std::uint64_t avalanche64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}

std::uint64_t stream_key(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                         std::uint64_t c) {
  std::uint64_t h = avalanche64(seed + kGolden);
  h = avalanche64(h ^ (a + kGolden));
  h = avalanche64(h ^ (b + kGolden));
  h = avalanche64(h ^ (c + kGolden));
  return h;
}

std::uint64_t StreamRng::next_u64() {
  state_ += kGolden;
  return avalanche64(state_);
}

double StreamRng::uniform() {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1p-53;
}

double StreamRng::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_normal_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  double m = std::sqrt(-2.0 * std::log(s) / s);
  spare_normal_ = v * m;
  have_spare_ = true;
  return u * m;
}

double StreamRng::exponential() { return -std::log(uniform()); }

double StreamRng::gamma_shape_ge1(double shape) {
  // Marsaglia-Tsang squeeze
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    double u = uniform();
    double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double StreamRng::gamma(double shape, double scale) {
  if (shape < 0.0 || scale <= 0.0) throw InvalidArgumentError("gamma: bad parameters");
  if (shape == 0.0) return 0.0;
  if (shape == std::floor(shape) && shape <= 32.0) {
    double acc = 0.0;
    for (int k = 0; k < static_cast<int>(shape); ++k) acc += exponential();
    return scale * acc;
  }
  if (shape < 1.0) {
    double g = gamma_shape_ge1(shape + 1.0);
    return scale * g * std::pow(uniform(), 1.0 / shape);
  }
  return scale * gamma_shape_ge1(shape);
}

double StreamRng::poisson(double mean) {
  if (mean < 0.0 || !std::isfinite(mean)) throw InvalidArgumentError("poisson: bad mean");
  if (mean == 0.0) return 0.0;
  if (mean < 10.0) {
    const double limit = std::exp(-mean);
    double k = 0.0, prod = uniform();
    while (prod > limit) {
      k += 1.0;
      prod *= uniform();
    }
    return k;
  }
  // PTRS transformed rejection (valid for mean >= 10)
  const double b = 0.931 + 2.53 * std::sqrt(mean);
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2.0);
  const double lmean = std::log(mean);
  for (;;) {
    double u = uniform() - 0.5;
    double v = uniform();
    double us = 0.5 - std::fabs(u);
    double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
    if (us >= 0.07 && v <= vr) return k;
    if (k < 0.0 || (us < 0.013 && v > us)) continue;
    if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
        k * lmean - mean - std::lgamma(k + 1.0))
      return k;
  }
}

double StreamRng::binomial(double n, double p) {
  if (n < 0.0 || n != std::floor(n) || !std::isfinite(n))
    throw InvalidArgumentError("binomial: n must be a nonnegative integer");
  if (p <= 0.0 || n == 0.0) return 0.0;
  if (p >= 1.0) return n;
  if (p > 0.5) return n - binomial(n, 1.0 - p);

  if (n * p < 10.0) {
    // inversion by pmf recursion; k stays small because np < 10
    const double s = p / (1.0 - p);
    double f = std::exp(n * std::log1p(-p));
    double u = uniform();
    double k = 0.0;
    while (u > f) {
      u -= f;
      k += 1.0;
      if (k > n) return n;
      f *= (n - k + 1.0) / k * s;
      if (f <= 0.0) return k;  // deep-tail underflow guard
    }
    return k;
  }

  // BTRS transformed rejection (Hormann), p <= 0.5, np >= 10
  const double q = 1.0 - p;
  const double stddev = std::sqrt(n * p * q);
  const double b = 1.15 + 2.53 * stddev;
  const double a = -0.0873 + 0.0248 * b + 0.01 * p;
  const double c = n * p + 0.5;
  const double v_r = 0.92 - 4.2 / b;
  const double r = p / q;
  const double alpha = (2.83 + 5.1 / b) * stddev;
  const double m = std::floor((n + 1.0) * p);
  for (;;) {
    double u = uniform() - 0.5;
    double v = uniform();
    double us = 0.5 - std::fabs(u);
    double k = std::floor((2.0 * a / us + b) * u + c);
    if (us >= 0.07 && v <= v_r) return k;
    if (k < 0.0 || k > n) continue;
    v = std::log(v * alpha / (a / (us * us) + b));
    double bound = (m + 0.5) * std::log((m + 1.0) / (r * (n - m + 1.0))) +
                   (n + 1.0) * std::log((n - m + 1.0) / (n - k + 1.0)) +
                   (k + 0.5) * std::log(r * (n - k + 1.0) / (k + 1.0)) +
                   stirling_tail(m) + stirling_tail(n - m) - stirling_tail(k) -
                   stirling_tail(n - k);
    if (v <= bound) return k;
  }
}

}  // namespace npl
