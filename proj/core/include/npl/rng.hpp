#pragma once
#include <cstdint>

namespace npl {

// Counter-based stream RNG. Every sampling site derives its own stream
// from (seed, draw index, stage tag, element index), so draws can be
// generated in any order, on any number of workers, with identical
// output. The sequence itself is SplitMix64; streams are separated by
// avalanche-hashing the key tuple into the starting state.
enum class Stage : std::uint64_t {
  simulate = 1,
  wlb = 2,
  perturb = 3,
  weights = 4,
  latent = 5,
  lambda = 6,
  start = 7,
};

std::uint64_t avalanche64(std::uint64_t z);
std::uint64_t stream_key(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                         std::uint64_t c);

class StreamRng {
 public:
  explicit StreamRng(std::uint64_t key) : state_(key) {}
  StreamRng(std::uint64_t seed, std::uint64_t draw, Stage stage, std::uint64_t index)
      : state_(stream_key(seed, draw, static_cast<std::uint64_t>(stage), index)) {}

  std::uint64_t next_u64();
  double uniform();      // strictly inside (0, 1)
  double normal();       // standard normal, polar method
  double exponential();  // rate 1

  // shape 0 is the point mass at 0; integer shapes <= 32 use the
  // sum-of-exponentials representation, everything else Marsaglia-Tsang
  double gamma(double shape, double scale);

  // inversion below mean 10, PTRS transformed rejection above
  double poisson(double mean);

  // trials n is an integer-valued double (counts can exceed 2^32);
  // inversion when n*min(p,1-p) < 10, else BTRS transformed rejection
  double binomial(double n, double p);

 private:
  double gamma_shape_ge1(double shape);
  std::uint64_t state_;
  double spare_normal_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace npl
