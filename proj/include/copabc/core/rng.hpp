#pragma once

#include <boost/random/beta_distribution.hpp>
#include <boost/random/chi_squared_distribution.hpp>
#include <boost/random/gamma_distribution.hpp>
#include <boost/random/normal_distribution.hpp>

#include <cstdint>
#include <random>

namespace copabc {

/// Reproducible random stream identified by (seed, stream). Equal pairs give
/// bit-identical sequences; the stream id separates parallel consumers.
///
/// The engine is std::mt19937_64 (fully specified by the standard) and the
/// distributions come from Boost.Random, whose algorithms do not vary between
/// standard library implementations.
class SeededRng {
 public:
  using engine_type = std::mt19937_64;

  explicit SeededRng(std::uint64_t seed, std::uint64_t stream = 0) : seed_(seed), stream_(stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                      0x9e3779b9u};
    engine_.seed(seq);
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  /// A new independent stream derived from this one's seed. Streams derived
  /// with different ids never share a (seed, stream) pair with each other.
  SeededRng derive(std::uint64_t id) const { return SeededRng(seed_, mix(stream_, id)); }

  engine_type& engine() { return engine_; }

  /// Uniform on the open interval (0, 1).
  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() { return boost::random::normal_distribution<double>(0.0, 1.0)(engine_); }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  double gamma(double shape, double scale) {
    return boost::random::gamma_distribution<double>(shape, scale)(engine_);
  }

  double chi_squared(double df) { return boost::random::chi_squared_distribution<double>(df)(engine_); }

  double beta(double a, double b) { return boost::random::beta_distribution<double>(a, b)(engine_); }

  bool bernoulli(double p) { return uniform() < p; }

  std::uint64_t next_u64() { return engine_(); }

 private:
  static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    // splitmix64 finaliser over the combined words
    std::uint64_t z = a * 0x9e3779b97f4a7c15ULL + b + 0x632be59bd9b4e019ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::uint64_t stream_;
  engine_type engine_;
};

}  // namespace copabc
