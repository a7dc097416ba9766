#ifndef MVREPROBIT_RANDOM_HPP
#define MVREPROBIT_RANDOM_HPP

#include <cstdint>
#include <random>

namespace mvreprobit {

/// Seeded pseudo-random stream. Every stochastic routine takes one of these
/// explicitly; two streams built from the same (seed, stream) pair produce
/// identical sequences.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed, std::uint64_t stream = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    engine_.seed(seq);
  }

  // Uniform on the open interval (0, 1).
  double uniform() {
    double u = 0.0;
    do {
      u = std::generate_canonical<double, 53>(engine_);
    } while (u <= 0.0);
    return u;
  }

  double normal() { return normal_(engine_); }

  double normal(double mean, double sd) { return mean + sd * normal_(engine_); }

  double exponential(double rate) { return std::exponential_distribution<double>(rate)(engine_); }

  double chi_squared(double dof) { return std::chi_squared_distribution<double>(dof)(engine_); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

}  // namespace mvreprobit

#endif  // MVREPROBIT_RANDOM_HPP
