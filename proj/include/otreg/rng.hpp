#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>

namespace otreg {

// Deterministic splitmix64 generator. Campaign reports must be bit-identical
// across runs and platforms, so we avoid std:: distributions (their output is
// implementation-defined) and generate doubles from the top 53 bits directly.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0,1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  double normal() {
    // Box-Muller; cache the second deviate.
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    double r = std::sqrt(-2.0 * std::log(u1));
    double th = 2.0 * M_PI * u2;
    spare_ = r * std::sin(th);
    have_spare_ = true;
    return r * std::cos(th);
  }

  Eigen::VectorXd in_box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    Eigen::VectorXd p(lo.size());
    for (Eigen::Index i = 0; i < lo.size(); ++i) p[i] = uniform(lo[i], hi[i]);
    return p;
  }

  Eigen::VectorXd on_sphere(int n) {
    Eigen::VectorXd v(n);
    double nrm = 0.0;
    do {
      for (int i = 0; i < n; ++i) v[i] = normal();
      nrm = v.norm();
    } while (nrm < 1e-12);
    return v / nrm;
  }

  Eigen::VectorXd in_ball(const Eigen::VectorXd& center, double radius) {
    const int n = static_cast<int>(center.size());
    Eigen::VectorXd d = on_sphere(n);
    double r = radius * std::pow(uniform(), 1.0 / n);
    return center + r * d;
  }

  // Independent stream derived from this generator's seed and a stream id.
  // Does not advance this generator.
  Rng split(std::uint64_t stream) const {
    std::uint64_t s = state_ ^ (0x85ebca6bull * (stream + 1));
    s = (s ^ (s >> 33)) * 0xff51afd7ed558ccdULL;
    s ^= s >> 33;
    return Rng(s);
  }

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Halton low-discrepancy sequence, used for sup-estimates that must be
// monotone under sample refinement (a growing count extends the prefix).
inline double halton(std::uint64_t index, std::uint64_t base) {
  double f = 1.0, r = 0.0;
  std::uint64_t i = index + 1;  // skip the origin
  while (i > 0) {
    f /= static_cast<double>(base);
    r += f * static_cast<double>(i % base);
    i /= base;
  }
  return r;
}

inline Eigen::VectorXd halton_point(std::uint64_t index, int dim,
                                    int base_offset = 0) {
  static const std::uint64_t primes[] = {2,  3,  5,  7,  11, 13,
                                         17, 19, 23, 29, 31, 37};
  Eigen::VectorXd p(dim);
  for (int d = 0; d < dim; ++d) p[d] = halton(index, primes[base_offset + d]);
  return p;
}

}  // namespace otreg
