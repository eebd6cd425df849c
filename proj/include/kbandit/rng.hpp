#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace kbandit {

// splitmix64 finalizer, used to derive independent stream seeds.
inline std::uint64_t split_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// mt19937_64 with hand-rolled variate transforms. The standard distribution
// objects are implementation-defined, which would break the byte-identical
// reproducibility contract across toolchains.
class Rng {
public:
  explicit Rng(std::uint64_t seed = 0) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller; generates pairs, second value cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // Student-t with integer dof >= 3, via normal / sqrt(chi2/dof).
  double student_t(int dof) {
    const double z = normal();
    double chi2 = 0.0;
    for (int i = 0; i < dof; ++i) {
      const double g = normal();
      chi2 += g * g;
    }
    return z / std::sqrt(chi2 / static_cast<double>(dof));
  }

  // Index sampled from unnormalized nonnegative weights by inverse CDF.
  int categorical(const std::vector<double>& cumulative) {
    const double u = uniform() * cumulative.back();
    int lo = 0;
    int hi = static_cast<int>(cumulative.size()) - 1;
    while (lo < hi) {
      const int mid = (lo + hi) / 2;
      if (cumulative[static_cast<std::size_t>(mid)] <= u)
        lo = mid + 1;
      else
        hi = mid;
    }
    return lo;
  }

private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace kbandit
