#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace vlmuq {

// The seven generator families used to synthesize non-ECG line images.
enum class DistFamily {
  kNormal,
  kGamma,
  kExponential,
  kPoisson,
  kUniform,
  kChisquare,
  kGeometric,
};

inline constexpr std::array<DistFamily, 7> kAllDistFamilies = {
    DistFamily::kNormal,    DistFamily::kGamma,   DistFamily::kExponential,
    DistFamily::kPoisson,   DistFamily::kUniform, DistFamily::kChisquare,
    DistFamily::kGeometric,
};

inline const char* dist_family_name(DistFamily f) {
  switch (f) {
    case DistFamily::kNormal: return "normal";
    case DistFamily::kGamma: return "gamma";
    case DistFamily::kExponential: return "exponential";
    case DistFamily::kPoisson: return "poisson";
    case DistFamily::kUniform: return "uniform";
    case DistFamily::kChisquare: return "chisquare";
    case DistFamily::kGeometric: return "geometric";
  }
  return "?";
}

// Draws n values from one family. `param` plugs into each family's first
// parameter slot: normal(mean=param, sd=1), gamma(shape=param, scale=1),
// exponential(scale=param), poisson(lambda=param), uniform(low=param, high=1),
// chisquare(df=param), geometric(p=param, support {1,2,...}).
inline std::vector<double> draw_family(std::mt19937_64& rng, DistFamily family,
                                       double param, int n) {
  if (n < 0) throw std::invalid_argument("draw_family: negative count");
  std::vector<double> out(static_cast<size_t>(n));
  switch (family) {
    case DistFamily::kNormal: {
      std::normal_distribution<double> d(param, 1.0);
      for (auto& v : out) v = d(rng);
      break;
    }
    case DistFamily::kGamma: {
      std::gamma_distribution<double> d(param, 1.0);
      for (auto& v : out) v = d(rng);
      break;
    }
    case DistFamily::kExponential: {
      // Scale parameterization: mean == param.
      std::exponential_distribution<double> d(1.0 / param);
      for (auto& v : out) v = d(rng);
      break;
    }
    case DistFamily::kPoisson: {
      std::poisson_distribution<int> d(param);
      for (auto& v : out) v = double(d(rng));
      break;
    }
    case DistFamily::kUniform: {
      std::uniform_real_distribution<double> d(param, 1.0);
      for (auto& v : out) v = d(rng);
      break;
    }
    case DistFamily::kChisquare: {
      std::chi_squared_distribution<double> d(param);
      for (auto& v : out) v = d(rng);
      break;
    }
    case DistFamily::kGeometric: {
      // Support {1, 2, ...}: number of trials up to the first success.
      std::geometric_distribution<int> d(param);
      for (auto& v : out) v = double(d(rng) + 1);
      break;
    }
  }
  return out;
}

inline DistFamily pick_family(std::mt19937_64& rng) {
  std::uniform_int_distribution<size_t> d(0, kAllDistFamilies.size() - 1);
  return kAllDistFamilies[d(rng)];
}

// Unbiased draw in [0, bound) via rejection; avoids the unspecified
// stdlib uniform_int_distribution algorithm so shuffles reproduce anywhere.
inline uint64_t bounded_rand(std::mt19937_64& rng, uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("bounded_rand: zero bound");
  uint64_t threshold = (0 - bound) % bound;  // 2^64 mod bound
  for (;;) {
    uint64_t r = rng();
    if (r >= threshold) return r % bound;
  }
}

// Fisher-Yates with explicit bounded draws; deterministic for a given seed
// across standard-library implementations.
template <typename T>
void deterministic_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    uint64_t j = bounded_rand(rng, i);
    std::swap(v[i - 1], v[static_cast<size_t>(j)]);
  }
}

}  // namespace vlmuq
