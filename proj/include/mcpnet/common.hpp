#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace mcpnet {

// Base class for everything this library throws.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeMismatch : Error {
  using Error::Error;
};
struct EvenKernel : Error {
  using Error::Error;
};
struct LabelOutOfRange : Error {
  using Error::Error;
};
struct InvalidConfig : Error {
  using Error::Error;
};

struct UnreadableImage : Error {
  using Error::Error;
};
struct UnknownColor : Error {
  using Error::Error;
};
struct EmptySketch : Error {
  using Error::Error;
};
struct SketchLargerThanCanvas : Error {
  using Error::Error;
};
struct UnknownComponent : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};
struct BadMagic : Error {
  using Error::Error;
};
struct VersionMismatch : Error {
  using Error::Error;
};
struct ChecksumMismatch : Error {
  using Error::Error;
};

struct EmptyManifest : Error {
  using Error::Error;
};
struct EmptyDataset : Error {
  using Error::Error;
};
struct LengthMismatch : Error {
  using Error::Error;
};

// Mixes a base seed with a stream id so sub-generators (per epoch, per image,
// ...) get independent, reproducible states. splitmix64 finalizer.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic RNG. All draws are hand-rolled on top of mt19937_64 so that
// streams are bit-stable across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Lemire-style multiply-shift; the bias for the
  // n values used here (n << 2^64) is far below anything observable.
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(
        (static_cast<unsigned __int128>(gen_()) * n) >> 64);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[index(i)]);
    }
  }

  std::vector<std::size_t> permutation(std::size_t n) {
    std::vector<std::size_t> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = i;
    shuffle(p);
    return p;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace mcpnet
