#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace hybrid {

/// splitmix64 finalizer.
inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t golden_gamma = 0x9e3779b97f4a7c15ULL;

/// Seed of the i-th child stream of `base`.
inline constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t i) {
  return mix64(mix64(base) + (i + 1) * golden_gamma);
}

/// Counter-based generator: the value is a pure function of (seed, counter),
/// mapped to the open interval (0,1).
inline constexpr double counter_uniform(std::uint64_t seed, std::uint64_t counter) {
  std::uint64_t x = mix64(mix64(seed) ^ mix64((counter + 1) * golden_gamma));
  return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
}

/// Drawing past the end of a finite source.
class EntropyExhausted : public std::runtime_error {
 public:
  explicit EntropyExhausted(std::size_t position)
      : std::runtime_error("entropy exhausted at draw " + std::to_string(position)), position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

/// An immutable stream over [0,1]; draw() returns the head and the advanced tail.
class EntropySource {
 public:
  struct Prng {
    std::uint64_t seed;
    std::uint64_t counter;
  };
  struct Prefix {
    std::shared_ptr<const std::vector<double>> values;
    std::size_t pos;
  };
  struct Enumerate {
    std::shared_ptr<const std::vector<double>> atoms;
    std::shared_ptr<const std::vector<std::size_t>> path;
    std::size_t pos;
  };

  EntropySource() : data_(Prng{0, 0}) {}

  static EntropySource from_seed(std::uint64_t seed) { return EntropySource(Prng{seed, 0}); }

  static EntropySource finite(std::vector<double> values) {
    for (double v : values)
      if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("entropy values must lie in [0,1]");
    return EntropySource(Prefix{std::make_shared<const std::vector<double>>(std::move(values)), 0});
  }

  /// Branch i of the path selects atoms[path[i]] at the i-th draw.
  static EntropySource enumerator(std::shared_ptr<const std::vector<double>> atoms, std::vector<std::size_t> path) {
    for (auto i : path)
      if (i >= atoms->size()) throw std::out_of_range("enumerator branch index out of range");
    return EntropySource(Enumerate{std::move(atoms), std::make_shared<const std::vector<std::size_t>>(std::move(path)), 0});
  }

  std::pair<double, EntropySource> draw() const {
    return std::visit(
        [](const auto& s) -> std::pair<double, EntropySource> {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, Prng>) {
            return {counter_uniform(s.seed, s.counter), EntropySource(Prng{s.seed, s.counter + 1})};
          } else if constexpr (std::is_same_v<T, Prefix>) {
            if (s.pos >= s.values->size()) throw EntropyExhausted(s.pos);
            return {(*s.values)[s.pos], EntropySource(Prefix{s.values, s.pos + 1})};
          } else {
            if (s.pos >= s.path->size()) throw EntropyExhausted(s.pos);
            return {(*s.atoms)[(*s.path)[s.pos]], EntropySource(Enumerate{s.atoms, s.path, s.pos + 1})};
          }
        },
        data_);
  }

  /// Number of values drawn so far.
  std::size_t position() const {
    return std::visit(
        [](const auto& s) -> std::size_t {
          if constexpr (std::is_same_v<std::decay_t<decltype(s)>, Prng>)
            return static_cast<std::size_t>(s.counter);
          else
            return s.pos;
        },
        data_);
  }

  const char* kind() const {
    static constexpr const char* names[] = {"prng", "prefix", "enumerator"};
    return names[data_.index()];
  }

  const std::variant<Prng, Prefix, Enumerate>& data() const { return data_; }

  friend bool operator==(const EntropySource& a, const EntropySource& b) {
    if (a.data_.index() != b.data_.index()) return false;
    return std::visit(
        [&](const auto& x) -> bool {
          using T = std::decay_t<decltype(x)>;
          const auto& y = std::get<T>(b.data_);
          if constexpr (std::is_same_v<T, Prng>)
            return x.seed == y.seed && x.counter == y.counter;
          else if constexpr (std::is_same_v<T, Prefix>)
            return x.pos == y.pos && *x.values == *y.values;
          else
            return x.pos == y.pos && *x.atoms == *y.atoms && *x.path == *y.path;
        },
        a.data_);
  }

 private:
  template <class T>
  explicit EntropySource(T s) : data_(std::move(s)) {}

  std::variant<Prng, Prefix, Enumerate> data_;
};

inline EntropySource from_seed(std::uint64_t seed) { return EntropySource::from_seed(seed); }

}  // namespace hybrid
