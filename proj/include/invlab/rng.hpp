#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

#include <boost/random/normal_distribution.hpp>

namespace invlab {

// SplitMix64 finalizer. Bijective on 64-bit words.
std::uint64_t mix64(std::uint64_t x);

// Folds a list of words into one seed. Each step is mix64(acc ^ mix64(word + k)),
// k being the word's position, so permuted tuples land on different seeds.
std::uint64_t derive_seed(std::initializer_list<std::uint64_t> words);

// Stable 64-bit hash of a label (FNV-1a), used to turn method names into stream ids.
std::uint64_t label_hash(std::string_view label);

// A std::mt19937_64 seeded from a derived 64-bit key. Streams for
// (seed, d, method, repetition) are obtained with Rng::stream, which hashes
// the tuple; two distinct tuples never share an engine state in practice.
class Rng {
 public:
  explicit Rng(std::uint64_t key) : key_(key), engine_(mix64(key)) {}

  static Rng stream(std::uint64_t seed, std::uint64_t d, std::string_view method,
                    std::uint64_t repetition) {
    return Rng(derive_seed({seed, d, label_hash(method), repetition}));
  }

  // Child generator keyed on this generator's key and a tag; does not
  // advance this generator.
  Rng split(std::uint64_t tag) const { return Rng(derive_seed({key_, tag})); }

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  std::uint64_t next_u64() { return engine_(); }
  std::uint64_t key() const { return key_; }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t key_;
  std::mt19937_64 engine_;
  // Ziggurat sampler; several times faster than std::normal_distribution.
  boost::random::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace invlab
