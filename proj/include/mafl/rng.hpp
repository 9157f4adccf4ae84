#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace mafl {

using Engine = std::mt19937_64;

// Counter-based seed derivation. A stream is identified by the root seed
// plus a path of integer/label components, so adding a device or a round
// never perturbs the streams of existing ones.
class SeedTree {
 public:
  explicit SeedTree(std::uint64_t root) : root_(root) {}

  std::uint64_t root() const { return root_; }

  SeedTree child(std::uint64_t component) const;
  SeedTree child(std::string_view label) const;

  std::uint64_t seed() const { return root_; }
  Engine engine() const;

 private:
  std::uint64_t root_;
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t hash_label(std::string_view label);

// Convenience: engine for root → a → b → ...
Engine make_engine(std::uint64_t root, std::initializer_list<std::uint64_t> path);

}  // namespace mafl
