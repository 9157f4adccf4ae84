#include "mafl/rng.hpp"

namespace mafl {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_label(std::string_view label) {
  // FNV-1a
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

SeedTree SeedTree::child(std::uint64_t component) const {
  return SeedTree(splitmix64(root_ ^ splitmix64(component + 0x632be59bd9b4e019ULL)));
}

SeedTree SeedTree::child(std::string_view label) const { return child(hash_label(label)); }

Engine SeedTree::engine() const {
  std::seed_seq seq{static_cast<std::uint32_t>(root_), static_cast<std::uint32_t>(root_ >> 32)};
  return Engine(seq);
}

Engine make_engine(std::uint64_t root, std::initializer_list<std::uint64_t> path) {
  SeedTree t(root);
  for (auto c : path) t = t.child(c);
  return t.engine();
}

}  // namespace mafl
