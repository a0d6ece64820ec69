#include "xxz/rng.hpp"

namespace xxz {

std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> stream) {
  std::uint64_t h = splitmix64(base);
  for (const std::uint64_t s : stream) h = splitmix64(h ^ splitmix64(s + 0x632BE59BD9B4E019ULL));
  return h;
}

}  // namespace xxz
