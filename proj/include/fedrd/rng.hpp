#pragma once

#include <cstdint>

namespace fedrd {

// Counter-based random stream: every draw is a pure function of
// (master seed, replication, site, subject, slot). Streams for distinct key
// tuples never overlap by construction, so replications can run in any order
// or in parallel and reproduce bit-identically.
namespace rng {

inline uint64_t mix64(uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ULL;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return z;
}

constexpr uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

inline uint64_t absorb(uint64_t h, uint64_t w) { return mix64(h ^ (w + kGamma)); }

inline uint64_t key_hash(uint64_t master, uint64_t rep, uint64_t site, uint64_t subject,
                         uint64_t slot) {
  uint64_t h = mix64(master + kGamma);
  h = absorb(h, rep);
  h = absorb(h, site);
  h = absorb(h, subject);
  h = absorb(h, slot);
  return h;
}

// Uniform in [0, 1) from the top 53 bits.
inline double uniform(uint64_t master, uint64_t rep, uint64_t site, uint64_t subject,
                      uint64_t slot) {
  return (key_hash(master, rep, site, subject, slot) >> 11) * 0x1.0p-53;
}

}  // namespace rng
}  // namespace fedrd
