#pragma once

#include <array>
#include <cstdint>
#include <functional>

namespace salbm {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
// A block is a deterministic function of (key, counter); streams never collide
// because the stream id occupies its own counter words. This is what makes
// per-chain sampling reproducible no matter how chains are scheduled.
std::array<std::uint32_t, 4> philox4x32(const std::array<std::uint32_t, 4>& counter,
                                        const std::array<std::uint32_t, 2>& key);

// splitmix64 finalizer; used to derive sub-seeds (epoch streams, shuffles).
std::uint64_t mix64(std::uint64_t x);
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return mix64(seed ^ mix64(a + 0x9e3779b97f4a7c15ull * (b + 1)));
}

// Sequential view of one Philox stream. Stream s of seed k produces the same
// values regardless of how many other streams exist.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        stream_lo_(static_cast<std::uint32_t>(stream)),
        stream_hi_(static_cast<std::uint32_t>(stream >> 32)) {}

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  // uniform on [0,1), 53-bit mantissa
  double uniform();
  // uniform on (0,1]; safe as a log() argument
  double uniform_open0();
  // fair spin in {-1,+1}
  int spin();
  // standard normal via Box-Muller; one cached spare
  double normal();

 private:
  void refill();
  std::array<std::uint32_t, 2> key_;
  std::uint32_t stream_lo_, stream_hi_;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> buf_{};
  int buf_pos_ = 4;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Blocked parallel loop: [0,n) split into contiguous ranges, one per worker.
// Caller guarantees disjoint writes; results must not depend on the split.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t, std::size_t)>& body);

// Effective worker count: `requested` if > 0, else the global default
// (set once by the CLI --threads flag; initially hardware_concurrency).
int effective_threads(int requested);
void set_default_threads(int n);

}  // namespace salbm
