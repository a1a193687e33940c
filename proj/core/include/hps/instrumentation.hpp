#pragma once

#include <atomic>
#include <cstdint>

// Process-wide counters for the expensive build-stage kernels. Tests use them
// to check that the solve stage never re-enters leaf or merge code.
namespace hps::instrumentation {

inline std::atomic<std::uint64_t> leaf_builds{0};
inline std::atomic<std::uint64_t> merges{0};

inline void count_leaf_build() { leaf_builds.fetch_add(1, std::memory_order_relaxed); }
inline void count_merge() { merges.fetch_add(1, std::memory_order_relaxed); }

}  // namespace hps::instrumentation
