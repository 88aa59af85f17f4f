// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>

namespace dronese {

// Per-layer multiply-accumulate tally filled in by the forward kernels.
//
// Kernels report into whatever counter is installed on the calling thread
// (see MacCountingGuard) under the current MacScope path, e.g.
// "transformer.layer0.attention.q_proj". Attention additionally splits its
// count into ".qk" and ".av" sub-keys. When no counter is installed the
// kernels skip the bookkeeping entirely.
class MacCounter {
 public:
  void add(const std::string& key, std::uint64_t macs) { counts_[key] += macs; }
  std::uint64_t total() const;
  std::uint64_t at(const std::string& key) const;
  const std::map<std::string, std::uint64_t>& counts() const { return counts_; }
  void clear() { counts_.clear(); }

 private:
  std::map<std::string, std::uint64_t> counts_;
};

class MacCountingGuard {
 public:
  explicit MacCountingGuard(MacCounter& counter);
  ~MacCountingGuard();
  MacCountingGuard(const MacCountingGuard&) = delete;
  MacCountingGuard& operator=(const MacCountingGuard&) = delete;

 private:
  MacCounter* previous_;
};

// Pushes a path component for the lifetime of the object.
class MacScope {
 public:
  explicit MacScope(std::string_view name);
  ~MacScope();
  MacScope(const MacScope&) = delete;
  MacScope& operator=(const MacScope&) = delete;
};

bool mac_counting_active();
std::string current_mac_scope();
void record_macs(std::uint64_t macs);
void record_macs(std::string_view suffix, std::uint64_t macs);

}  // namespace dronese
