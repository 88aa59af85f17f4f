// Copyright 2026 The dronese Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dronese/numerics/mac_counter.h"

#include <vector>

namespace dronese {
namespace {

thread_local MacCounter* active_counter = nullptr;
thread_local std::vector<std::string> scope_stack;

}  // namespace

std::uint64_t MacCounter::total() const {
  std::uint64_t sum = 0;
  for (const auto& [key, n] : counts_) sum += n;
  return sum;
}

std::uint64_t MacCounter::at(const std::string& key) const {
  auto it = counts_.find(key);
  return it == counts_.end() ? 0 : it->second;
}

MacCountingGuard::MacCountingGuard(MacCounter& counter)
    : previous_(active_counter) {
  active_counter = &counter;
}

MacCountingGuard::~MacCountingGuard() { active_counter = previous_; }

MacScope::MacScope(std::string_view name) { scope_stack.emplace_back(name); }

MacScope::~MacScope() { scope_stack.pop_back(); }

bool mac_counting_active() { return active_counter != nullptr; }

std::string current_mac_scope() {
  std::string path;
  for (const auto& part : scope_stack) {
    if (!path.empty()) path += '.';
    path += part;
  }
  return path.empty() ? "unscoped" : path;
}

void record_macs(std::uint64_t macs) {
  if (active_counter) active_counter->add(current_mac_scope(), macs);
}

void record_macs(std::string_view suffix, std::uint64_t macs) {
  if (active_counter) {
    active_counter->add(current_mac_scope() + "." + std::string(suffix), macs);
  }
}

}  // namespace dronese
