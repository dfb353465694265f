#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fedledger::fuzz {

struct FuzzReport {
  std::uint64_t sequences = 0;
  std::uint64_t calls = 0;
  std::uint64_t accepted = 0;
  std::uint64_t settlements = 0;
  std::uint64_t voided = 0;
  std::vector<std::string> violations;  // first few only
  std::uint64_t violation_count = 0;
};

/// Random call sequences against a fresh contract each. Checks after every
/// call: rejected calls leave the state untouched, accepted calls come from
/// an authorised caller, per-project and global token conservation, repeat
/// settlement is rejected without effect; and at the end of each sequence
/// the event log of every round is correctly ordered.
FuzzReport fuzz_contract(std::uint64_t seed, std::uint64_t sequences, std::uint32_t steps = 64);

}  // namespace fedledger::fuzz
