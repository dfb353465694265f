#include "fedledger/sim.hpp"

#include <algorithm>

namespace fedledger::sim {

std::string_view to_string(Phase p) noexcept {
  switch (p) {
    case Phase::LocalTraining: return "LocalTraining";
    case Phase::AggregationEvaluation: return "AggregationEvaluation";
    case Phase::Cryptography: return "Cryptography";
    case Phase::TransactionExecution: return "TransactionExecution";
    case Phase::DataTransmission: return "DataTransmission";
  }
  return "?";
}

Seconds PhaseTimes::total() const {
  Seconds s = 0;
  for (auto v : seconds) s += v;
  return s;
}

PhaseTimes& PhaseTimes::operator+=(const PhaseTimes& o) {
  for (std::size_t i = 0; i < kPhaseCount; ++i) seconds[i] += o.seconds[i];
  return *this;
}

Stamp Stamp::advanced(Phase p, Seconds dt) const {
  if (!(dt > 0)) return *this;
  Stamp out = *this;
  const Seconds end = t_ + dt;
  if (!out.path_.empty() && out.path_.back().phase == p && out.path_.back().end == t_)
    out.path_.back().end = end;
  else
    out.path_.push_back({p, t_, end});
  out.t_ = end;
  return out;
}

PhaseTimes Stamp::window(Seconds from, Seconds to) const {
  PhaseTimes out;
  for (const auto& s : path_) {
    const Seconds lo = std::max(s.start, from);
    const Seconds hi = std::min(s.end, to);
    if (hi > lo) out[s.phase] += hi - lo;
  }
  return out;
}

void EventQueue::push(Seconds t, Action a) { heap_.push({t, seq_++, std::move(a)}); }

std::pair<Seconds, EventQueue::Action> EventQueue::pop() {
  Item top = heap_.top();
  heap_.pop();
  return {top.t, std::move(top.action)};
}

}  // namespace fedledger::sim
