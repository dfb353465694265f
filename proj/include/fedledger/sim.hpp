#pragma once

#include <array>
#include <functional>
#include <queue>
#include <string_view>
#include <vector>

#include "fedledger/types.hpp"

namespace fedledger::sim {

enum class Phase : std::uint8_t {
  LocalTraining,
  AggregationEvaluation,
  Cryptography,
  TransactionExecution,
  DataTransmission,
};

inline constexpr std::size_t kPhaseCount = 5;
inline constexpr std::array<Phase, kPhaseCount> kAllPhases = {
    Phase::LocalTraining, Phase::AggregationEvaluation, Phase::Cryptography, Phase::TransactionExecution,
    Phase::DataTransmission};

std::string_view to_string(Phase p) noexcept;

struct PhaseTimes {
  std::array<Seconds, kPhaseCount> seconds{};

  Seconds& operator[](Phase p) { return seconds[static_cast<std::size_t>(p)]; }
  Seconds operator[](Phase p) const { return seconds[static_cast<std::size_t>(p)]; }
  Seconds total() const;
  Seconds non_training() const { return total() - (*this)[Phase::LocalTraining]; }
  PhaseTimes& operator+=(const PhaseTimes& o);
  bool operator==(const PhaseTimes&) const = default;
};

struct Segment {
  Phase phase{};
  Seconds start = 0;
  Seconds end = 0;
};

/// A point in simulated time together with the chain of work that led to it.
/// Segments are contiguous: each starts where the previous one ended.
class Stamp {
 public:
  Stamp() = default;
  explicit Stamp(Seconds t) : t_(t) {}

  Seconds t() const { return t_; }
  const std::vector<Segment>& path() const { return path_; }

  /// dt seconds of work in phase p (no-op when dt <= 0).
  Stamp advanced(Phase p, Seconds dt) const;
  /// Waiting in phase p until absolute time until (no-op if already later).
  Stamp until(Phase p, Seconds until) const { return advanced(p, until - t_); }

  /// Time spent in each phase within [from, to].
  PhaseTimes window(Seconds from, Seconds to) const;

 private:
  Seconds t_ = 0;
  std::vector<Segment> path_;
};

/// The later stamp; ties keep a.
inline const Stamp& latest(const Stamp& a, const Stamp& b) { return b.t() > a.t() ? b : a; }

/// Actions ordered by (time, insertion sequence).
class EventQueue {
 public:
  using Action = std::function<void()>;

  void push(Seconds t, Action a);
  bool empty() const { return heap_.empty(); }
  Seconds top_time() const { return heap_.top().t; }
  /// Removes the earliest action and returns it with its time.
  std::pair<Seconds, Action> pop();
  std::size_t size() const { return heap_.size(); }

 private:
  struct Item {
    Seconds t;
    std::uint64_t seq;
    Action action;
    bool operator>(const Item& o) const { return t != o.t ? t > o.t : seq > o.seq; }
  };
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap_;
  std::uint64_t seq_ = 0;
};

}  // namespace fedledger::sim
