#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "rpn/net.hpp"
#include "rpn/semantics.hpp"

namespace rpn {

/// A chain of live occurrences, each a direct cause of the next.
struct CausalPath {
  std::vector<Occurrence> occurrences;
  friend auto operator<=>(const CausalPath&, const CausalPath&) = default;
};

struct EquivalenceVerdict {
  bool equivalent = true;
  std::optional<std::string> witness;  // set iff !equivalent

  explicit operator bool() const { return equivalent; }
  static EquivalenceVerdict yes() { return {}; }
  static EquivalenceVerdict no(std::string why) { return {false, std::move(why)}; }
};

/// Causes of the final state of `trace`, computed without the incremental
/// bookkeeping: every pair of occurrences live at the end whose earlier
/// member produced something the later one consumed, judged on the marking
/// the later one fired from.
std::set<CausalPair> recompute_causes(const Net& net, const Marking& m0,
                                      const Trace& trace);

/// Maximal causal paths of s (isolated occurrences are length-1 paths),
/// sorted.  Every causal path is a contiguous piece of one of these.
std::vector<CausalPath> causal_paths(const ExecState& s);

/// Transition-name sequences of the maximal paths, sorted and deduplicated.
std::vector<std::vector<std::string>> path_signatures(const Net& net,
                                                      const ExecState& s);

EquivalenceVerdict histories_equivalent(const Net& net, const ExecState& s1,
                                        const ExecState& s2);
EquivalenceVerdict states_equivalent(const Net& net, const ExecState& s1,
                                     const ExecState& s2);

/// Canonical text such that two states are equivalent iff their keys are
/// equal.  Used to bucket states.
std::string equivalence_key(const Net& net, const ExecState& s);

/// Both actions must be enabled in s (throws NotEnabledError otherwise).
/// True when each stays enabled after the other and both orders end in
/// equivalent states.
bool actions_concurrent(const Net& net, const Marking& m0, const ExecState& s,
                        const Action& a1, const Action& a2);

/// Replays both traces from the initial state (ReplayError on failure) and
/// compares the endpoints.
EquivalenceVerdict traces_equivalent(const Net& net, const Marking& m0,
                                     const Trace& sigma1, const Trace& sigma2);

struct RewriteBounds {
  std::size_t max_length = 6;    // longest intermediate trace
  std::size_t max_closure = 20000;
};

/// Searches the rewrite closure of sigma1 (swap adjacent concurrent actions,
/// cancel or insert `a; reverse a` and `reverse a; a`) for sigma2.  Reverse
/// actions use co mode.  nullopt when the closure hit max_closure before
/// either finding sigma2 or being exhausted.
std::optional<bool> rewrite_equivalent(const Net& net, const Marking& m0,
                                       const Trace& sigma1, const Trace& sigma2,
                                       const RewriteBounds& bounds = {});

/// The inverse action: fire t <-> reverse t (co).
Action inverse(const Action& a);

std::string format_trace(const Net& net, const Trace& trace);

}  // namespace rpn
