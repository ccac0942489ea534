#pragma once

#include <compare>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "rpn/net.hpp"

namespace rpn {

using Key = std::uint32_t;

/// A live firing of a transition, named by its history key.
struct Occurrence {
  TransitionId transition = 0;
  Key key = 0;
  friend auto operator<=>(const Occurrence&, const Occurrence&) = default;
};

/// Direct causal dependence: `cause` was used to fire `effect`.
struct CausalPair {
  Occurrence cause;
  Occurrence effect;
  friend auto operator<=>(const CausalPair&, const CausalPair&) = default;
};

/// Per-transition sorted key lists.  An empty list means the transition has
/// not fired (or every firing has been reversed).
class History {
 public:
  History() = default;
  explicit History(std::size_t transitions) : keys_(transitions) {}

  const std::vector<Key>& keys(TransitionId t) const { return keys_.at(t); }
  bool executed(TransitionId t) const { return !keys_.at(t).empty(); }
  std::optional<Key> max_key(TransitionId t) const;
  /// Largest key over all transitions, 0 when none.
  Key global_max() const;
  std::size_t size() const { return keys_.size(); }

  void add(TransitionId t, Key k);
  void remove(TransitionId t, Key k);
  bool live(const Occurrence& o) const;
  std::vector<Occurrence> occurrences() const;

  friend bool operator==(const History&, const History&) = default;

 private:
  std::vector<std::vector<Key>> keys_;
};

struct ExecState {
  Marking marking;
  History history;
  std::set<CausalPair> causes;

  friend bool operator==(const ExecState&, const ExecState&) = default;
};

/// Initial state <M0, H0, {}>.
ExecState initial_state(const Net& net, const Marking& m0);

enum class Direction { forward, reverse };
enum class ReverseMode { bt, co, oco };

struct Action {
  Direction direction = Direction::forward;
  TransitionId transition = 0;
  ReverseMode mode = ReverseMode::oco;  // ignored for forward actions

  static Action fire(TransitionId t) { return {Direction::forward, t, {}}; }
  static Action reverse(TransitionId t, ReverseMode m) {
    return {Direction::reverse, t, m};
  }

  friend bool operator==(const Action& x, const Action& y) {
    if (x.direction != y.direction || x.transition != y.transition)
      return false;
    return x.direction == Direction::forward || x.mode == y.mode;
  }
  friend bool operator<(const Action& x, const Action& y) {
    auto key = [](const Action& a) {
      return std::tuple(a.transition, a.direction,
                        a.direction == Direction::forward ? ReverseMode::bt
                                                          : a.mode);
    };
    return key(x) < key(y);
  }
};

using Trace = std::vector<Action>;

const char* to_string(ReverseMode m);
std::optional<ReverseMode> parse_mode(std::string_view text);
std::string describe(const Net& net, const Action& a);

/// Thrown when a firing is attempted on a disabled transition.  The message
/// names the failing enabledness condition.
class NotEnabledError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown when a state contradicts an invariant the semantics relies on
/// (e.g. a component with no unique place to return to).
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Forward execution -------------------------------------------------------

/// Reason the transition is not forward-enabled, or nullopt when it is.
std::optional<std::string> forward_blocker(const Net& net, const ExecState& s,
                                           TransitionId t);
bool forward_enabled(const Net& net, const ExecState& s, TransitionId t);

/// Fires t forwards: moves the connected components named on the incoming
/// arcs to the outgoing places, assigns a fresh key and records the direct
/// causes of the new occurrence, judged on the pre-state marking.
ExecState fire_forward(const Net& net, const ExecState& s, TransitionId t);

// Reverse execution -------------------------------------------------------

std::optional<std::string> reverse_blocker(const Net& net, const ExecState& s,
                                           TransitionId t, ReverseMode mode);
bool reverse_enabled(const Net& net, const ExecState& s, TransitionId t,
                     ReverseMode mode);

/// The live transition with the greatest key whose outgoing labels mention
/// an element of c.
std::optional<TransitionId> last_transition(const Net& net,
                                            const ElementSet& c,
                                            const History& h);

/// Where component c belongs: the outgoing place of last_transition that
/// receives part of c, or the initial place holding c when no live transition
/// touched it.  Throws InvariantError if the outgoing place is not unique.
std::optional<PlaceId> last_place(const Net& net, const ElementSet& c,
                                  const History& h, const Marking& m0);

/// Reverses the most recent occurrence of t.  One marking update serves all
/// three modes: effect bonds are broken and each resulting component moves
/// to its last place.  The mode only selects the enabledness check.
ExecState fire_reverse(const Net& net, const Marking& m0, const ExecState& s,
                       TransitionId t, ReverseMode mode);

enum class LiteralRule { bt, co };

/// Input-place-directed reversal: components return to the incoming places
/// of t.  Kept as an independent oracle for fire_reverse.
ExecState reference_reverse(const Net& net, const ExecState& s, TransitionId t,
                            LiteralRule rule);

/// Dispatches to fire_forward / fire_reverse.
ExecState step(const Net& net, const Marking& m0, const ExecState& s,
               const Action& a);
bool action_enabled(const Net& net, const ExecState& s, const Action& a);
std::optional<std::string> action_blocker(const Net& net, const ExecState& s,
                                          const Action& a);

/// Replays a trace from the initial state; throws ReplayError on the first
/// disabled step.
class ReplayError : public std::runtime_error {
 public:
  ReplayError(std::size_t index, const std::string& what)
      : std::runtime_error(what), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

ExecState replay(const Net& net, const Marking& m0, const Trace& trace);

/// Enabled actions in s: forward transitions, and reversals under `mode`.
std::vector<TransitionId> enabled_forward(const Net& net, const ExecState& s);
std::vector<TransitionId> enabled_reverse(const Net& net, const ExecState& s,
                                          ReverseMode mode);

}  // namespace rpn
