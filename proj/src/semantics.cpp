#include "rpn/semantics.hpp"

#include <algorithm>

namespace rpn {

std::optional<Key> History::max_key(TransitionId t) const {
  const auto& ks = keys_.at(t);
  if (ks.empty()) return std::nullopt;
  return ks.back();
}

Key History::global_max() const {
  Key m = 0;
  for (const auto& ks : keys_)
    if (!ks.empty()) m = std::max(m, ks.back());
  return m;
}

void History::add(TransitionId t, Key k) {
  auto& ks = keys_.at(t);
  ks.insert(std::upper_bound(ks.begin(), ks.end(), k), k);
}

void History::remove(TransitionId t, Key k) {
  auto& ks = keys_.at(t);
  auto it = std::lower_bound(ks.begin(), ks.end(), k);
  if (it != ks.end() && *it == k) ks.erase(it);
}

bool History::live(const Occurrence& o) const {
  if (o.transition >= keys_.size()) return false;
  const auto& ks = keys_[o.transition];
  return std::binary_search(ks.begin(), ks.end(), o.key);
}

std::vector<Occurrence> History::occurrences() const {
  std::vector<Occurrence> out;
  for (TransitionId t = 0; t < keys_.size(); ++t)
    for (Key k : keys_[t]) out.push_back({t, k});
  return out;
}

ExecState initial_state(const Net& net, const Marking& m0) {
  if (m0.size() != net.place_count()) {
    throw std::invalid_argument("initial marking does not match the net");
  }
  return {m0, History(net.transition_count()), {}};
}

const char* to_string(ReverseMode m) {
  switch (m) {
    case ReverseMode::bt:
      return "bt";
    case ReverseMode::co:
      return "co";
    case ReverseMode::oco:
      return "oco";
  }
  return "?";
}

std::optional<ReverseMode> parse_mode(std::string_view text) {
  if (text == "bt") return ReverseMode::bt;
  if (text == "co") return ReverseMode::co;
  if (text == "oco") return ReverseMode::oco;
  return std::nullopt;
}

std::string describe(const Net& net, const Action& a) {
  const auto& name = net.transition(a.transition).name;
  if (a.direction == Direction::forward) return "fire " + name;
  return "reverse " + name + " mode=" + to_string(a.mode);
}

// ---------------------------------------------------------------------------
// Forward

std::optional<std::string> forward_blocker(const Net& net, const ExecState& s,
                                           TransitionId t) {
  const auto& tr = net.transition(t);
  const auto& m = s.marking;

  // Required presence and absence, bases before bonds.
  for (bool bonds : {false, true}) {
    const char* clause = bonds ? "bond condition" : "token condition";
    for (const auto& arc : tr.inputs) {
      const auto& place = net.places()[arc.place];
      for (const auto& e : arc.label.positive) {
        if (e.is_bond() == bonds && !m[arc.place].contains(e)) {
          return std::string(clause) + ": '" + net.element_name(e) +
                 "' required in place '" + place + "' is absent";
        }
      }
      for (const auto& e : arc.label.negated) {
        if (e.is_bond() == bonds && m[arc.place].contains(e)) {
          return std::string(clause) + ": '" + net.element_name(e) +
                 "' must be absent from place '" + place + "'";
        }
      }
    }
  }

  // Tokens sent to different output places must not be connected now.
  for (const auto& in : tr.inputs) {
    for (const auto& out1 : tr.outputs) {
      for (const auto& a : out1.label.positive) {
        if (!a.is_base()) continue;
        ElementSet comp = connected_component(a.lo, m[in.place]);
        if (comp.empty()) continue;
        for (const auto& out2 : tr.outputs) {
          if (out2.place == out1.place) continue;
          if (comp.intersects(out2.label.positive)) {
            return "split condition: '" + net.element_name(a) +
                   "' is connected in '" + net.places()[in.place] +
                   "' to tokens routed to a different place";
          }
        }
      }
    }
  }

  // A pre-existing bond on an outgoing arc must be required on the input.
  for (const auto& out : tr.outputs) {
    for (const auto& e : out.label.positive) {
      if (!e.is_bond()) continue;
      for (const auto& in : tr.inputs) {
        if (m[in.place].contains(e) && !in.label.positive.contains(e)) {
          return "bond creation condition: bond '" + net.element_name(e) +
                 "' already exists in input place '" +
                 net.places()[in.place] + "'";
        }
      }
    }
  }
  return std::nullopt;
}

bool forward_enabled(const Net& net, const ExecState& s, TransitionId t) {
  return !forward_blocker(net, s, t);
}

ExecState fire_forward(const Net& net, const ExecState& s, TransitionId t) {
  if (auto why = forward_blocker(net, s, t)) {
    throw NotEnabledError("transition '" + net.transition(t).name +
                          "' is not forward-enabled: " + *why);
  }
  const auto& tr = net.transition(t);
  const auto& m = s.marking;

  std::vector<ElementSet> removed(net.place_count());
  std::vector<ElementSet> added(net.place_count());
  ElementSet used;  // every component drawn from an input place

  for (const auto& in : tr.inputs) {
    for (const auto& a : in.label.positive) {
      if (!a.is_base()) continue;
      ElementSet comp = connected_component(a.lo, m[in.place]);
      removed[in.place].insert_all(comp);
      used.insert_all(comp);
    }
  }
  for (const auto& out : tr.outputs) {
    added[out.place].insert_all(out.label.positive);
    for (const auto& a : out.label.positive) {
      if (!a.is_base()) continue;
      for (const auto& in : tr.inputs) {
        if (in.label.positive.contains(a)) {
          added[out.place].insert_all(connected_component(a.lo, m[in.place]));
        }
      }
    }
  }

  ExecState next = s;
  for (PlaceId x = 0; x < net.place_count(); ++x) {
    next.marking[x].erase_all(removed[x]);
    next.marking[x].insert_all(added[x]);
  }

  Key k = s.history.global_max() + 1;
  for (const auto& prior : s.history.occurrences()) {
    if (used.intersects(net.sets(prior.transition).effects)) {
      next.causes.insert({prior, {t, k}});
    }
  }
  next.history.add(t, k);
  return next;
}

// ---------------------------------------------------------------------------
// Reverse

std::optional<std::string> reverse_blocker(const Net& net, const ExecState& s,
                                           TransitionId t, ReverseMode mode) {
  const auto& name = net.transition(t).name;
  auto top = s.history.max_key(t);
  if (!top) return "history of '" + name + "' is empty";

  switch (mode) {
    case ReverseMode::oco:
      return std::nullopt;
    case ReverseMode::bt:
      if (*top < s.history.global_max()) {
        return "history of '" + name +
               "' does not contain the highest key (a later firing exists)";
      }
      return std::nullopt;
    case ReverseMode::co:
      break;
  }

  for (const auto& out : net.transition(t).outputs) {
    for (const auto& e : out.label.positive) {
      if (!s.marking[out.place].contains(e)) {
        return "'" + net.element_name(e) + "' is not available in place '" +
               net.places()[out.place] + "'";
      }
    }
  }
  Occurrence self{t, *top};
  for (const auto& pair : s.causes) {
    if (pair.cause == self && s.history.live(pair.effect)) {
      return "occurrence (" + name + "," + std::to_string(*top) +
             ") has a live dependent (" +
             net.transition(pair.effect.transition).name + "," +
             std::to_string(pair.effect.key) + ")";
    }
  }
  return std::nullopt;
}

bool reverse_enabled(const Net& net, const ExecState& s, TransitionId t,
                     ReverseMode mode) {
  return !reverse_blocker(net, s, t, mode);
}

std::optional<TransitionId> last_transition(const Net& net,
                                            const ElementSet& c,
                                            const History& h) {
  std::optional<TransitionId> best;
  Key best_key = 0;
  for (TransitionId t = 0; t < net.transition_count(); ++t) {
    auto top = h.max_key(t);
    if (!top || !net.sets(t).effects.intersects(c)) continue;
    if (!best || *top > best_key) {
      best = t;
      best_key = *top;
    }
  }
  return best;
}

std::optional<PlaceId> last_place(const Net& net, const ElementSet& c,
                                  const History& h, const Marking& m0) {
  if (auto t = last_transition(net, c, h)) {
    std::optional<PlaceId> found;
    for (const auto& out : net.transition(*t).outputs) {
      if (!out.label.positive.intersects(c)) continue;
      if (found) {
        throw InvariantError("ambiguous outgoing place for a component of '" +
                             net.transition(*t).name + "'");
      }
      found = out.place;
    }
    return found;
  }
  for (PlaceId x = 0; x < m0.size(); ++x) {
    if (c.subset_of(m0[x])) return x;
  }
  return std::nullopt;
}

namespace {

std::optional<PlaceId> place_of(const Marking& m, BaseId a) {
  for (PlaceId x = 0; x < m.size(); ++x)
    if (m[x].contains(Element::base(a))) return x;
  return std::nullopt;
}

void drop_occurrence(std::set<CausalPair>& causes, const Occurrence& o) {
  std::erase_if(causes, [&](const CausalPair& p) {
    return p.cause == o || p.effect == o;
  });
}

}  // namespace

ExecState fire_reverse(const Net& net, const Marking& m0, const ExecState& s,
                       TransitionId t, ReverseMode mode) {
  if (auto why = reverse_blocker(net, s, t, mode)) {
    throw NotEnabledError("transition '" + net.transition(t).name +
                          "' is not " + to_string(mode) +
                          "-enabled: " + *why);
  }
  const auto& sets = net.sets(t);
  Key k = *s.history.max_key(t);

  ExecState next = s;
  next.history.remove(t, k);
  for (auto& cell : next.marking) cell.erase_all(sets.effect);

  struct Move {
    ElementSet component;
    PlaceId from;
    PlaceId to;
  };
  std::vector<Move> moves;
  for (const auto& a : sets.effects) {
    if (!a.is_base()) continue;
    auto from = place_of(next.marking, a.lo);
    if (!from) {
      throw InvariantError("base '" + net.element_name(a) + "' has no place");
    }
    ElementSet comp = connected_component(a.lo, next.marking[*from]);
    auto to = last_place(net, comp, next.history, m0);
    if (!to) {
      throw InvariantError("no place to return the component of '" +
                           net.element_name(a) + "' to");
    }
    if (*to != *from) moves.push_back({std::move(comp), *from, *to});
  }
  for (const auto& mv : moves) next.marking[mv.from].erase_all(mv.component);
  for (const auto& mv : moves) next.marking[mv.to].insert_all(mv.component);

  drop_occurrence(next.causes, {t, k});
  return next;
}

ExecState reference_reverse(const Net& net, const ExecState& s, TransitionId t,
                            LiteralRule rule) {
  ReverseMode mode = rule == LiteralRule::bt ? ReverseMode::bt : ReverseMode::co;
  if (auto why = reverse_blocker(net, s, t, mode)) {
    throw NotEnabledError("transition '" + net.transition(t).name +
                          "' is not " + to_string(mode) +
                          "-enabled: " + *why);
  }
  const auto& tr = net.transition(t);
  const auto& effect = net.sets(t).effect;
  const auto& m = s.marking;
  Key k = *s.history.max_key(t);

  std::vector<ElementSet> removed(net.place_count());
  std::vector<ElementSet> added(net.place_count());
  for (const auto& out : tr.outputs) {
    for (const auto& a : out.label.positive) {
      if (a.is_base())
        removed[out.place].insert_all(connected_component(a.lo, m[out.place]));
    }
  }
  for (const auto& in : tr.inputs) {
    for (const auto& out : tr.outputs) {
      ElementSet broken = m[out.place];
      broken.erase_all(effect);
      for (const auto& a : in.label.positive) {
        if (a.is_base() && out.label.positive.contains(a)) {
          added[in.place].insert_all(connected_component(a.lo, broken));
        }
      }
    }
  }

  ExecState next = s;
  for (PlaceId x = 0; x < net.place_count(); ++x) {
    next.marking[x].erase_all(removed[x]);
    next.marking[x].insert_all(added[x]);
  }
  next.history.remove(t, k);
  std::erase_if(next.causes,
                [&](const CausalPair& p) { return p.effect.key == k; });
  return next;
}

// ---------------------------------------------------------------------------

ExecState step(const Net& net, const Marking& m0, const ExecState& s,
               const Action& a) {
  if (a.direction == Direction::forward) return fire_forward(net, s, a.transition);
  return fire_reverse(net, m0, s, a.transition, a.mode);
}

std::optional<std::string> action_blocker(const Net& net, const ExecState& s,
                                          const Action& a) {
  if (a.direction == Direction::forward)
    return forward_blocker(net, s, a.transition);
  return reverse_blocker(net, s, a.transition, a.mode);
}

bool action_enabled(const Net& net, const ExecState& s, const Action& a) {
  return !action_blocker(net, s, a);
}

ExecState replay(const Net& net, const Marking& m0, const Trace& trace) {
  ExecState s = initial_state(net, m0);
  for (std::size_t i = 0; i < trace.size(); ++i) {
    try {
      s = step(net, m0, s, trace[i]);
    } catch (const NotEnabledError& e) {
      throw ReplayError(i, "step " + std::to_string(i + 1) + " (" +
                               describe(net, trace[i]) + "): " + e.what());
    }
  }
  return s;
}

std::vector<TransitionId> enabled_forward(const Net& net, const ExecState& s) {
  std::vector<TransitionId> out;
  for (TransitionId t = 0; t < net.transition_count(); ++t)
    if (forward_enabled(net, s, t)) out.push_back(t);
  return out;
}

std::vector<TransitionId> enabled_reverse(const Net& net, const ExecState& s,
                                          ReverseMode mode) {
  std::vector<TransitionId> out;
  for (TransitionId t = 0; t < net.transition_count(); ++t)
    if (reverse_enabled(net, s, t, mode)) out.push_back(t);
  return out;
}

}  // namespace rpn
