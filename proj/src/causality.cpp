#include "rpn/causality.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <sstream>
#include <unordered_map>

namespace rpn {

std::set<CausalPair> recompute_causes(const Net& net, const Marking& m0,
                                      const Trace& trace) {
  // Marking each live occurrence fired from.  A key can be reused after its
  // occurrence is reversed; the later firing overwrites the entry.
  std::map<Occurrence, Marking> fired_from;
  ExecState s = initial_state(net, m0);
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const Action& a = trace[i];
    if (auto why = action_blocker(net, s, a)) {
      throw ReplayError(i, "step " + std::to_string(i + 1) + " (" +
                               describe(net, a) + "): " + *why);
    }
    ExecState next = step(net, m0, s, a);
    if (a.direction == Direction::forward) {
      Occurrence o{a.transition, *next.history.max_key(a.transition)};
      fired_from[o] = s.marking;
    }
    s = std::move(next);
  }

  std::set<CausalPair> out;
  const auto live = s.history.occurrences();
  for (const auto& later : live) {
    const Marking& pre = fired_from.at(later);
    const Transition& tr = net.transition(later.transition);
    for (const auto& earlier : live) {
      if (earlier.key >= later.key) continue;
      const ElementSet& produced = net.sets(earlier.transition).effects;
      bool depends = false;
      for (const auto& arc : tr.inputs) {
        for (const auto& e : arc.label.positive) {
          if (!e.is_base()) continue;
          ElementSet comp = connected_component(e.lo, pre[arc.place]);
          if (comp.intersects(produced)) depends = true;
        }
      }
      if (depends) out.insert({earlier, later});
    }
  }
  return out;
}

std::vector<CausalPath> causal_paths(const ExecState& s) {
  const auto live = s.history.occurrences();
  std::map<Occurrence, std::vector<Occurrence>> succ;
  std::set<Occurrence> has_pred;
  for (const auto& p : s.causes) {
    if (!s.history.live(p.cause) || !s.history.live(p.effect)) continue;
    succ[p.cause].push_back(p.effect);
    has_pred.insert(p.effect);
  }

  std::vector<CausalPath> out;
  std::vector<Occurrence> current;
  auto extend = [&](auto&& self, const Occurrence& o) -> void {
    current.push_back(o);
    auto it = succ.find(o);
    if (it == succ.end() || it->second.empty()) {
      out.push_back({current});
    } else {
      for (const auto& n : it->second) self(self, n);
    }
    current.pop_back();
  };
  for (const auto& o : live) {
    if (!has_pred.count(o)) extend(extend, o);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::vector<std::string>> path_signatures(const Net& net,
                                                      const ExecState& s) {
  std::set<std::vector<std::string>> sigs;
  for (const auto& path : causal_paths(s)) {
    std::vector<std::string> names;
    for (const auto& o : path.occurrences)
      names.push_back(net.transition(o.transition).name);
    sigs.insert(std::move(names));
  }
  return {sigs.begin(), sigs.end()};
}

namespace {

std::string join_names(const std::vector<std::string>& names) {
  std::string out = "<";
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i) out += ",";
    out += names[i];
  }
  return out + ">";
}

}  // namespace

EquivalenceVerdict histories_equivalent(const Net& net, const ExecState& s1,
                                        const ExecState& s2) {
  for (TransitionId t = 0; t < net.transition_count(); ++t) {
    std::size_t n1 = s1.history.keys(t).size();
    std::size_t n2 = s2.history.keys(t).size();
    if (n1 != n2) {
      return EquivalenceVerdict::no(
          "transition '" + net.transition(t).name + "' has " +
          std::to_string(n1) + " live occurrence(s) on the left and " +
          std::to_string(n2) + " on the right");
    }
  }
  auto p1 = path_signatures(net, s1);
  auto p2 = path_signatures(net, s2);
  for (const auto& p : p1) {
    if (!std::binary_search(p2.begin(), p2.end(), p)) {
      return EquivalenceVerdict::no("causal path " + join_names(p) +
                                    " only on the left");
    }
  }
  for (const auto& p : p2) {
    if (!std::binary_search(p1.begin(), p1.end(), p)) {
      return EquivalenceVerdict::no("causal path " + join_names(p) +
                                    " only on the right");
    }
  }
  return EquivalenceVerdict::yes();
}

EquivalenceVerdict states_equivalent(const Net& net, const ExecState& s1,
                                     const ExecState& s2) {
  for (PlaceId x = 0; x < net.place_count(); ++x) {
    if (s1.marking[x] != s2.marking[x]) {
      std::string l, r;
      for (const auto& e : s1.marking[x]) l += " " + net.element_name(e);
      for (const auto& e : s2.marking[x]) r += " " + net.element_name(e);
      return EquivalenceVerdict::no("place '" + net.places()[x] + "' holds {" +
                                    l + " } on the left and {" + r +
                                    " } on the right");
    }
  }
  return histories_equivalent(net, s1, s2);
}

std::string equivalence_key(const Net& net, const ExecState& s) {
  std::ostringstream out;
  for (PlaceId x = 0; x < net.place_count(); ++x) {
    out << x << ":";
    for (const auto& e : s.marking[x]) out << e.lo << "." << e.hi << " ";
    out << ";";
  }
  out << "|";
  for (TransitionId t = 0; t < net.transition_count(); ++t)
    out << s.history.keys(t).size() << ",";
  out << "|";
  for (const auto& p : path_signatures(net, s)) out << join_names(p);
  return out.str();
}

bool actions_concurrent(const Net& net, const Marking& m0, const ExecState& s,
                        const Action& a1, const Action& a2) {
  for (const Action* a : {&a1, &a2}) {
    if (auto why = action_blocker(net, s, *a)) {
      throw NotEnabledError(describe(net, *a) + ": " + *why);
    }
  }
  ExecState s1 = step(net, m0, s, a1);
  ExecState s2 = step(net, m0, s, a2);
  if (!action_enabled(net, s1, a2) || !action_enabled(net, s2, a1))
    return false;
  return states_equivalent(net, step(net, m0, s1, a2), step(net, m0, s2, a1))
      .equivalent;
}

EquivalenceVerdict traces_equivalent(const Net& net, const Marking& m0,
                                     const Trace& sigma1,
                                     const Trace& sigma2) {
  return states_equivalent(net, replay(net, m0, sigma1),
                           replay(net, m0, sigma2));
}

Action inverse(const Action& a) {
  if (a.direction == Direction::forward)
    return Action::reverse(a.transition, ReverseMode::co);
  return Action::fire(a.transition);
}

std::string format_trace(const Net& net, const Trace& trace) {
  std::string out = "<";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    if (i) out += ", ";
    out += trace[i].direction == Direction::forward
               ? net.transition(trace[i].transition).name
               : "reverse " + net.transition(trace[i].transition).name;
  }
  return out + ">";
}

namespace {

Trace normalise_modes(Trace t) {
  for (auto& a : t)
    if (a.direction == Direction::reverse) a.mode = ReverseMode::co;
  return t;
}

struct TraceLess {
  bool operator()(const Trace& x, const Trace& y) const {
    return std::lexicographical_compare(x.begin(), x.end(), y.begin(),
                                        y.end());
  }
};

bool replays(const Net& net, const Marking& m0, const Trace& t) {
  ExecState s = initial_state(net, m0);
  for (const auto& a : t) {
    if (!action_enabled(net, s, a)) return false;
    s = step(net, m0, s, a);
  }
  return true;
}

}  // namespace

std::optional<bool> rewrite_equivalent(const Net& net, const Marking& m0,
                                       const Trace& sigma1,
                                       const Trace& sigma2,
                                       const RewriteBounds& bounds) {
  const Trace start = normalise_modes(sigma1);
  const Trace goal = normalise_modes(sigma2);
  replay(net, m0, start);
  replay(net, m0, goal);

  std::set<Trace, TraceLess> seen{start};
  std::deque<Trace> queue{start};
  while (!queue.empty()) {
    Trace cur = std::move(queue.front());
    queue.pop_front();
    if (cur == goal) return true;

    // States along cur: states[i] is the state before cur[i].
    std::vector<ExecState> states{initial_state(net, m0)};
    for (const auto& a : cur) states.push_back(step(net, m0, states.back(), a));

    std::vector<Trace> next;
    for (std::size_t i = 0; i + 1 < cur.size(); ++i) {
      const Action& x = cur[i];
      const Action& y = cur[i + 1];
      if (x.transition == y.transition && x.direction != y.direction) {
        Trace shorter = cur;
        shorter.erase(shorter.begin() + i, shorter.begin() + i + 2);
        next.push_back(std::move(shorter));
      }
      if (action_enabled(net, states[i], y) &&
          actions_concurrent(net, m0, states[i], x, y)) {
        Trace swapped = cur;
        std::swap(swapped[i], swapped[i + 1]);
        next.push_back(std::move(swapped));
      }
    }
    if (cur.size() + 2 <= bounds.max_length) {
      for (std::size_t i = 0; i <= cur.size(); ++i) {
        for (TransitionId t = 0; t < net.transition_count(); ++t) {
          for (const Action& a :
               {Action::fire(t), Action::reverse(t, ReverseMode::co)}) {
            if (!action_enabled(net, states[i], a)) continue;
            Trace longer = cur;
            longer.insert(longer.begin() + i, {a, inverse(a)});
            next.push_back(std::move(longer));
          }
        }
      }
    }
    for (auto& n : next) {
      if (!replays(net, m0, n)) continue;
      if (seen.insert(n).second) {
        if (seen.size() > bounds.max_closure) return std::nullopt;
        queue.push_back(std::move(n));
      }
    }
  }
  return false;
}

}  // namespace rpn
