#include "rpn/explorer.hpp"

#include <algorithm>
#include <deque>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "rpn/causality.hpp"
#include "rpn/netdsl.hpp"

namespace rpn {

const char* to_string(ExploreMode m) {
  switch (m) {
    case ExploreMode::forward_only:
      return "forward";
    case ExploreMode::bt:
      return "bt";
    case ExploreMode::co:
      return "co";
    case ExploreMode::oco:
      return "oco";
  }
  return "?";
}

std::optional<ExploreMode> parse_explore_mode(std::string_view text) {
  if (text == "forward" || text == "forward-only") return ExploreMode::forward_only;
  if (text == "bt") return ExploreMode::bt;
  if (text == "co") return ExploreMode::co;
  if (text == "oco") return ExploreMode::oco;
  return std::nullopt;
}

std::optional<std::size_t> ReachGraph::find(const std::string& key) const {
  auto it = index.find(key);
  if (it == index.end()) return std::nullopt;
  return it->second;
}

Trace ReachGraph::trace_to(std::size_t i) const {
  Trace out;
  while (parent_edge.at(i)) {
    const ReachEdge& e = edges[*parent_edge[i]];
    out.push_back(e.action);
    i = e.from;
  }
  std::reverse(out.begin(), out.end());
  return out;
}

std::vector<Action> enabled_actions(const Net& net, const ExecState& s,
                                    ExploreMode mode) {
  std::vector<Action> out;
  for (TransitionId t : enabled_forward(net, s)) out.push_back(Action::fire(t));
  if (mode == ExploreMode::forward_only) return out;
  ReverseMode rm = mode == ExploreMode::bt   ? ReverseMode::bt
                   : mode == ExploreMode::co ? ReverseMode::co
                                             : ReverseMode::oco;
  for (TransitionId t : enabled_reverse(net, s, rm))
    out.push_back(Action::reverse(t, rm));
  return out;
}

namespace {

StepFn default_step(const StepFn& fn) {
  if (fn) return fn;
  return [](const Net& n, const Marking& m0, const ExecState& s,
            const Action& a) { return step(n, m0, s, a); };
}

ReachGraph explore(const Net& net, const Marking& m0, ExploreMode mode,
                   std::size_t max_steps, std::size_t max_states,
                   const StepFn& st) {
  if (max_steps == 0 || max_states == 0) {
    throw std::invalid_argument("exploration bounds must be positive");
  }
  ReachGraph g;
  auto add = [&](ExecState s, std::size_t depth,
                 std::optional<std::size_t> parent) {
    std::string key = serialize_state(net, s);
    g.index.emplace(key, g.nodes.size());
    g.nodes.push_back(std::move(key));
    g.states.push_back(std::move(s));
    g.depth.push_back(depth);
    g.parent_edge.push_back(parent);
    return g.nodes.size() - 1;
  };
  g.root = add(initial_state(net, m0), 0, std::nullopt);

  std::deque<std::size_t> queue{g.root};
  while (!queue.empty()) {
    std::size_t i = queue.front();
    queue.pop_front();
    auto actions = enabled_actions(net, g.states[i], mode);
    if (g.depth[i] >= max_steps) {
      if (!actions.empty()) g.truncated = true;
      continue;
    }
    for (const auto& a : actions) {
      ExecState next = st(net, m0, g.states[i], a);
      std::string key = serialize_state(net, next);
      std::size_t to;
      if (auto it = g.index.find(key); it != g.index.end()) {
        to = it->second;
      } else {
        if (g.nodes.size() >= max_states) {
          g.truncated = true;
          continue;
        }
        to = add(std::move(next), g.depth[i] + 1, g.edges.size());
        queue.push_back(to);
      }
      g.edges.push_back({i, a, to});
    }
  }
  return g;
}

}  // namespace

ReachGraph reachability_graph(const Net& net, const Marking& m0,
                              ExploreMode mode, std::size_t max_steps,
                              std::size_t max_states) {
  return explore(net, m0, mode, max_steps, max_states, default_step({}));
}

std::string graph_stats(const ReachGraph& g) {
  std::size_t max_depth = 0;
  for (auto d : g.depth) max_depth = std::max(max_depth, d);
  std::ostringstream out;
  out << "states: " << g.nodes.size() << "\n"
      << "edges: " << g.edges.size() << "\n"
      << "depth: " << max_depth << "\n"
      << "truncated: " << (g.truncated ? "yes" : "no") << "\n";
  return out.str();
}

std::string graph_to_dot(const Net& net, const ReachGraph& g) {
  std::ostringstream out;
  out << "digraph reachability {\n  node [shape=box, fontname=monospace];\n";
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    std::string label = serialize_marking(net, g.states[i].marking);
    std::string escaped;
    for (char c : label) {
      if (c == '"' || c == '\\') escaped += '\\';
      if (c == '\n') {
        escaped += "\\l";
        continue;
      }
      escaped += c;
    }
    out << "  s" << i << " [label=\"" << escaped << "\"";
    if (i == g.root) out << ", penwidth=2";
    out << "];\n";
  }
  for (const auto& e : g.edges) {
    std::string label = net.transition(e.action.transition).name;
    if (e.action.direction == Direction::reverse)
      label = "reverse " + label + " (" + to_string(e.action.mode) + ")";
    out << "  s" << e.from << " -> s" << e.to << " [label=\"" << label
        << "\"];\n";
  }
  out << "}\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// Random instances

namespace {

std::string base_name(std::size_t i) {
  if (i < 26) return std::string(1, static_cast<char>('a' + i));
  return "b" + std::to_string(i);
}

}  // namespace

Instance random_instance(std::uint64_t seed, const GeneratorCaps& caps) {
  if (caps.bases > 0 && caps.places == 0) {
    throw GeneratorError("cannot place " + std::to_string(caps.bases) +
                         " base(s) in a net without places");
  }
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32), 0x52504eu};
  std::mt19937_64 rng(seq);
  auto uniform = [&](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };
  auto chance = [&](double p) {
    return std::bernoulli_distribution(p)(rng);
  };
  auto pick = [&](const auto& v) { return v[uniform(0, v.size() - 1)]; };

  const std::size_t nb = caps.bases == 0 ? 0 : uniform(1, caps.bases);
  const std::size_t np = caps.places == 0 ? 0 : uniform(1, caps.places);
  const std::size_t nt = caps.transitions == 0 ? 0 : uniform(1, caps.transitions);

  std::vector<std::string> bases, places;
  for (std::size_t i = 0; i < nb; ++i) bases.push_back(base_name(i));
  for (std::size_t i = 0; i < np; ++i) places.push_back("p" + std::to_string(i));

  NetBuilder builder;
  for (const auto& b : bases) builder.base(b);
  for (const auto& p : places) builder.place(p);

  // Initial marking, with the occasional initial bond.
  std::vector<std::size_t> home(nb);
  std::vector<std::vector<std::string>> cells(np);
  for (std::size_t a = 0; a < nb; ++a) {
    home[a] = uniform(0, np - 1);
    cells[home[a]].push_back(bases[a]);
  }
  for (std::size_t x = 0; x < np; ++x) {
    if (cells[x].size() >= 2 && chance(0.2)) {
      std::vector<std::string> here = cells[x];
      std::shuffle(here.begin(), here.end(), rng);
      cells[x].push_back(here[0] + "-" + here[1]);
    }
  }

  // Places each base may reach; inputs are drawn from these most of the time.
  std::vector<std::vector<std::size_t>> reach(nb);
  for (std::size_t a = 0; a < nb; ++a) reach[a].push_back(home[a]);

  for (std::size_t ti = 0; ti < nt; ++ti) {
    std::string tname = "t" + std::to_string(ti + 1);
    builder.transition(tname);
    if (nb == 0) continue;

    std::vector<std::size_t> order(nb);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::size_t> guard(order.begin(),
                                   order.begin() + uniform(1, std::min<std::size_t>(nb, 3)));
    std::sort(guard.begin(), guard.end());

    std::map<std::size_t, std::vector<std::size_t>> in_label;  // place -> bases
    for (auto a : guard) {
      std::size_t x = chance(0.75) ? pick(reach[a]) : uniform(0, np - 1);
      in_label[x].push_back(a);
    }

    // Guard bonds join bases that share an input place.
    std::vector<std::pair<std::size_t, std::size_t>> guard_bonds;
    for (auto& [x, bs] : in_label) {
      if (bs.size() >= 2 && chance(0.3)) {
        std::vector<std::size_t> tmp = bs;
        std::shuffle(tmp.begin(), tmp.end(), rng);
        guard_bonds.emplace_back(std::min(tmp[0], tmp[1]),
                                 std::max(tmp[0], tmp[1]));
      }
    }

    std::map<std::size_t, std::vector<std::string>> in_entries;
    for (auto& [x, bs] : in_label)
      for (auto a : bs) in_entries[x].push_back(bases[a]);
    for (auto [a, b] : guard_bonds) {
      for (auto& [x, bs] : in_label) {
        if (std::count(bs.begin(), bs.end(), a))
          in_entries[x].push_back(bases[a] + "-" + bases[b]);
      }
    }
    // Negated bases, on a place whose label does not mention them.
    if (caps.negated_entries && chance(0.25)) {
      auto it = std::next(in_label.begin(), uniform(0, in_label.size() - 1));
      std::vector<std::size_t> absent;
      for (std::size_t a = 0; a < nb; ++a)
        if (!std::count(it->second.begin(), it->second.end(), a))
          absent.push_back(a);
      if (!absent.empty()) {
        std::size_t a = pick(absent);
        in_entries[it->first].push_back("!" + bases[a]);
        if (absent.size() >= 2 && chance(0.3)) {
          std::size_t b = pick(absent);
          if (b != a) {
            in_entries[it->first].push_back("!" + bases[b]);
            in_entries[it->first].push_back("!" + bases[std::min(a, b)] + "-" +
                                            bases[std::max(a, b)]);
          }
        }
      }
    }
    for (auto& [x, entries] : in_entries)
      builder.input(tname, places[x], entries);

    // Bases linked by guard bonds must leave through the same place.
    std::vector<std::size_t> group(nb);
    std::iota(group.begin(), group.end(), 0);
    auto root = [&](std::size_t a) {
      while (group[a] != a) a = group[a];
      return a;
    };
    for (auto [a, b] : guard_bonds) group[root(a)] = root(b);
    std::map<std::size_t, std::vector<std::size_t>> groups;
    for (auto a : guard) groups[root(a)].push_back(a);

    std::size_t n_out = uniform(1, std::min<std::size_t>(2, groups.size()));
    std::vector<std::size_t> place_order(np);
    std::iota(place_order.begin(), place_order.end(), 0);
    std::shuffle(place_order.begin(), place_order.end(), rng);
    n_out = std::min(n_out, np);

    std::map<std::size_t, std::vector<std::size_t>> out_label;
    for (auto& [r, members] : groups) {
      std::size_t y = place_order[uniform(0, n_out - 1)];
      for (auto a : members) out_label[y].push_back(a);
    }

    for (auto& [y, bs] : out_label) {
      std::vector<std::string> entries;
      for (auto a : bs) entries.push_back(bases[a]);
      std::set<std::pair<std::size_t, std::size_t>> bonds;
      for (auto [a, b] : guard_bonds)
        if (std::count(bs.begin(), bs.end(), a)) bonds.insert({a, b});
      std::size_t fresh = bs.size() < 2 ? 0 : (chance(0.6) ? (chance(0.3) ? 2 : 1) : 0);
      for (std::size_t i = 0; i < fresh; ++i) {
        std::vector<std::size_t> tmp = bs;
        std::shuffle(tmp.begin(), tmp.end(), rng);
        bonds.insert({std::min(tmp[0], tmp[1]), std::max(tmp[0], tmp[1])});
      }
      for (auto [a, b] : bonds) entries.push_back(bases[a] + "-" + bases[b]);
      builder.output(tname, places[y], entries);
      for (auto a : bs) {
        if (!std::count(reach[a].begin(), reach[a].end(), y))
          reach[a].push_back(y);
      }
    }
  }

  Instance inst{builder.build(), {}};
  std::vector<std::pair<std::string, std::vector<std::string>>> marking;
  for (std::size_t x = 0; x < np; ++x)
    if (!cells[x].empty()) marking.emplace_back(places[x], cells[x]);
  inst.initial = make_marking(inst.net, marking);

  ValidationReport report = check_well_formed(inst.net, inst.initial);
  if (!report.ok()) {
    throw std::logic_error("generator produced an ill-formed net (seed " +
                           std::to_string(seed) + "):\n" + report.to_string());
  }
  return inst;
}

// ---------------------------------------------------------------------------
// Property suite

const std::vector<std::string>& property_names() {
  static const std::vector<std::string> names = {
      "token_preservation",   "bond_linearity",      "key_distinctness",
      "last_place",           "loop_lemma",          "enabledness_inclusion",
      "strategy_agreement",   "reverse_diamond",     "diamond_permutation",
      "incremental_causes",   "theorem1",            "forward_reachability",
      "normal_form",          "equivalent_enabling", "mode_monotonicity",
  };
  return names;
}

namespace {

constexpr std::size_t kMaxViolations = 5;

ExploreMode explore_mode_of(ReverseMode m) {
  return m == ReverseMode::bt ? ExploreMode::bt
         : m == ReverseMode::co ? ExploreMode::co
                                : ExploreMode::oco;
}

std::string names_of(const Net& net, const ElementSet& set) {
  std::string out = "{";
  bool first = true;
  for (const auto& e : set) {
    out += (first ? "" : ", ") + net.element_name(e);
    first = false;
  }
  return out + "}";
}

ElementSet all_bonds(const Marking& m) {
  ElementSet out;
  for (const auto& cell : m)
    for (const auto& e : cell)
      if (e.is_bond()) out.insert(e);
  return out;
}

ElementSet minus(const ElementSet& a, const ElementSet& b) {
  ElementSet out = a;
  out.erase_all(b);
  return out;
}

class Suite {
 public:
  Suite(const Net& net, const Marking& m0, const VerifyBounds& bounds,
        const std::set<std::string>& selection)
      : net_(net), m0_(m0), bounds_(bounds), st_(default_step(bounds.step)) {
    for (const auto& name : property_names()) {
      if (selection.empty() || selection.count(name)) {
        PropertyReport r;
        r.property = name;
        reports_.push_back(std::move(r));
      }
    }
  }

  std::vector<PropertyReport> run() {
    if (any_state_property()) {
      for (ReverseMode m : bounds_.modes) {
        if (bounds_.max_states > 0) run_graph(m);
        for (std::size_t w = 0; w < bounds_.walks; ++w) run_walk(m, w);
      }
    }
    if (selected("theorem1") || selected("forward_reachability") ||
        selected("normal_form") || selected("equivalent_enabling")) {
      run_traces();
    }
    if (selected("mode_monotonicity")) run_monotonicity();
    return reports_;
  }

 private:
  // Bookkeeping -------------------------------------------------------------

  PropertyReport* report(const std::string& name) {
    for (auto& r : reports_)
      if (r.property == name) return &r;
    return nullptr;
  }
  bool selected(const std::string& name) { return report(name) != nullptr; }

  static constexpr const char* kStateProperties[] = {
      "token_preservation", "bond_linearity",        "key_distinctness",
      "last_place",         "loop_lemma",            "enabledness_inclusion",
      "strategy_agreement", "reverse_diamond",       "diamond_permutation",
      "incremental_causes"};

  bool any_state_property() {
    for (const char* n : kStateProperties)
      if (selected(n)) return true;
    return false;
  }

  void mark_state_properties_truncated() {
    for (const char* n : kStateProperties)
      if (auto* r = report(n)) r->truncated = true;
  }

  void checked(const std::string& name) { report(name)->checked++; }

  void fail(const std::string& name, const Trace& trace, std::string detail,
            std::string kind = {}) {
    PropertyReport* r = report(name);
    r->counts[kind]++;
    if (r->violations.size() < kMaxViolations)
      r->violations.push_back({trace, std::move(detail), std::move(kind)});
  }

  // The net with every negated entry dropped.
  const Net& positive_net() {
    if (!positive_) {
      NetBuilder b;
      for (const auto& n : net_.bases()) b.base(n);
      for (const auto& n : net_.places()) b.place(n);
      for (const auto& tr : net_.transitions()) {
        b.transition(tr.name);
        for (bool incoming : {true, false}) {
          for (const auto& arc : incoming ? tr.inputs : tr.outputs) {
            std::vector<std::string> entries;
            for (const auto& e : arc.label.positive)
              entries.push_back(net_.element_name(e));
            if (incoming) {
              b.input(tr.name, net_.places()[arc.place], entries);
            } else {
              b.output(tr.name, net_.places()[arc.place], entries);
            }
          }
        }
      }
      positive_ = b.build();
    }
    return *positive_;
  }

  ExecState apply(const ExecState& s, const Action& a) {
    return st_(net_, m0_, s, a);
  }

  std::string act(const Action& a) { return describe(net_, a); }

  // Drivers -----------------------------------------------------------------

  void run_graph(ReverseMode mode) {
    ReachGraph g = explore(net_, m0_, explore_mode_of(mode), bounds_.depth,
                           bounds_.max_states, st_);
    if (g.truncated) mark_state_properties_truncated();
    // A node is co-reachable when every reversal on its BFS path was
    // co-enabled where it was taken.
    std::vector<bool> co_reachable(g.nodes.size(), true);
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
      if (auto pe = g.parent_edge[i]) {
        const ReachEdge& e = g.edges[*pe];
        co_reachable[i] =
            co_reachable[e.from] &&
            (e.action.direction == Direction::forward ||
             reverse_enabled(net_, g.states[e.from], e.action.transition,
                             ReverseMode::co));
      }
    }
    for (std::size_t i = 0; i < g.nodes.size(); ++i)
      check_state(g.states[i], g.trace_to(i), co_reachable[i]);
    for (const auto& e : g.edges) {
      Trace t = g.trace_to(e.from);
      t.push_back(e.action);
      check_step(g.states[e.from], e.action, g.states[e.to], t);
    }
  }

  void run_walk(ReverseMode mode, std::size_t w) {
    std::seed_seq seq{static_cast<std::uint32_t>(bounds_.seed),
                      static_cast<std::uint32_t>(bounds_.seed >> 32),
                      static_cast<std::uint32_t>(mode),
                      static_cast<std::uint32_t>(w)};
    std::mt19937_64 rng(seq);
    ExecState s = initial_state(net_, m0_);
    Trace trace;
    bool co_reachable = true;
    check_state(s, trace, co_reachable);
    for (std::size_t i = 0; i < bounds_.depth; ++i) {
      auto actions = enabled_actions(net_, s, explore_mode_of(mode));
      if (actions.empty()) break;
      const Action a = actions[std::uniform_int_distribution<std::size_t>(
          0, actions.size() - 1)(rng)];
      if (a.direction == Direction::reverse &&
          !reverse_enabled(net_, s, a.transition, ReverseMode::co))
        co_reachable = false;
      ExecState next = apply(s, a);
      trace.push_back(a);
      check_step(s, a, next, trace);
      check_state(next, trace, co_reachable);
      s = std::move(next);
    }
  }

  // Per-step checks -----------------------------------------------------------

  void check_step(const ExecState& before, const Action& a,
                  const ExecState& after, const Trace& trace) {
    const ElementSet& effect = net_.sets(a.transition).effect;
    if (selected("bond_linearity")) {
      checked("bond_linearity");
      ElementSet b0 = all_bonds(before.marking);
      ElementSet b1 = all_bonds(after.marking);
      ElementSet created = minus(b1, b0);
      ElementSet destroyed = minus(b0, b1);
      const bool fwd = a.direction == Direction::forward;
      const ElementSet& want_created = fwd ? effect : ElementSet{};
      const ElementSet& want_destroyed = fwd ? ElementSet{} : effect;
      if (created != want_created || destroyed != want_destroyed) {
        fail("bond_linearity", trace,
             act(a) + " created " + names_of(net_, created) + " and destroyed " +
                 names_of(net_, destroyed) + "; expected created " +
                 names_of(net_, want_created) + " and destroyed " +
                 names_of(net_, want_destroyed));
      }
    }
    if (selected("key_distinctness") && a.direction == Direction::forward) {
      checked("key_distinctness");
      Key fresh = *after.history.max_key(a.transition);
      Key prior = before.history.global_max();
      if (fresh <= prior) {
        fail("key_distinctness", trace,
             act(a) + " was given key " + std::to_string(fresh) +
                 " but key " + std::to_string(prior) + " is live");
      }
    }
  }

  // Per-state checks ----------------------------------------------------------

  void check_state(const ExecState& s, const Trace& trace, bool co_reachable) {
    if (selected("token_preservation")) check_tokens(s, trace);
    if (selected("bond_linearity")) check_bond_instances(s, trace);
    if (selected("key_distinctness")) check_keys(s, trace);
    if (selected("last_place")) check_last_place(s, trace);
    if (selected("loop_lemma")) check_loop(s, trace, co_reachable);
    if (selected("enabledness_inclusion"))
      check_inclusion(s, trace, co_reachable);
    if (selected("strategy_agreement") && co_reachable)
      check_agreement(s, trace);
    if (selected("reverse_diamond")) check_diamond(s, trace, co_reachable);
    if (selected("diamond_permutation"))
      check_permutations(s, trace, co_reachable);
    if (selected("incremental_causes")) check_causes(s, trace);
  }

  void check_tokens(const ExecState& s, const Trace& trace) {
    checked("token_preservation");
    for (BaseId a = 0; a < net_.base_count(); ++a) {
      std::size_t n = 0;
      for (const auto& cell : s.marking)
        if (cell.contains(Element::base(a))) ++n;
      if (n != 1) {
        fail("token_preservation", trace,
             "base '" + net_.bases()[a] + "' occurs in " + std::to_string(n) +
                 " places");
        return;
      }
    }
  }

  void check_bond_instances(const ExecState& s, const Trace& trace) {
    checked("bond_linearity");
    std::map<Element, std::size_t> count;
    for (PlaceId x = 0; x < s.marking.size(); ++x) {
      for (const auto& e : s.marking[x]) {
        if (!e.is_bond()) continue;
        ++count[e];
        if (!s.marking[x].contains(Element::base(e.lo)) ||
            !s.marking[x].contains(Element::base(e.hi))) {
          fail("bond_linearity", trace,
               "bond " + net_.element_name(e) + " in place '" +
                   net_.places()[x] + "' without both endpoints");
          return;
        }
      }
    }
    for (const auto& [bond, n] : count) {
      if (n > 1) {
        fail("bond_linearity", trace,
             "bond " + net_.element_name(bond) + " occurs in " +
                 std::to_string(n) + " places");
        return;
      }
    }
  }

  void check_keys(const ExecState& s, const Trace& trace) {
    checked("key_distinctness");
    std::set<Key> seen;
    for (const auto& o : s.history.occurrences()) {
      if (!seen.insert(o.key).second) {
        fail("key_distinctness", trace,
             "key " + std::to_string(o.key) + " is used twice");
        return;
      }
    }
    for (const auto& p : s.causes) {
      if (!(p.cause.key < p.effect.key) || !s.history.live(p.cause) ||
          !s.history.live(p.effect)) {
        fail("key_distinctness", trace,
             "causal pair (" + net_.transition(p.cause.transition).name + "," +
                 std::to_string(p.cause.key) + ") < (" +
                 net_.transition(p.effect.transition).name + "," +
                 std::to_string(p.effect.key) +
                 ") is out of order or names a reversed occurrence");
        return;
      }
    }
  }

  void check_last_place(const ExecState& s, const Trace& trace) {
    checked("last_place");
    for (PlaceId x = 0; x < s.marking.size(); ++x) {
      for (const auto& c : components(s.marking[x])) {
        std::optional<PlaceId> lp;
        try {
          lp = last_place(net_, c, s.history, m0_);
        } catch (const InvariantError& e) {
          fail("last_place", trace,
               "component " + names_of(net_, c) + ": " + e.what());
          return;
        }
        if (lp != x) {
          fail("last_place", trace,
               "component " + names_of(net_, c) + " is in '" +
                   net_.places()[x] + "' but its last place is " +
                   (lp ? "'" + net_.places()[*lp] + "'" : "undefined"));
          return;
        }
      }
    }
  }

  void check_loop(const ExecState& s, const Trace& trace, bool co_reachable) {
    for (TransitionId t : enabled_forward(net_, s)) {
      ExecState fired = apply(s, Action::fire(t));
      Trace tt = trace;
      tt.push_back(Action::fire(t));
      for (ReverseMode m : {ReverseMode::bt, ReverseMode::co, ReverseMode::oco}) {
        checked("loop_lemma");
        Action back = Action::reverse(t, m);
        Trace full = tt;
        full.push_back(back);
        if (auto why = reverse_blocker(net_, fired, t, m)) {
          fail("loop_lemma", full, act(back) + " not enabled: " + *why);
          continue;
        }
        if (apply(fired, back) != s) {
          fail("loop_lemma", full,
               "firing then reversing " + net_.transition(t).name +
                   " did not restore the state");
        }
      }
    }
    if (!co_reachable) return;
    for (TransitionId t : enabled_reverse(net_, s, ReverseMode::co)) {
      checked("loop_lemma");
      Action back = Action::reverse(t, ReverseMode::co);
      ExecState undone = apply(s, back);
      Trace full = trace;
      full.push_back(back);
      full.push_back(Action::fire(t));
      if (auto why = forward_blocker(net_, undone, t)) {
        // Dependence only follows tokens a transition consumed, so a later
        // transition can fill a place t needs empty without depending on t.
        bool negation = !forward_blocker(positive_net(), undone, t);
        fail("loop_lemma", full,
             "after " + act(back) + ", fire " + net_.transition(t).name +
                 " is not enabled: " + *why,
             negation ? "negated-entry" : "");
        continue;
      }
      auto v = states_equivalent(net_, apply(undone, Action::fire(t)), s);
      if (!v) {
        fail("loop_lemma", full,
             "reversing and refiring " + net_.transition(t).name +
                 " is not equivalent to the original state: " + *v.witness);
      }
    }
  }

  // bt => co needs the outgoing labels in place, which an out-of-order
  // reversal can break; that half is only checked on co-reachable states.
  void check_inclusion(const ExecState& s, const Trace& trace,
                       bool co_reachable) {
    for (TransitionId t = 0; t < net_.transition_count(); ++t) {
      checked("enabledness_inclusion");
      bool bt = reverse_enabled(net_, s, t, ReverseMode::bt);
      bool co = reverse_enabled(net_, s, t, ReverseMode::co);
      bool oco = reverse_enabled(net_, s, t, ReverseMode::oco);
      if ((co_reachable && bt && !co) || (co && !oco)) {
        fail("enabledness_inclusion", trace,
             "transition '" + net_.transition(t).name + "': bt=" +
                 (bt ? "yes" : "no") + " co=" + (co ? "yes" : "no") +
                 " oco=" + (oco ? "yes" : "no"));
      }
    }
  }

  void check_agreement(const ExecState& s, const Trace& trace) {
    for (TransitionId t = 0; t < net_.transition_count(); ++t) {
      if (!reverse_enabled(net_, s, t, ReverseMode::co)) continue;
      checked("strategy_agreement");
      const std::string& name = net_.transition(t).name;
      Trace full = trace;
      full.push_back(Action::reverse(t, ReverseMode::co));
      ExecState co = apply(s, Action::reverse(t, ReverseMode::co));
      ExecState oco = apply(s, Action::reverse(t, ReverseMode::oco));
      ExecState lit = reference_reverse(net_, s, t, LiteralRule::co);
      if (co != oco) {
        fail("strategy_agreement", full,
             "co and oco reversal of " + name + " differ");
      } else if (co != lit) {
        fail("strategy_agreement", full,
             "co reversal of " + name +
                 " differs from the input-place rule:\n" +
                 serialize_state(net_, co) + "versus\n" +
                 serialize_state(net_, lit));
      }
      if (reverse_enabled(net_, s, t, ReverseMode::bt)) {
        checked("strategy_agreement");
        ExecState bt = apply(s, Action::reverse(t, ReverseMode::bt));
        ExecState lit_bt = reference_reverse(net_, s, t, LiteralRule::bt);
        if (bt != co || bt != lit_bt) {
          full.back() = Action::reverse(t, ReverseMode::bt);
          fail("strategy_agreement", full,
               "bt reversal of " + name +
                   " differs from co reversal or the input-place rule");
        }
      }
    }
  }

  std::vector<ReverseMode> diamond_modes(bool co_reachable) {
    if (co_reachable) return {ReverseMode::co, ReverseMode::oco};
    return {ReverseMode::oco};
  }

  void check_diamond(const ExecState& s, const Trace& trace,
                     bool co_reachable) {
    for (ReverseMode m : diamond_modes(co_reachable)) {
      auto ts = enabled_reverse(net_, s, m);
      for (std::size_t i = 0; i < ts.size(); ++i) {
        for (std::size_t j = i + 1; j < ts.size(); ++j) {
          checked("reverse_diamond");
          Action a1 = Action::reverse(ts[i], m);
          Action a2 = Action::reverse(ts[j], m);
          ExecState s1 = apply(s, a1);
          ExecState s2 = apply(s, a2);
          Trace full = trace;
          full.push_back(a1);
          full.push_back(a2);
          if (!action_enabled(net_, s1, a2) || !action_enabled(net_, s2, a1)) {
            fail("reverse_diamond", full,
                 "reversing one of " + net_.transition(ts[i]).name + ", " +
                     net_.transition(ts[j]).name + " disables the other (" +
                     to_string(m) + ")");
            continue;
          }
          if (apply(s1, a2) != apply(s2, a1)) {
            fail("reverse_diamond", full,
                 "the two orders of reversing " + net_.transition(ts[i]).name +
                     " and " + net_.transition(ts[j]).name + " differ (" +
                     to_string(m) + ")");
          }
        }
      }
    }
  }

  void check_permutations(const ExecState& s, const Trace& trace,
                          bool co_reachable) {
    for (ReverseMode m : diamond_modes(co_reachable)) {
      // Executable reverse sequences of length 3, bucketed by multiset.
      std::map<std::vector<TransitionId>, std::pair<Trace, ExecState>> seen;
      Trace seq;
      auto go = [&](auto&& self, const ExecState& cur) -> void {
        if (seq.size() == 3) {
          std::vector<TransitionId> bag;
          for (const auto& a : seq) bag.push_back(a.transition);
          std::sort(bag.begin(), bag.end());
          checked("diamond_permutation");
          auto [it, fresh] = seen.emplace(bag, std::pair{seq, cur});
          if (!fresh && it->second.second != cur) {
            Trace full = trace;
            full.insert(full.end(), seq.begin(), seq.end());
            fail("diamond_permutation", full,
                 "permutations " + format_trace(net_, it->second.first) +
                     " and " + format_trace(net_, seq) + " differ (" +
                     to_string(m) + ")");
          }
          return;
        }
        for (TransitionId t : enabled_reverse(net_, cur, m)) {
          Action a = Action::reverse(t, m);
          seq.push_back(a);
          self(self, apply(cur, a));
          seq.pop_back();
        }
      };
      go(go, s);
    }
  }

  void check_causes(const ExecState& s, const Trace& trace) {
    checked("incremental_causes");
    std::set<CausalPair> replayed;
    try {
      replayed = recompute_causes(net_, m0_, trace);
    } catch (const std::exception& e) {
      fail("incremental_causes", trace,
           std::string("replay for recomputation failed: ") + e.what());
      return;
    }
    if (replayed != s.causes) {
      ExecState shown = s;
      shown.causes = replayed;
      fail("incremental_causes", trace,
           "maintained causes differ from recomputed ones:\n" +
               serialize_state(net_, s) + "recomputed\n" +
               serialize_state(net_, shown));
    }
  }

  // Co-trace enumeration ----------------------------------------------------

  struct TraceNode {
    std::size_t parent = SIZE_MAX;
    Action last;
    std::size_t length = 0;
    std::size_t key = 0;  // interned equivalence_key of the endpoint
    bool forward_only = true;
    std::vector<Action> enabled;
    std::vector<std::pair<Action, std::size_t>> children;  // action -> key
  };

  Trace trace_of(const std::vector<TraceNode>& nodes, std::size_t i) {
    Trace t;
    for (; nodes[i].parent != SIZE_MAX; i = nodes[i].parent)
      t.push_back(nodes[i].last);
    std::reverse(t.begin(), t.end());
    return t;
  }

  ExecState replay_with(const Trace& trace) {
    ExecState s = initial_state(net_, m0_);
    for (std::size_t i = 0; i < trace.size(); ++i) {
      if (auto why = action_blocker(net_, s, trace[i]))
        throw ReplayError(i, "step " + std::to_string(i + 1) + " (" +
                                 act(trace[i]) + "): " + *why);
      s = apply(s, trace[i]);
    }
    return s;
  }

  std::size_t intern(const std::string& key) {
    return keys_.emplace(key, keys_.size()).first->second;
  }

  void run_traces() {
    const std::size_t depth = bounds_.depth;
    const std::size_t rdepth = std::min(bounds_.rewrite_depth, depth);
    const bool rewrites = selected("theorem1") || selected("normal_form");
    std::vector<TraceNode> nodes;
    std::map<Trace, std::size_t> index;  // traces no longer than rdepth
    std::vector<std::pair<std::size_t, Trace>> links;  // pending rewrite edges
    bool truncated = false;

    // Depth-first enumeration of every co-trace up to `depth`, checking each
    // rewrite of each trace as it is generated.
    Trace cur;
    std::vector<ExecState> stack{initial_state(net_, m0_)};
    auto visit = [&](auto&& self, std::size_t parent) -> std::size_t {
      if (nodes.size() >= bounds_.max_traces) {
        truncated = true;
        return SIZE_MAX;
      }
      const ExecState& s = stack.back();
      std::size_t id = nodes.size();
      {
        TraceNode n;
        n.parent = parent;
        if (!cur.empty()) n.last = cur.back();
        n.length = cur.size();
        n.key = intern(equivalence_key(net_, s));
        n.forward_only =
            parent == SIZE_MAX ||
            (nodes[parent].forward_only && cur.back().direction == Direction::forward);
        n.enabled = enabled_actions(net_, s, ExploreMode::co);
        nodes.push_back(std::move(n));
      }
      if (cur.size() <= rdepth) index[cur] = id;
      if (rewrites) check_rewrites_of(cur, nodes[id].key, stack, id,
                                      cur.size() <= rdepth, links);
      if (cur.size() == depth) return id;
      std::vector<Action> acts = nodes[id].enabled;
      for (const auto& a : acts) {
        cur.push_back(a);
        stack.push_back(apply(stack.back(), a));
        std::size_t child = self(self, id);
        if (child != SIZE_MAX)
          nodes[id].children.emplace_back(a, nodes[child].key);
        stack.pop_back();
        cur.pop_back();
      }
      return id;
    };
    visit(visit, SIZE_MAX);

    for (auto& r : reports_) {
      if (r.property == "theorem1" || r.property == "forward_reachability" ||
          r.property == "normal_form" || r.property == "equivalent_enabling")
        r.truncated = r.truncated || truncated;
    }

    if (selected("equivalent_enabling")) check_equivalent_enabling(nodes);
    if (selected("forward_reachability")) check_forward_reachability(nodes);
    if (rewrites) check_classes(nodes, index, links, rdepth);
  }

  // Each single rewrite of `t` (cancel an adjacent inverse pair, swap an
  // adjacent concurrent pair) must replay and end in an equivalent state.
  void check_rewrites_of(const Trace& t, std::size_t key,
                         const std::vector<ExecState>& states, std::size_t id,
                         bool short_trace,
                         std::vector<std::pair<std::size_t, Trace>>& links) {
    for (std::size_t p = 0; p + 1 < t.size(); ++p) {
      const Action& x = t[p];
      const Action& y = t[p + 1];
      std::vector<std::pair<Trace, const char*>> rewrites;
      if (x.transition == y.transition && x.direction != y.direction) {
        Trace shorter = t;
        shorter.erase(shorter.begin() + p, shorter.begin() + p + 2);
        rewrites.emplace_back(std::move(shorter), "cancelling");
      }
      if (action_enabled(net_, states[p], y) &&
          actions_concurrent(net_, m0_, states[p], x, y)) {
        Trace swapped = t;
        std::swap(swapped[p], swapped[p + 1]);
        rewrites.emplace_back(std::move(swapped), "swapping");
      }
      for (auto& [other, how] : rewrites) {
        if (selected("theorem1")) checked("theorem1");
        std::string where = std::string(how) + " at position " +
                            std::to_string(p + 1) + " gives " +
                            format_trace(net_, other);
        ExecState end;
        try {
          end = replay_with(other);
        } catch (const ReplayError& e) {
          fail_theorem(t, where + ", which does not replay: " + e.what());
          continue;
        }
        if (intern(equivalence_key(net_, end)) != key) {
          fail_theorem(t, where + ", which ends in an inequivalent state");
          continue;
        }
        if (short_trace) links.emplace_back(id, std::move(other));
      }
    }
  }

  void check_equivalent_enabling(const std::vector<TraceNode>& nodes) {
    std::map<std::size_t, std::size_t> first;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      checked("equivalent_enabling");
      auto [it, fresh] = first.emplace(nodes[i].key, i);
      if (fresh) continue;
      const TraceNode& a = nodes[it->second];
      const TraceNode& b = nodes[i];
      if (a.enabled != b.enabled) {
        fail("equivalent_enabling", trace_of(nodes, i),
             "equivalent to " + format_trace(net_, trace_of(nodes, it->second)) +
                 " but enables different actions");
        continue;
      }
      for (const auto& [action, key] : b.children) {
        for (const auto& [other_action, other_key] : a.children) {
          if (other_action == action && other_key != key) {
            fail("equivalent_enabling", trace_of(nodes, i),
                 "equivalent to " +
                     format_trace(net_, trace_of(nodes, it->second)) + " but " +
                     act(action) + " leads to inequivalent states");
          }
        }
      }
    }
  }

  void check_forward_reachability(const std::vector<TraceNode>& nodes) {
    std::set<std::size_t> forward_keys;
    for (const auto& n : nodes)
      if (n.forward_only) forward_keys.insert(n.key);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      checked("forward_reachability");
      if (!forward_keys.count(nodes[i].key)) {
        fail("forward_reachability", trace_of(nodes, i),
             "no forward-only trace of length <= " +
                 std::to_string(bounds_.depth) +
                 " reaches an equivalent state");
      }
    }
  }

  // Rewrite classes of the short traces must coincide with their equivalence
  // classes, and each must contain a forward-only trace.
  void check_classes(const std::vector<TraceNode>& nodes,
                     const std::map<Trace, std::size_t>& index,
                     const std::vector<std::pair<std::size_t, Trace>>& links,
                     std::size_t rdepth) {
    std::vector<std::size_t> uf(nodes.size());
    std::iota(uf.begin(), uf.end(), 0);
    auto find = [&](std::size_t x) {
      while (uf[x] != x) x = uf[x] = uf[uf[x]];
      return x;
    };
    for (const auto& [i, other] : links) {
      auto it = index.find(other);
      if (it != index.end()) uf[find(i)] = find(it->second);
    }

    std::map<std::size_t, bool> class_has_forward;
    for (const auto& [trace, i] : index)
      if (nodes[i].forward_only) class_has_forward[find(i)] = true;

    std::map<std::size_t, std::size_t> by_key;
    for (const auto& [trace, i] : index) {
      if (selected("theorem1")) {
        checked("theorem1");
        auto [it, fresh] = by_key.emplace(nodes[i].key, i);
        if (!fresh && find(it->second) != find(i)) {
          fail_theorem(trace,
                       "ends in a state equivalent to " +
                           format_trace(net_, trace_of(nodes, it->second)) +
                           " but no rewriting within length " +
                           std::to_string(rdepth) + " relates them");
        }
      }
      if (selected("normal_form")) {
        checked("normal_form");
        if (!class_has_forward[find(i)]) {
          fail("normal_form", trace,
               "no forward-only trace is reachable from it by rewriting "
               "within length " +
                   std::to_string(rdepth));
        }
      }
    }
  }

  void fail_theorem(const Trace& t, std::string detail) {
    if (selected("theorem1")) fail("theorem1", t, std::move(detail));
  }

  // Mode monotonicity ---------------------------------------------------------

  void run_monotonicity() {
    PropertyReport* r = report("mode_monotonicity");
    auto graph = [&](ExploreMode m) {
      return explore(net_, m0_, m, bounds_.depth,
                     std::max<std::size_t>(bounds_.max_states, 1), st_);
    };
    ReachGraph fwd = graph(ExploreMode::forward_only);
    ReachGraph co = graph(ExploreMode::co);
    ReachGraph oco = graph(ExploreMode::oco);
    if (fwd.truncated || co.truncated || oco.truncated) {
      r->truncated = true;
      return;
    }
    for (std::size_t i = 0; i < fwd.nodes.size(); ++i) {
      checked("mode_monotonicity");
      if (!co.find(fwd.nodes[i])) {
        fail("mode_monotonicity", fwd.trace_to(i),
             "forward state missing from the co graph");
      }
    }
    for (std::size_t i = 0; i < co.nodes.size(); ++i) {
      checked("mode_monotonicity");
      if (!oco.find(co.nodes[i])) {
        fail("mode_monotonicity", co.trace_to(i),
             "co state missing from the oco graph");
      }
    }
    std::set<Marking> forward_markings;
    for (const auto& s : fwd.states) forward_markings.insert(s.marking);
    for (std::size_t i = 0; i < co.nodes.size(); ++i) {
      checked("mode_monotonicity");
      if (!forward_markings.count(co.states[i].marking)) {
        fail("mode_monotonicity", co.trace_to(i),
             "co-reachable marking not reachable forwards");
      }
    }
  }

  const Net& net_;
  const Marking& m0_;
  const VerifyBounds& bounds_;
  StepFn st_;
  std::vector<PropertyReport> reports_;
  std::unordered_map<std::string, std::size_t> keys_;
  std::optional<Net> positive_;
};

}  // namespace

std::vector<PropertyReport> verify_properties(
    const Net& net, const Marking& m0, const VerifyBounds& bounds,
    const std::set<std::string>& selection) {
  for (const auto& name : selection) {
    const auto& all = property_names();
    if (std::find(all.begin(), all.end(), name) == all.end())
      throw UnknownPropertyError("unknown property '" + name + "'");
  }
  return Suite(net, m0, bounds, selection).run();
}

std::string report_text(const Net& net, const std::vector<PropertyReport>& r,
                        std::uint64_t seed) {
  std::ostringstream out;
  out << "seed " << seed << "\n";
  for (const auto& p : r) {
    out << (p.passed() ? "PASS " : "FAIL ") << p.property << " (" << p.checked
        << " checks" << (p.truncated ? ", bounded" : "") << ")\n";
    for (const auto& [kind, n] : p.counts) {
      out << "  " << n << " violation(s)"
          << (kind.empty() ? "" : " of kind " + kind) << "\n";
    }
    for (const auto& v : p.violations) {
      out << "  trace: " << format_trace(net, v.trace)
          << (v.kind.empty() ? "" : " [" + v.kind + "]") << "\n";
      std::istringstream lines(v.detail);
      std::string line;
      while (std::getline(lines, line)) out << "    " << line << "\n";
    }
  }
  return out.str();
}

std::string report_json(const Net& net, const std::vector<PropertyReport>& r,
                        std::uint64_t seed) {
  nlohmann::json doc;
  doc["seed"] = seed;
  doc["properties"] = nlohmann::json::array();
  for (const auto& p : r) {
    nlohmann::json j;
    j["property"] = p.property;
    j["checked"] = p.checked;
    j["passed"] = p.passed();
    j["truncated"] = p.truncated;
    j["violations"] = nlohmann::json::array();
    for (const auto& v : p.violations) {
      nlohmann::json trace = nlohmann::json::array();
      for (const auto& a : v.trace) trace.push_back(describe(net, a));
      j["violations"].push_back(
          {{"trace", trace}, {"detail", v.detail}, {"kind", v.kind}});
    }
    j["counts"] = nlohmann::json::object();
    for (const auto& [kind, n] : p.counts)
      j["counts"][kind.empty() ? "other" : kind] = n;
    doc["properties"].push_back(std::move(j));
  }
  return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------

std::set<std::string> forward_closure(const Net& net, const ExecState& s,
                                      std::size_t depth) {
  std::set<std::string> seen{serialize_state(net, s)};
  std::vector<ExecState> frontier{s};
  for (std::size_t d = 0; d < depth; ++d) {
    std::vector<ExecState> next;
    for (const auto& cur : frontier) {
      for (TransitionId t : enabled_forward(net, cur)) {
        ExecState n = fire_forward(net, cur, t);
        if (seen.insert(serialize_state(net, n)).second)
          next.push_back(std::move(n));
      }
    }
    frontier = std::move(next);
  }
  return seen;
}

std::optional<ForwardDiamondWitness> forward_diamond_witness(
    const Net& net, const Marking& m0, std::size_t depth) {
  ReachGraph g = reachability_graph(net, m0, ExploreMode::forward_only,
                                    std::max<std::size_t>(depth, 1), 100000);
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const ExecState& s = g.states[i];
    auto ts = enabled_forward(net, s);
    for (std::size_t x = 0; x < ts.size(); ++x) {
      for (std::size_t y = x + 1; y < ts.size(); ++y) {
        ExecState s1 = fire_forward(net, s, ts[x]);
        ExecState s2 = fire_forward(net, s, ts[y]);
        if (!forward_enabled(net, s1, ts[y]) ||
            !forward_enabled(net, s2, ts[x]))
          continue;  // plain conflict
        ExecState s12 = fire_forward(net, s1, ts[y]);
        ExecState s21 = fire_forward(net, s2, ts[x]);
        if (s12 != s21) {
          return ForwardDiamondWitness{g.trace_to(i), ts[x], ts[y], s12, s21};
        }
      }
    }
  }
  return std::nullopt;
}

}  // namespace rpn
