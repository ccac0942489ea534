#include "rpn/net.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

namespace rpn {

Element Element::bond(BaseId a, BaseId b) {
  if (a == b) throw std::invalid_argument("self-bond is not allowed");
  return a < b ? Element{a, b} : Element{b, a};
}

ElementSet::ElementSet(std::initializer_list<Element> init) {
  for (const auto& e : init) insert(e);
}

bool ElementSet::contains(const Element& e) const {
  return std::binary_search(items_.begin(), items_.end(), e);
}

bool ElementSet::insert(const Element& e) {
  auto it = std::lower_bound(items_.begin(), items_.end(), e);
  if (it != items_.end() && *it == e) return false;
  items_.insert(it, e);
  return true;
}

bool ElementSet::erase(const Element& e) {
  auto it = std::lower_bound(items_.begin(), items_.end(), e);
  if (it == items_.end() || !(*it == e)) return false;
  items_.erase(it);
  return true;
}

void ElementSet::insert_all(const ElementSet& other) {
  if (other.items_.empty()) return;
  std::vector<Element> merged;
  merged.reserve(items_.size() + other.items_.size());
  std::set_union(items_.begin(), items_.end(), other.items_.begin(),
                 other.items_.end(), std::back_inserter(merged));
  items_ = std::move(merged);
}

void ElementSet::erase_all(const ElementSet& other) {
  if (other.items_.empty() || items_.empty()) return;
  std::vector<Element> rest;
  rest.reserve(items_.size());
  std::set_difference(items_.begin(), items_.end(), other.items_.begin(),
                      other.items_.end(), std::back_inserter(rest));
  items_ = std::move(rest);
}

bool ElementSet::intersects(const ElementSet& other) const {
  auto i = items_.begin();
  auto j = other.items_.begin();
  while (i != items_.end() && j != other.items_.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      return true;
    }
  }
  return false;
}

bool ElementSet::subset_of(const ElementSet& other) const {
  return std::includes(other.items_.begin(), other.items_.end(),
                       items_.begin(), items_.end());
}

// ---------------------------------------------------------------------------

const Transition& Net::transition(TransitionId t) const {
  if (t >= transitions_.size()) throw UnknownNameError("unknown transition id");
  return transitions_[t];
}

const TransitionSets& Net::sets(TransitionId t) const {
  if (t >= sets_.size()) throw UnknownNameError("unknown transition id");
  return sets_[t];
}

namespace {

template <typename Range>
std::optional<std::uint32_t> find_sorted(const Range& names,
                                         std::string_view name) {
  auto it = std::lower_bound(names.begin(), names.end(), name,
                             [](const auto& x, std::string_view y) {
                               return std::string_view(x) < y;
                             });
  if (it == names.end() || *it != name) return std::nullopt;
  return static_cast<std::uint32_t>(it - names.begin());
}

const Label* find_arc(const std::vector<Arc>& arcs, PlaceId x) {
  for (const auto& arc : arcs) {
    if (arc.place == x) return &arc.label;
  }
  return nullptr;
}

}  // namespace

std::optional<BaseId> Net::find_base(std::string_view name) const {
  return find_sorted(bases_, name);
}

std::optional<PlaceId> Net::find_place(std::string_view name) const {
  return find_sorted(places_, name);
}

std::optional<TransitionId> Net::find_transition(std::string_view name) const {
  auto it = std::lower_bound(
      transitions_.begin(), transitions_.end(), name,
      [](const Transition& x, std::string_view y) { return x.name < y; });
  if (it == transitions_.end() || it->name != name) return std::nullopt;
  return static_cast<TransitionId>(it - transitions_.begin());
}

BaseId Net::base_id(std::string_view name) const {
  if (auto id = find_base(name)) return *id;
  throw UnknownNameError("unknown base '" + std::string(name) + "'");
}

PlaceId Net::place_id(std::string_view name) const {
  if (auto id = find_place(name)) return *id;
  throw UnknownNameError("unknown place '" + std::string(name) + "'");
}

TransitionId Net::transition_id(std::string_view name) const {
  if (auto id = find_transition(name)) return *id;
  throw UnknownNameError("unknown transition '" + std::string(name) + "'");
}

const Label* Net::input_label(TransitionId t, PlaceId x) const {
  return find_arc(transition(t).inputs, x);
}

const Label* Net::output_label(TransitionId t, PlaceId x) const {
  return find_arc(transition(t).outputs, x);
}

std::string Net::element_name(const Element& e) const {
  if (e.is_base()) return bases_.at(e.lo);
  return bases_.at(e.lo) + "-" + bases_.at(e.hi);
}

ElementSet Net::bonds() const {
  ElementSet out;
  for (const auto& t : transitions_) {
    for (const auto* arcs : {&t.inputs, &t.outputs}) {
      for (const auto& arc : *arcs) {
        for (const auto& e : arc.label.positive)
          if (e.is_bond()) out.insert(e);
        for (const auto& e : arc.label.negated)
          if (e.is_bond()) out.insert(e);
      }
    }
  }
  return out;
}

void Net::derive() {
  sets_.clear();
  sets_.reserve(transitions_.size());
  for (const auto& t : transitions_) {
    TransitionSets s;
    for (const auto& arc : t.inputs) {
      s.guard.insert_all(arc.label.positive);
      s.pre_places.push_back(arc.place);
    }
    for (const auto& arc : t.outputs) {
      s.effects.insert_all(arc.label.positive);
      s.post_places.push_back(arc.place);
    }
    for (const auto& e : s.effects) {
      if (e.is_bond() && !s.guard.contains(e)) s.effect.insert(e);
    }
    sets_.push_back(std::move(s));
  }
}

// ---------------------------------------------------------------------------

NetBuilder& NetBuilder::base(std::string name) {
  bases_.push_back(std::move(name));
  return *this;
}

NetBuilder& NetBuilder::place(std::string name) {
  places_.push_back(std::move(name));
  return *this;
}

NetBuilder& NetBuilder::transition(std::string name) {
  transitions_.push_back(std::move(name));
  return *this;
}

NetBuilder& NetBuilder::input(std::string_view transition,
                              std::string_view place,
                              const std::vector<std::string>& entries) {
  arcs_.push_back({std::string(transition), std::string(place), entries, true});
  return *this;
}

NetBuilder& NetBuilder::output(std::string_view transition,
                               std::string_view place,
                               const std::vector<std::string>& entries) {
  arcs_.push_back(
      {std::string(transition), std::string(place), entries, false});
  return *this;
}

namespace {

void sort_unique_names(std::vector<std::string>& names, const char* what) {
  std::sort(names.begin(), names.end());
  auto dup = std::adjacent_find(names.begin(), names.end());
  if (dup != names.end()) {
    throw std::invalid_argument(std::string("duplicate ") + what + " '" +
                                *dup + "'");
  }
}

void add_entry(Label& label, Element e, bool negated) {
  ElementSet& target = negated ? label.negated : label.positive;
  target.insert(e);
  if (e.is_bond()) {
    target.insert(Element::base(e.lo));
    target.insert(Element::base(e.hi));
  }
}

}  // namespace

Net NetBuilder::build() const {
  Net net;
  net.bases_ = bases_;
  net.places_ = places_;
  sort_unique_names(net.bases_, "base");
  sort_unique_names(net.places_, "place");
  auto tnames = transitions_;
  sort_unique_names(tnames, "transition");
  for (auto& name : tnames) net.transitions_.push_back({name, {}, {}});

  for (const auto& pending : arcs_) {
    TransitionId t = net.transition_id(pending.transition);
    PlaceId x = net.place_id(pending.place);
    auto& arcs = pending.incoming ? net.transitions_[t].inputs
                                  : net.transitions_[t].outputs;
    auto it = std::find_if(arcs.begin(), arcs.end(),
                           [x](const Arc& a) { return a.place == x; });
    if (it == arcs.end()) {
      arcs.push_back({x, {}});
      it = std::prev(arcs.end());
    }
    for (const auto& text : pending.entries) {
      auto [e, negated] = parse_entry(net, text);
      add_entry(it->label, e, negated);
    }
  }
  for (auto& t : net.transitions_) {
    auto by_place = [](const Arc& a, const Arc& b) { return a.place < b.place; };
    std::sort(t.inputs.begin(), t.inputs.end(), by_place);
    std::sort(t.outputs.begin(), t.outputs.end(), by_place);
    // An arc with an empty label is no arc at all.
    std::erase_if(t.inputs, [](const Arc& a) { return a.label.empty(); });
    std::erase_if(t.outputs, [](const Arc& a) { return a.label.empty(); });
  }
  net.derive();
  return net;
}

std::pair<Element, bool> parse_entry(const Net& net, std::string_view text) {
  bool negated = false;
  if (!text.empty() && text.front() == '!') {
    negated = true;
    text.remove_prefix(1);
  }
  auto dash = text.find('-');
  if (dash == std::string_view::npos) {
    return {Element::base(net.base_id(text)), negated};
  }
  BaseId a = net.base_id(text.substr(0, dash));
  BaseId b = net.base_id(text.substr(dash + 1));
  if (a == b) {
    throw std::invalid_argument("self-bond '" + std::string(text) +
                                "' is not allowed");
  }
  return {Element::bond(a, b), negated};
}

Marking make_marking(
    const Net& net,
    const std::vector<std::pair<std::string, std::vector<std::string>>>&
        cells) {
  Marking m = empty_marking(net);
  for (const auto& [place, entries] : cells) {
    PlaceId x = net.place_id(place);
    for (const auto& text : entries) {
      auto [e, negated] = parse_entry(net, text);
      if (negated) {
        throw std::invalid_argument("negated entry '" + text +
                                    "' in a marking");
      }
      m[x].insert(e);
      if (e.is_bond()) {
        m[x].insert(Element::base(e.lo));
        m[x].insert(Element::base(e.hi));
      }
    }
  }
  return m;
}

Marking empty_marking(const Net& net) { return Marking(net.place_count()); }

// ---------------------------------------------------------------------------

ElementSet connected_component(BaseId a, const ElementSet& c) {
  ElementSet out;
  if (!c.contains(Element::base(a))) return out;
  std::vector<BaseId> frontier{a};
  out.insert(Element::base(a));
  while (!frontier.empty()) {
    BaseId cur = frontier.back();
    frontier.pop_back();
    for (const auto& e : c) {
      if (!e.is_bond() || (e.lo != cur && e.hi != cur)) continue;
      BaseId other = e.lo == cur ? e.hi : e.lo;
      // A bond only connects when its far endpoint is present in c.
      if (!c.contains(Element::base(other))) continue;
      out.insert(e);
      if (out.insert(Element::base(other))) frontier.push_back(other);
    }
  }
  return out;
}

std::vector<ElementSet> components(const ElementSet& c) {
  std::vector<ElementSet> out;
  ElementSet seen;
  for (const auto& e : c) {
    if (!e.is_base() || seen.contains(e)) continue;
    ElementSet comp = connected_component(e.lo, c);
    seen.insert_all(comp);
    out.push_back(std::move(comp));
  }
  return out;
}

const TransitionSets& transition_sets(const Net& net, TransitionId t) {
  return net.sets(t);
}

// ---------------------------------------------------------------------------

std::string ValidationReport::to_string() const {
  std::ostringstream out;
  for (const auto& v : violations) {
    out << v.clause << ": " << v.where << ": " << v.detail << "\n";
  }
  return out.str();
}

namespace {

void check_label(const Net& net, const std::string& where, const Label& label,
                 bool outgoing, std::vector<Violation>& out) {
  for (const auto& e : label.positive) {
    if (e.is_base() && label.negated.contains(e)) {
      out.push_back({"label", where,
                     "base '" + net.element_name(e) +
                         "' appears both positive and negated"});
    }
  }
  for (const auto* set : {&label.positive, &label.negated}) {
    for (const auto& e : *set) {
      if (!e.is_bond()) continue;
      if (!set->contains(Element::base(e.lo)) ||
          !set->contains(Element::base(e.hi))) {
        out.push_back({"label", where,
                       "bond '" + net.element_name(e) +
                           "' without both endpoint bases of the same sign"});
      }
    }
  }
  if (outgoing && !label.negated.empty()) {
    out.push_back({"label", where, "negative entry on outgoing arc"});
  }
}

ElementSet bases_of(const ElementSet& s) {
  ElementSet out;
  for (const auto& e : s)
    if (e.is_base()) out.insert(e);
  return out;
}

}  // namespace

ValidationReport check_well_formed(const Net& net, const Marking& m0) {
  ValidationReport report;
  auto& out = report.violations;

  for (TransitionId t = 0; t < net.transition_count(); ++t) {
    const auto& tr = net.transition(t);
    for (const auto& arc : tr.inputs) {
      check_label(net, net.places()[arc.place] + " -> " + tr.name, arc.label,
                  false, out);
    }
    for (const auto& arc : tr.outputs) {
      check_label(net, tr.name + " -> " + net.places()[arc.place], arc.label,
                  true, out);
    }

    const auto& sets = net.sets(t);
    if (!(bases_of(sets.guard) == bases_of(sets.effects))) {
      out.push_back({"well-formed(1)", tr.name,
                     "bases of incoming and outgoing labels differ "
                     "(transitions may not erase or create tokens)"});
    }
    for (const auto& e : sets.guard) {
      if (e.is_bond() && !sets.effects.contains(e)) {
        out.push_back({"well-formed(2)", tr.name,
                       "bond '" + net.element_name(e) +
                           "' required but not preserved on an outgoing arc"});
      }
    }
    for (std::size_t i = 0; i < tr.outputs.size(); ++i) {
      for (std::size_t j = i + 1; j < tr.outputs.size(); ++j) {
        if (tr.outputs[i].label.positive.intersects(
                tr.outputs[j].label.positive)) {
          out.push_back({"well-formed(3)", tr.name,
                         "outgoing labels to '" +
                             net.places()[tr.outputs[i].place] + "' and '" +
                             net.places()[tr.outputs[j].place] +
                             "' overlap (tokens/bonds cannot be cloned)"});
        }
      }
    }
  }

  if (m0.size() != net.place_count()) {
    out.push_back({"initial-marking", "marking",
                   "marking does not cover the net's places"});
    return report;
  }
  for (BaseId a = 0; a < net.base_count(); ++a) {
    std::size_t count = 0;
    for (const auto& cell : m0) count += cell.contains(Element::base(a));
    if (count != 1) {
      out.push_back({"initial-marking", net.bases()[a],
                     "base occurs in " + std::to_string(count) +
                         " places (expected exactly 1)"});
    }
  }
  for (PlaceId x = 0; x < m0.size(); ++x) {
    for (const auto& e : m0[x]) {
      if (!e.is_bond()) continue;
      if (!m0[x].contains(Element::base(e.lo)) ||
          !m0[x].contains(Element::base(e.hi))) {
        out.push_back({"marking", net.places()[x],
                       "bond '" + net.element_name(e) +
                           "' without both endpoints in the same place"});
      }
    }
  }
  return report;
}

}  // namespace rpn
