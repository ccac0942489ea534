#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rpn {

using BaseId = std::uint32_t;
using PlaceId = std::uint32_t;
using TransitionId = std::uint32_t;

/// A base or a bond.  Bases are stored as (i, i); bonds as (lo, hi) with
/// lo < hi, so every unordered pair has exactly one representation.  Base
/// indices follow name order, which makes the natural ordering below the
/// canonical output order: all bases first, then bonds.
struct Element {
  BaseId lo = 0;
  BaseId hi = 0;

  static constexpr Element base(BaseId a) { return {a, a}; }
  static Element bond(BaseId a, BaseId b);

  constexpr bool is_base() const { return lo == hi; }
  constexpr bool is_bond() const { return lo != hi; }

  friend constexpr bool operator==(const Element&, const Element&) = default;
  friend constexpr bool operator<(const Element& x, const Element& y) {
    if (x.is_bond() != y.is_bond()) return y.is_bond();
    if (x.lo != y.lo) return x.lo < y.lo;
    return x.hi < y.hi;
  }
};

/// Sorted, duplicate-free set of elements.  Sets in this domain hold a
/// handful of entries, so a flat vector beats a node-based set.
class ElementSet {
 public:
  ElementSet() = default;
  ElementSet(std::initializer_list<Element> init);

  bool contains(const Element& e) const;
  bool insert(const Element& e);
  bool erase(const Element& e);
  void insert_all(const ElementSet& other);
  void erase_all(const ElementSet& other);

  bool intersects(const ElementSet& other) const;
  bool subset_of(const ElementSet& other) const;

  bool empty() const { return items_.empty(); }
  std::size_t size() const { return items_.size(); }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

  friend bool operator==(const ElementSet&, const ElementSet&) = default;
  friend bool operator<(const ElementSet& x, const ElementSet& y) {
    return x.items_ < y.items_;
  }

 private:
  std::vector<Element> items_;
};

/// Arc label: the positive entries (bases and bonds that must be present, or
/// that are produced) and the negated entries (required absences).
struct Label {
  ElementSet positive;
  ElementSet negated;

  bool empty() const { return positive.empty() && negated.empty(); }
  friend bool operator==(const Label&, const Label&) = default;
};

struct Arc {
  PlaceId place = 0;
  Label label;
  friend bool operator==(const Arc&, const Arc&) = default;
};

struct Transition {
  std::string name;
  std::vector<Arc> inputs;   // sorted by place, one arc per place
  std::vector<Arc> outputs;  // sorted by place, one arc per place
  friend bool operator==(const Transition&, const Transition&) = default;
};

/// Per-transition derived sets.
struct TransitionSets {
  ElementSet guard;    // union of incoming positive labels
  ElementSet effects;  // union of outgoing labels
  ElementSet effect;   // bonds in effects but not in guard
  std::vector<PlaceId> pre_places;
  std::vector<PlaceId> post_places;
};

using Marking = std::vector<ElementSet>;  // indexed by PlaceId

class UnknownNameError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Static structure of a reversing net.  Bases, places and transitions are
/// kept sorted by name; ids are positions in those vectors.  Immutable once
/// built through NetBuilder.
class Net {
 public:
  const std::vector<std::string>& bases() const { return bases_; }
  const std::vector<std::string>& places() const { return places_; }
  const std::vector<Transition>& transitions() const { return transitions_; }

  std::size_t base_count() const { return bases_.size(); }
  std::size_t place_count() const { return places_.size(); }
  std::size_t transition_count() const { return transitions_.size(); }

  const Transition& transition(TransitionId t) const;
  const TransitionSets& sets(TransitionId t) const;

  std::optional<BaseId> find_base(std::string_view name) const;
  std::optional<PlaceId> find_place(std::string_view name) const;
  std::optional<TransitionId> find_transition(std::string_view name) const;

  BaseId base_id(std::string_view name) const;
  PlaceId place_id(std::string_view name) const;
  TransitionId transition_id(std::string_view name) const;

  /// F(x,t) / F(t,x); nullptr when there is no arc.
  const Label* input_label(TransitionId t, PlaceId x) const;
  const Label* output_label(TransitionId t, PlaceId x) const;

  std::string element_name(const Element& e) const;

  /// The set B: every bond named on some arc.
  ElementSet bonds() const;

  friend bool operator==(const Net& x, const Net& y) {
    return x.bases_ == y.bases_ && x.places_ == y.places_ &&
           x.transitions_ == y.transitions_;
  }

 private:
  friend class NetBuilder;
  void derive();

  std::vector<std::string> bases_;
  std::vector<std::string> places_;
  std::vector<Transition> transitions_;
  std::vector<TransitionSets> sets_;
};

/// Assembles a Net from names.  Arc labels are given as entry strings in the
/// textual entry syntax: "a", "a-b", "!a", "!a-b".  A bond entry also adds its
/// endpoint bases with the same sign.
class NetBuilder {
 public:
  NetBuilder& base(std::string name);
  NetBuilder& place(std::string name);
  NetBuilder& transition(std::string name);
  NetBuilder& input(std::string_view transition, std::string_view place,
                    const std::vector<std::string>& entries);
  NetBuilder& output(std::string_view transition, std::string_view place,
                     const std::vector<std::string>& entries);

  /// Throws std::invalid_argument on duplicate or undeclared names.
  Net build() const;

 private:
  struct PendingArc {
    std::string transition;
    std::string place;
    std::vector<std::string> entries;
    bool incoming = true;
  };
  std::vector<std::string> bases_;
  std::vector<std::string> places_;
  std::vector<std::string> transitions_;
  std::vector<PendingArc> arcs_;
};

/// Parses one entry ("a", "a-b", "!a", "!a-b") against the net's bases.
/// Returns the element and whether it was negated.
std::pair<Element, bool> parse_entry(const Net& net, std::string_view text);

/// Builds a marking from place name -> entry strings; bonds add endpoints.
Marking make_marking(
    const Net& net,
    const std::vector<std::pair<std::string, std::vector<std::string>>>& cells);

Marking empty_marking(const Net& net);

/// Connected component of base `a` within `c`: `a` itself (if present) and
/// every base and bond reachable from it through bonds in `c`.  Empty when
/// a is not in c.
ElementSet connected_component(BaseId a, const ElementSet& c);

/// Splits `c` into its connected components (one per base, deduplicated).
std::vector<ElementSet> components(const ElementSet& c);

const TransitionSets& transition_sets(const Net& net, TransitionId t);

struct Violation {
  std::string clause;  // e.g. "label", "well-formed(1)", "initial-marking"
  std::string where;   // offending arc / transition / base
  std::string detail;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  std::string to_string() const;
};

ValidationReport check_well_formed(const Net& net, const Marking& m0);

}  // namespace rpn
