#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "rpn/net.hpp"
#include "rpn/semantics.hpp"

namespace rpn {

// Reachability --------------------------------------------------------------

enum class ExploreMode { forward_only, bt, co, oco };

const char* to_string(ExploreMode m);
std::optional<ExploreMode> parse_explore_mode(std::string_view text);

struct ReachEdge {
  std::size_t from = 0;
  Action action;
  std::size_t to = 0;
};

struct ReachGraph {
  std::vector<std::string> nodes;  // serialize_state of each node
  std::vector<ExecState> states;
  std::vector<std::size_t> depth;
  std::vector<ReachEdge> edges;
  std::vector<std::optional<std::size_t>> parent_edge;  // BFS tree
  std::map<std::string, std::size_t> index;
  std::size_t root = 0;
  bool truncated = false;

  std::optional<std::size_t> find(const std::string& key) const;
  /// Shortest trace from the root to node i.
  Trace trace_to(std::size_t i) const;
};

/// Breadth-first exploration, expanding forward transitions then reversals
/// under `mode`, in transition order.  `truncated` is set when either bound
/// cut off an enabled action.  Throws std::invalid_argument on zero bounds.
ReachGraph reachability_graph(const Net& net, const Marking& m0,
                              ExploreMode mode, std::size_t max_steps,
                              std::size_t max_states);

std::string graph_stats(const ReachGraph& g);
std::string graph_to_dot(const Net& net, const ReachGraph& g);

/// Actions offered in s: forward transitions, then reversals under `mode`.
std::vector<Action> enabled_actions(const Net& net, const ExecState& s,
                                    ExploreMode mode);

// Random nets ---------------------------------------------------------------

struct GeneratorCaps {
  std::size_t places = 6;
  std::size_t transitions = 5;
  std::size_t bases = 5;
  bool negated_entries = true;  // allow `!a` / `!a-b` on incoming arcs
};

class GeneratorError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Instance {
  Net net;
  Marking initial;
};

/// A well-formed net and initial marking, determined by the seed.  Transition
/// inputs are biased towards places their tokens can actually reach, so many
/// instances have non-trivial executions.
Instance random_instance(std::uint64_t seed, const GeneratorCaps& caps = {});

// Property suite ------------------------------------------------------------

/// Step function used by the verifier; replaceable so tests can check that a
/// faulty engine is caught.
using StepFn = std::function<ExecState(const Net&, const Marking&,
                                       const ExecState&, const Action&)>;

struct VerifyBounds {
  std::size_t depth = 6;          // BFS depth and random-walk length
  std::size_t max_states = 2000;  // per-mode graph bound; 0 skips BFS
  std::size_t walks = 0;          // random walks per mode
  std::uint64_t seed = 1;
  std::size_t rewrite_depth = 6;  // trace length for rewrite-based checks
  std::size_t max_traces = 400000;  // cap on enumerated co-traces
  std::vector<ReverseMode> modes = {ReverseMode::bt, ReverseMode::co,
                                    ReverseMode::oco};
  StepFn step;  // defaults to rpn::step
};

struct PropertyViolation {
  Trace trace;
  std::string detail;
  std::string kind;  // empty, or a tag such as "negated-entry"
};

struct PropertyReport {
  std::string property;
  std::size_t checked = 0;
  std::vector<PropertyViolation> violations;  // the first few
  std::map<std::string, std::size_t> counts;  // all violations, by kind
  bool truncated = false;  // some enumeration hit a bound

  bool passed() const { return violations.empty(); }
};

class UnknownPropertyError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

const std::vector<std::string>& property_names();

/// Runs the selected properties (all when `selection` is empty).  Reports
/// come back in property_names() order.  At most a few violations are kept
/// per property; the first is the shortest found.
std::vector<PropertyReport> verify_properties(
    const Net& net, const Marking& m0, const VerifyBounds& bounds,
    const std::set<std::string>& selection = {});

std::string report_text(const Net& net, const std::vector<PropertyReport>& r,
                        std::uint64_t seed);
std::string report_json(const Net& net, const std::vector<PropertyReport>& r,
                        std::uint64_t seed);

// Forward diamond -----------------------------------------------------------

struct ForwardDiamondWitness {
  Trace prefix;  // forward trace to the co-initial state
  TransitionId first = 0;
  TransitionId second = 0;
  ExecState after_first_second;
  ExecState after_second_first;
};

/// Searches forward-reachable states (up to `depth` steps) for two distinct
/// transitions that are both enabled, can run in either order, and yet end in
/// different states.  nullopt when no such pair exists within the bound.
std::optional<ForwardDiamondWitness> forward_diamond_witness(
    const Net& net, const Marking& m0, std::size_t depth);

/// States reachable from s by forward steps only, at most `depth` of them.
std::set<std::string> forward_closure(const Net& net, const ExecState& s,
                                      std::size_t depth);

}  // namespace rpn
