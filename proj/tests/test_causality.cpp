#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <functional>

#include "rpn/causality.hpp"
#include "rpn/explorer.hpp"
#include "support.hpp"

using namespace rpn;
using namespace rpn::test;

namespace {

const char* kOuterThenInner =
    "fire t1\nfire t2\nfire t3\nfire t4\nfire t5\nfire t6\n"
    "fire t1\nfire t2\nfire t7\nfire t6\n";
const char* kInnerThenOuter =
    "fire t1\nfire t2\nfire t7\nfire t6\n"
    "fire t1\nfire t2\nfire t3\nfire t4\nfire t5\nfire t6\n";

CausalPair pair(const NetDocument& doc, const char* t, Key k, const char* u,
                Key l) {
  return {{tid(doc, t), k}, {tid(doc, u), l}};
}

std::vector<std::vector<std::pair<std::string, Key>>> paths(
    const NetDocument& doc, const ExecState& s) {
  std::vector<std::vector<std::pair<std::string, Key>>> out;
  for (const auto& p : causal_paths(s)) {
    std::vector<std::pair<std::string, Key>> steps;
    for (const auto& o : p.occurrences)
      steps.emplace_back(doc.net.transition(o.transition).name, o.key);
    out.push_back(std::move(steps));
  }
  return out;
}

// Every trace of at most `depth` actions, any mode.
void traces(const NetDocument& doc, std::size_t depth,
            const std::function<void(const Trace&)>& f) {
  Trace cur;
  std::function<void(const ExecState&)> go = [&](const ExecState& s) {
    f(cur);
    if (cur.size() == depth) return;
    for (TransitionId t = 0; t < doc.net.transition_count(); ++t) {
      for (const Action& a :
           {Action::fire(t), Action::reverse(t, ReverseMode::bt),
            Action::reverse(t, ReverseMode::co),
            Action::reverse(t, ReverseMode::oco)}) {
        if (!action_enabled(doc.net, s, a)) continue;
        cur.push_back(a);
        go(step(doc.net, doc.initial, s, a));
        cur.pop_back();
      }
    }
  };
  go(initial_state(doc.net, doc.initial));
}

}  // namespace

TEST_CASE("outer cycle causes the inner cycle's entry") {
  auto doc = load("overlapping_cycles");
  auto trace = script(doc, kOuterThenInner);
  auto s = replay(doc.net, doc.initial, trace);
  auto causes = recompute_causes(doc.net, doc.initial, trace);
  CHECK(causes.count(pair(doc, "t6", 6, "t1", 7)) == 1);
  CHECK(causes == s.causes);
}

TEST_CASE("no trace, no causes") {
  auto doc = load("catalysis");
  CHECK(recompute_causes(doc.net, doc.initial, {}).empty());
}

TEST_CASE("a token handed between cycles is a cause") {
  auto doc = load("shared_cycles");
  auto trace = script(doc, "fire t1\nfire t2\nfire t3\nfire t4");
  auto causes = recompute_causes(doc.net, doc.initial, trace);
  CHECK(causes.count(pair(doc, "t1", 1, "t4", 4)) == 1);
  CHECK(causes == replay(doc.net, doc.initial, trace).causes);
}

TEST_CASE("incremental causes match recomputation on every short trace") {
  for (auto name : {"catalysis", "erk", "shared_cycles", "causal_join",
                    "oco_chain", "overlapping_cycles", "oco_cycles"}) {
    auto doc = load(name);
    std::size_t n = 0;
    traces(doc, 5, [&](const Trace& t) {
      ++n;
      CHECK(recompute_causes(doc.net, doc.initial, t) ==
            replay(doc.net, doc.initial, t).causes);
    });
    CHECK(n > 1);
  }
}

TEST_CASE("outer-then-inner runs through one chain of ten occurrences") {
  auto doc = load("overlapping_cycles");
  auto s = run(doc, kOuterThenInner);
  auto p = paths(doc, s);
  // Every earlier move of a is a direct cause, so shorter paths skip
  // occurrences; each of them is a subsequence of the one full chain.
  std::size_t full = 0;
  for (const auto& path : p) full += path.size() == 10;
  REQUIRE(full == 1);
  const auto& chain = *std::find_if(
      p.begin(), p.end(), [](const auto& path) { return path.size() == 10; });
  for (const auto& path : p) {
    auto it = chain.begin();
    for (const auto& o : path) it = std::find(it, chain.end(), o);
    CHECK(it != chain.end());
  }
  CHECK(path_signatures(doc.net, s) !=
        path_signatures(doc.net, run(doc, kInnerThenOuter)));
}

TEST_CASE("independent cycles give two disjoint paths") {
  auto doc = load("independent_cycles");
  auto s = run(doc, "fire t1\nfire t2\nfire t3\nfire t4");
  using P = std::vector<std::pair<std::string, Key>>;
  CHECK(paths(doc, s) == std::vector<P>{P{{"t1", 1}, {"t2", 2}},
                                        P{{"t3", 3}, {"t4", 4}}});
}

TEST_CASE("an empty history has no paths") {
  auto doc = load("catalysis");
  CHECK(causal_paths(initial_state(doc.net, doc.initial)).empty());
}

TEST_CASE("isolated occurrences are paths of length one") {
  auto doc = load("causal_join");
  auto s = run(doc, "fire t1\nfire t2");
  CHECK(paths(doc, s).size() == 2);
}

TEST_CASE("interleavings of independent cycles are equivalent") {
  auto doc = load("independent_cycles");
  auto s1 = run(doc, "fire t1\nfire t2\nfire t3\nfire t4");
  auto s2 = run(doc, "fire t3\nfire t4\nfire t1\nfire t2");
  CHECK(s1.history != s2.history);
  CHECK(histories_equivalent(doc.net, s1, s2).equivalent);
  CHECK(states_equivalent(doc.net, s1, s2).equivalent);
  CHECK(equivalence_key(doc.net, s1) == equivalence_key(doc.net, s2));
}

TEST_CASE("cycle order matters for overlapping cycles") {
  auto doc = load("overlapping_cycles");
  auto s1 = run(doc, kOuterThenInner);
  auto s2 = run(doc, kInnerThenOuter);
  CHECK(s1.marking == s2.marking);
  auto v = histories_equivalent(doc.net, s1, s2);
  CHECK_FALSE(v.equivalent);
  REQUIRE(v.witness.has_value());
  CHECK(v.witness->find("causal path <") != std::string::npos);
  CHECK_FALSE(states_equivalent(doc.net, s1, s2).equivalent);
  CHECK(equivalence_key(doc.net, s1) != equivalence_key(doc.net, s2));
}

TEST_CASE("equivalence is reflexive") {
  auto doc = load("overlapping_cycles");
  auto s = run(doc, kOuterThenInner);
  CHECK(histories_equivalent(doc.net, s, s).equivalent);
  CHECK(states_equivalent(doc.net, s, s).equivalent);
}

TEST_CASE("different markings are named in the witness") {
  auto doc = load("catalysis");
  auto s0 = initial_state(doc.net, doc.initial);
  auto s1 = run(doc, "fire t1");
  auto v = states_equivalent(doc.net, s0, s1);
  CHECK_FALSE(v.equivalent);
  REQUIRE(v.witness.has_value());
  CHECK(v.witness->starts_with("place 'u'"));
}

TEST_CASE("independent forward steps are concurrent") {
  auto doc = load("causal_join");
  auto s0 = initial_state(doc.net, doc.initial);
  CHECK(actions_concurrent(doc.net, doc.initial, s0,
                           Action::fire(tid(doc, "t1")),
                           Action::fire(tid(doc, "t2"))));
}

TEST_CASE("two co reversals are concurrent") {
  auto doc = load("causal_join");
  auto s = run(doc, "fire t1\nfire t2");
  CHECK(actions_concurrent(doc.net, doc.initial, s,
                           Action::reverse(tid(doc, "t1"), ReverseMode::co),
                           Action::reverse(tid(doc, "t2"), ReverseMode::co)));
}

TEST_CASE("steps on one causal path are not concurrent") {
  auto doc = load("causal_join");
  auto s = run(doc, "fire t1\nfire t2");
  CHECK_FALSE(actions_concurrent(
      doc.net, doc.initial, s, Action::fire(tid(doc, "t3")),
      Action::reverse(tid(doc, "t1"), ReverseMode::co)));
  CHECK_THROWS_AS(actions_concurrent(doc.net, doc.initial, s,
                                     Action::fire(tid(doc, "t1")),
                                     Action::fire(tid(doc, "t3"))),
                  NotEnabledError);
}

TEST_CASE("trace equivalence") {
  auto doc = load("causal_join");
  auto sigma1 = script(doc, "fire t1\nfire t2\nfire t3");
  auto sigma2 = script(doc, "fire t2\nfire t1\nfire t3");
  CHECK(traces_equivalent(doc.net, doc.initial, sigma1, sigma2).equivalent);
  CHECK(rewrite_equivalent(doc.net, doc.initial, sigma1, sigma2) == true);

  auto undone = sigma1;
  undone.push_back(Action::fire(tid(doc, "t3")));
  CHECK_THROWS_AS(traces_equivalent(doc.net, doc.initial, sigma1, undone),
                  ReplayError);
  auto cancelled = script(doc, "fire t1\nfire t2\nfire t3\nreverse t3 mode=co\n"
                               "fire t3");
  CHECK(traces_equivalent(doc.net, doc.initial, sigma1, cancelled).equivalent);
  CHECK(rewrite_equivalent(doc.net, doc.initial, sigma1, cancelled) == true);

  auto ov = load("overlapping_cycles");
  CHECK_FALSE(traces_equivalent(ov.net, ov.initial, script(ov, kOuterThenInner),
                                script(ov, kInnerThenOuter))
                  .equivalent);
}

TEST_CASE("rewrite search separates inequivalent traces") {
  auto doc = load("shared_cycles");
  auto sigma1 = script(doc, "fire t1\nfire t2\nfire t3\nfire t4");
  auto sigma2 = script(doc, "fire t3\nfire t4\nfire t1\nfire t2");
  CHECK_FALSE(
      traces_equivalent(doc.net, doc.initial, sigma1, sigma2).equivalent);
  CHECK(rewrite_equivalent(doc.net, doc.initial, sigma1, sigma2) == false);
}

TEST_CASE("a trace followed by an undo is equivalent to the trace") {
  auto doc = load("independent_cycles");
  auto sigma = script(doc, "fire t1\nfire t3");
  for (TransitionId t = 0; t < doc.net.transition_count(); ++t) {
    auto s = replay(doc.net, doc.initial, sigma);
    if (!forward_enabled(doc.net, s, t)) continue;
    auto longer = sigma;
    longer.push_back(Action::fire(t));
    longer.push_back(inverse(Action::fire(t)));
    CHECK(traces_equivalent(doc.net, doc.initial, sigma, longer).equivalent);
    CHECK(rewrite_equivalent(doc.net, doc.initial, sigma, longer) == true);
  }
}

TEST_CASE("trace formatting") {
  auto doc = load("catalysis");
  CHECK(format_trace(doc.net, load_trace(doc, "catalysis")) ==
        "<t1, t2, reverse t1>");
  CHECK(inverse(Action::reverse(0, ReverseMode::oco)) == Action::fire(0));
}
