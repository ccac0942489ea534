#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <regex>

#include "rpn/explorer.hpp"
#include "rpn/netdsl.hpp"
#include "support.hpp"

using namespace rpn;
using namespace rpn::test;

namespace {

const char* kCatalysisLiteral = R"(
net catalysis {
  tokens a, b, c;
  places u, v, w, x, y;
  transition t1 { in u: {c}; in v: {a}; out x: {c-a}; }
  transition t2 { in x: {c-a}; in w: {b}; out y: {c-a, a-b}; }
  marking { u: {c}; v: {a}; w: {b}; }
}
)";

ParseError parse_error(std::string_view text) {
  try {
    parse_net(text);
  } catch (const ParseError& e) {
    return e;
  }
  FAIL("expected a parse error");
  return ParseError(0, 0, "");
}

const char* kBundled[] = {"catalysis",          "erk",
                          "forward_chain",      "backtrack_cycle",
                          "shared_cycles",      "causal_join",
                          "oco_chain",          "overlapping_cycles",
                          "independent_cycles", "dependent_cycles",
                          "oco_cycles"};

}  // namespace

TEST_CASE("catalysis document parses into the expected structure") {
  auto doc = parse_net(kCatalysisLiteral);
  CHECK(doc.name == "catalysis");
  CHECK(doc.net.bases() == std::vector<std::string>{"a", "b", "c"});
  CHECK(doc.net.place_count() == 5);
  CHECK(doc.net.transition_count() == 2);
  const auto& t2 = doc.net.transition(tid(doc, "t2"));
  REQUIRE(t2.inputs.size() == 2);
  CHECK(format_label(doc.net, t2.inputs[1].label) == "{a, c, a-c}");
  CHECK(doc.net.places()[t2.inputs[1].place] == "x");
  CHECK(format_label(doc.net, t2.outputs[0].label) == "{a, b, c, a-b, a-c}");
  auto s = initial_state(doc.net, doc.initial);
  CHECK(cell(doc, s, "u") == "{c}");
  CHECK(cell(doc, s, "v") == "{a}");
  CHECK(cell(doc, s, "w") == "{b}");
}

TEST_CASE("negated entries are rejected on outgoing arcs") {
  auto e = parse_error(R"(net n {
  tokens a, b;
  places x, y;
  transition t { in x: {a}; out y: {a, !b}; }
  marking { x: {a, b}; }
})");
  CHECK(std::string(e.what()).find("negative entry on outgoing arc") !=
        std::string::npos);
  CHECK(e.line() == 4);
}

TEST_CASE("undeclared base in a bond") {
  auto e = parse_error(R"(net n {
  tokens a;
  places x, y;
  transition t { in x: {a-b}; out y: {a-b}; }
})");
  CHECK(e.message() == "undeclared base 'b'");
  CHECK(e.line() == 4);
  CHECK(e.column() == 27);
}

TEST_CASE("undeclared place") {
  auto e = parse_error("net n { tokens a; places x; transition t { in q: {a}; } }");
  CHECK(e.message() == "undeclared place 'q'");
}

TEST_CASE("self-bonds are rejected") {
  auto e = parse_error(
      "net n { tokens a; places x; transition t { in x: {a-a}; out x: {a}; } }");
  CHECK(e.message().find("self-bond") != std::string::npos);
}

TEST_CASE("negated entries cannot appear in the marking") {
  auto e = parse_error("net n { tokens a; places x; marking { x: {!a}; } }");
  CHECK(e.message().find("negated entry") != std::string::npos);
}

TEST_CASE("syntax errors carry positions") {
  auto e = parse_error("net n {\n  tokens a\n  places x;\n}");
  CHECK(e.line() == 3);
  CHECK(e.column() == 3);
}

TEST_CASE("semantic errors point at the transition") {
  auto e = parse_error(R"(net n {
  tokens a;
  places x, y;
  transition keep { in x: {a}; out y: {a}; }
  transition drop { in y: {a}; }
  marking { x: {a}; }
})");
  CHECK(e.line() == 5);
  CHECK(e.message().find("well-formed(1)") != std::string::npos);
}

TEST_CASE("comments are ignored and leading ones are kept") {
  auto doc = parse_net(R"(# first
# second
net n {
  // inline comment
  tokens a;  # trailing
  places x, y;
  transition t { in x: {a}; out y: {a}; }
  marking { x: {a}; }
})");
  CHECK(doc.comments == std::vector<std::string>{"first", "second"});
  CHECK(doc.net.transition_count() == 1);
}

TEST_CASE("every bundled net round-trips through serialize_net") {
  for (auto name : kBundled) {
    CAPTURE(name);
    auto doc = load(name);
    auto text = serialize_net(doc);
    auto again = parse_net(text);
    CHECK(again == doc);
    CHECK(serialize_net(again) == text);
  }
}

TEST_CASE("random nets round-trip through serialize_net") {
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    auto inst = random_instance(seed);
    NetDocument doc{"r", {}, inst.net, inst.initial};
    auto again = parse_net(serialize_net(doc));
    CHECK(again.net == doc.net);
    CHECK(again.initial == doc.initial);
  }
}

TEST_CASE("trace scripts") {
  auto doc = load("catalysis");
  auto trace = parse_trace(doc.net, "fire t1\nfire t2\nreverse t1 mode=oco\n");
  REQUIRE(trace.size() == 3);
  CHECK(trace[0] == Action::fire(tid(doc, "t1")));
  CHECK(trace[2] == Action::reverse(tid(doc, "t1"), ReverseMode::oco));
  CHECK(parse_trace(doc.net, serialize_trace(doc.net, trace)) == trace);
  CHECK(trace == load_trace(doc, "catalysis"));
}

TEST_CASE("empty trace script") {
  auto doc = load("catalysis");
  CHECK(parse_trace(doc.net, "").empty());
  CHECK(parse_trace(doc.net, "# nothing\n\n").empty());
}

TEST_CASE("trace script errors") {
  auto doc = load("catalysis");
  try {
    parse_trace(doc.net, "fire t1\nreverse t1 mode=xx\n");
    FAIL("expected a mode error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
    CHECK(e.message().find("mode") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_trace(doc.net, "fire t9"), ParseError);
  CHECK_THROWS_AS(parse_trace(doc.net, "jump t1"), ParseError);
  CHECK_THROWS_AS(parse_trace(doc.net, "fire t1 now"), ParseError);
}

TEST_CASE("equal states serialize identically") {
  auto doc = load("independent_cycles");
  auto s1 = run(doc, "fire t1\nfire t3");
  auto s2 = run(doc, "fire t3\nfire t1");
  CHECK(s1.marking == s2.marking);
  auto x = run(doc, "fire t1\nfire t3\nfire t4\nreverse t4 mode=bt");
  CHECK(serialize_state(doc.net, x) == serialize_state(doc.net, s1));
}

TEST_CASE("catalysis final state serialization") {
  auto doc = load("catalysis");
  auto s = replay(doc.net, doc.initial, load_trace(doc, "catalysis"));
  CHECK(serialize_state(doc.net, s) ==
        "marking {\n"
        "  u: {c};\n"
        "  y: {a, b, a-b};\n"
        "}\n"
        "history {\n"
        "  t2: [2];\n"
        "}\n"
        "causes {\n"
        "}\n");
}

TEST_CASE("states parse back") {
  for (auto name : {"catalysis", "erk", "overlapping_cycles"}) {
    auto doc = load(name);
    auto g = reachability_graph(doc.net, doc.initial, ExploreMode::oco, 6, 300);
    for (const auto& s : g.states)
      CHECK(parse_state(doc.net, serialize_state(doc.net, s)) == s);
  }
}

TEST_CASE("DOT export is well formed") {
  auto doc = load("catalysis");
  auto dot = export_dot(doc, initial_state(doc.net, doc.initial));
  CHECK(dot.starts_with("digraph "));
  CHECK(dot.ends_with("}\n"));
  // Braces and quotes balance; every statement line ends with ';' or a brace.
  int depth = 0;
  std::size_t quotes = 0;
  for (char ch : dot) {
    depth += ch == '{';
    depth -= ch == '}';
    quotes += ch == '"';
    CHECK(depth >= 0);
  }
  CHECK(depth == 0);
  CHECK(quotes % 2 == 0);
  std::regex node(R"(^\s+"[pt]:\w+" \[.*\];$)");
  std::regex edge(R"(^\s+"[pt]:\w+" -> "[pt]:\w+"( \[.*\])?;$)");
  std::istringstream lines(dot);
  std::string line;
  std::size_t nodes = 0, edges = 0;
  while (std::getline(lines, line)) {
    nodes += std::regex_match(line, node);
    edges += std::regex_match(line, edge);
  }
  CHECK(nodes == 7);
  CHECK(edges == 6);
  CHECK(dot.find("t2") != std::string::npos);
}

TEST_CASE("DOT export annotates histories") {
  auto doc = load("catalysis");
  auto s = replay(doc.net, doc.initial, load_trace(doc, "catalysis"));
  auto dot = export_dot(doc, s);
  CHECK(dot.find("[2]") != std::string::npos);
}
