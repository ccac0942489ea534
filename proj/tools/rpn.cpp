#include <csignal>
#include <iostream>
#include <set>
#include <string>

#include <CLI11.hpp>

#include "rpn/causality.hpp"
#include "rpn/explorer.hpp"
#include "rpn/netdsl.hpp"
#include "rpn/session.hpp"

using namespace rpn;

namespace {

constexpr int kValidation = 1;
constexpr int kReplay = 2;
constexpr int kProperty = 3;
constexpr int kUsage = 64;

// Thrown out of a subcommand with the process exit code.
struct Exit {
  int code;
};

NetDocument load_net(const std::string& path) {
  try {
    return parse_net(read_file(path));
  } catch (const ParseError& e) {
    std::cerr << path;
    if (e.line()) std::cerr << ":" << e.line() << ":" << e.column();
    std::cerr << ": " << e.message() << "\n";
    throw Exit{kValidation};
  }
}

Trace load_trace(const Net& net, const std::string& path) {
  try {
    return parse_trace(net, read_file(path));
  } catch (const ParseError& e) {
    std::cerr << path;
    if (e.line()) std::cerr << ":" << e.line() << ":" << e.column();
    std::cerr << ": " << e.message() << "\n";
    throw Exit{kValidation};
  }
}

ExecState replay_or_exit(const NetDocument& doc, const Trace& trace,
                         bool print_steps) {
  ExecState s = initial_state(doc.net, doc.initial);
  for (std::size_t i = 0; i < trace.size(); ++i) {
    if (auto why = action_blocker(doc.net, s, trace[i])) {
      std::cerr << "step " << i + 1 << " (" << describe(doc.net, trace[i])
                << "): " << *why << "\n";
      throw Exit{kReplay};
    }
    s = step(doc.net, doc.initial, s, trace[i]);
    if (print_steps) {
      std::cout << "# " << i + 1 << ": " << describe(doc.net, trace[i]) << "\n"
                << serialize_state(doc.net, s);
    }
  }
  return s;
}

int cmd_check(const std::string& file) {
  NetDocument doc = load_net(file);
  std::cout << file << ": ok (" << doc.net.base_count() << " tokens, "
            << doc.net.place_count() << " places, "
            << doc.net.transition_count() << " transitions)\n";
  return 0;
}

int cmd_run(const std::string& file, const std::string& trace_file,
            const std::string& expect_file) {
  NetDocument doc = load_net(file);
  Trace trace = load_trace(doc.net, trace_file);
  ExecState final_state = replay_or_exit(doc, trace, true);
  if (expect_file.empty()) return 0;

  ExecState expected;
  try {
    expected = parse_state(doc.net, read_file(expect_file));
  } catch (const ParseError& e) {
    std::cerr << expect_file << ":" << e.line() << ":" << e.column() << ": "
              << e.message() << "\n";
    return kValidation;
  }
  std::string want = serialize_state(doc.net, expected);
  std::string got = serialize_state(doc.net, final_state);
  if (want == got) {
    std::cout << "final state matches " << expect_file << "\n";
    return 0;
  }
  std::cerr << "final state differs from " << expect_file << "\nexpected:\n"
            << want << "actual:\n"
            << got;
  return kReplay;
}

struct ExploreOptions {
  std::string mode = "oco";
  std::size_t depth = 8;
  std::size_t max_states = 10000;
  std::string format = "stats";
};

int cmd_explore(const std::string& file, const ExploreOptions& opt) {
  NetDocument doc = load_net(file);
  auto mode = parse_explore_mode(opt.mode);
  if (!mode) {
    std::cerr << "unknown mode '" << opt.mode << "'\n";
    return kUsage;
  }
  ReachGraph g = reachability_graph(doc.net, doc.initial, *mode, opt.depth,
                                    opt.max_states);
  if (opt.format == "dot") {
    std::cout << graph_to_dot(doc.net, g);
  } else if (opt.format == "json") {
    json nodes = json::array();
    for (std::size_t i = 0; i < g.states.size(); ++i) {
      json n = state_to_json(doc.net, g.states[i]);
      n["id"] = i;
      n["depth"] = g.depth[i];
      nodes.push_back(std::move(n));
    }
    json edges = json::array();
    for (const auto& e : g.edges)
      edges.push_back({{"from", e.from},
                       {"to", e.to},
                       {"action", describe(doc.net, e.action)}});
    std::cout << json{{"mode", to_string(*mode)},
                      {"states", g.states.size()},
                      {"edges", g.edges.size()},
                      {"truncated", g.truncated},
                      {"nodes", nodes},
                      {"transitions", edges}}
                     .dump(2)
              << "\n";
  } else {
    std::cout << graph_stats(g);
  }
  return 0;
}

struct VerifyOptions {
  VerifyBounds bounds;
  std::vector<std::string> properties;
  bool json = false;
};

int cmd_verify(const std::string& file, const VerifyOptions& opt) {
  NetDocument doc = load_net(file);
  std::set<std::string> selection(opt.properties.begin(),
                                  opt.properties.end());
  std::vector<PropertyReport> reports;
  try {
    reports = verify_properties(doc.net, doc.initial, opt.bounds, selection);
  } catch (const UnknownPropertyError& e) {
    std::cerr << e.what() << "\n";
    return kUsage;
  }
  std::cout << (opt.json ? report_json(doc.net, reports, opt.bounds.seed)
                         : report_text(doc.net, reports, opt.bounds.seed));
  for (const auto& r : reports)
    if (!r.passed()) return kProperty;
  return 0;
}

int cmd_export(const std::string& file, const std::string& format,
               const std::string& trace_file) {
  NetDocument doc = load_net(file);
  if (format == "rpn") {
    std::cout << serialize_net(doc);
    return 0;
  }
  ExecState s = initial_state(doc.net, doc.initial);
  if (!trace_file.empty())
    s = replay_or_exit(doc, load_trace(doc.net, trace_file), false);
  std::cout << export_dot(doc, s);
  return 0;
}

int cmd_step(const std::string& file) {
  run_stepper(load_net(file), std::cin, std::cout);
  return 0;
}

SessionServer* active_server = nullptr;

int cmd_serve(const std::string& file, const std::string& host, int port) {
  SessionStore store;
  if (!file.empty()) {
    auto s = store.create(load_net(file));
    std::cout << "session " << s->id() << " for " << file << "\n";
  }
  SessionServer server(store);
  int bound = server.bind(host, port);
  if (bound < 0) {
    std::cerr << "cannot listen on " << host << ":" << port << "\n";
    return kUsage;
  }
  std::cout << "listening on http://" << host << ":" << bound << "\n"
            << std::flush;
  active_server = &server;
  auto on_signal = [](int) {
    if (active_server) active_server->stop();
  };
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  server.listen();
  active_server = nullptr;
  return 0;
}

int cmd_random(std::uint64_t seed, const GeneratorCaps& caps) {
  Instance inst;
  try {
    inst = random_instance(seed, caps);
  } catch (const GeneratorError& e) {
    std::cerr << e.what() << "\n";
    return kUsage;
  }
  NetDocument doc{"random_" + std::to_string(seed),
                  {"generated from seed " + std::to_string(seed)},
                  inst.net,
                  inst.initial};
  std::cout << serialize_net(doc);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reversing Petri net engine"};
  app.require_subcommand(1);
  int code = 0;

  std::string file, trace_file, expect_file;

  auto* check = app.add_subcommand("check", "Parse and validate a net");
  check->add_option("file", file, "net (.rpn)")
      ->required()
      ->check(CLI::ExistingFile);
  check->callback([&] { code = cmd_check(file); });

  auto* run = app.add_subcommand("run", "Replay a trace, printing each state");
  run->add_option("file", file, "net (.rpn)")
      ->required()
      ->check(CLI::ExistingFile);
  run->add_option("trace", trace_file, "trace (.rtr)")
      ->required()
      ->check(CLI::ExistingFile);
  run->add_option("--expect", expect_file, "expected final state")
      ->check(CLI::ExistingFile);
  run->callback([&] { code = cmd_run(file, trace_file, expect_file); });

  ExploreOptions eopt;
  auto* explore = app.add_subcommand("explore", "Build the reachability graph");
  explore->add_option("file", file, "net (.rpn)")
      ->required()
      ->check(CLI::ExistingFile);
  explore->add_option("--mode", eopt.mode, "forward|bt|co|oco")
      ->check(CLI::IsMember({"forward", "bt", "co", "oco"}))
      ->capture_default_str();
  explore->add_option("--depth", eopt.depth, "maximum trace length")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  explore->add_option("--max-states", eopt.max_states, "state bound")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  explore->add_option("--format", eopt.format, "stats|dot|json")
      ->check(CLI::IsMember({"stats", "dot", "json"}))
      ->capture_default_str();
  explore->callback([&] { code = cmd_explore(file, eopt); });

  VerifyOptions vopt;
  auto* verify = app.add_subcommand("verify", "Check the semantic properties");
  verify->add_option("file", file, "net (.rpn)")
      ->required()
      ->check(CLI::ExistingFile);
  verify->add_option("--depth", vopt.bounds.depth, "exploration depth")
      ->capture_default_str();
  verify->add_option("--max-states", vopt.bounds.max_states,
                     "per-mode state bound (0 skips the graph)")
      ->capture_default_str();
  verify->add_option("--walks", vopt.bounds.walks, "random walks per mode")
      ->capture_default_str();
  verify->add_option("--seed", vopt.bounds.seed, "random walk seed")
      ->capture_default_str();
  verify->add_option("--rewrite-depth", vopt.bounds.rewrite_depth,
                     "trace length for rewrite checks")
      ->capture_default_str();
  verify->add_option("--max-traces", vopt.bounds.max_traces,
                     "cap on enumerated traces")
      ->capture_default_str();
  verify->add_option("--property", vopt.properties, "property to check")
      ->take_all();
  verify->add_flag("--json", vopt.json, "JSON report");
  verify->callback([&] { code = cmd_verify(file, vopt); });

  std::string format = "dot";
  auto* exp = app.add_subcommand("export", "Render a net");
  exp->add_option("file", file, "net (.rpn)")
      ->required()
      ->check(CLI::ExistingFile);
  exp->add_option("--format", format, "dot|rpn")
      ->check(CLI::IsMember({"dot", "rpn"}))
      ->capture_default_str();
  exp->add_option("--trace", trace_file, "replay this trace first")
      ->check(CLI::ExistingFile);
  exp->callback([&] { code = cmd_export(file, format, trace_file); });

  auto* stepper = app.add_subcommand("step", "Interactive stepper");
  stepper->add_option("file", file, "net (.rpn)")
      ->required()
      ->check(CLI::ExistingFile);
  stepper->callback([&] { code = cmd_step(file); });

  std::string host = "127.0.0.1";
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "HTTP session server");
  serve->add_option("file", file, "preload a session for this net")
      ->check(CLI::ExistingFile);
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--port", port, "0 picks a free port")
      ->check(CLI::Range(0, 65535))
      ->capture_default_str();
  serve->callback([&] { code = cmd_serve(file, host, port); });

  std::uint64_t seed = 1;
  GeneratorCaps caps;
  auto* random = app.add_subcommand("random", "Print a random net");
  random->add_option("--seed", seed)->capture_default_str();
  random->add_option("--places", caps.places)->capture_default_str();
  random->add_option("--transitions", caps.transitions)->capture_default_str();
  random->add_option("--tokens", caps.bases)->capture_default_str();
  random->add_flag("!--no-negation", caps.negated_entries,
                   "no negated entries");
  random->callback([&] { code = cmd_random(seed, caps); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : kUsage;
  } catch (const Exit& e) {
    return e.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  }
  return code;
}
