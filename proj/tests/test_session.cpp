#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>
#include <thread>

#include <httplib.h>

#include "rpn/session.hpp"
#include "support.hpp"

using namespace rpn;
using namespace rpn::test;

namespace {

std::string catalysis_text() {
  return read_file(std::string(RPN_NETS_DIR) + "/catalysis.rpn");
}

json names(const NetDocument& doc, const std::vector<TransitionId>& ts) {
  json out = json::array();
  for (auto t : ts) out.push_back(doc.net.transition(t).name);
  return out;
}

// Replays the session log from the initial state.
ExecState replay_log(const Session& s) {
  const auto& doc = s.document();
  ExecState cur = initial_state(doc.net, doc.initial);
  for (const auto& a : s.log()) cur = step(doc.net, doc.initial, cur, a);
  return cur;
}

struct Server {
  SessionStore store;
  SessionServer server{store};
  int port = server.start("127.0.0.1", 0);
  httplib::Client client{"127.0.0.1", port};
};

}  // namespace

TEST_CASE("state JSON mirrors the canonical listing") {
  auto doc = load("catalysis");
  auto s = run(doc, "fire t1\nfire t2");
  auto j = state_to_json(doc.net, s);
  CHECK(j["marking"].size() == 1);
  CHECK(j["marking"]["y"] == json({"a", "b", "c", "a-b", "a-c"}));
  CHECK(j["history"] == json({{"t1", {1}}, {"t2", {2}}}));
  REQUIRE(j["causes"].size() == 1);
  CHECK(j["causes"][0]["cause"] == json({{"transition", "t1"}, {"key", 1}}));
  CHECK(j["causes"][0]["effect"] == json({{"transition", "t2"}, {"key", 2}}));

  auto end = run(doc, "fire t1\nfire t2\nreverse t1 mode=oco");
  auto k = state_to_json(doc.net, end);
  CHECK(k["history"] == json({{"t2", {2}}}));
  CHECK(k["causes"].empty());
}

TEST_CASE("enabled lists equal the semantic predicates") {
  auto doc = load("erk");
  auto trace = load_trace(doc, "erk");
  ExecState s = initial_state(doc.net, doc.initial);
  for (const auto& a : trace) {
    auto j = enabled_to_json(doc.net, s);
    CHECK(j["forward"] == names(doc, enabled_forward(doc.net, s)));
    CHECK(j["bt"] == names(doc, enabled_reverse(doc.net, s, ReverseMode::bt)));
    CHECK(j["co"] == names(doc, enabled_reverse(doc.net, s, ReverseMode::co)));
    CHECK(j["oco"] ==
          names(doc, enabled_reverse(doc.net, s, ReverseMode::oco)));
    s = step(doc.net, doc.initial, s, a);
  }
}

TEST_CASE("net JSON lists the structure") {
  auto doc = load("erk");
  auto j = net_to_json(doc);
  CHECK(j["name"] == "erk");
  CHECK(j["places"].size() == 12);
  CHECK(j["transitions"].size() == 7);
  bool negated = false;
  for (const auto& t : j["transitions"])
    if (t["name"] == "c")
      for (const auto& in : t["inputs"])
        for (const auto& e : in["label"]) negated |= e == "!f";
  CHECK(negated);
}

TEST_CASE("action bodies") {
  auto doc = load("catalysis");
  CHECK(action_from_json(doc.net, {{"direction", "forward"},
                                   {"transition", "t2"}}) ==
        Action::fire(tid(doc, "t2")));
  CHECK(action_from_json(doc.net, {{"direction", "reverse"},
                                   {"transition", "t1"},
                                   {"mode", "co"}}) ==
        Action::reverse(tid(doc, "t1"), ReverseMode::co));
  CHECK_THROWS_AS(action_from_json(doc.net, json::array()), BadRequest);
  CHECK_THROWS_AS(action_from_json(doc.net, {{"transition", "t1"}}),
                  BadRequest);
  CHECK_THROWS_AS(
      action_from_json(doc.net, {{"direction", "forward"}, {"transition", 3}}),
      BadRequest);
  CHECK_THROWS_AS(action_from_json(doc.net, {{"direction", "forward"},
                                             {"transition", "t9"}}),
                  BadRequest);
  CHECK_THROWS_AS(action_from_json(doc.net, {{"direction", "reverse"},
                                             {"transition", "t1"}}),
                  BadRequest);
  CHECK_THROWS_AS(action_from_json(doc.net, {{"direction", "reverse"},
                                             {"transition", "t1"},
                                             {"mode", "xx"}}),
                  BadRequest);
  CHECK_THROWS_AS(action_from_json(doc.net, {{"direction", "up"},
                                             {"transition", "t1"}}),
                  BadRequest);
}

TEST_CASE("sessions step, undo and keep a replayable log") {
  SessionStore store;
  auto s = store.create(catalysis_text());
  auto doc = s->document();
  auto t1 = tid(doc, "t1");
  auto t2 = tid(doc, "t2");
  CHECK_THROWS_AS(s->undo(), NothingToUndo);
  CHECK_THROWS_AS(s->step(Action::reverse(t2, ReverseMode::bt)),
                  NotEnabledError);

  s->step(Action::fire(t1));
  CHECK(cell(doc, s->current(), "x") == "{a, c, a-c}");
  s->step(Action::fire(t2));
  s->step(Action::reverse(t1, ReverseMode::oco));
  CHECK(s->log().size() == 3);
  CHECK(replay_log(*s) == s->current());

  s->undo();
  CHECK(replay_log(*s) == s->current());
  s->undo();
  s->undo();
  CHECK(s->current() == initial_state(doc.net, doc.initial));

  auto v = s->view();
  CHECK(v["id"] == s->id());
  CHECK(v["enabled"]["forward"] == json({"t1"}));
  CHECK(v["log"].empty());
  CHECK(s->dot().starts_with("digraph"));
}

TEST_CASE("session ids are distinct") {
  SessionStore store;
  auto a = store.create(catalysis_text());
  auto b = store.create(catalysis_text());
  CHECK(a->id() != b->id());
  CHECK(store.size() == 2);
  CHECK(store.find(a->id()) == a);
  CHECK(store.find("missing") == nullptr);
  CHECK_THROWS_AS(store.create(std::string_view("net {")), ParseError);
}

TEST_CASE("concurrent requests on one session are serialized") {
  SessionStore store;
  auto s = store.create(load("independent_cycles"));
  const auto& net = s->document().net;
  std::vector<std::thread> workers;
  for (int w = 0; w < 8; ++w) {
    workers.emplace_back([&, w] {
      for (int i = 0; i < 200; ++i) {
        try {
          if ((i + w) % 3 == 0) {
            s->undo();
          } else {
            auto cur = s->current();
            auto ts = enabled_forward(net, cur);
            if (!ts.empty()) s->step(Action::fire(ts[(i + w) % ts.size()]));
          }
        } catch (const NotEnabledError&) {
        } catch (const NothingToUndo&) {
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  CHECK(replay_log(*s) == s->current());
}

TEST_CASE("HTTP protocol on the catalysis net") {
  Server srv;
  REQUIRE(srv.port > 0);
  auto& cli = srv.client;

  auto created = cli.Post("/sessions", catalysis_text(), "text/plain");
  REQUIRE(created);
  CHECK(created->status == 201);
  auto c = json::parse(created->body);
  std::string id = c["id"];
  CHECK(c["state"]["marking"]["u"] == json({"c"}));

  auto bad_step = cli.Post("/sessions/" + id + "/step",
                           R"({"direction":"reverse","transition":"t2","mode":"bt"})",
                           "application/json");
  REQUIRE(bad_step);
  CHECK(bad_step->status == 409);
  CHECK(json::parse(bad_step->body)["error"].get<std::string>().find(
            "history of 't2' is empty") != std::string::npos);

  auto bad_undo = cli.Post("/sessions/" + id + "/undo", "", "text/plain");
  REQUIRE(bad_undo);
  CHECK(bad_undo->status == 409);

  auto ok = cli.Post("/sessions/" + id + "/step",
                     R"({"direction":"forward","transition":"t1"})",
                     "application/json");
  REQUIRE(ok);
  CHECK(ok->status == 200);
  auto view = cli.Get("/sessions/" + id);
  REQUIRE(view);
  CHECK(view->status == 200);
  auto v = json::parse(view->body);
  CHECK(v["state"]["marking"]["x"] == json({"a", "c", "a-c"}));
  CHECK(v["enabled"]["forward"] == json({"t2"}));
  CHECK(v["net"]["places"].size() == 5);

  cli.Post("/sessions/" + id + "/step",
           R"({"direction":"forward","transition":"t2"})", "application/json");
  auto menus = json::parse(cli.Get("/sessions/" + id)->body)["enabled"];
  CHECK(menus["bt"] == json({"t2"}));
  CHECK(menus["co"] == json({"t2"}));
  CHECK(menus["oco"] == json({"t1", "t2"}));

  auto last = cli.Post("/sessions/" + id + "/step",
                       R"({"direction":"reverse","transition":"t1","mode":"oco"})",
                       "application/json");
  REQUIRE(last);
  auto doc = load("catalysis");
  auto expected = replay(doc.net, doc.initial, load_trace(doc, "catalysis"));
  CHECK(json::parse(last->body)["state"] == state_to_json(doc.net, expected));

  auto undo = cli.Post("/sessions/" + id + "/undo", "", "text/plain");
  REQUIRE(undo);
  CHECK(undo->status == 200);
  CHECK(json::parse(undo->body)["state"]["history"] ==
        json({{"t1", {1}}, {"t2", {2}}}));

  auto dot = cli.Get("/sessions/" + id + "/dot");
  REQUIRE(dot);
  CHECK(dot->status == 200);
  CHECK(dot->body.starts_with("digraph"));
}

TEST_CASE("HTTP errors") {
  Server srv;
  auto& cli = srv.client;
  auto missing = cli.Get("/sessions/nope");
  REQUIRE(missing);
  CHECK(missing->status == 404);
  CHECK(cli.Post("/sessions/nope/step", "{}", "application/json")->status ==
        404);
  CHECK(cli.Post("/sessions/nope/undo", "", "text/plain")->status == 404);
  CHECK(cli.Get("/sessions/nope/dot")->status == 404);

  auto parse = cli.Post("/sessions", "net n {\n  tokens a\n}", "text/plain");
  REQUIRE(parse);
  CHECK(parse->status == 400);
  auto p = json::parse(parse->body);
  CHECK(p["line"] == 3);
  CHECK(p.contains("error"));

  std::string id =
      json::parse(cli.Post("/sessions", catalysis_text(), "text/plain")->body)
          ["id"];
  for (std::string body :
       {"not json", "[]", R"({"direction":"forward"})",
        R"({"direction":"forward","transition":"t9"})",
        R"({"direction":"reverse","transition":"t1","mode":"xx"})"}) {
    CAPTURE(body);
    auto r = cli.Post("/sessions/" + id + "/step", body, "application/json");
    REQUIRE(r);
    CHECK(r->status == 400);
  }
}

TEST_CASE("sessions proceed in parallel over HTTP") {
  Server srv;
  std::vector<std::string> ids;
  for (int i = 0; i < 4; ++i)
    ids.push_back(json::parse(srv.client
                                  .Post("/sessions", catalysis_text(),
                                        "text/plain")
                                  ->body)["id"]);
  std::vector<std::thread> clients;
  std::vector<int> statuses(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    clients.emplace_back([&, i] {
      httplib::Client c("127.0.0.1", srv.port);
      auto r = c.Post("/sessions/" + ids[i] + "/step",
                      R"({"direction":"forward","transition":"t1"})",
                      "application/json");
      statuses[i] = r ? r->status : -1;
    });
  }
  for (auto& t : clients) t.join();
  for (int s : statuses) CHECK(s == 200);
  for (const auto& id : ids)
    CHECK(srv.store.find(id)->log().size() == 1);
}

TEST_CASE("terminal stepper menus") {
  auto doc = load("catalysis");
  std::istringstream in("1\n1\nundo\nundo\nquit\n");
  std::ostringstream out;
  run_stepper(doc, in, out);
  std::string text = out.str();

  // Initial menu offers t1 only.
  auto first = text.substr(0, text.find("> "));
  CHECK(first.find("1) fire t1") != std::string::npos);
  CHECK(first.find("2)") == std::string::npos);

  // After t1 t2 the reversal menu is bt {t2}, co {t2}, oco {t1, t2}.
  auto after = text.find("fire t2\nmarking");
  REQUIRE(after != std::string::npos);
  auto menu = text.substr(after, text.find("> ", after) - after);
  CHECK(menu.find("reverse t2 mode=bt") != std::string::npos);
  CHECK(menu.find("reverse t2 mode=co") != std::string::npos);
  CHECK(menu.find("reverse t2 mode=oco") != std::string::npos);
  CHECK(menu.find("reverse t1 mode=oco") != std::string::npos);
  CHECK(menu.find("reverse t1 mode=bt") == std::string::npos);
  CHECK(menu.find("reverse t1 mode=co") == std::string::npos);

  // Two undos return to the initial listing.
  auto tail = text.substr(text.rfind("marking {"));
  CHECK(tail.find("u: {c};") != std::string::npos);
  CHECK(tail.find("history {}") != std::string::npos);
}

TEST_CASE("terminal stepper re-prompts on a disabled choice") {
  auto doc = load("catalysis");
  std::istringstream in("fire t2\nreverse t1 co\n7\nbogus\nundo\nstate\n");
  std::ostringstream out;
  run_stepper(doc, in, out);
  std::string text = out.str();
  CHECK(text.find("fire t2 is not enabled: token condition") !=
        std::string::npos);
  CHECK(text.find("reverse t1 mode=co is not enabled: history of 't1' is "
                  "empty") != std::string::npos);
  CHECK(text.find("no menu entry 7") != std::string::npos);
  CHECK(text.find("unknown command 'bogus'") != std::string::npos);
  CHECK(text.find("nothing to undo") != std::string::npos);
  CHECK(text.find("causes {") != std::string::npos);
}
