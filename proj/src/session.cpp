#include "rpn/session.hpp"

#include <algorithm>
#include <cctype>
#include <iomanip>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include <httplib.h>

namespace rpn {

// JSON views ------------------------------------------------------------------

json state_to_json(const Net& net, const ExecState& s) {
  json marking = json::object();
  for (PlaceId x = 0; x < s.marking.size(); ++x) {
    if (s.marking[x].empty()) continue;
    json cell = json::array();
    for (const auto& e : s.marking[x]) cell.push_back(net.element_name(e));
    marking[net.places()[x]] = std::move(cell);
  }
  json history = json::object();
  for (TransitionId t = 0; t < s.history.size(); ++t) {
    if (!s.history.executed(t)) continue;
    history[net.transition(t).name] = s.history.keys(t);
  }
  json causes = json::array();
  for (const auto& p : s.causes) {
    causes.push_back(
        {{"cause",
          {{"transition", net.transition(p.cause.transition).name},
           {"key", p.cause.key}}},
         {"effect",
          {{"transition", net.transition(p.effect.transition).name},
           {"key", p.effect.key}}}});
  }
  return {{"marking", marking}, {"history", history}, {"causes", causes}};
}

namespace {

json label_to_json(const Net& net, const Label& label) {
  json out = json::array();
  for (const auto& e : label.positive) out.push_back(net.element_name(e));
  for (const auto& e : label.negated) out.push_back("!" + net.element_name(e));
  return out;
}

}  // namespace

json net_to_json(const NetDocument& doc) {
  const Net& net = doc.net;
  json transitions = json::array();
  for (const auto& tr : net.transitions()) {
    json inputs = json::array(), outputs = json::array();
    for (const auto& a : tr.inputs)
      inputs.push_back({{"place", net.places()[a.place]},
                        {"label", label_to_json(net, a.label)}});
    for (const auto& a : tr.outputs)
      outputs.push_back({{"place", net.places()[a.place]},
                         {"label", label_to_json(net, a.label)}});
    transitions.push_back(
        {{"name", tr.name}, {"inputs", inputs}, {"outputs", outputs}});
  }
  ExecState initial = initial_state(net, doc.initial);
  return {{"name", doc.name},
          {"tokens", net.bases()},
          {"places", net.places()},
          {"transitions", transitions},
          {"initial", state_to_json(net, initial)["marking"]}};
}

json enabled_to_json(const Net& net, const ExecState& s) {
  auto names = [&](const std::vector<TransitionId>& ts) {
    json out = json::array();
    for (auto t : ts) out.push_back(net.transition(t).name);
    return out;
  };
  return {{"forward", names(enabled_forward(net, s))},
          {"bt", names(enabled_reverse(net, s, ReverseMode::bt))},
          {"co", names(enabled_reverse(net, s, ReverseMode::co))},
          {"oco", names(enabled_reverse(net, s, ReverseMode::oco))}};
}

Action action_from_json(const Net& net, const json& body) {
  if (!body.is_object()) throw BadRequest("body must be a JSON object");
  auto text = [&](const char* field) -> std::optional<std::string> {
    auto it = body.find(field);
    if (it == body.end()) return std::nullopt;
    if (!it->is_string())
      throw BadRequest(std::string("'") + field + "' must be a string");
    return it->get<std::string>();
  };
  auto direction = text("direction");
  auto name = text("transition");
  if (!direction) throw BadRequest("missing 'direction'");
  if (!name) throw BadRequest("missing 'transition'");
  auto t = net.find_transition(*name);
  if (!t) throw BadRequest("unknown transition '" + *name + "'");
  if (*direction == "forward") return Action::fire(*t);
  if (*direction != "reverse")
    throw BadRequest("'direction' must be 'forward' or 'reverse'");
  auto mode_text = text("mode");
  if (!mode_text) throw BadRequest("missing 'mode' for a reverse step");
  auto mode = parse_mode(*mode_text);
  if (!mode) throw BadRequest("unknown mode '" + *mode_text + "'");
  return Action::reverse(*t, *mode);
}

// Sessions --------------------------------------------------------------------

Session::Session(std::string id, NetDocument doc)
    : id_(std::move(id)),
      doc_(std::move(doc)),
      current_(initial_state(doc_.net, doc_.initial)) {}

ExecState Session::current() const {
  std::lock_guard lock(mu_);
  return current_;
}

std::vector<Action> Session::log() const {
  std::lock_guard lock(mu_);
  std::vector<Action> out;
  for (const auto& [a, prior] : undo_log_) out.push_back(a);
  return out;
}

ExecState Session::step(const Action& a) {
  std::lock_guard lock(mu_);
  if (auto why = action_blocker(doc_.net, current_, a)) {
    throw NotEnabledError(describe(doc_.net, a) + ": " + *why);
  }
  ExecState next = rpn::step(doc_.net, doc_.initial, current_, a);
  undo_log_.emplace_back(a, std::move(current_));
  current_ = std::move(next);
  return current_;
}

ExecState Session::undo() {
  std::lock_guard lock(mu_);
  if (undo_log_.empty()) throw NothingToUndo();
  current_ = std::move(undo_log_.back().second);
  undo_log_.pop_back();
  return current_;
}

json Session::view() const {
  std::lock_guard lock(mu_);
  json log = json::array();
  for (const auto& [a, prior] : undo_log_) log.push_back(describe(doc_.net, a));
  return {{"id", id_},
          {"net", net_to_json(doc_)},
          {"state", state_to_json(doc_.net, current_)},
          {"enabled", enabled_to_json(doc_.net, current_)},
          {"log", log}};
}

std::string Session::dot() const {
  std::lock_guard lock(mu_);
  return export_dot(doc_, current_);
}

std::shared_ptr<Session> SessionStore::create(std::string_view net_text) {
  return create(parse_net(net_text));
}

std::shared_ptr<Session> SessionStore::create(NetDocument doc) {
  static thread_local std::mt19937_64 rng{std::random_device{}()};
  std::lock_guard lock(mu_);
  std::ostringstream id;
  id << next_++ << "-" << std::hex << std::setw(12) << std::setfill('0')
     << (rng() & 0xffffffffffffull);
  auto s = std::make_shared<Session>(id.str(), std::move(doc));
  sessions_.emplace(s->id(), s);
  return s;
}

std::shared_ptr<Session> SessionStore::find(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

std::size_t SessionStore::size() const {
  std::lock_guard lock(mu_);
  return sessions_.size();
}

// HTTP ------------------------------------------------------------------------

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& msg) {
  send_json(res, status, {{"error", msg}});
}

json step_result(const Session& s, const ExecState& state) {
  const Net& net = s.document().net;
  return {{"id", s.id()},
          {"state", state_to_json(net, state)},
          {"enabled", enabled_to_json(net, state)}};
}

}  // namespace

SessionServer::SessionServer(SessionStore& store)
    : store_(store), server_(std::make_unique<httplib::Server>()) {
  auto& srv = *server_;

  srv.Post("/sessions", [this](const httplib::Request& req,
                               httplib::Response& res) {
    try {
      auto s = store_.create(req.body);
      send_json(res, 201,
                {{"id", s->id()},
                 {"state", state_to_json(s->document().net, s->current())}});
    } catch (const ParseError& e) {
      json body = {{"error", e.what()}};
      if (e.line()) {
        body["line"] = e.line();
        body["column"] = e.column();
      }
      send_json(res, 400, body);
    } catch (const std::exception& e) {
      send_error(res, 400, e.what());
    }
  });

  auto with_session = [this](const httplib::Request& req,
                             httplib::Response& res) {
    auto s = store_.find(req.matches[1]);
    if (!s) send_error(res, 404, "unknown session '" +
                                     std::string(req.matches[1]) + "'");
    return s;
  };

  srv.Get(R"(/sessions/([^/]+))",
          [with_session](const httplib::Request& req, httplib::Response& res) {
            if (auto s = with_session(req, res)) send_json(res, 200, s->view());
          });

  srv.Post(R"(/sessions/([^/]+)/step)",
           [with_session](const httplib::Request& req,
                          httplib::Response& res) {
             auto s = with_session(req, res);
             if (!s) return;
             Action a;
             try {
               a = action_from_json(s->document().net, json::parse(req.body));
             } catch (const json::exception& e) {
               return send_error(res, 400, std::string("malformed JSON: ") +
                                               e.what());
             } catch (const BadRequest& e) {
               return send_error(res, 400, e.what());
             }
             try {
               send_json(res, 200, step_result(*s, s->step(a)));
             } catch (const NotEnabledError& e) {
               send_error(res, 409, e.what());
             }
           });

  srv.Post(R"(/sessions/([^/]+)/undo)",
           [with_session](const httplib::Request& req,
                          httplib::Response& res) {
             auto s = with_session(req, res);
             if (!s) return;
             try {
               send_json(res, 200, step_result(*s, s->undo()));
             } catch (const NothingToUndo& e) {
               send_error(res, 409, e.what());
             }
           });

  srv.Get(R"(/sessions/([^/]+)/dot)",
          [with_session](const httplib::Request& req, httplib::Response& res) {
            if (auto s = with_session(req, res))
              res.set_content(s->dot(), "text/vnd.graphviz");
          });
}

SessionServer::~SessionServer() { stop(); }

int SessionServer::bind(const std::string& host, int port) {
  if (port == 0) return server_->bind_to_any_port(host);
  return server_->bind_to_port(host, port) ? port : -1;
}

void SessionServer::listen() { server_->listen_after_bind(); }

int SessionServer::start(const std::string& host, int port) {
  int bound = bind(host, port);
  if (bound < 0) return bound;
  thread_ = std::thread([this] { listen(); });
  server_->wait_until_ready();
  return bound;
}

void SessionServer::stop() {
  server_->stop();
  if (thread_.joinable()) thread_.join();
}

// Terminal stepper --------------------------------------------------------------

namespace {

std::vector<Action> menu(const Net& net, const ExecState& s) {
  std::vector<Action> out;
  for (auto t : enabled_forward(net, s)) out.push_back(Action::fire(t));
  for (ReverseMode m : {ReverseMode::bt, ReverseMode::co, ReverseMode::oco})
    for (auto t : enabled_reverse(net, s, m))
      out.push_back(Action::reverse(t, m));
  return out;
}

void show(const Net& net, const ExecState& s, const std::vector<Action>& items,
          std::ostream& out) {
  out << serialize_marking(net, s.marking);
  out << "history {";
  bool any = false;
  for (TransitionId t = 0; t < s.history.size(); ++t) {
    if (!s.history.executed(t)) continue;
    out << (any ? ", " : " ") << net.transition(t).name << ": [";
    const auto& keys = s.history.keys(t);
    for (std::size_t i = 0; i < keys.size(); ++i)
      out << (i ? "," : "") << keys[i];
    out << "]";
    any = true;
  }
  out << (any ? " }" : "}") << "\n";
  if (items.empty()) {
    out << "no enabled actions\n";
    return;
  }
  for (std::size_t i = 0; i < items.size(); ++i)
    out << "  " << i + 1 << ") " << describe(net, items[i]) << "\n";
}

}  // namespace

void run_stepper(const NetDocument& doc, std::istream& in, std::ostream& out) {
  const Net& net = doc.net;
  ExecState cur = initial_state(net, doc.initial);
  std::vector<ExecState> undo;
  auto items = menu(net, cur);
  show(net, cur, items, out);

  std::string line;
  while (out << "> " << std::flush, std::getline(in, line)) {
    std::istringstream words(line);
    std::string cmd;
    if (!(words >> cmd)) continue;
    if (cmd == "quit" || cmd == "exit") break;
    if (cmd == "help") {
      out << "fire T | reverse T [bt|co|oco] | N | undo | state | quit\n";
      continue;
    }
    if (cmd == "state") {
      out << serialize_state(net, cur);
      continue;
    }
    if (cmd == "undo") {
      if (undo.empty()) {
        out << "nothing to undo\n";
        continue;
      }
      cur = std::move(undo.back());
      undo.pop_back();
      items = menu(net, cur);
      show(net, cur, items, out);
      continue;
    }

    std::optional<Action> chosen;
    if (std::all_of(cmd.begin(), cmd.end(), ::isdigit)) {
      std::size_t n = std::stoul(cmd);
      if (n == 0 || n > items.size()) {
        out << "no menu entry " << cmd << "\n";
        continue;
      }
      chosen = items[n - 1];
    } else if (cmd == "fire" || cmd == "reverse") {
      std::string name, mode_text = "oco";
      words >> name >> mode_text;
      if (mode_text.starts_with("mode=")) mode_text = mode_text.substr(5);
      auto t = net.find_transition(name);
      auto mode = parse_mode(mode_text);
      if (!t) {
        out << "unknown transition '" << name << "'\n";
        continue;
      }
      if (cmd == "reverse" && !mode) {
        out << "unknown mode '" << mode_text << "'\n";
        continue;
      }
      chosen = cmd == "fire" ? Action::fire(*t) : Action::reverse(*t, *mode);
    } else {
      out << "unknown command '" << cmd << "' (try help)\n";
      continue;
    }

    if (auto why = action_blocker(net, cur, *chosen)) {
      out << describe(net, *chosen) << " is not enabled: " << *why << "\n";
      continue;
    }
    undo.push_back(cur);
    cur = step(net, doc.initial, cur, *chosen);
    out << describe(net, *chosen) << "\n";
    items = menu(net, cur);
    show(net, cur, items, out);
  }
}

}  // namespace rpn
