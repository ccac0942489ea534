#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "rpn/netdsl.hpp"
#include "rpn/semantics.hpp"

namespace httplib {
class Server;
}

namespace rpn {

using nlohmann::json;

// JSON views ----------------------------------------------------------------

/// {"marking": {place: [entries]}, "history": {t: [keys]}, "causes": [...]},
/// the same content as serialize_state, with the same omissions.
json state_to_json(const Net& net, const ExecState& s);
json net_to_json(const NetDocument& doc);
/// {"forward": [...], "bt": [...], "co": [...], "oco": [...]}
json enabled_to_json(const Net& net, const ExecState& s);

class BadRequest : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// {"direction": "forward"|"reverse", "transition": name, "mode": "bt"|...}.
/// Throws BadRequest on a malformed body.
Action action_from_json(const Net& net, const json& body);

// Sessions ------------------------------------------------------------------

class NothingToUndo : public std::runtime_error {
 public:
  NothingToUndo() : std::runtime_error("nothing to undo") {}
};

/// A net being stepped interactively.  Every operation takes the session's
/// lock, so concurrent requests on one session are serialized.
class Session {
 public:
  Session(std::string id, NetDocument doc);

  const std::string& id() const { return id_; }
  const NetDocument& document() const { return doc_; }

  ExecState current() const;
  std::vector<Action> log() const;

  /// Throws NotEnabledError naming the failing condition.
  ExecState step(const Action& a);
  /// Restores the state before the last step.  Throws NothingToUndo.
  ExecState undo();

  /// {"id", "net", "state", "enabled", "log"}
  json view() const;
  std::string dot() const;

 private:
  std::string id_;
  NetDocument doc_;
  mutable std::mutex mu_;
  ExecState current_;
  std::vector<std::pair<Action, ExecState>> undo_log_;
};

class SessionStore {
 public:
  /// Parses the net text (ParseError on failure) and opens a session.
  std::shared_ptr<Session> create(std::string_view net_text);
  std::shared_ptr<Session> create(NetDocument doc);
  std::shared_ptr<Session> find(const std::string& id) const;
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_ = 1;
};

// HTTP ----------------------------------------------------------------------

/// POST /sessions, GET /sessions/{id}, POST /sessions/{id}/step,
/// POST /sessions/{id}/undo, GET /sessions/{id}/dot.
class SessionServer {
 public:
  explicit SessionServer(SessionStore& store);
  ~SessionServer();

  /// Binds to host:port (port 0 picks a free port) and returns the port,
  /// or -1 on failure.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  void listen();
  /// bind() then listen() on a background thread.
  int start(const std::string& host, int port);
  void stop();

 private:
  SessionStore& store_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

// Terminal stepper ------------------------------------------------------------

/// Reads commands from `in` until `quit` or end of input:
///   fire T | reverse T [bt|co|oco] | N (menu entry) | undo | state | help | quit
void run_stepper(const NetDocument& doc, std::istream& in, std::ostream& out);

}  // namespace rpn
