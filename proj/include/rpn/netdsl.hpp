#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rpn/net.hpp"
#include "rpn/semantics.hpp"

namespace rpn {

struct NetDocument {
  std::string name;
  std::vector<std::string> comments;  // leading '#' lines, without the '#'
  Net net;
  Marking initial;

  friend bool operator==(const NetDocument&, const NetDocument&) = default;
};

/// Syntax or semantic error in a text document.  line/column are 1-based;
/// 0 means the position is not known.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, std::size_t column, const std::string& message);
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }
  const std::string& message() const { return message_; }

 private:
  std::size_t line_;
  std::size_t column_;
  std::string message_;
};

/// Parses the `.rpn` net format:
///
///   net NAME {
///     tokens a, b;
///     places x, y;
///     transition t { in x: {a, !b}; out y: {a-b}; }
///     marking { x: {a, b}; }
///   }
///
/// Bond entries add their endpoint bases with the same sign.  The result is
/// validated with check_well_formed; violations become ParseErrors.
NetDocument parse_net(std::string_view text);
std::string serialize_net(const NetDocument& doc);

/// `.rtr` trace scripts: `fire T` / `reverse T mode=bt|co|oco`, `#` comments.
Trace parse_trace(const Net& net, std::string_view text);
std::string serialize_trace(const Net& net, const Trace& trace);

std::string format_label(const Net& net, const Label& label);
std::string serialize_marking(const Net& net, const Marking& m);

/// Canonical listing of marking, history and causes.  Empty places and empty
/// histories are omitted.  Equal states give byte-identical text.
std::string serialize_state(const Net& net, const ExecState& s);
ExecState parse_state(const Net& net, std::string_view text);

/// Graphviz rendering: places as circles listing their contents, transitions
/// as boxes annotated with their history, arcs labelled with their entries.
std::string export_dot(const NetDocument& doc, const ExecState& s);

std::string read_file(const std::string& path);

}  // namespace rpn
