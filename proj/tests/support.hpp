#pragma once

#include <string>

#include "rpn/netdsl.hpp"
#include "rpn/semantics.hpp"

namespace rpn::test {

inline NetDocument load(const std::string& name) {
  return parse_net(read_file(std::string(RPN_NETS_DIR) + "/" + name + ".rpn"));
}

inline Trace load_trace(const NetDocument& doc, const std::string& name) {
  return parse_trace(doc.net,
                     read_file(std::string(RPN_NETS_DIR) + "/" + name + ".rtr"));
}

// Trace from script text, one directive per line.
inline Trace script(const NetDocument& doc, const std::string& text) {
  return parse_trace(doc.net, text);
}

inline ExecState run(const NetDocument& doc, const std::string& text) {
  return replay(doc.net, doc.initial, script(doc, text));
}

inline TransitionId tid(const NetDocument& doc, const std::string& name) {
  return doc.net.transition_id(name);
}

inline PlaceId pid(const NetDocument& doc, const std::string& name) {
  return doc.net.place_id(name);
}

// Contents of one place in entry syntax, e.g. "{a, b, a-b}".
inline std::string cell(const NetDocument& doc, const ExecState& s,
                        const std::string& place) {
  std::string out = "{";
  bool first = true;
  for (const auto& e : s.marking[pid(doc, place)]) {
    out += (first ? "" : ", ") + doc.net.element_name(e);
    first = false;
  }
  return out + "}";
}

}  // namespace rpn::test
