#include "rpn/netdsl.hpp"

#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

namespace rpn {

ParseError::ParseError(std::size_t line, std::size_t column,
                       const std::string& message)
    : std::runtime_error(line ? "line " + std::to_string(line) + ":" +
                                    std::to_string(column) + ": " + message
                              : message),
      line_(line),
      column_(column),
      message_(message) {}

namespace {

struct Token {
  enum Kind { ident, number, punct, end } kind = end;
  std::string text;
  std::size_t line = 0;
  std::size_t column = 0;
};

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)); }
bool ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

/// Splits text into identifiers, numbers and single-character punctuation.
/// `#` and `//` start comments; leading `#` comment lines are collected.
class Lexer {
 public:
  explicit Lexer(std::string_view text) : text_(text) {}

  std::vector<Token> run(std::vector<std::string>* leading_comments) {
    std::vector<Token> out;
    bool seen_token = false;
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (c == '\n') {
        advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else if (c == '#' || (c == '/' && peek(1) == '/')) {
        std::size_t start = pos_ + (c == '#' ? 1 : 2);
        while (pos_ < text_.size() && text_[pos_] != '\n') advance();
        if (!seen_token && c == '#' && leading_comments) {
          std::string body(text_.substr(start, pos_ - start));
          if (!body.empty() && body.front() == ' ') body.erase(0, 1);
          leading_comments->push_back(body);
        }
      } else if (ident_start(c)) {
        Token t{Token::ident, "", line_, column_};
        while (pos_ < text_.size() && ident_char(text_[pos_])) {
          t.text += text_[pos_];
          advance();
        }
        out.push_back(std::move(t));
        seen_token = true;
      } else if (std::isdigit(static_cast<unsigned char>(c))) {
        Token t{Token::number, "", line_, column_};
        while (pos_ < text_.size() &&
               std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
          t.text += text_[pos_];
          advance();
        }
        out.push_back(std::move(t));
        seen_token = true;
      } else if (std::string_view("{}();:,-![]<=").find(c) !=
                 std::string_view::npos) {
        out.push_back({Token::punct, std::string(1, c), line_, column_});
        advance();
        seen_token = true;
      } else {
        throw ParseError(line_, column_,
                         std::string("unexpected character '") + c + "'");
      }
    }
    out.push_back({Token::end, "", line_, column_});
    return out;
  }

 private:
  char peek(std::size_t ahead) const {
    return pos_ + ahead < text_.size() ? text_[pos_ + ahead] : '\0';
  }
  void advance() {
    if (text_[pos_] == '\n') {
      ++line_;
      column_ = 1;
    } else {
      ++column_;
    }
    ++pos_;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t column_ = 1;
};

class Cursor {
 public:
  explicit Cursor(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

  const Token& peek() const { return tokens_[pos_]; }
  const Token& next() {
    const Token& t = tokens_[pos_];
    if (t.kind != Token::end) ++pos_;
    return t;
  }
  bool at_end() const { return peek().kind == Token::end; }

  bool accept(std::string_view punct_or_word) {
    const Token& t = peek();
    if ((t.kind == Token::punct || t.kind == Token::ident) &&
        t.text == punct_or_word) {
      next();
      return true;
    }
    return false;
  }

  const Token& expect(std::string_view text) {
    const Token& t = peek();
    if ((t.kind == Token::punct || t.kind == Token::ident) && t.text == text)
      return next();
    fail(t, "expected '" + std::string(text) + "'");
  }

  const Token& expect_ident(const char* what) {
    const Token& t = peek();
    if (t.kind == Token::ident) return next();
    fail(t, std::string("expected ") + what);
  }

  const Token& expect_number() {
    const Token& t = peek();
    if (t.kind == Token::number) return next();
    fail(t, "expected a number");
  }

  [[noreturn]] static void fail(const Token& t, const std::string& message) {
    std::string found = t.kind == Token::end ? "end of input"
                                             : "'" + t.text + "'";
    throw ParseError(t.line, t.column, message + ", found " + found);
  }

 private:
  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
};

struct RawEntry {
  Token first;
  std::optional<Token> second;  // bond partner
  bool negated = false;

  std::string text() const {
    std::string s = negated ? "!" : "";
    s += first.text;
    if (second) s += "-" + second->text;
    return s;
  }
};

std::vector<RawEntry> parse_entries(Cursor& in) {
  std::vector<RawEntry> out;
  in.expect("{");
  if (in.accept("}")) return out;
  do {
    RawEntry e;
    e.negated = in.accept("!");
    e.first = in.expect_ident("a base name");
    if (in.accept("-")) e.second = in.expect_ident("a base name after '-'");
    out.push_back(std::move(e));
  } while (in.accept(","));
  in.expect("}");
  return out;
}

std::vector<Token> parse_name_list(Cursor& in, const char* what) {
  std::vector<Token> names;
  do {
    names.push_back(in.expect_ident(what));
  } while (in.accept(","));
  in.expect(";");
  return names;
}

struct RawArc {
  Token place;
  bool incoming = true;
  std::vector<RawEntry> entries;
};

struct RawTransition {
  Token name;
  std::vector<RawArc> arcs;
};

struct RawCell {
  Token place;
  std::vector<RawEntry> entries;
};

void check_declared(const std::map<std::string, Token>& declared,
                    const Token& use, const char* what) {
  if (!declared.count(use.text)) {
    throw ParseError(use.line, use.column,
                     std::string("undeclared ") + what + " '" + use.text + "'");
  }
}

void declare(std::map<std::string, Token>& declared, const Token& t,
             const char* what) {
  if (!declared.emplace(t.text, t).second) {
    throw ParseError(t.line, t.column,
                     std::string("duplicate ") + what + " '" + t.text + "'");
  }
}

void check_entry(const std::map<std::string, Token>& bases,
                 const RawEntry& e) {
  check_declared(bases, e.first, "base");
  if (e.second) {
    check_declared(bases, *e.second, "base");
    if (e.second->text == e.first.text) {
      throw ParseError(e.first.line, e.first.column,
                       "self-bond '" + e.text() + "' is not allowed");
    }
  }
}

}  // namespace

NetDocument parse_net(std::string_view text) {
  NetDocument doc;
  Cursor in(Lexer(text).run(&doc.comments));

  in.expect("net");
  doc.name = in.expect_ident("a net name").text;
  in.expect("{");

  std::map<std::string, Token> bases, places, transitions;
  std::vector<RawTransition> raw_transitions;
  std::vector<RawCell> cells;
  bool have_marking = false;

  while (!in.accept("}")) {
    const Token& kw = in.peek();
    if (in.accept("tokens")) {
      for (const auto& t : parse_name_list(in, "a base name"))
        declare(bases, t, "base");
    } else if (in.accept("places")) {
      for (const auto& t : parse_name_list(in, "a place name"))
        declare(places, t, "place");
    } else if (in.accept("transition")) {
      RawTransition tr;
      tr.name = in.expect_ident("a transition name");
      declare(transitions, tr.name, "transition");
      in.expect("{");
      while (!in.accept("}")) {
        RawArc arc;
        if (in.accept("in")) {
          arc.incoming = true;
        } else if (in.accept("out")) {
          arc.incoming = false;
        } else {
          Cursor::fail(in.peek(), "expected 'in' or 'out'");
        }
        arc.place = in.expect_ident("a place name");
        in.expect(":");
        arc.entries = parse_entries(in);
        in.expect(";");
        tr.arcs.push_back(std::move(arc));
      }
      in.accept(";");
      raw_transitions.push_back(std::move(tr));
    } else if (in.accept("marking")) {
      if (have_marking) Cursor::fail(kw, "duplicate marking block");
      have_marking = true;
      in.expect("{");
      while (!in.accept("}")) {
        RawCell cell;
        cell.place = in.expect_ident("a place name");
        in.expect(":");
        cell.entries = parse_entries(in);
        in.expect(";");
        cells.push_back(std::move(cell));
      }
      in.accept(";");
    } else {
      Cursor::fail(kw, "expected 'tokens', 'places', 'transition' or 'marking'");
    }
  }
  if (!in.at_end()) Cursor::fail(in.peek(), "expected end of input");

  NetBuilder builder;
  for (const auto& [name, tok] : bases) builder.base(name);
  for (const auto& [name, tok] : places) builder.place(name);
  for (const auto& tr : raw_transitions) {
    builder.transition(tr.name.text);
    for (const auto& arc : tr.arcs) {
      check_declared(places, arc.place, "place");
      std::vector<std::string> entries;
      for (const auto& e : arc.entries) {
        check_entry(bases, e);
        entries.push_back(e.text());
      }
      if (arc.incoming) {
        builder.input(tr.name.text, arc.place.text, entries);
      } else {
        builder.output(tr.name.text, arc.place.text, entries);
      }
    }
  }
  doc.net = builder.build();

  std::vector<std::pair<std::string, std::vector<std::string>>> marking;
  for (const auto& cell : cells) {
    check_declared(places, cell.place, "place");
    std::vector<std::string> entries;
    for (const auto& e : cell.entries) {
      check_entry(bases, e);
      if (e.negated) {
        throw ParseError(e.first.line, e.first.column,
                         "negated entry '" + e.text() + "' in the marking");
      }
      entries.push_back(e.text());
    }
    marking.emplace_back(cell.place.text, std::move(entries));
  }
  doc.initial = make_marking(doc.net, marking);

  ValidationReport report = check_well_formed(doc.net, doc.initial);
  if (!report.ok()) {
    const Violation& v = report.violations.front();
    // Point at the transition the violation names, when there is one.
    std::size_t line = 0, column = 0;
    for (const auto& tr : raw_transitions) {
      const std::string& n = tr.name.text;
      const std::string& w = v.where;
      if (w == n || w.starts_with(n + " -> ") || w.ends_with(" -> " + n)) {
        line = tr.name.line;
        column = tr.name.column;
        break;
      }
    }
    if (!line) {
      if (auto it = bases.find(v.where); it != bases.end()) {
        line = it->second.line;
        column = it->second.column;
      }
    }
    throw ParseError(line, column,
                     "semantic error: " + v.clause + ": " + v.where + ": " +
                         v.detail);
  }
  return doc;
}

// ---------------------------------------------------------------------------

namespace {

void join(std::ostream& out, const std::vector<std::string>& items,
          const char* sep) {
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out << sep;
    out << items[i];
  }
}

std::string format_set(const Net& net, const ElementSet& set) {
  std::vector<std::string> names;
  for (const auto& e : set) names.push_back(net.element_name(e));
  std::ostringstream out;
  out << "{";
  join(out, names, ", ");
  out << "}";
  return out.str();
}

}  // namespace

std::string format_label(const Net& net, const Label& label) {
  std::vector<std::string> names;
  for (const auto& e : label.positive) names.push_back(net.element_name(e));
  for (const auto& e : label.negated) names.push_back("!" + net.element_name(e));
  std::ostringstream out;
  out << "{";
  join(out, names, ", ");
  out << "}";
  return out.str();
}

std::string serialize_net(const NetDocument& doc) {
  const Net& net = doc.net;
  std::ostringstream out;
  for (const auto& c : doc.comments) out << "# " << c << "\n";
  out << "net " << doc.name << " {\n";
  if (net.base_count()) {
    out << "  tokens ";
    join(out, net.bases(), ", ");
    out << ";\n";
  }
  if (net.place_count()) {
    out << "  places ";
    join(out, net.places(), ", ");
    out << ";\n";
  }
  for (const auto& tr : net.transitions()) {
    out << "  transition " << tr.name << " {\n";
    for (const auto& arc : tr.inputs) {
      out << "    in " << net.places()[arc.place] << ": "
          << format_label(net, arc.label) << ";\n";
    }
    for (const auto& arc : tr.outputs) {
      out << "    out " << net.places()[arc.place] << ": "
          << format_label(net, arc.label) << ";\n";
    }
    out << "  }\n";
  }
  out << "  marking {\n";
  for (PlaceId x = 0; x < doc.initial.size(); ++x) {
    if (doc.initial[x].empty()) continue;
    out << "    " << net.places()[x] << ": "
        << format_set(net, doc.initial[x]) << ";\n";
  }
  out << "  }\n}\n";
  return out.str();
}

// ---------------------------------------------------------------------------

Trace parse_trace(const Net& net, std::string_view text) {
  Trace trace;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string line(text.substr(start, end - start));
    start = end + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);

    std::istringstream words(line);
    std::string directive, name, extra;
    if (!(words >> directive)) continue;
    if (!(words >> name)) {
      throw ParseError(line_no, 1, "missing transition name");
    }
    auto t = net.find_transition(name);
    if (!t) throw ParseError(line_no, 1, "unknown transition '" + name + "'");
    if (directive == "fire") {
      trace.push_back(Action::fire(*t));
    } else if (directive == "reverse") {
      std::string mode_word;
      if (!(words >> mode_word) || !mode_word.starts_with("mode=")) {
        throw ParseError(line_no, 1, "expected mode=bt|co|oco");
      }
      auto mode = parse_mode(mode_word.substr(5));
      if (!mode) {
        throw ParseError(line_no, 1,
                         "unknown mode '" + mode_word.substr(5) + "'");
      }
      trace.push_back(Action::reverse(*t, *mode));
    } else {
      throw ParseError(line_no, 1, "unknown directive '" + directive + "'");
    }
    if (words >> extra) {
      throw ParseError(line_no, 1, "unexpected text '" + extra + "'");
    }
    if (end == text.size()) break;
  }
  return trace;
}

std::string serialize_trace(const Net& net, const Trace& trace) {
  std::string out;
  for (const auto& a : trace) out += describe(net, a) + "\n";
  return out;
}

// ---------------------------------------------------------------------------

std::string serialize_marking(const Net& net, const Marking& m) {
  std::ostringstream out;
  out << "marking {\n";
  for (PlaceId x = 0; x < m.size(); ++x) {
    if (m[x].empty()) continue;
    out << "  " << net.places()[x] << ": " << format_set(net, m[x]) << ";\n";
  }
  out << "}\n";
  return out.str();
}

std::string serialize_state(const Net& net, const ExecState& s) {
  std::ostringstream out;
  out << serialize_marking(net, s.marking);
  out << "history {\n";
  for (TransitionId t = 0; t < s.history.size(); ++t) {
    const auto& keys = s.history.keys(t);
    if (keys.empty()) continue;
    out << "  " << net.transition(t).name << ": [";
    for (std::size_t i = 0; i < keys.size(); ++i) {
      if (i) out << ", ";
      out << keys[i];
    }
    out << "];\n";
  }
  out << "}\n";
  out << "causes {\n";
  for (const auto& p : s.causes) {
    out << "  (" << net.transition(p.cause.transition).name << ","
        << p.cause.key << ") < (" << net.transition(p.effect.transition).name
        << "," << p.effect.key << ");\n";
  }
  out << "}\n";
  return out.str();
}

ExecState parse_state(const Net& net, std::string_view text) {
  Cursor in(Lexer(text).run(nullptr));
  ExecState s{empty_marking(net), History(net.transition_count()), {}};

  auto resolve = [&](const Token& t, auto finder, const char* what) {
    auto id = finder(t.text);
    if (!id) {
      throw ParseError(t.line, t.column,
                       std::string("unknown ") + what + " '" + t.text + "'");
    }
    return *id;
  };
  auto find_place = [&](std::string_view n) { return net.find_place(n); };
  auto find_transition = [&](std::string_view n) {
    return net.find_transition(n);
  };
  auto find_base = [&](std::string_view n) { return net.find_base(n); };

  in.expect("marking");
  in.expect("{");
  while (!in.accept("}")) {
    PlaceId x = resolve(in.expect_ident("a place name"), find_place, "place");
    in.expect(":");
    for (const auto& e : parse_entries(in)) {
      if (e.negated) Cursor::fail(e.first, "negated entry in a state");
      BaseId a = resolve(e.first, find_base, "base");
      s.marking[x].insert(Element::base(a));
      if (e.second) {
        BaseId b = resolve(*e.second, find_base, "base");
        if (a == b) Cursor::fail(*e.second, "self-bond");
        s.marking[x].insert(Element::base(b));
        s.marking[x].insert(Element::bond(a, b));
      }
    }
    in.expect(";");
  }

  auto key = [&]() {
    return static_cast<Key>(std::stoul(in.expect_number().text));
  };

  in.expect("history");
  in.expect("{");
  while (!in.accept("}")) {
    TransitionId t = resolve(in.expect_ident("a transition name"),
                             find_transition, "transition");
    in.expect(":");
    in.expect("[");
    if (!in.accept("]")) {
      do {
        s.history.add(t, key());
      } while (in.accept(","));
      in.expect("]");
    }
    in.expect(";");
  }

  in.expect("causes");
  in.expect("{");
  auto occurrence = [&]() {
    in.expect("(");
    TransitionId t = resolve(in.expect_ident("a transition name"),
                             find_transition, "transition");
    in.expect(",");
    Key k = key();
    in.expect(")");
    return Occurrence{t, k};
  };
  while (!in.accept("}")) {
    Occurrence cause = occurrence();
    in.expect("<");
    Occurrence effect = occurrence();
    in.expect(";");
    s.causes.insert({cause, effect});
  }
  if (!in.at_end()) Cursor::fail(in.peek(), "expected end of input");
  return s;
}

// ---------------------------------------------------------------------------

namespace {

std::string dot_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string export_dot(const NetDocument& doc, const ExecState& s) {
  const Net& net = doc.net;
  std::ostringstream out;
  out << "digraph " << dot_quote(doc.name) << " {\n";
  out << "  rankdir=LR;\n";
  for (PlaceId x = 0; x < net.place_count(); ++x) {
    std::string label = net.places()[x];
    if (!s.marking[x].empty()) label += "\n" + format_set(net, s.marking[x]);
    out << "  " << dot_quote("p:" + net.places()[x])
        << " [shape=circle, label=" << dot_quote(label) << "];\n";
  }
  for (TransitionId t = 0; t < net.transition_count(); ++t) {
    const auto& tr = net.transition(t);
    std::string label = tr.name;
    const auto& keys = s.history.keys(t);
    if (!keys.empty()) {
      label += " [";
      for (std::size_t i = 0; i < keys.size(); ++i) {
        if (i) label += ",";
        label += std::to_string(keys[i]);
      }
      label += "]";
    }
    out << "  " << dot_quote("t:" + tr.name)
        << " [shape=box, label=" << dot_quote(label) << "];\n";
  }
  for (const auto& tr : net.transitions()) {
    for (const auto& arc : tr.inputs) {
      out << "  " << dot_quote("p:" + net.places()[arc.place]) << " -> "
          << dot_quote("t:" + tr.name)
          << " [label=" << dot_quote(format_label(net, arc.label)) << "];\n";
    }
    for (const auto& arc : tr.outputs) {
      out << "  " << dot_quote("t:" + tr.name) << " -> "
          << dot_quote("p:" + net.places()[arc.place])
          << " [label=" << dot_quote(format_label(net, arc.label)) << "];\n";
    }
  }
  out << "}\n";
  return out.str();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace rpn
