#include <charconv>
#include <cmath>
#include <sstream>

#include "ddx/io.hpp"
#include "ddx/procedure.hpp"

namespace ddx {

const char* to_string(DiagnosticCode code) {
  switch (code) {
    case DiagnosticCode::lexical: return "lexical";
    case DiagnosticCode::syntax: return "syntax";
    case DiagnosticCode::duplicate_node: return "duplicate-node";
    case DiagnosticCode::duplicate_start: return "duplicate-start";
    case DiagnosticCode::missing_start: return "missing-start";
    case DiagnosticCode::unknown_start: return "unknown-start";
    case DiagnosticCode::dangling_target: return "dangling-target";
    case DiagnosticCode::cycle: return "cycle";
    case DiagnosticCode::unreachable_node: return "unreachable-node";
    case DiagnosticCode::terminal_unreachable: return "terminal-unreachable";
    case DiagnosticCode::unresolved_name: return "unresolved-name";
  }
  return "unknown";
}

std::string Diagnostic::format(std::string_view file) const {
  std::ostringstream out;
  if (!file.empty()) out << file << ':';
  out << pos.line << ':' << pos.column << ": "
      << (severity == Severity::error ? "error" : "warning") << '[' << to_string(code)
      << "]: " << message;
  return out.str();
}

bool has_errors(const std::vector<Diagnostic>& diagnostics) {
  for (const auto& d : diagnostics) {
    if (d.severity == Severity::error) return true;
  }
  return false;
}

namespace {

std::string join_messages(const std::vector<Diagnostic>& diagnostics) {
  std::string text;
  for (const auto& d : diagnostics) {
    if (!text.empty()) text += '\n';
    text += d.format();
  }
  return text;
}

}  // namespace

ProcedureParseError::ProcedureParseError(std::vector<Diagnostic> diagnostics)
    : FormatError(join_messages(diagnostics)), diagnostics_(std::move(diagnostics)) {}

namespace {

enum class Tok {
  ident,
  string,
  number,
  lbrace,
  rbrace,
  lparen,
  rparen,
  colon,
  arrow,
  or_op,
  and_op,
  bang,
  cmp,
  question,
  end,
};

const char* describe(Tok t) {
  switch (t) {
    case Tok::ident: return "identifier";
    case Tok::string: return "string";
    case Tok::number: return "number";
    case Tok::lbrace: return "'{'";
    case Tok::rbrace: return "'}'";
    case Tok::lparen: return "'('";
    case Tok::rparen: return "')'";
    case Tok::colon: return "':'";
    case Tok::arrow: return "'->'";
    case Tok::or_op: return "'||'";
    case Tok::and_op: return "'&&'";
    case Tok::bang: return "'!'";
    case Tok::cmp: return "comparison";
    case Tok::question: return "'?'";
    case Tok::end: return "end of input";
  }
  return "token";
}

struct Token {
  Tok kind = Tok::end;
  std::string text;  // identifier name, decoded string, number literal
  Comparison cmp = Comparison::ge;
  double number = 0.0;
  SourcePos pos;
};

Diagnostic error_at(DiagnosticCode code, SourcePos pos, std::string message) {
  return Diagnostic{Severity::error, code, pos, std::move(message)};
}

bool is_ident_start(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}

bool is_ident_char(char c) {
  return is_ident_start(c) || (c >= '0' && c <= '9') || c == '-' || c == '.';
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }

class Lexer {
 public:
  explicit Lexer(std::string_view text) : text_(text) {}

  std::vector<Token> run() {
    std::vector<Token> tokens;
    for (;;) {
      skip_blank();
      Token t;
      t.pos = {line_, column_};
      if (at_end()) {
        tokens.push_back(t);
        return tokens;
      }
      const char c = peek();
      if (is_ident_start(c)) {
        std::size_t begin = i_;
        while (!at_end() && is_ident_char(peek())) {
          // "a->b" must lex as a, ->, b
          if (peek() == '-' && peek(1) == '>') break;
          advance();
        }
        t.kind = Tok::ident;
        t.text = std::string(text_.substr(begin, i_ - begin));
      } else if (c == '"') {
        t.kind = Tok::string;
        t.text = read_string(t.pos);
      } else if (is_digit(c) || ((c == '-' || c == '+' || c == '.') &&
                                 (is_digit(peek(1)) || (peek(1) == '.' && is_digit(peek(2)))))) {
        read_number(t);
      } else if (c == '-' && peek(1) == '>') {
        advance(2);
        t.kind = Tok::arrow;
      } else if (c == '|' && peek(1) == '|') {
        advance(2);
        t.kind = Tok::or_op;
      } else if (c == '&' && peek(1) == '&') {
        advance(2);
        t.kind = Tok::and_op;
      } else if (c == '>' || c == '<' || c == '=' || c == '!') {
        read_operator(t);
      } else if (matches("≥") || matches("≤") || matches("≠")) {
        t.kind = Tok::cmp;
        t.cmp = matches("≥") ? Comparison::ge
                : matches("≤") ? Comparison::le
                                    : Comparison::ne;
        advance(3);
      } else {
        switch (c) {
          case '{': t.kind = Tok::lbrace; break;
          case '}': t.kind = Tok::rbrace; break;
          case '(': t.kind = Tok::lparen; break;
          case ')': t.kind = Tok::rparen; break;
          case ':': t.kind = Tok::colon; break;
          case '?': t.kind = Tok::question; break;
          default:
            throw ProcedureParseError({error_at(DiagnosticCode::lexical, t.pos,
                                                "unexpected character " + quote_char()) });
        }
        advance();
      }
      tokens.push_back(std::move(t));
    }
  }

 private:
  bool at_end() const { return i_ >= text_.size(); }
  char peek(std::size_t ahead = 0) const {
    return i_ + ahead < text_.size() ? text_[i_ + ahead] : '\0';
  }
  bool matches(std::string_view s) const { return text_.substr(i_, s.size()) == s; }

  // Columns count code points: UTF-8 continuation bytes do not advance them.
  void advance(std::size_t n = 1) {
    for (std::size_t k = 0; k < n && !at_end(); ++k) {
      const auto c = static_cast<unsigned char>(text_[i_++]);
      if (c == '\n') {
        ++line_;
        column_ = 1;
      } else if ((c & 0xC0) != 0x80) {
        ++column_;
      }
    }
  }

  void skip_blank() {
    while (!at_end()) {
      const char c = peek();
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        advance();
      } else if (c == '#') {
        while (!at_end() && peek() != '\n') advance();
      } else {
        break;
      }
    }
  }

  std::string quote_char() const {
    const auto c = static_cast<unsigned char>(peek());
    if (c >= 0x20 && c < 0x7F) return std::string("'") + static_cast<char>(c) + "'";
    std::ostringstream out;
    out << "byte 0x" << std::hex << static_cast<int>(c);
    return out.str();
  }

  std::string read_string(SourcePos start) {
    advance();  // opening quote
    std::string out;
    for (;;) {
      if (at_end() || peek() == '\n') {
        throw ProcedureParseError({error_at(DiagnosticCode::lexical, start, "unterminated string")});
      }
      const char c = peek();
      if (c == '"') {
        advance();
        return out;
      }
      if (c == '\\') {
        const SourcePos at{line_, column_};
        advance();
        switch (peek()) {
          case '"': out += '"'; break;
          case '\\': out += '\\'; break;
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          default:
            throw ProcedureParseError(
                {error_at(DiagnosticCode::lexical, at, "unknown escape sequence in string")});
        }
        advance();
        continue;
      }
      out += c;
      advance();
    }
  }

  void read_number(Token& t) {
    std::size_t begin = i_;
    if (peek() == '-' || peek() == '+') advance();
    while (!at_end() && (is_digit(peek()) || peek() == '.')) advance();
    if (peek() == 'e' || peek() == 'E') {
      const char sign = peek(1);
      if (is_digit(sign) || ((sign == '-' || sign == '+') && is_digit(peek(2)))) {
        advance(2);
        while (!at_end() && is_digit(peek())) advance();
      }
    }
    std::string literal(text_.substr(begin, i_ - begin));
    const char* first = literal.data();
    if (*first == '+') ++first;
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(first, literal.data() + literal.size(), value);
    if (ec != std::errc() || ptr != literal.data() + literal.size() || !std::isfinite(value)) {
      throw ProcedureParseError(
          {error_at(DiagnosticCode::lexical, t.pos, "malformed number '" + literal + "'")});
    }
    t.kind = Tok::number;
    t.text = std::move(literal);
    t.number = value;
  }

  void read_operator(Token& t) {
    const char c = peek();
    const bool eq_next = peek(1) == '=';
    t.kind = Tok::cmp;
    switch (c) {
      case '>': t.cmp = eq_next ? Comparison::ge : Comparison::gt; break;
      case '<': t.cmp = eq_next ? Comparison::le : Comparison::lt; break;
      case '=': t.cmp = Comparison::eq; break;
      case '!':
        if (!eq_next) {
          t.kind = Tok::bang;
          advance();
          return;
        }
        t.cmp = Comparison::ne;
        break;
    }
    advance(eq_next ? 2 : 1);
  }

  std::string_view text_;
  std::size_t i_ = 0;
  int line_ = 1;
  int column_ = 1;
};

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

  ProcedureGraph run() {
    ProcedureGraph g;
    keyword("procedure");
    g.name = expect(Tok::string, "procedure name").text;
    keyword("for");
    g.disease = expect(Tok::string, "disease label").text;
    expect(Tok::lbrace, "'{'");
    bool have_start = false;
    SourcePos first_start;
    std::size_t node_count = 0;
    while (peek().kind != Tok::rbrace) {
      if (is_keyword("start")) {
        const Token kw = take();
        expect(Tok::colon, "':'");
        const Token id = expect(Tok::ident, "start node id");
        if (have_start) {
          deferred_.push_back(error_at(
              DiagnosticCode::duplicate_start, kw.pos,
              "duplicate start declaration at line " + std::to_string(kw.pos.line) +
                  " (first declared at line " + std::to_string(first_start.line) + ")"));
        } else {
          have_start = true;
          first_start = kw.pos;
          g.start = id.text;
          g.start_pos = kw.pos;
        }
      } else if (is_keyword("node")) {
        DecisionNode n = node();
        ++node_count;
        auto it = g.nodes.find(n.id);
        if (it != g.nodes.end()) {
          deferred_.push_back(error_at(
              DiagnosticCode::duplicate_node, n.pos,
              "duplicate node '" + n.id + "' at line " + std::to_string(n.pos.line) +
                  " (first defined at line " + std::to_string(it->second.pos.line) + ")"));
        } else {
          g.nodes.emplace(n.id, std::move(n));
        }
      } else {
        syntax_error("expected 'start', 'node' or '}'");
      }
    }
    const Token close = take();
    expect(Tok::end, "end of input after procedure body");
    if (!have_start) {
      deferred_.push_back(
          error_at(DiagnosticCode::missing_start, close.pos, "procedure has no start declaration"));
    }
    if (node_count == 0) {
      deferred_.push_back(
          error_at(DiagnosticCode::syntax, close.pos, "procedure has no nodes"));
    }
    if (!deferred_.empty()) throw ProcedureParseError(std::move(deferred_));
    return g;
  }

 private:
  const Token& peek() const { return tokens_[pos_]; }
  Token take() {
    Token t = tokens_[pos_];
    if (pos_ + 1 < tokens_.size()) ++pos_;
    return t;
  }

  bool is_keyword(std::string_view word) const {
    return peek().kind == Tok::ident && peek().text == word;
  }

  [[noreturn]] void syntax_error(const std::string& expected) {
    const Token& t = peek();
    std::string found = describe(t.kind);
    if (t.kind == Tok::ident) found += " '" + t.text + "'";
    deferred_.push_back(error_at(DiagnosticCode::syntax, t.pos, expected + ", found " + found));
    throw ProcedureParseError(std::move(deferred_));
  }

  Token expect(Tok kind, const std::string& what) {
    if (peek().kind != kind) syntax_error("expected " + what);
    return take();
  }

  Token keyword(std::string_view word) {
    if (!is_keyword(word)) syntax_error("expected '" + std::string(word) + "'");
    return take();
  }

  DecisionNode node() {
    DecisionNode n;
    n.pos = take().pos;
    n.id = expect(Tok::ident, "node id").text;
    if (n.id == "confirm" || n.id == "exclude") {
      deferred_.push_back(error_at(DiagnosticCode::syntax, n.pos,
                                   "'" + n.id + "' is a terminal keyword, not a node id"));
    }
    expect(Tok::lbrace, "'{'");
    keyword("ask");
    expect(Tok::colon, "':'");
    n.ask = expect(Tok::string, "question text").text;
    keyword("when");
    expect(Tok::colon, "':'");
    n.when = expr();
    n.yes_pos = keyword("yes").pos;
    expect(Tok::arrow, "'->'");
    n.yes = target();
    n.no_pos = keyword("no").pos;
    expect(Tok::arrow, "'->'");
    n.no = target();
    expect(Tok::rbrace, "'}'");
    return n;
  }

  Target target() {
    const Token t = expect(Tok::ident, "target node id, 'confirm' or 'exclude'");
    if (t.text == "confirm") return Terminal::confirm;
    if (t.text == "exclude") return Terminal::exclude;
    return t.text;
  }

  Predicate expr() {
    std::vector<Predicate> terms;
    terms.push_back(conjunction());
    while (peek().kind == Tok::or_op) {
      take();
      terms.push_back(conjunction());
    }
    if (terms.size() == 1) return std::move(terms.front());
    return Predicate::combine(Predicate::Op::any_of, std::move(terms));
  }

  Predicate conjunction() {
    std::vector<Predicate> terms;
    terms.push_back(unary());
    while (peek().kind == Tok::and_op) {
      take();
      terms.push_back(unary());
    }
    if (terms.size() == 1) return std::move(terms.front());
    return Predicate::combine(Predicate::Op::all_of, std::move(terms));
  }

  Predicate unary() {
    if (peek().kind == Tok::bang) {
      take();
      return Predicate::negation(unary());
    }
    if (peek().kind == Tok::lparen) {
      take();
      Predicate inner = expr();
      expect(Tok::rparen, "')'");
      return inner;
    }
    return Predicate::leaf(atom());
  }

  Atom atom() {
    Atom a;
    a.pos = peek().pos;
    if (is_keyword("symptom")) {
      a.kind = Atom::Kind::symptom;
    } else if (is_keyword("finding")) {
      a.kind = Atom::Kind::finding;
    } else if (is_keyword("flag")) {
      a.kind = Atom::Kind::flag;
    } else {
      syntax_error("expected 'symptom', 'finding', 'flag', '!' or '('");
    }
    take();
    expect(Tok::lparen, "'('");
    a.name = expect(Tok::string, "quoted name").text;
    expect(Tok::rparen, "')'");
    if (a.kind == Atom::Kind::finding) {
      a.cmp = expect(Tok::cmp, "comparison operator after finding").cmp;
      a.constant = expect(Tok::number, "numeric constant").number;
    }
    if (peek().kind == Tok::question) {
      take();
      if (is_keyword("yes")) {
        a.missing_answer = true;
      } else if (!is_keyword("no")) {
        syntax_error("expected 'yes' or 'no' after '?'");
      }
      take();
    }
    return a;
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  std::vector<Diagnostic> deferred_;
};

std::string quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  out += '"';
  return out;
}

std::string target_text(const Target& t) {
  if (const auto* term = std::get_if<Terminal>(&t)) {
    return *term == Terminal::confirm ? "confirm" : "exclude";
  }
  return std::get<std::string>(t);
}

const char* cmp_text(Comparison c) {
  switch (c) {
    case Comparison::ge: return ">=";
    case Comparison::le: return "<=";
    case Comparison::gt: return ">";
    case Comparison::lt: return "<";
    case Comparison::eq: return "==";
    case Comparison::ne: return "!=";
  }
  return "==";
}

void write_atom(std::string& out, const Atom& a) {
  switch (a.kind) {
    case Atom::Kind::symptom: out += "symptom(" + quote(a.name) + ")"; break;
    case Atom::Kind::finding:
      out += "finding(" + quote(a.name) + ") " + cmp_text(a.cmp) + " " + format_double(a.constant);
      break;
    case Atom::Kind::flag: out += "flag(" + quote(a.name) + ")"; break;
  }
  if (a.missing_answer) out += "?yes";
}

void write_predicate(std::string& out, const Predicate& p);

// Parenthesise whenever the parser would otherwise rebuild a different tree.
void write_operand(std::string& out, const Predicate& parent, const Predicate& child) {
  bool parens = false;
  if (parent.op == Predicate::Op::negate) {
    parens = child.op == Predicate::Op::all_of || child.op == Predicate::Op::any_of;
  } else {
    parens = child.op == Predicate::Op::any_of ||
             (child.op == Predicate::Op::all_of && parent.op == Predicate::Op::all_of);
  }
  if (parens) out += '(';
  write_predicate(out, child);
  if (parens) out += ')';
}

void write_predicate(std::string& out, const Predicate& p) {
  switch (p.op) {
    case Predicate::Op::atom: write_atom(out, p.atom); return;
    case Predicate::Op::negate:
      out += '!';
      write_operand(out, p, p.operands.at(0));
      return;
    case Predicate::Op::all_of:
    case Predicate::Op::any_of: {
      const char* sep = p.op == Predicate::Op::all_of ? " && " : " || ";
      for (std::size_t i = 0; i < p.operands.size(); ++i) {
        if (i > 0) out += sep;
        write_operand(out, p, p.operands[i]);
      }
      return;
    }
  }
}

}  // namespace

ProcedureGraph parse_procedure(std::string_view text) {
  return Parser(Lexer(text).run()).run();
}

ProcedureGraph load_procedure(const std::filesystem::path& path) {
  return parse_procedure(read_file(path));
}

std::string serialize(const Predicate& predicate) {
  std::string out;
  write_predicate(out, predicate);
  return out;
}

std::string serialize(const ProcedureGraph& g) {
  std::string out = "procedure " + quote(g.name) + " for " + quote(g.disease) + " {\n";
  out += "  start: " + g.start + "\n";
  for (const auto& [id, n] : g.nodes) {
    out += "\n  node " + id + " {\n";
    out += "    ask: " + quote(n.ask) + "\n";
    out += "    when: " + serialize(n.when) + "\n";
    out += "    yes -> " + target_text(n.yes) + "\n";
    out += "    no -> " + target_text(n.no) + "\n";
    out += "  }\n";
  }
  out += "}\n";
  return out;
}

}  // namespace ddx
