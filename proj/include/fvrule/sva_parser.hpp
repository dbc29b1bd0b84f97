#pragma once

// Recursive-descent parser for concurrent assertions.
//
// Accepted text:  [label:] [assert|assume|cover property (] spec [)] [;] [else ...]
//           spec:  [@(posedge clk)] [disable iff (expr)] property
//
// Operator precedence, tightest first: unary ($past $rose $fell $stable !),
// comparison, ^, &&, ||, ## concatenation, implication (right associative),
// then s_eventually / s_always which extend as far right as possible.
//
// The grammar is deliberately wider than the evaluated subset: repetition,
// sequence and property connectives, multi-bit arithmetic, bit selects and
// other system functions parse into Unsupported nodes, so malformed text
// is still rejected with a SyntaxError while legal out-of-subset text is
// reported separately as UnsupportedConstruct.

#include <cctype>
#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "fvrule/errors.hpp"
#include "fvrule/sva_ast.hpp"
#include "fvrule/text.hpp"

namespace fvrule::sva {

namespace detail {

enum class TokKind { Ident, SysIdent, Number, String, Punct, End };

struct Token {
  TokKind kind = TokKind::End;
  std::string text;
  std::size_t pos = 0;
  std::size_t end = 0;
};

inline const std::vector<std::string>& punctuators() {
  // Longest first.
  static const std::vector<std::string> p = {
      "<<<", ">>>", "|->", "|=>", "!==", "===", "<->", "#-#", "#=#", "[->", "==?", "!=?",
      "##",  "&&",  "||",  "==",  "!=",  "<=",  ">=",  "<<",  ">>",  "->",  "[*",  "[=",
      "[+",  "+:",  "-:",  "~&",  "~|",  "~^",  "^~",  "(",   ")",   "[",   "]",   "{",   "}",   ":",
      ";",   ",",   "@",   "!",   "~",   "&",   "|",   "^",   "+",   "-",   "*",   "/",
      "%",   "<",   ">",   "?",   "=",   ".",   "#",   "'",   "$",
  };
  return p;
}

inline std::vector<Token> lex(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  const std::size_t n = s.size();
  while (i < n) {
    char c = s[i];
    if (text::is_space(c)) {
      ++i;
      continue;
    }
    if (c == '/' && i + 1 < n && s[i + 1] == '/') {
      while (i < n && s[i] != '\n') ++i;
      continue;
    }
    if (c == '/' && i + 1 < n && s[i + 1] == '*') {
      auto close = s.find("*/", i + 2);
      if (close == std::string_view::npos)
        throw SyntaxError(i, {"*/"}, "unterminated block comment");
      i = close + 2;
      continue;
    }
    const std::size_t start = i;
    if (c == '"') {
      ++i;
      while (i < n && s[i] != '"') i += (s[i] == '\\' && i + 1 < n) ? 2 : 1;
      if (i >= n) throw SyntaxError(start, {"\""}, "unterminated string literal");
      ++i;
      out.push_back({TokKind::String, std::string(s.substr(start, i - start)), start, i});
      continue;
    }
    if (text::is_ident_start(c) || c == '\\') {
      if (c == '\\') {
        ++i;
        while (i < n && !text::is_space(s[i])) ++i;
      } else {
        while (i < n && text::is_word_char(s[i])) ++i;
      }
      out.push_back({TokKind::Ident, std::string(s.substr(start, i - start)), start, i});
      continue;
    }
    if (c == '$' && i + 1 < n && text::is_ident_start(s[i + 1])) {
      ++i;
      while (i < n && text::is_word_char(s[i])) ++i;
      out.push_back({TokKind::SysIdent, std::string(s.substr(start, i - start)), start, i});
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '\'' && i + 1 < n &&
         std::string_view("01xXzZbBoOdDhHsS").find(s[i + 1]) != std::string_view::npos)) {
      // Decimal, sized or unbased literal: 12, 4'b10_10, 'h1F, '1.
      while (i < n && (std::isdigit(static_cast<unsigned char>(s[i])) || s[i] == '_')) ++i;
      if (i < n && s[i] == '\'') {
        ++i;
        if (i < n && (s[i] == 's' || s[i] == 'S')) ++i;
        if (i < n && std::string_view("bBoOdDhH").find(s[i]) != std::string_view::npos) ++i;
        std::size_t digits = i;
        while (i < n && (std::isxdigit(static_cast<unsigned char>(s[i])) || s[i] == '_' ||
                         std::string_view("xXzZ?").find(s[i]) != std::string_view::npos))
          ++i;
        if (i == digits) throw SyntaxError(i, {"digits"}, "malformed based literal");
      }
      out.push_back({TokKind::Number, std::string(s.substr(start, i - start)), start, i});
      continue;
    }
    bool matched = false;
    for (const auto& p : punctuators()) {
      if (s.compare(i, p.size(), p) == 0) {
        out.push_back({TokKind::Punct, p, start, start + p.size()});
        i += p.size();
        matched = true;
        break;
      }
    }
    if (!matched) throw SyntaxError(i, {}, std::string("unexpected character '") + c + "'");
  }
  out.push_back({TokKind::End, "", n, n});
  return out;
}

inline const std::unordered_set<std::string>& keywords() {
  static const std::unordered_set<std::string> k = {
      "assert",     "assume",      "cover",        "restrict",     "property",
      "endproperty", "sequence",   "endsequence",  "disable",      "iff",
      "posedge",    "negedge",     "edge",         "not",          "and",
      "or",         "intersect",   "within",       "throughout",   "until",
      "s_until",    "until_with",  "s_until_with", "implies",      "always",
      "s_always",   "eventually",  "s_eventually", "nexttime",     "s_nexttime",
      "strong",     "weak",        "if",           "else",         "case",
      "accept_on",  "reject_on",   "sync_accept_on", "sync_reject_on", "first_match",
  };
  return k;
}

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src), toks_(lex(src)) {}

  SvaAst parse_top() {
    SvaAst ast;
    // Optional `label :`.
    if (peek().kind == TokKind::Ident && !is_keyword(peek()) && peek(1).text == ":" &&
        peek(1).kind == TokKind::Punct) {
      pos_ += 2;
    }
    if (peek().kind == TokKind::Ident &&
        (peek().text == "property" || peek().text == "sequence")) {
      // Named declarations are legal but outside the subset; check balance
      // and report the whole block as unsupported.
      const auto start = peek().pos;
      const std::string closer = peek().text == "property" ? "endproperty" : "endsequence";
      while (peek().kind != TokKind::End && peek().text != closer) advance();
      expect_ident(closer);
      ast.property = make::unsupported("named " + closer.substr(3) + " declaration",
                                       std::string(src_.substr(start)), Shape::Property, {}, start);
      expect_end();
      return ast;
    }
    bool wrapped = false;
    if (peek().kind == TokKind::Ident &&
        (peek().text == "assert" || peek().text == "assume" || peek().text == "cover" ||
         peek().text == "restrict")) {
      advance();
      expect_ident("property");
      expect_punct("(");
      wrapped = true;
    }
    parse_spec(ast);
    if (wrapped) {
      expect_punct(")");
      if (peek().kind == TokKind::Ident && peek().text == "else") {
        // Action block: only balance is checked.
        advance();
        skip_balanced_to_end();
      }
    }
    accept_punct(";");
    expect_end();
    return ast;
  }

 private:
  // ---- token helpers ----

  const Token& peek(std::size_t k = 0) const {
    return toks_[std::min(pos_ + k, toks_.size() - 1)];
  }
  const Token& advance() {
    const Token& t = toks_[pos_];
    if (pos_ + 1 < toks_.size()) ++pos_;
    return t;
  }
  bool is_punct(std::string_view p, std::size_t k = 0) const {
    return peek(k).kind == TokKind::Punct && peek(k).text == p;
  }
  bool is_ident(std::string_view w, std::size_t k = 0) const {
    return peek(k).kind == TokKind::Ident && peek(k).text == w;
  }
  static bool is_keyword(const Token& t) {
    return t.kind == TokKind::Ident && keywords().count(t.text) != 0;
  }
  bool accept_punct(std::string_view p) {
    if (!is_punct(p)) return false;
    advance();
    return true;
  }
  [[noreturn]] void fail(std::vector<std::string> expected, const std::string& detail) const {
    const auto& t = peek();
    std::string msg = detail;
    if (msg.empty())
      msg = t.kind == TokKind::End ? "unexpected end of input" : "unexpected '" + t.text + "'";
    throw SyntaxError(t.pos, std::move(expected), msg);
  }
  const Token& expect_punct(std::string_view p) {
    if (!is_punct(p)) fail({std::string(p)}, "");
    return advance();
  }
  void expect_ident(std::string_view w) {
    if (!is_ident(w)) fail({std::string(w)}, "");
    advance();
  }
  void expect_end() {
    if (peek().kind != TokKind::End) fail({"end of assertion"}, "");
  }
  std::string slice(std::size_t from) const {
    std::size_t to = pos_ == 0 ? 0 : toks_[pos_ - 1].end;
    return std::string(text::trim(src_.substr(from, to > from ? to - from : 0)));
  }
  void skip_balanced_to_end() {
    int depth = 0;
    while (peek().kind != TokKind::End) {
      if (is_punct("(") || is_punct("[") || is_punct("{")) ++depth;
      if (is_punct(")") || is_punct("]") || is_punct("}")) {
        if (--depth < 0) fail({}, "unbalanced '" + peek().text + "'");
      }
      advance();
    }
    if (depth != 0) fail({")"}, "unbalanced parentheses in action block");
  }

  static const std::vector<std::string>& expr_start() {
    static const std::vector<std::string> e = {"identifier", "number", "(", "!", "##",
                                               "$past",      "$rose",  "$fell", "$stable"};
    return e;
  }

  void require_boolean(const NodePtr& n, std::string_view op) const {
    if (n->shape != Shape::Boolean)
      throw SyntaxError(n->position, {},
                        "operator '" + std::string(op) + "' needs boolean operands");
  }
  void require_sequence(const NodePtr& n, std::string_view what) const {
    if (n->shape == Shape::Property)
      throw SyntaxError(n->position, {}, std::string(what) + " must be a sequence");
  }

  // ---- spec / property levels ----

  void parse_spec(SvaAst& ast) {
    if (is_punct("@")) {
      advance();
      expect_punct("(");
      Clocking clk;
      if (is_ident("posedge") || is_ident("negedge") || is_ident("edge")) clk.edge = advance().text;
      if (peek().kind != TokKind::Ident || is_keyword(peek())) fail({"clock name"}, "");
      clk.clock = advance().text;
      expect_punct(")");
      ast.clocking = clk;
    }
    if (is_ident("disable")) {
      advance();
      expect_ident("iff");
      expect_punct("(");
      auto guard = parse_expr();
      require_boolean(guard, "disable iff");
      expect_punct(")");
      ast.disable_guard = guard;
    }
    if (peek().kind == TokKind::End || is_punct(")") || is_punct(";"))
      fail(expr_start(), "missing property expression");
    ast.property = parse_property();
  }

  NodePtr parse_property() {
    const auto start = peek().pos;
    if (is_ident("s_eventually") || is_ident("s_always")) {
      const bool eventually = advance().text == "s_eventually";
      if (is_punct("[")) {
        skip_bracket();
        auto body = parse_property();
        return make::unsupported(eventually ? "s_eventually [m:n]" : "s_always [m:n]",
                                 slice(start), Shape::Property, {body}, start);
      }
      auto body = parse_property();
      return make::node(eventually ? NodeKind::SEventually : NodeKind::SAlways, Shape::Property,
                        {body}, start);
    }
    if (is_ident("always") || is_ident("eventually")) {
      auto word = advance().text;
      if (is_punct("[")) skip_bracket();
      auto body = parse_property();
      return make::unsupported(word, slice(start), Shape::Property, {body}, start);
    }
    if (is_ident("accept_on") || is_ident("reject_on") || is_ident("sync_accept_on") ||
        is_ident("sync_reject_on")) {
      auto word = advance().text;
      expect_punct("(");
      auto cond = parse_expr();
      expect_punct(")");
      auto body = parse_property();
      return make::unsupported(word, slice(start), Shape::Property, {cond, body}, start);
    }
    if (is_ident("if")) {
      advance();
      expect_punct("(");
      auto cond = parse_expr();
      require_boolean(cond, "if");
      expect_punct(")");
      std::vector<NodePtr> kids = {cond, parse_property()};
      if (is_ident("else")) {
        advance();
        kids.push_back(parse_property());
      }
      return make::unsupported("if/else property", slice(start), Shape::Property, kids, start);
    }
    return parse_implication();
  }

  NodePtr parse_implication() {
    const auto start = peek().pos;
    auto lhs = parse_until();
    if (is_punct("|->") || is_punct("|=>")) {
      const bool overlapping = advance().text == "|->";
      require_sequence(lhs, "implication antecedent");
      if (peek().kind == TokKind::End || is_punct(")") || is_punct(";"))
        fail(expr_start(), "missing consequent");
      auto rhs = parse_property();
      return make::implication(overlapping, lhs, rhs, start);
    }
    if (is_punct("#-#") || is_punct("#=#")) {
      auto op = advance().text;
      require_sequence(lhs, "followed-by antecedent");
      auto rhs = parse_property();
      return make::unsupported(op, slice(start), Shape::Property, {lhs, rhs}, start);
    }
    return lhs;
  }

  NodePtr parse_until() {
    const auto start = peek().pos;
    auto lhs = parse_iff();
    if (is_ident("until") || is_ident("s_until") || is_ident("until_with") ||
        is_ident("s_until_with") || is_ident("implies")) {
      auto op = advance().text;
      auto rhs = parse_until();
      return make::unsupported(op, slice(start), Shape::Property, {lhs, rhs}, start);
    }
    return lhs;
  }

  NodePtr parse_iff() {
    const auto start = peek().pos;
    auto lhs = parse_or_seq();
    if (is_ident("iff")) {
      advance();
      auto rhs = parse_or_seq();
      return make::unsupported("iff", slice(start), Shape::Property, {lhs, rhs}, start);
    }
    return lhs;
  }

  // Sequence/property `or`, `and`, `intersect`, `within`, `throughout`.
  NodePtr parse_or_seq() { return parse_seq_binary(0); }

  NodePtr parse_seq_binary(int level) {
    static const std::vector<std::vector<std::string>> levels = {
        {"or"}, {"and"}, {"intersect"}, {"within"}, {"throughout"}};
    if (level == static_cast<int>(levels.size())) return parse_prop_unary();
    const auto start = peek().pos;
    auto lhs = parse_seq_binary(level + 1);
    while (true) {
      bool hit = false;
      for (const auto& w : levels[level]) hit = hit || is_ident(w);
      if (!hit) break;
      auto op = advance().text;
      auto rhs = parse_seq_binary(level + 1);
      Shape shape = (lhs->shape == Shape::Property || rhs->shape == Shape::Property)
                        ? Shape::Property
                        : Shape::Sequence;
      lhs = make::unsupported(op, slice(start), shape, {lhs, rhs}, start);
    }
    return lhs;
  }

  NodePtr parse_prop_unary() {
    const auto start = peek().pos;
    if (is_ident("not") || is_ident("nexttime") || is_ident("s_nexttime")) {
      auto op = advance().text;
      if (op != "not" && is_punct("[")) skip_bracket();
      auto body = parse_prop_unary();
      return make::unsupported(op, slice(start), Shape::Property, {body}, start);
    }
    return parse_delay_sequence();
  }

  // [##delay] item { ##delay item }
  NodePtr parse_delay_sequence() {
    const auto start = peek().pos;
    NodePtr seq;
    if (is_punct("##")) {
      auto d = parse_delay();
      auto item = parse_repetition();
      require_sequence(item, "delayed operand");
      seq = wrap_delay(d, item, start);
    } else {
      seq = parse_repetition();
    }
    while (is_punct("##")) {
      require_sequence(seq, "sequence operand");
      const auto dpos = peek().pos;
      auto d = parse_delay();
      auto item = parse_repetition();
      require_sequence(item, "delayed operand");
      seq = make::concat(seq, wrap_delay(d, item, dpos), start);
    }
    return seq;
  }

  struct DelaySpec {
    int lo = 0;
    int hi = 0;
    bool supported = true;
    std::string raw;
  };

  NodePtr wrap_delay(const DelaySpec& d, NodePtr item, std::size_t pos) {
    if (!d.supported) {
      return make::unsupported(d.raw, d.raw + " " + to_string(item), Shape::Sequence, {item},
                               pos);
    }
    return make::delay(d.lo, d.hi, item, pos);
  }

  static constexpr int kMaxDelay = 1'000'000;

  int parse_delay_number() {
    const auto& t = peek();
    if (t.kind != TokKind::Number) fail({"number"}, "");
    for (char c : t.text)
      if (!std::isdigit(static_cast<unsigned char>(c)) && c != '_')
        fail({"unsized decimal number"}, "delay must be a decimal literal");
    long long v = 0;
    for (char c : t.text) {
      if (c == '_') continue;
      v = v * 10 + (c - '0');
      if (v > kMaxDelay) throw SyntaxError(t.pos, {}, "delay value too large");
    }
    advance();
    return static_cast<int>(v);
  }

  DelaySpec parse_delay() {
    const auto start = advance().pos;  // '##'
    DelaySpec d;
    if (peek().kind == TokKind::Number) {
      d.lo = d.hi = parse_delay_number();
      return d;
    }
    if (peek().kind == TokKind::Ident && !is_keyword(peek())) {
      // Parameterised delay.
      advance();
      d.supported = false;
      d.raw = slice(start);
      return d;
    }
    if (is_punct("(")) {
      advance();
      parse_expr();
      expect_punct(")");
      d.supported = false;
      d.raw = slice(start);
      return d;
    }
    if (is_punct("[*") || is_punct("[+")) {
      advance();
      expect_punct("]");
      d.supported = false;
      d.raw = slice(start);
      return d;
    }
    if (!is_punct("[")) fail({"number", "["}, "malformed delay");
    advance();
    const auto lo_pos = peek().pos;
    if (peek().kind == TokKind::Ident) {
      advance();
      d.supported = false;
    } else {
      d.lo = parse_delay_number();
    }
    expect_punct(":");
    if (is_punct("$")) {
      advance();
      d.supported = false;
    } else if (peek().kind == TokKind::SysIdent || is_ident("$")) {
      advance();
      d.supported = false;
    } else if (peek().kind == TokKind::Ident) {
      advance();
      d.supported = false;
    } else {
      d.hi = parse_delay_number();
      if (d.supported && d.hi < d.lo)
        throw SyntaxError(lo_pos, {}, "delay range lower bound exceeds upper bound");
    }
    expect_punct("]");
    if (!d.supported) d.raw = slice(start);
    return d;
  }

  void skip_bracket() {
    expect_punct("[");
    int depth = 1;
    while (depth > 0) {
      if (peek().kind == TokKind::End) fail({"]"}, "");
      if (is_punct("[")) ++depth;
      if (is_punct("]")) --depth;
      advance();
    }
  }

  NodePtr parse_repetition() {
    const auto start = peek().pos;
    auto item = parse_expr();
    while (is_punct("[*") || is_punct("[=") || is_punct("[->") || is_punct("[+")) {
      require_sequence(item, "repetition operand");
      advance();
      int depth = 1;
      while (depth > 0) {
        if (peek().kind == TokKind::End) fail({"]"}, "");
        if (is_punct("[")) ++depth;
        if (is_punct("]")) --depth;
        advance();
      }
      item = make::unsupported("repetition", slice(start), Shape::Sequence, {item}, start);
    }
    return item;
  }

  // ---- boolean expressions ----

  NodePtr parse_expr() {
    const auto start = peek().pos;
    auto cond = parse_logical_implication();
    if (is_punct("?")) {
      advance();
      auto a = parse_expr();
      expect_punct(":");
      auto b = parse_expr();
      return make::unsupported("?:", slice(start), Shape::Boolean, {cond, a, b}, start);
    }
    return cond;
  }

  NodePtr parse_logical_implication() {
    const auto start = peek().pos;
    auto lhs = parse_lor();
    if (is_punct("->") || is_punct("<->")) {
      auto op = advance().text;
      auto rhs = parse_logical_implication();
      return make::unsupported(op, slice(start), Shape::Boolean, {lhs, rhs}, start);
    }
    return lhs;
  }

  NodePtr parse_lor() {
    const auto start = peek().pos;
    auto lhs = parse_land();
    while (is_punct("||")) {
      advance();
      auto rhs = parse_land();
      require_boolean(lhs, "||");
      require_boolean(rhs, "||");
      lhs = make::binary(NodeKind::Or, lhs, rhs, start);
    }
    return lhs;
  }

  NodePtr parse_land() {
    const auto start = peek().pos;
    auto lhs = parse_bitor();
    while (is_punct("&&")) {
      advance();
      auto rhs = parse_bitor();
      require_boolean(lhs, "&&");
      require_boolean(rhs, "&&");
      lhs = make::binary(NodeKind::And, lhs, rhs, start);
    }
    return lhs;
  }

  NodePtr parse_bitor() {
    const auto start = peek().pos;
    auto lhs = parse_xor();
    while (is_punct("|")) {
      advance();
      auto rhs = parse_xor();
      require_boolean(lhs, "|");
      require_boolean(rhs, "|");
      lhs = make::unsupported("bitwise |", slice(start), Shape::Boolean, {lhs, rhs}, start);
    }
    return lhs;
  }

  NodePtr parse_xor() {
    const auto start = peek().pos;
    auto lhs = parse_bitand();
    while (is_punct("^") || is_punct("^~") || is_punct("~^")) {
      auto op = advance().text;
      auto rhs = parse_bitand();
      require_boolean(lhs, op);
      require_boolean(rhs, op);
      lhs = op == "^" ? make::binary(NodeKind::Xor, lhs, rhs, start)
                      : make::unsupported(op, slice(start), Shape::Boolean, {lhs, rhs}, start);
    }
    return lhs;
  }

  NodePtr parse_bitand() {
    const auto start = peek().pos;
    auto lhs = parse_equality();
    while (is_punct("&")) {
      advance();
      auto rhs = parse_equality();
      require_boolean(lhs, "&");
      require_boolean(rhs, "&");
      lhs = make::unsupported("bitwise &", slice(start), Shape::Boolean, {lhs, rhs}, start);
    }
    return lhs;
  }

  NodePtr parse_equality() {
    const auto start = peek().pos;
    auto lhs = parse_relational();
    while (is_punct("==") || is_punct("!=") || is_punct("===") || is_punct("!==") ||
           is_punct("==?") || is_punct("!=?")) {
      auto op = advance().text;
      auto rhs = parse_relational();
      require_boolean(lhs, op);
      require_boolean(rhs, op);
      if (op == "==" || op == "===") {
        lhs = make::binary(NodeKind::Eq, lhs, rhs, start);
      } else if (op == "!=" || op == "!==") {
        lhs = make::binary(NodeKind::Neq, lhs, rhs, start);
      } else {
        lhs = make::unsupported(op, slice(start), Shape::Boolean, {lhs, rhs}, start);
      }
    }
    return lhs;
  }

  NodePtr parse_generic_binary(NodePtr (Parser::*next)(),
                               std::initializer_list<std::string_view> ops) {
    const auto start = peek().pos;
    auto lhs = (this->*next)();
    while (true) {
      bool hit = false;
      for (auto op : ops) hit = hit || is_punct(op);
      if (!hit) break;
      auto op = advance().text;
      auto rhs = (this->*next)();
      require_boolean(lhs, op);
      require_boolean(rhs, op);
      lhs = make::unsupported(op, slice(start), Shape::Boolean, {lhs, rhs}, start);
    }
    return lhs;
  }

  NodePtr parse_relational() {
    return parse_generic_binary(&Parser::parse_shift, {"<", "<=", ">", ">="});
  }
  NodePtr parse_shift() {
    return parse_generic_binary(&Parser::parse_additive, {"<<", ">>", "<<<", ">>>"});
  }
  NodePtr parse_additive() { return parse_generic_binary(&Parser::parse_multiplicative, {"+", "-"}); }
  NodePtr parse_multiplicative() {
    return parse_generic_binary(&Parser::parse_unary, {"*", "/", "%"});
  }

  NodePtr parse_unary() {
    const auto start = peek().pos;
    if (is_punct("!")) {
      advance();
      auto operand = parse_unary();
      require_boolean(operand, "!");
      return make::unary(NodeKind::Not, operand, start);
    }
    if (is_punct("~") || is_punct("-") || is_punct("+") || is_punct("&") || is_punct("|") ||
        is_punct("^") || is_punct("~&") || is_punct("~|")) {
      auto op = advance().text;
      auto operand = parse_unary();
      require_boolean(operand, op);
      return make::unsupported("unary " + op, slice(start), Shape::Boolean, {operand}, start);
    }
    return parse_postfix();
  }

  NodePtr parse_postfix() {
    const auto start = peek().pos;
    auto base = parse_primary();
    while (true) {
      if (is_punct("[")) {
        if (base->shape != Shape::Boolean) break;
        advance();
        auto idx = parse_expr();
        std::vector<NodePtr> kids = {base, idx};
        if (is_punct(":") || is_punct("+:") || is_punct("-:")) {
          advance();
          kids.push_back(parse_expr());
        }
        expect_punct("]");
        base = make::unsupported("bit select", slice(start), Shape::Boolean, kids, start);
        continue;
      }
      if (is_punct(".") && base->kind == NodeKind::Signal) {
        advance();
        if (peek().kind != TokKind::Ident) fail({"identifier"}, "");
        advance();
        base = make::unsupported("hierarchical reference", slice(start), Shape::Boolean, {}, start);
        continue;
      }
      break;
    }
    return base;
  }

  NodePtr parse_literal() {
    const auto& t = advance();
    std::string digits;
    for (char c : t.text)
      if (c != '_') digits.push_back(c);
    if (digits == "0" || digits == "1'b0" || digits == "'0" || digits == "1'h0" ||
        digits == "1'd0")
      return make::constant(false, t.pos);
    if (digits == "1" || digits == "1'b1" || digits == "'1" || digits == "1'h1" ||
        digits == "1'd1")
      return make::constant(true, t.pos);
    return make::unsupported("multi-bit literal", t.text, Shape::Boolean, {}, t.pos);
  }

  std::vector<NodePtr> parse_call_args() {
    expect_punct("(");
    std::vector<NodePtr> args;
    if (is_punct(")")) {
      advance();
      return args;
    }
    while (true) {
      if (is_punct(",")) {
        args.push_back(nullptr);  // omitted argument
      } else {
        args.push_back(parse_property());
      }
      if (is_punct(",")) {
        advance();
        continue;
      }
      expect_punct(")");
      return args;
    }
  }

  NodePtr parse_system_call() {
    const auto& t = advance();
    const std::string fn = t.text;
    const auto start = t.pos;
    if (!is_punct("(")) {
      return make::unsupported(fn, fn, Shape::Boolean, {}, start);
    }
    const std::size_t args_pos = peek().pos;
    auto args = parse_call_args();
    std::vector<NodePtr> present;
    for (const auto& a : args)
      if (a) present.push_back(a);

    if (fn == "$past") {
      if (args.empty() || !args[0]) throw SyntaxError(args_pos, {"expression"}, "$past needs an argument");
      require_boolean(args[0], "$past");
      int depth = 1;
      if (args.size() >= 2 && args[1]) {
        const auto& d = args[1];
        if (d->kind == NodeKind::Const) {
          depth = d->value ? 1 : 0;
        } else if (d->kind == NodeKind::Unsupported && d->name == "multi-bit literal" &&
                   std::all_of(d->raw.begin(), d->raw.end(),
                               [](char c) { return std::isdigit(static_cast<unsigned char>(c)) || c == '_'; })) {
          long long v = 0;
          for (char c : d->raw) {
            if (c == '_') continue;
            v = v * 10 + (c - '0');
            if (v > kMaxDelay) throw SyntaxError(d->position, {}, "$past depth too large");
          }
          depth = static_cast<int>(v);
        } else {
          return make::unsupported("$past with non-literal depth", slice(start), Shape::Boolean,
                                   present, start);
        }
        if (depth < 1) throw SyntaxError(d->position, {}, "$past depth must be at least 1");
      }
      if (args.size() > 2)
        return make::unsupported("$past gating/clocking arguments", slice(start), Shape::Boolean,
                                 present, start);
      return make::past(args[0], depth, start);
    }
    if (fn == "$rose" || fn == "$fell" || fn == "$stable") {
      if (args.empty() || !args[0])
        throw SyntaxError(args_pos, {"expression"}, fn + " needs an argument");
      require_boolean(args[0], fn);
      if (args.size() > 1)
        return make::unsupported(fn + " with clocking argument", slice(start), Shape::Boolean,
                                 present, start);
      NodeKind k = fn == "$rose" ? NodeKind::Rose : fn == "$fell" ? NodeKind::Fell : NodeKind::Stable;
      return make::unary(k, args[0], start);
    }
    return make::unsupported(fn, slice(start), Shape::Boolean, present, start);
  }

  NodePtr parse_primary() {
    const auto& t = peek();
    const auto start = t.pos;
    switch (t.kind) {
      case TokKind::Number:
        return parse_literal();
      case TokKind::SysIdent:
        return parse_system_call();
      case TokKind::Ident: {
        if (t.text == "strong" || t.text == "weak") {
          const bool strong = advance().text == "strong";
          expect_punct("(");
          auto body = parse_property();
          require_sequence(body, strong ? "strong operand" : "weak operand");
          expect_punct(")");
          if (strong) return make::node(NodeKind::Strong, Shape::Sequence, {body}, start);
          return make::unsupported("weak", slice(start), Shape::Sequence, {body}, start);
        }
        if (t.text == "first_match") {
          advance();
          expect_punct("(");
          auto body = parse_property();
          expect_punct(")");
          return make::unsupported("first_match", slice(start), Shape::Sequence, {body}, start);
        }
        if (is_keyword(t)) fail(expr_start(), "unexpected keyword '" + t.text + "'");
        advance();
        if (is_punct("(")) {
          // Sequence/property instance or function call.
          auto args = parse_call_args();
          std::vector<NodePtr> present;
          for (const auto& a : args)
            if (a) present.push_back(a);
          return make::unsupported("instance " + t.text, slice(start), Shape::Property, present,
                                   start);
        }
        return make::signal(t.text, start);
      }
      case TokKind::Punct:
        if (t.text == "(") {
          advance();
          auto inner = parse_property();
          expect_punct(")");
          return inner;
        }
        if (t.text == "{") {
          advance();
          int depth = 1;
          while (depth > 0) {
            if (peek().kind == TokKind::End) fail({"}"}, "");
            if (is_punct("{")) ++depth;
            if (is_punct("}")) --depth;
            advance();
          }
          return make::unsupported("concatenation", slice(start), Shape::Boolean, {}, start);
        }
        break;
      default:
        break;
    }
    fail(expr_start(), "");
  }

  std::string_view src_;
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

}  // namespace detail

// Identifiers an assertion mentions, keywords excluded, in first-occurrence
// order. Never throws: text that does not lex is split into words instead.
inline std::vector<std::string> assertion_identifiers(std::string_view source) {
  std::vector<std::string> out;
  auto push = [&](const std::string& w) {
    if (detail::keywords().count(w)) return;
    for (const auto& o : out)
      if (o == w) return;
    out.push_back(w);
  };
  try {
    for (const auto& t : detail::lex(source))
      if (t.kind == detail::TokKind::Ident && t.text.front() != '\\') push(t.text);
  } catch (const SyntaxError&) {
    out.clear();
    std::string cur;
    for (char c : source) {
      if (text::is_word_char(c)) {
        cur.push_back(c);
        continue;
      }
      if (!cur.empty() && text::is_ident_start(cur.front())) push(cur);
      cur.clear();
    }
    if (!cur.empty() && text::is_ident_start(cur.front())) push(cur);
  }
  return out;
}

// Full syntax tree, possibly containing Unsupported nodes.
// Throws SyntaxError on malformed input.
inline SvaAst parse_sva_lenient(std::string_view source) {
  detail::Parser p(source);
  return p.parse_top();
}

// Parses into the evaluated subset. Throws SyntaxError on malformed input
// and UnsupportedConstruct for legal text outside the subset.
inline SvaAst parse_sva(std::string_view source) {
  auto ast = parse_sva_lenient(source);
  if (const auto* u = find_unsupported(ast)) throw UnsupportedConstruct(u->name, u->position);
  return ast;
}

}  // namespace fvrule::sva
