#pragma once

// Recursive-descent parser for CQL-VA statements.
//
//   stmt      := SELECT items FROM from [WHERE expr] [WINDOW '(' kind ',' num [',' num] ')'] [';']
//   items     := item (',' item)*
//   item      := '*' | COUNT '(' ('*' | col) ')' | (SUM|AVG|MIN|MAX) '(' col ')'
//              | DIRECTION '(' col [',' num] ')' | col          each optionally [AS] alias
//   from      := term ((JOIN | CJOIN | CCTJOIN ['(' option ')']) term ON expr)*
//   term      := primary [[AS] alias]
//   primary   := ident | R2A '(' primary ',' [GBA '='] col ',' [AOA '='] col ')'
//              | CCT '(' primary ',' option [',' int] ')' | '(' stmt ')' | '(' from ')'
//   expr      := and (OR and)* ;  and := not (AND not)* ;  not := NOT not | atom
//   atom      := '(' expr ')' | operand cmp operand
//              | operand SMATCH '(' num [',' metric [',' polarity]] ')' operand
//              | col MATCHES BBOX '(' part ',' part ',' part ',' part ')'
//   operand   := col [('+'|'-') num] | num | string | '[' num (',' num)* ']'
//   col       := [ident '.'] (ident | '[' ident ']')  |  '[' ident ']'
//
// Keywords are case-insensitive.

#include <charconv>
#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "cqlva/error.hpp"
#include "cqlva/query/ast.hpp"
#include "cqlva/query/lexer.hpp"

namespace cqlva::query {

class Parser {
 public:
  explicit Parser(std::string_view text) : toks_(tokenize(text)) {}

  ast::SelectStmt parse_statement() {
    ast::SelectStmt stmt = select_stmt();
    if (at(Tok::Semicolon)) next();
    if (!at(Tok::End)) fail("unexpected '" + cur().text + "' after end of statement");
    return stmt;
  }

 private:
  std::vector<Token> toks_;
  std::size_t p_ = 0;

  // -- token helpers --
  const Token& cur() const { return toks_[p_]; }
  const Token& ahead(std::size_t k) const { return toks_[std::min(p_ + k, toks_.size() - 1)]; }
  bool at(Tok t) const { return cur().kind == t; }
  Token next() { return toks_[p_ < toks_.size() - 1 ? p_++ : p_]; }

  static bool keyword_eq(const Token& t, std::string_view kw) {
    return t.kind == Tok::Ident && lowercase(t.text) == lowercase(kw);
  }
  bool at_kw(std::string_view kw) const { return keyword_eq(cur(), kw); }

  static bool reserved(const Token& t) {
    static const std::set<std::string> words = {"select", "from",  "where", "window", "and",
                                                "or",     "not",   "as",    "on",     "join",
                                                "cjoin",  "cctjoin"};
    return t.kind == Tok::Ident && words.count(lowercase(t.text)) > 0;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw Error(ErrorCode::SyntaxError, msg, cur().pos);
  }

  void expect(Tok t, std::string_view what) {
    if (!at(t)) fail("expected " + std::string(what) + (at(Tok::End) ? " but reached end of input" : ", found '" + cur().text + "'"));
    next();
  }

  void expect_kw(std::string_view kw) {
    if (!at_kw(kw)) fail("expected " + std::string(kw));
    next();
  }

  std::string ident(std::string_view what) {
    if (!at(Tok::Ident) || reserved(cur())) fail("expected " + std::string(what));
    return next().text;
  }

  // -- numbers --
  static bool integral_spelling(const std::string& s) {
    return s.find_first_of(".eE") == std::string::npos;
  }

  double number_value() {
    bool neg = false;
    if (at(Tok::Minus)) {
      next();
      neg = true;
    }
    if (!at(Tok::Number)) fail("expected a number");
    std::string s = next().text;
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) fail("malformed number '" + s + "'");
    return neg ? -v : v;
  }

  ast::Literal number_literal() {
    bool neg = false;
    if (at(Tok::Minus)) {
      next();
      neg = true;
    }
    if (!at(Tok::Number)) fail("expected a number");
    Token t = next();
    if (integral_spelling(t.text)) {
      std::int64_t v = 0;
      auto [ptr, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
      if (ec != std::errc()) throw Error(ErrorCode::SyntaxError, "integer out of range", t.pos);
      return neg ? -v : v;
    }
    double v = 0;
    std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
    return neg ? -v : v;
  }

  // -- statement --
  ast::SelectStmt select_stmt() {
    expect_kw("select");
    ast::SelectStmt stmt;
    stmt.items.push_back(select_item());
    while (at(Tok::Comma)) {
      next();
      stmt.items.push_back(select_item());
    }
    expect_kw("from");
    stmt.from = from_expr();
    if (at_kw("where")) {
      next();
      stmt.where = bool_expr();
    }
    if (at_kw("window")) {
      next();
      expect(Tok::LParen, "'('");
      ast::WindowClause w;
      if (at_kw("time")) w.kind = WindowKind::Time;
      else if (at_kw("tuple")) w.kind = WindowKind::Tuple;
      else fail("expected TIME or TUPLE");
      next();
      expect(Tok::Comma, "','");
      w.size = number_value();
      if (at(Tok::Comma)) {
        next();
        w.hop = number_value();
      }
      expect(Tok::RParen, "')'");
      stmt.window = w;
    }
    return stmt;
  }

  void maybe_alias(std::string& alias) {
    if (at_kw("as")) {
      next();
      alias = ident("alias");
      return;
    }
    if (at(Tok::Ident) && !reserved(cur())) alias = next().text;
  }

  ast::SelectItem select_item() {
    ast::SelectItem item;
    item.pos = cur().pos;
    if (at(Tok::Star)) {
      next();
      item.kind = ast::SelectItem::Kind::Star;
      return item;
    }
    if (at(Tok::Ident) && ahead(1).kind == Tok::LParen) {
      std::string fn = lowercase(cur().text);
      if (fn == "count" || fn == "sum" || fn == "avg" || fn == "min" || fn == "max") {
        next();
        next();
        item.kind = ast::SelectItem::Kind::Aggregate;
        if (fn == "count" && at(Tok::Star)) {
          next();
          item.fn = AggFn::CountStar;
        } else {
          item.column = column_ref();
          item.fn = fn == "count" ? AggFn::Count
                    : fn == "sum" ? AggFn::Sum
                    : fn == "avg" ? AggFn::Avg
                    : fn == "min" ? AggFn::Min
                                  : AggFn::Max;
        }
        expect(Tok::RParen, "')'");
        maybe_alias(item.alias);
        return item;
      }
      if (fn == "direction") {
        next();
        next();
        item.kind = ast::SelectItem::Kind::Direction;
        item.column = column_ref();
        if (at(Tok::Comma)) {
          next();
          item.epsilon = number_value();
        }
        expect(Tok::RParen, "')'");
        maybe_alias(item.alias);
        return item;
      }
    }
    item.kind = ast::SelectItem::Kind::Column;
    item.column = column_ref();
    maybe_alias(item.alias);
    return item;
  }

  ast::ColumnRef column_ref() {
    ast::ColumnRef ref;
    ref.pos = cur().pos;
    auto bracket_name = [&]() {
      expect(Tok::LBracket, "'['");
      std::string n = "[" + ident("column name") + "]";
      expect(Tok::RBracket, "']'");
      return n;
    };
    if (at(Tok::LBracket)) {
      ref.name = bracket_name();
      return ref;
    }
    std::string first = ident("column");
    if (at(Tok::Dot)) {
      next();
      ref.qualifier = first;
      ref.name = at(Tok::LBracket) ? bracket_name() : ident("column name");
    } else {
      ref.name = first;
    }
    return ref;
  }

  // -- FROM --
  ast::Source from_expr() {
    ast::Source left = source_term();
    for (;;) {
      ast::JoinKind kind;
      if (at_kw("join")) kind = ast::JoinKind::Nested;
      else if (at_kw("cjoin")) kind = ast::JoinKind::Consecutive;
      else if (at_kw("cctjoin")) kind = ast::JoinKind::Cct;
      else break;
      Position pos = cur().pos;
      next();
      ast::JoinSource j;
      j.kind = kind;
      if (kind == ast::JoinKind::Cct && at(Tok::LParen) && ahead(1).kind == Tok::Ident &&
          parse_cct_option(ahead(1).text) && ahead(2).kind == Tok::RParen) {
        next();
        j.option = parse_cct_option(next().text);
        next();
      }
      j.left = std::move(left);
      j.right = source_term();
      expect_kw("on");
      j.on = bool_expr();
      left = ast::Source{std::move(j), "", pos};
    }
    return left;
  }

  ast::Source source_term() {
    ast::Source s = primary_source();
    std::string alias;
    maybe_alias(alias);
    if (!alias.empty()) s.alias = alias;
    return s;
  }

  ast::Source primary_source() {
    Position pos = cur().pos;
    if (at(Tok::LParen)) {
      next();
      ast::Source inner;
      if (at_kw("select")) {
        inner = ast::Source{ast::SubQuery{select_stmt()}, "", pos};
      } else {
        inner = from_expr();
      }
      expect(Tok::RParen, "')'");
      return inner;
    }
    if (at(Tok::Ident) && ahead(1).kind == Tok::LParen) {
      std::string fn = lowercase(cur().text);
      if (fn == "r2a") {
        next();
        next();
        ast::R2ACall call;
        call.input = source_term();
        expect(Tok::Comma, "','");
        call.gba = named_arg("gba");
        expect(Tok::Comma, "','");
        call.aoa = named_arg("aoa");
        expect(Tok::RParen, "')'");
        return {std::move(call), "", pos};
      }
      if (fn == "cct") {
        next();
        next();
        ast::CctCall call;
        call.input = source_term();
        if (at(Tok::Comma)) {
          next();
          if (at_kw("option") && ahead(1).kind == Tok::Eq) {
            next();
            next();
          }
          if (!at(Tok::Ident) || !parse_cct_option(cur().text)) fail("expected first, last or both");
          call.option = *parse_cct_option(next().text);
          if (at(Tok::Comma)) {
            next();
            auto lit = number_literal();
            if (!std::holds_alternative<std::int64_t>(lit)) fail("CCT gap must be an integer");
            call.gap = std::get<std::int64_t>(lit);
          }
        }
        expect(Tok::RParen, "')'");
        return {std::move(call), "", pos};
      }
    }
    std::string name = ident("source name");
    return {ast::NamedSource{name}, "", pos};
  }

  ast::ColumnRef named_arg(std::string_view key) {
    if (at_kw(key) && ahead(1).kind == Tok::Eq) {
      next();
      next();
    }
    return column_ref();
  }

  // -- boolean expressions --
  ast::BoolExpr bool_expr() {
    std::vector<ast::BoolExpr> terms;
    terms.push_back(and_expr());
    while (at_kw("or")) {
      next();
      terms.push_back(and_expr());
    }
    if (terms.size() == 1) return std::move(terms.front());
    return {ast::OrExpr{std::move(terms)}};
  }

  ast::BoolExpr and_expr() {
    std::vector<ast::BoolExpr> terms;
    terms.push_back(not_expr());
    while (at_kw("and")) {
      next();
      terms.push_back(not_expr());
    }
    if (terms.size() == 1) return std::move(terms.front());
    return {ast::AndExpr{std::move(terms)}};
  }

  ast::BoolExpr not_expr() {
    if (at_kw("not")) {
      next();
      return {ast::NotExpr{not_expr()}};
    }
    return atom();
  }

  ast::BoolExpr atom() {
    if (at(Tok::LParen)) {
      next();
      ast::BoolExpr e = bool_expr();
      expect(Tok::RParen, "')'");
      return e;
    }
    ast::Operand lhs = operand();
    if (at_kw("smatch")) {
      next();
      ast::SMatchTest t;
      t.lhs = std::move(lhs);
      expect(Tok::LParen, "'('");
      t.th = number_value();
      if (at(Tok::Comma)) {
        next();
        if (!at(Tok::Ident) || !parse_metric(cur().text)) fail("expected COSINE or EUCLIDEAN");
        t.metric = parse_metric(next().text);
        if (at(Tok::Comma)) {
          next();
          if (!at(Tok::Ident) || !parse_polarity(cur().text))
            fail("expected SIMILARITY_AT_LEAST or DISTANCE_AT_MOST");
          t.polarity = parse_polarity(next().text);
        }
      }
      expect(Tok::RParen, "')'");
      t.rhs = operand();
      return {std::move(t)};
    }
    if (at_kw("matches")) {
      next();
      auto* col = std::get_if<ast::ColumnRef>(&lhs.value);
      if (!col || lhs.offset != 0) fail("MATCHES needs a bounding-box column on its left");
      ast::BBMatchTest t;
      t.column = *col;
      expect_kw("bbox");
      expect(Tok::LParen, "'('");
      for (int k = 0; k < 4; ++k) {
        if (k > 0) expect(Tok::Comma, "','");
        t.pattern.parts[k] = bb_component();
      }
      expect(Tok::RParen, "')'");
      return {std::move(t)};
    }
    CmpOp op;
    switch (cur().kind) {
      case Tok::Eq: op = CmpOp::Eq; break;
      case Tok::Ne: op = CmpOp::Ne; break;
      case Tok::Lt: op = CmpOp::Lt; break;
      case Tok::Le: op = CmpOp::Le; break;
      case Tok::Gt: op = CmpOp::Gt; break;
      case Tok::Ge: op = CmpOp::Ge; break;
      default: fail("expected a comparison operator, sMatch or MATCHES");
    }
    next();
    return {ast::Comparison{std::move(lhs), op, operand()}};
  }

  BBComponent bb_component() {
    if (at(Tok::Star)) {
      next();
      return BBComponent::wildcard();
    }
    if (at_kw("range")) {
      Position pos = cur().pos;
      next();
      expect(Tok::LParen, "'('");
      double lo = number_value();
      expect(Tok::Comma, "','");
      double hi = number_value();
      expect(Tok::RParen, "')'");
      if (!(lo <= hi)) throw Error(ErrorCode::SyntaxError, "RANGE with lo > hi", pos);
      return BBComponent::range(lo, hi);
    }
    return BBComponent::exact(number_value());
  }

  ast::Operand operand() {
    ast::Operand o;
    o.pos = cur().pos;
    if (at(Tok::Number) || (at(Tok::Minus) && ahead(1).kind == Tok::Number)) {
      o.value = number_literal();
      return o;
    }
    if (at(Tok::String)) {
      o.value = ast::Literal{next().text};
      return o;
    }
    if (at(Tok::LBracket) && ahead(1).kind != Tok::Ident) {
      next();
      ast::VectorLiteral v;
      v.push_back(number_value());
      while (at(Tok::Comma)) {
        next();
        v.push_back(number_value());
      }
      expect(Tok::RBracket, "']'");
      o.value = ast::Literal{std::move(v)};
      return o;
    }
    o.value = column_ref();
    if (at(Tok::Plus) || at(Tok::Minus)) {
      bool minus = at(Tok::Minus);
      next();
      double v = number_value();
      o.offset = minus ? -v : v;
    }
    return o;
  }
};

inline ast::SelectStmt parse(std::string_view text) { return Parser(text).parse_statement(); }

}  // namespace cqlva::query
