#pragma once

// Prints a syntax tree back to query text. parse(render(ast)) == ast.

#include <charconv>
#include <string>

#include "cqlva/query/ast.hpp"

namespace cqlva::query {

namespace detail {

// Shortest round-trip spelling; always contains '.' or an exponent so the
// parser reads it back as a double.
inline std::string render_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, ptr);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

inline std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out + "\"";
}

inline std::string render(const ast::ColumnRef& c) {
  return c.qualifier.empty() ? c.name : c.qualifier + "." + c.name;
}

inline std::string render(const ast::Literal& l) {
  struct V {
    std::string operator()(std::int64_t v) const { return std::to_string(v); }
    std::string operator()(double v) const { return render_double(v); }
    std::string operator()(const std::string& s) const { return quote(s); }
    std::string operator()(const ast::VectorLiteral& v) const {
      std::string out = "[";
      for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + render_double(v[i]);
      return out + "]";
    }
  };
  return std::visit(V{}, l);
}

inline std::string render(const ast::Operand& o) {
  if (const auto* c = std::get_if<ast::ColumnRef>(&o.value)) {
    std::string s = render(*c);
    if (o.offset > 0) s += " + " + render_double(o.offset);
    if (o.offset < 0) s += " - " + render_double(-o.offset);
    return s;
  }
  return render(std::get<ast::Literal>(o.value));
}

inline std::string render(const BBComponent& c) {
  if (std::holds_alternative<BBComponent::Any>(c.spec)) return "*";
  if (const auto* e = std::get_if<double>(&c.spec)) return render_double(*e);
  const auto& r = std::get<BBComponent::Range>(c.spec);
  return "RANGE(" + render_double(r.lo) + ", " + render_double(r.hi) + ")";
}

inline std::string render(const ast::BoolExpr& e);

inline std::string render_list(const std::vector<ast::BoolExpr>& xs, const char* sep) {
  std::string out = "(";
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? sep : "") + render(xs[i]);
  return out + ")";
}

inline std::string render(const ast::BoolExpr& e) {
  struct V {
    std::string operator()(const ast::Comparison& c) const {
      return render(c.lhs) + " " + std::string(cqlva::to_string(c.op)) + " " + render(c.rhs);
    }
    std::string operator()(const ast::SMatchTest& t) const {
      std::string s = render(t.lhs) + " sMatch(" + render_double(t.th);
      if (t.metric) s += ", " + std::string(cqlva::to_string(*t.metric));
      if (t.polarity) s += ", " + std::string(cqlva::to_string(*t.polarity));
      return s + ") " + render(t.rhs);
    }
    std::string operator()(const ast::BBMatchTest& t) const {
      std::string s = render(t.column) + " MATCHES BBOX(";
      for (int k = 0; k < 4; ++k) s += (k ? ", " : "") + render(t.pattern.parts[k]);
      return s + ")";
    }
    std::string operator()(const ast::AndExpr& a) const { return render_list(a.children, " AND "); }
    std::string operator()(const ast::OrExpr& o) const { return render_list(o.children, " OR "); }
    std::string operator()(const ast::NotExpr& n) const { return "NOT (" + render(*n.child) + ")"; }
  };
  return std::visit(V{}, e.node);
}

inline std::string render(const ast::SelectStmt& s);

inline std::string render(const ast::Source& src) {
  struct V {
    std::string operator()(const ast::NamedSource& n) const { return n.name; }
    std::string operator()(const ast::R2ACall& r) const {
      return "R2A(" + render(*r.input) + ", " + render(r.gba) + ", " + render(r.aoa) + ")";
    }
    std::string operator()(const ast::CctCall& c) const {
      std::string s = "CCT(" + render(*c.input) + ", " + std::string(cqlva::to_string(c.option));
      if (c.gap) s += ", " + std::to_string(*c.gap);
      return s + ")";
    }
    std::string operator()(const ast::SubQuery& q) const { return "(" + render(*q.stmt) + ")"; }
    std::string operator()(const ast::JoinSource& j) const {
      std::string s = "(" + render(*j.left) + " " + std::string(ast::to_string(j.kind));
      if (j.option) s += "(" + std::string(cqlva::to_string(*j.option)) + ")";
      return s + " " + render(*j.right) + " ON " + render(j.on) + ")";
    }
  };
  std::string s = std::visit(V{}, src.node);
  if (!src.alias.empty()) s += " AS " + src.alias;
  return s;
}

inline std::string render(const ast::SelectItem& it) {
  std::string s;
  switch (it.kind) {
    case ast::SelectItem::Kind::Star: return "*";
    case ast::SelectItem::Kind::Column: s = render(it.column); break;
    case ast::SelectItem::Kind::Aggregate:
      s = it.fn == AggFn::CountStar ? "count(*)"
                                    : std::string(cqlva::to_string(it.fn)) + "(" + render(it.column) + ")";
      break;
    case ast::SelectItem::Kind::Direction:
      s = "Direction(" + render(it.column);
      if (it.epsilon) s += ", " + render_double(*it.epsilon);
      s += ")";
      break;
  }
  if (!it.alias.empty()) s += " AS " + it.alias;
  return s;
}

inline std::string render(const ast::SelectStmt& s) {
  std::string out = "SELECT ";
  for (std::size_t i = 0; i < s.items.size(); ++i) out += (i ? ", " : "") + render(s.items[i]);
  out += " FROM " + render(s.from);
  if (s.where) out += " WHERE " + render(*s.where);
  if (s.window) {
    out += " WINDOW(" + std::string(cqlva::to_string(s.window->kind)) + ", " + render_double(s.window->size);
    if (s.window->hop) out += ", " + render_double(*s.window->hop);
    out += ")";
  }
  return out;
}

}  // namespace detail

inline std::string render(const ast::SelectStmt& s) { return detail::render(s); }
inline std::string render(const ast::BoolExpr& e) { return detail::render(e); }

}  // namespace cqlva::query
