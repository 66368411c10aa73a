#pragma once

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

#include "cqlva/error.hpp"

namespace cqlva::query {

enum class Tok {
  Ident,
  Number,
  String,
  LParen,
  RParen,
  LBracket,
  RBracket,
  Comma,
  Dot,
  Star,
  Plus,
  Minus,
  Semicolon,
  Eq,
  Ne,
  Lt,
  Le,
  Gt,
  Ge,
  End,
};

struct Token {
  Tok kind = Tok::End;
  std::string text;  // identifier / number spelling / unescaped string
  Position pos;
};

/// Splits query text into tokens. "--" starts a comment running to end of line.
inline std::vector<Token> tokenize(std::string_view src) {
  std::vector<Token> out;
  std::size_t i = 0, line = 1, col = 1;
  auto advance = [&](std::size_t n = 1) {
    for (std::size_t k = 0; k < n && i < src.size(); ++k, ++i) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
  };
  auto peek = [&](std::size_t k = 0) -> char { return i + k < src.size() ? src[i + k] : '\0'; };

  while (i < src.size()) {
    char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance();
      continue;
    }
    if (c == '-' && peek(1) == '-') {
      while (i < src.size() && src[i] != '\n') advance();
      continue;
    }
    Position pos{line, col};
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t s = i;
      while (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_') advance();
      out.push_back({Tok::Ident, std::string(src.substr(s, i - s)), pos});
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && std::isdigit(static_cast<unsigned char>(peek(1))))) {
      std::size_t s = i;
      while (std::isdigit(static_cast<unsigned char>(peek()))) advance();
      if (peek() == '.') {
        advance();
        while (std::isdigit(static_cast<unsigned char>(peek()))) advance();
      }
      if (peek() == 'e' || peek() == 'E') {
        std::size_t save_i = i, save_line = line, save_col = col;
        advance();
        if (peek() == '+' || peek() == '-') advance();
        if (!std::isdigit(static_cast<unsigned char>(peek()))) {
          i = save_i;
          line = save_line;
          col = save_col;
        } else {
          while (std::isdigit(static_cast<unsigned char>(peek()))) advance();
        }
      }
      out.push_back({Tok::Number, std::string(src.substr(s, i - s)), pos});
      continue;
    }
    if (c == '"' || c == '\'') {
      char quote = c;
      advance();
      std::string text;
      for (;;) {
        if (i >= src.size()) throw Error(ErrorCode::SyntaxError, "unterminated string literal", pos);
        char d = src[i];
        if (d == '\\' && i + 1 < src.size()) {
          text.push_back(src[i + 1]);
          advance(2);
          continue;
        }
        if (d == quote) {
          advance();
          break;
        }
        text.push_back(d);
        advance();
      }
      out.push_back({Tok::String, std::move(text), pos});
      continue;
    }
    auto single = [&](Tok t, std::size_t n = 1) {
      out.push_back({t, std::string(src.substr(i, n)), pos});
      advance(n);
    };
    switch (c) {
      case '(': single(Tok::LParen); break;
      case ')': single(Tok::RParen); break;
      case '[': single(Tok::LBracket); break;
      case ']': single(Tok::RBracket); break;
      case ',': single(Tok::Comma); break;
      case '.': single(Tok::Dot); break;
      case '*': single(Tok::Star); break;
      case '+': single(Tok::Plus); break;
      case '-': single(Tok::Minus); break;
      case ';': single(Tok::Semicolon); break;
      case '=': single(Tok::Eq, peek(1) == '=' ? 2 : 1); break;
      case '!':
        if (peek(1) != '=') throw Error(ErrorCode::SyntaxError, "unexpected '!'", pos);
        single(Tok::Ne, 2);
        break;
      case '<':
        if (peek(1) == '=') single(Tok::Le, 2);
        else if (peek(1) == '>') single(Tok::Ne, 2);
        else single(Tok::Lt);
        break;
      case '>':
        if (peek(1) == '=') single(Tok::Ge, 2);
        else single(Tok::Gt);
        break;
      default:
        throw Error(ErrorCode::SyntaxError, std::string("unexpected character '") + c + "'", pos);
    }
  }
  out.push_back({Tok::End, "", {line, col}});
  return out;
}

}  // namespace cqlva::query
