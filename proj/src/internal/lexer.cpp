#include "internal/lexer.hpp"

#include <cctype>
#include <charconv>

namespace sketchreward::detail {

namespace {

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }
bool digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

}  // namespace

std::vector<Lexeme> lex(std::string_view src) {
  std::vector<Lexeme> out;
  std::size_t i = 0;
  int line = 1;
  int col = 1;
  bool spaced = false;
  const auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n; ++k, ++i) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
  };
  while (i < src.size()) {
    const char c = src[i];
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      advance(1);
      spaced = true;
      continue;
    }
    if (c == '#') {
      while (i < src.size() && src[i] != '\n') advance(1);
      spaced = true;
      continue;
    }
    Lexeme lx;
    lx.where = {line, col};
    lx.spaced = spaced;
    spaced = false;
    const std::size_t start = i;
    if (ident_start(c)) {
      std::size_t j = i;
      while (j < src.size() && ident_char(src[j])) ++j;
      lx.kind = Lex::Ident;
      lx.text = std::string(src.substr(i, j - i));
      advance(j - i);
    } else if (digit(c)) {
      std::size_t j = i;
      while (j < src.size() && digit(src[j])) ++j;
      if (j < src.size() && src[j] == '.') {
        ++j;
        if (j >= src.size() || !digit(src[j])) throw ParseError(lx.where, "malformed number");
        while (j < src.size() && digit(src[j])) ++j;
      }
      if (j < src.size() && (src[j] == 'e' || src[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < src.size() && (src[k] == '+' || src[k] == '-')) ++k;
        if (k >= src.size() || !digit(src[k])) throw ParseError(lx.where, "malformed exponent");
        while (k < src.size() && digit(src[k])) ++k;
        j = k;
      }
      if (j < src.size() && ident_char(src[j])) throw ParseError(lx.where, "malformed number");
      lx.kind = Lex::Number;
      lx.text = std::string(src.substr(i, j - i));
      const auto res = std::from_chars(src.data() + i, src.data() + j, lx.number);
      if (res.ec != std::errc()) throw ParseError(lx.where, "number out of range: " + lx.text);
      advance(j - i);
    } else if (c == '?') {
      std::size_t j = i + 1;
      while (j < src.size() && digit(src[j])) ++j;
      if (j == i + 1) throw ParseError(lx.where, "expected hole number after '?'");
      lx.kind = Lex::Hole;
      lx.text = std::string(src.substr(i, j - i));
      int id = 0;
      const auto res = std::from_chars(src.data() + i + 1, src.data() + j, id);
      if (res.ec != std::errc()) throw ParseError(lx.where, "hole number out of range");
      lx.hole = id;
      advance(j - i);
    } else {
      const auto two = src.substr(i, 2);
      auto one = [&](Lex k) {
        lx.kind = k;
        advance(1);
      };
      auto pair = [&](Lex k) {
        lx.kind = k;
        advance(2);
      };
      if (two == "=>") pair(Lex::Arrow);
      else if (two == "<=") pair(Lex::Le);
      else if (two == ">=") pair(Lex::Ge);
      else if (two == "==") pair(Lex::EqEq);
      else if (two == "&&") pair(Lex::AndAnd);
      else if (c == '<') one(Lex::Lt);
      else if (c == '>') one(Lex::Gt);
      else if (c == '(') one(Lex::LParen);
      else if (c == ')') one(Lex::RParen);
      else if (c == '{') one(Lex::LBrace);
      else if (c == '}') one(Lex::RBrace);
      else if (c == ',') one(Lex::Comma);
      else if (c == ':') one(Lex::Colon);
      else if (c == '+') one(Lex::Plus);
      else if (c == '-') one(Lex::Minus);
      else if (c == '*') one(Lex::Star);
      else throw ParseError(lx.where, std::string("unexpected character '") + c + "'");
      lx.text = std::string(src.substr(start, i - start));
    }
    out.push_back(std::move(lx));
  }
  Lexeme end;
  end.kind = Lex::End;
  end.where = {line, col};
  out.push_back(end);
  return out;
}

std::string describe(const Lexeme& l) {
  if (l.kind == Lex::End) return "end of input";
  return "'" + l.text + "'";
}

}  // namespace sketchreward::detail
