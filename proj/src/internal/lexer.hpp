#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "sketchreward/error.hpp"

namespace sketchreward::detail {

enum class Lex {
  Ident,
  Number,
  Hole,
  LParen,
  RParen,
  LBrace,
  RBrace,
  Comma,
  Colon,
  Arrow,
  AndAnd,
  Plus,
  Minus,
  Star,
  Le,
  Lt,
  Ge,
  Gt,
  EqEq,
  End,
};

struct Lexeme {
  Lex kind = Lex::End;
  std::string text;
  double number = 0.0;
  int hole = 0;
  SourceLocation where;
  /// Whitespace or a comment precedes this lexeme.
  bool spaced = false;
};

/// Splits source into lexemes; '#' starts a comment running to end of line.
std::vector<Lexeme> lex(std::string_view src);

std::string describe(const Lexeme& l);

}  // namespace sketchreward::detail
