#include "sketchreward/constraint.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

#include "internal/lexer.hpp"
#include "sketchreward/error.hpp"
#include "sketchreward/numeric.hpp"

namespace sketchreward::constraints {

double AtomicPredicate::value(std::span<const double> h) const {
  if (h.size() != coeffs.size())
    throw ContractError("hole assignment has " + std::to_string(h.size()) + " values, predicate expects " +
                        std::to_string(coeffs.size()));
  double u = offset;
  for (std::size_t j = 0; j < h.size(); ++j) u += coeffs[j] * h[j];
  return u;
}

Constraint Constraint::atom(AtomicPredicate a) {
  Constraint c;
  c.kind_ = Kind::Atom;
  c.atom_ = std::move(a);
  return c;
}

Constraint Constraint::negation(Constraint inner) {
  Constraint c;
  c.kind_ = Kind::Not;
  c.children_.push_back(std::move(inner));
  return c;
}

Constraint Constraint::all_of(std::vector<Constraint> cs) {
  Constraint c;
  c.kind_ = Kind::And;
  c.children_ = std::move(cs);
  return c;
}

Constraint Constraint::any_of(std::vector<Constraint> cs) {
  Constraint c;
  c.kind_ = Kind::Or;
  c.children_ = std::move(cs);
  return c;
}

const AtomicPredicate& Constraint::predicate() const {
  if (kind_ != Kind::Atom) throw ContractError("constraint node is not an atom");
  return atom_;
}

double eval_constraint(const Constraint& c, std::span<const double> h) {
  switch (c.kind()) {
    case Constraint::Kind::Atom: return c.predicate().holds(h) ? 1.0 : -1.0;
    case Constraint::Kind::Not: return -eval_constraint(c.children().front(), h);
    case Constraint::Kind::And: {
      double v = 1.0;
      for (const auto& ch : c.children()) v = std::min(v, eval_constraint(ch, h));
      return v;
    }
    case Constraint::Kind::Or: {
      double v = -1.0;
      for (const auto& ch : c.children()) v = std::max(v, eval_constraint(ch, h));
      return v;
    }
  }
  return -1.0;
}

bool is_satisfied(const Constraint& c, std::span<const double> h) { return eval_constraint(c, h) >= 0.0; }

namespace {

void flatten(const Constraint& c, std::vector<AtomicPredicate>& out) {
  switch (c.kind()) {
    case Constraint::Kind::Atom: out.push_back(c.predicate()); return;
    case Constraint::Kind::And:
      for (const auto& ch : c.children()) flatten(ch, out);
      return;
    default: throw ContractError("soft penalty is only defined for conjunctions of atoms");
  }
}

}  // namespace

std::vector<AtomicPredicate> conjunctive_atoms(const Constraint& c) {
  std::vector<AtomicPredicate> out;
  flatten(c, out);
  return out;
}

double soft_penalty(const Constraint& c, std::span<const double> h) {
  double total = 0.0;
  for (const auto& a : conjunctive_atoms(c)) total += softplus(std::max(a.value(h), 0.0));
  return total;
}

std::vector<double> grad_soft_penalty(const Constraint& c, std::span<const double> h) {
  std::vector<double> g(h.size(), 0.0);
  for (const auto& a : conjunctive_atoms(c)) {
    const double u = a.value(h);
    if (u <= 0.0) continue;
    const double s = sigmoid(u);
    for (std::size_t j = 0; j < g.size(); ++j) g[j] += s * a.coeffs[j];
  }
  return g;
}

double total_violation(const Constraint& c, std::span<const double> h) {
  double total = 0.0;
  for (const auto& a : conjunctive_atoms(c)) total += std::max(a.value(h), 0.0);
  return total;
}

double constraint_margin(const Constraint& c, std::span<const double> h) {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& a : conjunctive_atoms(c)) worst = std::max(worst, a.value(h));
  return -worst;
}

std::size_t ConstraintSet::atom_count() const {
  std::size_t n = 0;
  for (const auto& p : predicates) n += p.atoms.size();
  return n;
}

Constraint ConstraintSet::conjunction() const {
  std::vector<Constraint> atoms;
  for (const auto& p : predicates)
    for (const auto& a : p.atoms) atoms.push_back(Constraint::atom(a));
  return Constraint::all_of(std::move(atoms));
}

namespace {

using detail::Lex;
using detail::Lexeme;

/// offset + sum coeff[id] * ?id with ids 1-based, grown on demand.
struct Linear {
  double offset = 0.0;
  std::vector<double> coeffs;
  std::vector<SourceLocation> first_use;

  void add_hole(int id, double k, SourceLocation where) {
    if (static_cast<std::size_t>(id) > coeffs.size()) {
      coeffs.resize(id, 0.0);
      first_use.resize(id);
    }
    if (coeffs[id - 1] == 0.0) first_use[id - 1] = where;
    coeffs[id - 1] += k;
  }
};

struct RawAtom {
  Linear u;
  std::vector<std::pair<int, SourceLocation>> holes;
};

class LineParser {
 public:
  LineParser(std::vector<Lexeme> lx, int line) : lx_(std::move(lx)), line_(line) {}

  LabelledPredicate parse(std::vector<RawAtom>& raw) {
    LabelledPredicate p;
    p.line = line_;
    if (peek().kind == Lex::Ident && lx_.size() > 1 && lx_[1].kind == Lex::Colon) {
      p.label = next().text;
      next();
    }
    while (true) {
      raw.push_back(inequality());
      if (peek().kind != Lex::AndAnd) break;
      next();
    }
    if (peek().kind != Lex::End) fail(peek(), "unexpected " + detail::describe(peek()));
    return p;
  }

 private:
  const Lexeme& peek() const { return lx_[pos_]; }
  const Lexeme& next() {
    const Lexeme& l = lx_[pos_];
    if (pos_ + 1 < lx_.size()) ++pos_;
    return l;
  }
  [[noreturn]] void fail(const Lexeme& at, const std::string& msg) const {
    throw ParseError({line_, at.where.column}, msg);
  }

  RawAtom inequality() {
    RawAtom atom;
    Linear lhs = linear(atom);
    const Lexeme& op = next();
    if (op.kind == Lex::Lt || op.kind == Lex::Gt) fail(op, "strict inequalities are not supported; use <= or >=");
    if (op.kind != Lex::Le && op.kind != Lex::Ge) fail(op, "expected <= or >=, found " + detail::describe(op));
    Linear rhs = linear(atom);
    const bool le = op.kind == Lex::Le;
    Linear& pos = le ? lhs : rhs;
    const Linear& negp = le ? rhs : lhs;
    pos.offset -= negp.offset;
    for (std::size_t j = 0; j < negp.coeffs.size(); ++j) pos.add_hole(static_cast<int>(j) + 1, -negp.coeffs[j], {});
    atom.u = std::move(pos);
    return atom;
  }

  Linear linear(RawAtom& atom) {
    Linear out;
    double sign = 1.0;
    if (peek().kind == Lex::Minus) {
      next();
      sign = -1.0;
    } else if (peek().kind == Lex::Plus) {
      next();
    }
    term(out, sign, atom);
    while (peek().kind == Lex::Plus || peek().kind == Lex::Minus) {
      sign = next().kind == Lex::Plus ? 1.0 : -1.0;
      term(out, sign, atom);
    }
    return out;
  }

  void term(Linear& out, double k, RawAtom& atom) {
    int hole_id = 0;
    SourceLocation hole_at;
    while (true) {
      const Lexeme& f = next();
      if (f.kind == Lex::Number) {
        k *= f.number;
      } else if (f.kind == Lex::Hole) {
        if (hole_id != 0) fail(f, "product of two holes is not linear");
        if (f.hole < 1) fail(f, "hole ids start at ?1");
        hole_id = f.hole;
        hole_at = {line_, f.where.column};
        atom.holes.emplace_back(f.hole, hole_at);
      } else if (f.kind == Lex::Minus) {
        k = -k;
        continue;
      } else {
        fail(f, "expected number or hole, found " + detail::describe(f));
      }
      if (peek().kind != Lex::Star) break;
      next();
    }
    if (hole_id == 0) out.offset += k;
    else out.add_hole(hole_id, k, hole_at);
  }

  std::vector<Lexeme> lx_;
  std::size_t pos_ = 0;
  int line_;
};

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string number_text(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

ConstraintSet parse_constraints(std::string_view text, std::optional<std::size_t> hole_count) {
  ConstraintSet set;
  std::vector<std::vector<RawAtom>> raw_lines;
  int line_no = 0;
  std::size_t start = 0;
  std::size_t max_id = 0;
  while (start <= text.size()) {
    const std::size_t nl = text.find('\n', start);
    const std::string_view line = text.substr(start, nl == std::string_view::npos ? text.size() - start : nl - start);
    start = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    std::vector<Lexeme> lx;
    try {
      lx = detail::lex(line);
    } catch (const ParseError& e) {
      throw ParseError({line_no, e.location().column}, e.detail());
    }
    if (lx.size() == 1) continue;
    std::vector<RawAtom> raw;
    LabelledPredicate p = LineParser(std::move(lx), line_no).parse(raw);
    const auto hash = line.find('#');
    p.source = std::string(trim(line.substr(0, hash)));
    for (const auto& a : raw)
      for (const auto& [id, where] : a.holes) {
        max_id = std::max<std::size_t>(max_id, id);
        if (hole_count && static_cast<std::size_t>(id) > *hole_count)
          throw LinkError(std::to_string(where.line) + ":" + std::to_string(where.column) + ": constraint references ?" +
                          std::to_string(id) + " but the sketch has " + std::to_string(*hole_count) + " holes");
      }
    set.predicates.push_back(std::move(p));
    raw_lines.push_back(std::move(raw));
  }
  set.hole_count = hole_count.value_or(max_id);
  for (std::size_t i = 0; i < raw_lines.size(); ++i)
    for (auto& a : raw_lines[i]) {
      AtomicPredicate ap;
      ap.offset = a.u.offset;
      ap.coeffs.assign(set.hole_count, 0.0);
      for (std::size_t j = 0; j < a.u.coeffs.size(); ++j) ap.coeffs[j] = a.u.coeffs[j];
      set.predicates[i].atoms.push_back(std::move(ap));
    }
  return set;
}

std::string format_atom(const AtomicPredicate& a) {
  std::string out;
  for (std::size_t j = 0; j < a.coeffs.size(); ++j) {
    const double c = a.coeffs[j];
    if (c == 0.0) continue;
    const double mag = std::fabs(c);
    if (out.empty()) out += c < 0 ? "-" : "";
    else out += c < 0 ? " - " : " + ";
    if (mag != 1.0) out += number_text(mag) + "*";
    out += "?" + std::to_string(j + 1);
  }
  if (a.offset != 0.0 || out.empty()) {
    if (out.empty()) out += number_text(a.offset);
    else out += (a.offset < 0 ? " - " : " + ") + number_text(std::fabs(a.offset));
  }
  return out + " <= 0";
}

}  // namespace sketchreward::constraints
