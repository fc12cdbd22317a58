#pragma once

// Quantifier-free, constant-free first-order formulas over variables x1..xk.
//
// Grammar (loosest binding first):
//   iff     := implies ("<->" implies)*
//   implies := or ("->" implies)?          right associative
//   or      := and ("|" and)*
//   and     := unary ("&" unary)*
//   unary   := ("!" | "~") unary | "(" iff ")" | "true" | "false" | atom
//   atom    := pred "(" var ("," var)* ")"
// Variables are written x1, x2, ...; any other argument is a constant and is
// rejected.

#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "nmln/relational.hpp"

namespace nmln {

class Formula {
 public:
  enum class Kind { constant, atom, negation, conjunction, disjunction, implication, equivalence };

  /// Parses `text` against the signature's predicates. Throws ParseError.
  static Formula parse(std::string_view text, const Signature& signature);

  /// Number of distinct variables, i.e. the largest variable index used.
  int num_variables() const noexcept { return num_variables_; }
  const std::string& text() const noexcept { return text_; }

  /// Evaluates the formula. `truth(predicate, variable indices)` reports the
  /// value of the atom whose arguments are the given (0-based) variables.
  bool evaluate(const std::function<bool(PredicateId, std::span<const int>)>& truth) const;

  /// Evaluates on an AnonCode laid out for fragment size k, reading variable
  /// x_j as anonymized constant j-1.
  bool evaluate_code(std::span<const std::uint8_t> code, const Signature& signature, int k) const;

 private:
  struct Node {
    Kind kind = Kind::constant;
    bool value = false;
    PredicateId predicate = 0;
    std::vector<int> vars;
    std::vector<Node> children;
  };

  static bool eval(const Node& node,
                   const std::function<bool(PredicateId, std::span<const int>)>& truth);

  Node root_;
  int num_variables_ = 0;
  std::string text_;

  friend class FormulaParser;
};

}  // namespace nmln
