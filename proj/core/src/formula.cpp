#include "nmln/formula.hpp"

#include <algorithm>
#include <cctype>

#include "nmln/errors.hpp"

namespace nmln {

class FormulaParser {
 public:
  FormulaParser(std::string_view text, const Signature& signature)
      : text_(text), signature_(signature) {}

  Formula run() {
    Formula f;
    f.text_ = std::string(text_);
    f.root_ = parse_iff();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected trailing input");
    f.num_variables_ = max_var_;
    return f;
  }

 private:
  using Node = Formula::Node;
  using Kind = Formula::Kind;

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError("formula '" + std::string(text_) + "': " + what + " at column " +
                         std::to_string(pos_ + 1),
                     0);
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(std::string_view token) {
    skip_ws();
    if (text_.substr(pos_, token.size()) == token) {
      pos_ += token.size();
      return true;
    }
    return false;
  }

  std::string identifier() {
    skip_ws();
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
      ++pos_;
    }
    if (start == pos_) fail("expected identifier");
    return std::string(text_.substr(start, pos_ - start));
  }

  static Node binary(Kind kind, Node lhs, Node rhs) {
    Node n;
    n.kind = kind;
    n.children.push_back(std::move(lhs));
    n.children.push_back(std::move(rhs));
    return n;
  }

  Node parse_iff() {
    Node lhs = parse_implies();
    while (accept("<->")) lhs = binary(Kind::equivalence, std::move(lhs), parse_implies());
    return lhs;
  }

  Node parse_implies() {
    Node lhs = parse_or();
    skip_ws();
    if (text_.substr(pos_, 3) != "<->" && accept("->")) {
      return binary(Kind::implication, std::move(lhs), parse_implies());
    }
    return lhs;
  }

  Node parse_or() {
    Node lhs = parse_and();
    while (accept("|")) lhs = binary(Kind::disjunction, std::move(lhs), parse_and());
    return lhs;
  }

  Node parse_and() {
    Node lhs = parse_unary();
    while (accept("&")) lhs = binary(Kind::conjunction, std::move(lhs), parse_unary());
    return lhs;
  }

  Node parse_unary() {
    if (accept("!") || accept("~")) {
      Node n;
      n.kind = Kind::negation;
      n.children.push_back(parse_unary());
      return n;
    }
    if (accept("(")) {
      Node inner = parse_iff();
      if (!accept(")")) fail("expected ')'");
      return inner;
    }
    const std::string name = identifier();
    if (name == "true" || name == "false") {
      Node n;
      n.kind = Kind::constant;
      n.value = name == "true";
      return n;
    }
    auto pred = signature_.find_predicate(name);
    if (!pred) fail("unknown predicate '" + name + "'");
    if (!accept("(")) fail("expected '(' after predicate");
    Node n;
    n.kind = Kind::atom;
    n.predicate = *pred;
    do {
      const std::string arg = identifier();
      if (arg.size() < 2 || arg[0] != 'x' ||
          !std::all_of(arg.begin() + 1, arg.end(),
                       [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
        fail("argument '" + arg + "' is not a variable (constants are unsupported)");
      }
      const int var = std::stoi(arg.substr(1));
      if (var < 1) fail("variables are numbered from x1");
      max_var_ = std::max(max_var_, var);
      n.vars.push_back(var - 1);
    } while (accept(","));
    if (!accept(")")) fail("expected ')'");
    if (static_cast<int>(n.vars.size()) != signature_.predicate(*pred).arity) {
      fail("arity mismatch for '" + name + "'");
    }
    return n;
  }

  std::string_view text_;
  const Signature& signature_;
  std::size_t pos_ = 0;
  int max_var_ = 0;
};

Formula Formula::parse(std::string_view text, const Signature& signature) {
  return FormulaParser(text, signature).run();
}

bool Formula::eval(const Node& node,
                   const std::function<bool(PredicateId, std::span<const int>)>& truth) {
  switch (node.kind) {
    case Kind::constant:
      return node.value;
    case Kind::atom:
      return truth(node.predicate, node.vars);
    case Kind::negation:
      return !eval(node.children[0], truth);
    case Kind::conjunction:
      return eval(node.children[0], truth) && eval(node.children[1], truth);
    case Kind::disjunction:
      return eval(node.children[0], truth) || eval(node.children[1], truth);
    case Kind::implication:
      return !eval(node.children[0], truth) || eval(node.children[1], truth);
    case Kind::equivalence:
      return eval(node.children[0], truth) == eval(node.children[1], truth);
  }
  return false;
}

bool Formula::evaluate(const std::function<bool(PredicateId, std::span<const int>)>& truth) const {
  return eval(root_, truth);
}

bool Formula::evaluate_code(std::span<const std::uint8_t> code, const Signature& signature,
                            int k) const {
  if (num_variables_ > k) throw InvalidArgument("formula uses more variables than fragment size");
  // Offset of each predicate's block inside the code.
  std::vector<std::size_t> base(signature.num_predicates());
  std::size_t pos = 0;
  for (std::size_t p = 0; p < signature.num_predicates(); ++p) {
    base[p] = pos;
    pos += signature.predicates()[p].arity == 1 ? k : static_cast<std::size_t>(k) * k;
  }
  return eval(root_, [&](PredicateId p, std::span<const int> vars) {
    std::size_t idx = 0;
    for (int v : vars) idx = idx * k + v;
    return code[base[p] + idx] != 0;
  });
}

}  // namespace nmln
