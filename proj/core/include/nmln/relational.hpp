#pragma once

// Signatures, possible worlds, fragments and their anonymized binary codes.
//
// Ground atoms are laid out in one canonical order: predicates in declaration
// order, then argument tuples in row-major order over the constant pool. The
// same order, applied to the anonymized constants {0..k-1}, defines the layout
// of an AnonCode.

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace nmln {

using ConstantId = int;
using PredicateId = int;
using AtomIndex = std::size_t;

inline constexpr int kMaxArity = 2;

struct Predicate {
  std::string name;
  int arity = 1;

  bool operator==(const Predicate&) const = default;
};

struct GroundAtom {
  PredicateId predicate = 0;
  int arity = 1;
  std::array<ConstantId, kMaxArity> args{};

  /// Distinct constants of the atom, ascending.
  std::vector<ConstantId> distinct_constants() const;

  bool operator==(const GroundAtom&) const = default;
};

class Signature {
 public:
  Signature(std::vector<std::string> constants, std::vector<Predicate> predicates);

  std::size_t num_constants() const noexcept { return constants_.size(); }
  std::size_t num_predicates() const noexcept { return predicates_.size(); }
  /// Size of the ground-atom universe: sum over predicates of n^arity.
  std::size_t num_atoms() const noexcept { return num_atoms_; }

  const std::vector<std::string>& constants() const noexcept { return constants_; }
  const std::vector<Predicate>& predicates() const noexcept { return predicates_; }
  const std::string& constant_name(ConstantId c) const { return constants_.at(c); }
  const Predicate& predicate(PredicateId p) const { return predicates_.at(p); }

  std::optional<ConstantId> find_constant(std::string_view name) const;
  std::optional<PredicateId> find_predicate(std::string_view name) const;

  AtomIndex atom_index(const GroundAtom& atom) const;
  GroundAtom atom(AtomIndex index) const;
  /// First atom index of predicate p.
  AtomIndex predicate_offset(PredicateId p) const { return offsets_.at(p); }

  /// Length of an AnonCode for fragments of size k: sum over predicates of k^arity.
  std::size_t code_length(int k) const;

  std::string format(const GroundAtom& atom) const;
  std::string format(AtomIndex index) const { return format(atom(index)); }

  /// FNV-1a hash of the predicate list; constants are mixed in when requested.
  std::uint64_t hash(bool include_constants) const;

  bool operator==(const Signature& other) const {
    return constants_ == other.constants_ && predicates_ == other.predicates_;
  }

 private:
  std::vector<std::string> constants_;
  std::vector<Predicate> predicates_;
  std::vector<AtomIndex> offsets_;
  std::size_t num_atoms_ = 0;
  std::unordered_map<std::string, ConstantId> constant_ids_;
  std::unordered_map<std::string, PredicateId> predicate_ids_;
};

using SignaturePtr = std::shared_ptr<const Signature>;

/// Ground atoms of the signature's predicates over `pool`, in canonical order.
/// Atom arguments are the pool's entries (not positions).
std::vector<GroundAtom> canonical_atom_order(const Signature& signature,
                                             std::span<const ConstantId> pool);

/// Truth assignment over every ground atom of a signature. One byte per atom so
/// that disjoint atoms can be written from different threads.
class World {
 public:
  explicit World(SignaturePtr signature);
  World(SignaturePtr signature, std::vector<std::uint8_t> bits);

  const Signature& signature() const noexcept { return *signature_; }
  const SignaturePtr& signature_ptr() const noexcept { return signature_; }
  std::size_t size() const noexcept { return bits_.size(); }

  bool get(AtomIndex i) const { return bits_[i] != 0; }
  void set(AtomIndex i, bool value) { bits_[i] = value ? 1 : 0; }
  void flip(AtomIndex i) { bits_[i] ^= 1; }
  bool get(const GroundAtom& atom) const { return get(signature_->atom_index(atom)); }
  void set(const GroundAtom& atom, bool value) { set(signature_->atom_index(atom), value); }

  std::span<const std::uint8_t> bits() const noexcept { return bits_; }
  std::span<std::uint8_t> mutable_bits() noexcept { return bits_; }
  std::size_t count_true() const;
  std::vector<AtomIndex> true_atoms() const;

  /// Builds the world whose bits are the binary digits of `code` (bit i = atom i).
  static World from_index(SignaturePtr signature, std::uint64_t code);

  bool operator==(const World& other) const {
    return *signature_ == *other.signature_ && bits_ == other.bits_;
  }

 private:
  SignaturePtr signature_;
  std::vector<std::uint8_t> bits_;
};

/// Restriction of a world to a k-subset of its constants.
struct Fragment {
  SignaturePtr signature;
  /// Selected constants in ascending id order.
  std::vector<ConstantId> constants;
  /// Truth values of canonical_atom_order(signature, constants).
  std::vector<std::uint8_t> values;

  int k() const noexcept { return static_cast<int>(constants.size()); }
  std::vector<GroundAtom> atoms() const;
  std::vector<GroundAtom> true_atoms() const;
};

/// One anonymization of a fragment: the code under the bijection
/// constants[j] -> to_anon[j], together with that bijection and its inverse.
struct AnonCode {
  std::vector<std::uint8_t> bits;
  std::vector<int> to_anon;
  std::vector<ConstantId> from_anon;

  bool operator==(const AnonCode&) const = default;
};

Fragment restrict(const World& world, std::span<const ConstantId> subset);

/// Every fragment induced by a k-subset, subsets in lexicographic order.
std::vector<Fragment> enumerate_fragments(const World& world, int k);

/// The k! anonymizations, with the images (to_anon) in lexicographic order.
std::vector<AnonCode> anonymize(const Fragment& fragment);

/// Inverse of anonymization: rebuilds the fragment from a code and its map.
Fragment decode(const AnonCode& code, const SignaturePtr& signature);

/// True iff a bijective renaming of constants maps a onto b.
bool isomorphic(const Fragment& a, const Fragment& b);

/// Writes the code of the world restricted to `order`, where order[j] is the
/// constant renamed to j. `out` must have signature.code_length(order.size())
/// entries.
void encode(const World& world, std::span<const ConstantId> order, std::span<std::uint8_t> out);

/// Same as encode() but packs the code into an integer (bit i = code entry i).
/// Requires code_length <= 64.
std::uint64_t encode_packed(const World& world, std::span<const ConstantId> order);

}  // namespace nmln
