#include "nmln/relational.hpp"

#include <algorithm>

#include "nmln/combinatorics.hpp"
#include "nmln/errors.hpp"

namespace nmln {

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

void fnv_mix(std::uint64_t& h, std::string_view bytes) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kFnvPrime;
  }
  h ^= 0xff;
  h *= kFnvPrime;
}

std::size_t ipow(std::size_t base, int exp) {
  std::size_t r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

}  // namespace

std::vector<ConstantId> GroundAtom::distinct_constants() const {
  std::vector<ConstantId> out(args.begin(), args.begin() + arity);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Signature::Signature(std::vector<std::string> constants, std::vector<Predicate> predicates)
    : constants_(std::move(constants)), predicates_(std::move(predicates)) {
  for (std::size_t i = 0; i < constants_.size(); ++i) {
    if (constants_[i].empty()) throw InvalidArgument("empty constant name");
    if (!constant_ids_.emplace(constants_[i], static_cast<ConstantId>(i)).second) {
      throw InvalidArgument("duplicate constant '" + constants_[i] + "'");
    }
  }
  const std::size_t n = constants_.size();
  for (std::size_t p = 0; p < predicates_.size(); ++p) {
    const auto& pred = predicates_[p];
    if (pred.name.empty()) throw InvalidArgument("empty predicate name");
    if (pred.arity < 1 || pred.arity > kMaxArity) {
      throw InvalidArgument("predicate '" + pred.name + "' has unsupported arity " +
                            std::to_string(pred.arity));
    }
    if (!predicate_ids_.emplace(pred.name, static_cast<PredicateId>(p)).second) {
      throw InvalidArgument("duplicate predicate '" + pred.name + "'");
    }
    offsets_.push_back(num_atoms_);
    num_atoms_ += ipow(n, pred.arity);
  }
}

std::optional<ConstantId> Signature::find_constant(std::string_view name) const {
  auto it = constant_ids_.find(std::string(name));
  if (it == constant_ids_.end()) return std::nullopt;
  return it->second;
}

std::optional<PredicateId> Signature::find_predicate(std::string_view name) const {
  auto it = predicate_ids_.find(std::string(name));
  if (it == predicate_ids_.end()) return std::nullopt;
  return it->second;
}

AtomIndex Signature::atom_index(const GroundAtom& atom) const {
  if (atom.predicate < 0 || static_cast<std::size_t>(atom.predicate) >= predicates_.size()) {
    throw SignatureMismatch("unknown predicate id " + std::to_string(atom.predicate));
  }
  const auto& pred = predicates_[atom.predicate];
  if (atom.arity != pred.arity) {
    throw SignatureMismatch("arity mismatch for predicate '" + pred.name + "'");
  }
  const std::size_t n = constants_.size();
  AtomIndex idx = 0;
  for (int i = 0; i < atom.arity; ++i) {
    const ConstantId c = atom.args[i];
    if (c < 0 || static_cast<std::size_t>(c) >= n) {
      throw SignatureMismatch("unknown constant id " + std::to_string(c));
    }
    idx = idx * n + static_cast<std::size_t>(c);
  }
  return offsets_[atom.predicate] + idx;
}

GroundAtom Signature::atom(AtomIndex index) const {
  if (index >= num_atoms_) throw SignatureMismatch("atom index out of range");
  auto it = std::upper_bound(offsets_.begin(), offsets_.end(), index);
  const auto p = static_cast<PredicateId>(std::distance(offsets_.begin(), it) - 1);
  GroundAtom atom;
  atom.predicate = p;
  atom.arity = predicates_[p].arity;
  std::size_t rest = index - offsets_[p];
  const std::size_t n = constants_.size();
  for (int i = atom.arity - 1; i >= 0; --i) {
    atom.args[i] = static_cast<ConstantId>(rest % n);
    rest /= n;
  }
  return atom;
}

std::size_t Signature::code_length(int k) const {
  std::size_t len = 0;
  for (const auto& p : predicates_) len += ipow(static_cast<std::size_t>(k), p.arity);
  return len;
}

std::string Signature::format(const GroundAtom& atom) const {
  std::string out = predicates_.at(atom.predicate).name + "(";
  for (int i = 0; i < atom.arity; ++i) {
    if (i > 0) out += ',';
    out += constants_.at(atom.args[i]);
  }
  out += ')';
  return out;
}

std::uint64_t Signature::hash(bool include_constants) const {
  std::uint64_t h = kFnvOffset;
  for (const auto& p : predicates_) {
    fnv_mix(h, p.name);
    fnv_mix(h, std::to_string(p.arity));
  }
  if (include_constants) {
    fnv_mix(h, "#constants");
    for (const auto& c : constants_) fnv_mix(h, c);
  }
  return h;
}

std::vector<GroundAtom> canonical_atom_order(const Signature& signature,
                                             std::span<const ConstantId> pool) {
  std::vector<GroundAtom> out;
  const auto& preds = signature.predicates();
  for (std::size_t p = 0; p < preds.size(); ++p) {
    GroundAtom a;
    a.predicate = static_cast<PredicateId>(p);
    a.arity = preds[p].arity;
    if (a.arity == 1) {
      for (ConstantId c : pool) {
        a.args = {c, 0};
        out.push_back(a);
      }
    } else {
      for (ConstantId c1 : pool) {
        for (ConstantId c2 : pool) {
          a.args = {c1, c2};
          out.push_back(a);
        }
      }
    }
  }
  return out;
}

World::World(SignaturePtr signature) : signature_(std::move(signature)) {
  if (!signature_) throw InvalidArgument("world requires a signature");
  bits_.assign(signature_->num_atoms(), 0);
}

World::World(SignaturePtr signature, std::vector<std::uint8_t> bits)
    : signature_(std::move(signature)), bits_(std::move(bits)) {
  if (!signature_) throw InvalidArgument("world requires a signature");
  if (bits_.size() != signature_->num_atoms()) {
    throw SignatureMismatch("world bit count does not match the ground-atom universe");
  }
  for (auto& b : bits_) b = b ? 1 : 0;
}

std::size_t World::count_true() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

std::vector<AtomIndex> World::true_atoms() const {
  std::vector<AtomIndex> out;
  for (AtomIndex i = 0; i < bits_.size(); ++i) {
    if (bits_[i]) out.push_back(i);
  }
  return out;
}

World World::from_index(SignaturePtr signature, std::uint64_t code) {
  World w(std::move(signature));
  for (AtomIndex i = 0; i < w.bits_.size(); ++i) w.bits_[i] = (code >> i) & 1U;
  return w;
}

std::vector<GroundAtom> Fragment::atoms() const {
  return canonical_atom_order(*signature, constants);
}

std::vector<GroundAtom> Fragment::true_atoms() const {
  std::vector<GroundAtom> out;
  const auto all = atoms();
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (values[i]) out.push_back(all[i]);
  }
  return out;
}

void encode(const World& world, std::span<const ConstantId> order, std::span<std::uint8_t> out) {
  const Signature& sig = world.signature();
  const auto bits = world.bits();
  const std::size_t n = sig.num_constants();
  std::size_t pos = 0;
  for (std::size_t p = 0; p < sig.num_predicates(); ++p) {
    const AtomIndex off = sig.predicate_offset(static_cast<PredicateId>(p));
    if (sig.predicates()[p].arity == 1) {
      for (ConstantId c : order) out[pos++] = bits[off + c];
    } else {
      for (ConstantId c1 : order) {
        const AtomIndex row = off + static_cast<std::size_t>(c1) * n;
        for (ConstantId c2 : order) out[pos++] = bits[row + c2];
      }
    }
  }
}

std::uint64_t encode_packed(const World& world, std::span<const ConstantId> order) {
  const Signature& sig = world.signature();
  const auto bits = world.bits();
  const std::size_t n = sig.num_constants();
  std::uint64_t code = 0;
  int pos = 0;
  for (std::size_t p = 0; p < sig.num_predicates(); ++p) {
    const AtomIndex off = sig.predicate_offset(static_cast<PredicateId>(p));
    if (sig.predicates()[p].arity == 1) {
      for (ConstantId c : order) code |= static_cast<std::uint64_t>(bits[off + c]) << pos++;
    } else {
      for (ConstantId c1 : order) {
        const AtomIndex row = off + static_cast<std::size_t>(c1) * n;
        for (ConstantId c2 : order) code |= static_cast<std::uint64_t>(bits[row + c2]) << pos++;
      }
    }
  }
  return code;
}

Fragment restrict(const World& world, std::span<const ConstantId> subset) {
  const std::size_t n = world.signature().num_constants();
  Fragment f;
  f.signature = world.signature_ptr();
  f.constants.assign(subset.begin(), subset.end());
  for (ConstantId c : f.constants) {
    if (c < 0 || static_cast<std::size_t>(c) >= n) {
      throw SignatureMismatch("constant id " + std::to_string(c) + " not in signature");
    }
  }
  std::sort(f.constants.begin(), f.constants.end());
  if (std::adjacent_find(f.constants.begin(), f.constants.end()) != f.constants.end()) {
    throw InvalidArgument("fragment constants must be distinct");
  }
  f.values.resize(world.signature().code_length(f.k()));
  encode(world, f.constants, f.values);
  return f;
}

std::vector<Fragment> enumerate_fragments(const World& world, int k) {
  const int n = static_cast<int>(world.signature().num_constants());
  if (k < 1 || k > n) throw InvalidArgument("enumerate_fragments: need 1 <= k <= n");
  std::vector<Fragment> out;
  out.reserve(binomial(n, k));
  for (const auto& subset : k_subsets(n, k)) out.push_back(restrict(world, subset));
  return out;
}

namespace {

// Code of `f` under the map f.constants[j] -> to_anon[j], read off the
// fragment's own values (position-indexed, no world needed).
std::vector<std::uint8_t> anon_bits(const Fragment& f, std::span<const int> from_anon_pos) {
  const Signature& sig = *f.signature;
  const int k = f.k();
  std::vector<std::uint8_t> out(sig.code_length(k));
  std::size_t pos = 0;
  std::size_t base = 0;
  for (const auto& pred : sig.predicates()) {
    if (pred.arity == 1) {
      for (int j = 0; j < k; ++j) out[pos++] = f.values[base + from_anon_pos[j]];
      base += k;
    } else {
      for (int j1 = 0; j1 < k; ++j1) {
        for (int j2 = 0; j2 < k; ++j2) {
          out[pos++] = f.values[base + from_anon_pos[j1] * k + from_anon_pos[j2]];
        }
      }
      base += static_cast<std::size_t>(k) * k;
    }
  }
  return out;
}

}  // namespace

std::vector<AnonCode> anonymize(const Fragment& fragment) {
  const int k = fragment.k();
  std::vector<AnonCode> out;
  out.reserve(factorial(k));
  std::vector<int> inverse_pos(k);
  for (const auto& image : permutations(k)) {
    for (int j = 0; j < k; ++j) inverse_pos[image[j]] = j;
    AnonCode code;
    code.bits = anon_bits(fragment, inverse_pos);
    code.to_anon = image;
    code.from_anon.resize(k);
    for (int a = 0; a < k; ++a) code.from_anon[a] = fragment.constants[inverse_pos[a]];
    out.push_back(std::move(code));
  }
  return out;
}

Fragment decode(const AnonCode& code, const SignaturePtr& signature) {
  const int k = static_cast<int>(code.from_anon.size());
  Fragment f;
  f.signature = signature;
  f.constants = code.from_anon;
  std::sort(f.constants.begin(), f.constants.end());
  // Position of each anonymized constant inside the sorted constant list.
  std::vector<int> pos_of(k);
  for (int a = 0; a < k; ++a) {
    pos_of[a] = static_cast<int>(
        std::lower_bound(f.constants.begin(), f.constants.end(), code.from_anon[a]) -
        f.constants.begin());
  }
  f.values.assign(signature->code_length(k), 0);
  std::size_t pos = 0;
  std::size_t base = 0;
  for (const auto& pred : signature->predicates()) {
    if (pred.arity == 1) {
      for (int a = 0; a < k; ++a) f.values[base + pos_of[a]] = code.bits[pos++];
      base += k;
    } else {
      for (int a1 = 0; a1 < k; ++a1) {
        for (int a2 = 0; a2 < k; ++a2) {
          f.values[base + pos_of[a1] * k + pos_of[a2]] = code.bits[pos++];
        }
      }
      base += static_cast<std::size_t>(k) * k;
    }
  }
  return f;
}

bool isomorphic(const Fragment& a, const Fragment& b) {
  if (a.k() != b.k()) throw InvalidArgument("isomorphic: fragments differ in size");
  if (!(*a.signature == *b.signature) && a.signature->predicates() != b.signature->predicates()) {
    throw SignatureMismatch("isomorphic: fragments over different predicates");
  }
  auto sorted_codes = [](const Fragment& f) {
    std::vector<std::vector<std::uint8_t>> codes;
    for (auto& c : anonymize(f)) codes.push_back(std::move(c.bits));
    std::sort(codes.begin(), codes.end());
    return codes;
  };
  return sorted_codes(a) == sorted_codes(b);
}

}  // namespace nmln
