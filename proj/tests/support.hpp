#pragma once

// Small builders shared by the unit and acceptance tests.

#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include <nmln/relational.hpp>
#include <nmln/rng.hpp>

namespace nmln::testing {

inline SignaturePtr make_signature(int n, std::vector<Predicate> predicates) {
  std::vector<std::string> constants;
  for (int i = 0; i < n; ++i) constants.push_back("c" + std::to_string(i));
  return std::make_shared<const Signature>(std::move(constants), std::move(predicates));
}

/// sm/1 and fr/2 over n constants.
inline SignaturePtr smokers_signature(int n) {
  return make_signature(n, {{"sm", 1}, {"fr", 2}});
}

inline World random_world(const SignaturePtr& sig, Rng& rng, double p_true = 0.5) {
  World w(sig);
  for (AtomIndex a = 0; a < w.size(); ++a) w.set(a, uniform01(rng) < p_true);
  return w;
}

/// The world obtained by renaming every constant c to perm[c].
inline World permute_world(const World& world, const std::vector<ConstantId>& perm) {
  World out(world.signature_ptr());
  const Signature& sig = world.signature();
  for (AtomIndex a = 0; a < world.size(); ++a) {
    GroundAtom atom = sig.atom(a);
    for (int i = 0; i < atom.arity; ++i) atom.args[i] = perm[atom.args[i]];
    out.set(atom, world.get(a));
  }
  return out;
}

inline std::vector<ConstantId> random_permutation(int n, Rng& rng) {
  std::vector<ConstantId> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = n - 1; i > 0; --i) {
    std::swap(perm[i], perm[uniform_below(rng, static_cast<std::uint64_t>(i) + 1)]);
  }
  return perm;
}

}  // namespace nmln::testing
