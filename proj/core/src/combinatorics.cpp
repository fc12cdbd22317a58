#include "nmln/combinatorics.hpp"

#include <algorithm>
#include <array>
#include <mutex>
#include <numeric>

#include "nmln/errors.hpp"

namespace nmln {

std::uint64_t binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t result = 1;
  for (std::size_t i = 1; i <= k; ++i) {
    result = result * (n - k + i) / i;
  }
  return result;
}

std::uint64_t factorial(std::size_t k) {
  std::uint64_t result = 1;
  for (std::size_t i = 2; i <= k; ++i) result *= i;
  return result;
}

bool next_subset(std::span<int> subset, int n) {
  const int k = static_cast<int>(subset.size());
  int i = k - 1;
  while (i >= 0 && subset[i] == n - k + i) --i;
  if (i < 0) return false;
  ++subset[i];
  for (int j = i + 1; j < k; ++j) subset[j] = subset[j - 1] + 1;
  return true;
}

std::vector<std::vector<int>> k_subsets(int n, int k) {
  if (k < 0 || k > n) throw InvalidArgument("k_subsets: k must lie in [0, n]");
  std::vector<std::vector<int>> out;
  std::vector<int> current(k);
  std::iota(current.begin(), current.end(), 0);
  do {
    out.push_back(current);
  } while (next_subset(current, n));
  return out;
}

const std::vector<std::vector<int>>& permutations(int k) {
  constexpr int kMaxK = 10;
  if (k < 0 || k > kMaxK) throw InvalidArgument("permutations: k out of supported range");
  static std::array<std::vector<std::vector<int>>, kMaxK + 1> cache;
  static std::array<std::once_flag, kMaxK + 1> once;
  std::call_once(once[k], [k] {
    std::vector<int> p(k);
    std::iota(p.begin(), p.end(), 0);
    do {
      cache[k].push_back(p);
    } while (std::next_permutation(p.begin(), p.end()));
  });
  return cache[k];
}

}  // namespace nmln
