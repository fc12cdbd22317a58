#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace nmln {

/// Binomial coefficient C(n, k); 0 when k > n.
std::uint64_t binomial(std::size_t n, std::size_t k);

std::uint64_t factorial(std::size_t k);

/// All k-subsets of {0..n-1}, each sorted ascending, in lexicographic order.
std::vector<std::vector<int>> k_subsets(int n, int k);

/// Advances `subset` (sorted, values < n) to the next k-subset in lexicographic
/// order. Returns false once the last subset has been passed.
bool next_subset(std::span<int> subset, int n);

/// Permutations of {0..k-1} in lexicographic order. The table is computed once
/// per k and shared.
const std::vector<std::vector<int>>& permutations(int k);

}  // namespace nmln
