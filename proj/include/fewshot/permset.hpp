#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fewshot {

using Permutation = std::vector<int>;

// The jigsaw label space: an ordered set of tile permutations chosen greedily
// for large pairwise Hamming distance, identity first.
struct PermutationSet {
    int n_elements = 0;
    std::vector<Permutation> perms;
    int min_hamming = 0;
    double mean_hamming = 0.0;

    long size() const { return static_cast<long>(perms.size()); }
};

int hamming(const Permutation& p, const Permutation& q);

bool is_bijection(const Permutation& p);

// Recomputes the minimum / mean pairwise Hamming distance from scratch.
int min_pairwise_hamming(const std::vector<Permutation>& perms);
double mean_pairwise_hamming(const std::vector<Permutation>& perms);

// Greedy max-min construction. Starts from the identity; each round adds the
// candidate maximizing the minimum Hamming distance to the selected set,
// breaking ties by maximum mean distance, then lexicographically. With
// exhaustive=false and n_elements > 6 the candidate pool is a seeded sample
// of `sample_size` permutations plus near-winners kept from earlier rounds;
// otherwise all n! permutations are scored.
PermutationSet generate_permutation_set(int n_elements, long set_size,
                                        bool exhaustive = false, uint64_t seed = 0,
                                        long sample_size = 100000);

// JSON round-trip: {"n": ..., "perms": [[...]], "min_hamming": ...}. Loading
// validates bijections, uniqueness, and the stored min_hamming.
void save_permutation_set(const PermutationSet& set, const std::string& path);
PermutationSet load_permutation_set(const std::string& path);

}  // namespace fewshot
