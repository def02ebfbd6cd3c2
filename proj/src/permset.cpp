#include "fewshot/permset.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <unordered_set>

#include <json.hpp>

#include "fewshot/common.hpp"
#include "fewshot/rng.hpp"

namespace fewshot {

namespace {

using nlohmann::json;

uint64_t factorial_saturating(int n) {
    uint64_t f = 1;
    for (int i = 2; i <= n; ++i) {
        if (f > UINT64_MAX / static_cast<uint64_t>(i)) return UINT64_MAX;
        f *= static_cast<uint64_t>(i);
    }
    return f;
}

std::string key_of(const Permutation& p) {
    std::string k;
    k.reserve(p.size());
    for (int v : p) k.push_back(static_cast<char>(v));
    return k;
}

struct Candidate {
    Permutation perm;
    int min_d = 0;
    long sum_d = 0;
};

void score_candidates(std::vector<Candidate>& pool,
                      const std::vector<Permutation>& selected) {
    const long n = static_cast<long>(pool.size());
#pragma omp parallel for schedule(static) if (n > 256)
    for (long i = 0; i < n; ++i) {
        int mind = std::numeric_limits<int>::max();
        long sum = 0;
        for (const auto& s : selected) {
            const int d = hamming(pool[static_cast<size_t>(i)].perm, s);
            mind = std::min(mind, d);
            sum += d;
        }
        pool[static_cast<size_t>(i)].min_d = mind;
        pool[static_cast<size_t>(i)].sum_d = sum;
    }
}

// (min_d desc, mean_d desc, perm lex asc); order-independent over the pool.
bool better(const Candidate& a, const Candidate& b) {
    if (a.min_d != b.min_d) return a.min_d > b.min_d;
    if (a.sum_d != b.sum_d) return a.sum_d > b.sum_d;
    return a.perm < b.perm;
}

void enumerate_all(int n, std::vector<Permutation>& out) {
    Permutation p(static_cast<size_t>(n));
    std::iota(p.begin(), p.end(), 0);
    do {
        out.push_back(p);
    } while (std::next_permutation(p.begin(), p.end()));
}

}  // namespace

int hamming(const Permutation& p, const Permutation& q) {
    check_arg(p.size() == q.size(), "hamming: length mismatch");
    int d = 0;
    for (size_t i = 0; i < p.size(); ++i) d += (p[i] != q[i]) ? 1 : 0;
    return d;
}

bool is_bijection(const Permutation& p) {
    std::vector<bool> seen(p.size(), false);
    for (int v : p) {
        if (v < 0 || v >= static_cast<int>(p.size()) || seen[static_cast<size_t>(v)])
            return false;
        seen[static_cast<size_t>(v)] = true;
    }
    return true;
}

int min_pairwise_hamming(const std::vector<Permutation>& perms) {
    if (perms.size() < 2) return 0;
    int mind = std::numeric_limits<int>::max();
    for (size_t i = 0; i < perms.size(); ++i)
        for (size_t j = i + 1; j < perms.size(); ++j)
            mind = std::min(mind, hamming(perms[i], perms[j]));
    return mind;
}

double mean_pairwise_hamming(const std::vector<Permutation>& perms) {
    if (perms.size() < 2) return 0.0;
    long sum = 0, pairs = 0;
    for (size_t i = 0; i < perms.size(); ++i)
        for (size_t j = i + 1; j < perms.size(); ++j) {
            sum += hamming(perms[i], perms[j]);
            ++pairs;
        }
    return static_cast<double>(sum) / static_cast<double>(pairs);
}

PermutationSet generate_permutation_set(int n_elements, long set_size, bool exhaustive,
                                        uint64_t seed, long sample_size) {
    check_arg(n_elements >= 1, "generate_permutation_set: n_elements must be >= 1");
    check_arg(set_size >= 1, "generate_permutation_set: set_size must be >= 1");
    const uint64_t total = factorial_saturating(n_elements);
    check_arg(static_cast<uint64_t>(set_size) <= total,
              cat("generate_permutation_set: set_size ", set_size, " exceeds ",
                  n_elements, "!"));

    const bool full_pool = exhaustive || n_elements <= 6;

    Permutation identity(static_cast<size_t>(n_elements));
    std::iota(identity.begin(), identity.end(), 0);

    std::vector<Permutation> selected{identity};
    std::unordered_set<std::string> selected_keys{key_of(identity)};

    std::vector<Permutation> all;
    if (full_pool) enumerate_all(n_elements, all);

    Rng rng = Rng::substream(seed, "permset");
    std::vector<Permutation> carried;  // rejected near-winners from earlier rounds
    std::unordered_set<std::string> carried_keys;

    while (static_cast<long>(selected.size()) < set_size) {
        std::vector<Candidate> pool;
        std::unordered_set<std::string> pool_keys;
        auto add = [&](const Permutation& p) {
            std::string k = key_of(p);
            if (selected_keys.count(k) || pool_keys.count(k)) return;
            pool_keys.insert(std::move(k));
            pool.push_back(Candidate{p, 0, 0});
        };
        if (full_pool) {
            for (const auto& p : all) add(p);
        } else {
            for (const auto& p : carried) add(p);
            for (long i = 0; i < sample_size; ++i) {
                Permutation p = identity;
                rng.shuffle(p);
                add(p);
            }
        }
        check(!pool.empty(), "generate_permutation_set: empty candidate pool");

        score_candidates(pool, selected);
        const Candidate* best = &pool[0];
        for (const auto& c : pool)
            if (better(c, *best)) best = &c;

        if (!full_pool) {
            for (const auto& c : pool) {
                if (c.min_d == best->min_d && c.perm != best->perm) {
                    std::string k = key_of(c.perm);
                    if (!carried_keys.count(k)) {
                        carried_keys.insert(std::move(k));
                        carried.push_back(c.perm);
                    }
                }
            }
        }

        selected.push_back(best->perm);
        selected_keys.insert(key_of(best->perm));
    }

    PermutationSet set;
    set.n_elements = n_elements;
    set.perms = std::move(selected);
    set.min_hamming = min_pairwise_hamming(set.perms);
    set.mean_hamming = mean_pairwise_hamming(set.perms);
    return set;
}

void save_permutation_set(const PermutationSet& set, const std::string& path) {
    json j;
    j["n"] = set.n_elements;
    j["perms"] = set.perms;
    j["min_hamming"] = set.min_hamming;
    std::ofstream out(path);
    check(out.good(), cat("save_permutation_set: cannot open '", path, "'"));
    out << j.dump(1) << "\n";
    check(out.good(), cat("save_permutation_set: write failed for '", path, "'"));
}

PermutationSet load_permutation_set(const std::string& path) {
    std::ifstream in(path);
    check(in.good(), cat("load_permutation_set: cannot open '", path, "'"));
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        fail(cat("load_permutation_set: malformed JSON in '", path, "': ", e.what()));
    }
    PermutationSet set;
    try {
        set.n_elements = j.at("n").get<int>();
        set.perms = j.at("perms").get<std::vector<Permutation>>();
        set.min_hamming = j.at("min_hamming").get<int>();
    } catch (const json::exception& e) {
        fail(cat("load_permutation_set: bad schema in '", path, "': ", e.what()));
    }
    check(set.n_elements >= 1, cat("load_permutation_set: invalid n in '", path, "'"));
    check(!set.perms.empty(), cat("load_permutation_set: empty set in '", path, "'"));
    std::unordered_set<std::string> keys;
    for (size_t i = 0; i < set.perms.size(); ++i) {
        const auto& p = set.perms[i];
        check(static_cast<int>(p.size()) == set.n_elements && is_bijection(p),
              cat("load_permutation_set: row ", i, " of '", path,
                  "' is not a bijection of 0..", set.n_elements - 1));
        check(keys.insert(key_of(p)).second,
              cat("load_permutation_set: duplicate row ", i, " in '", path, "'"));
    }
    const int recomputed = min_pairwise_hamming(set.perms);
    check(recomputed == set.min_hamming,
          cat("load_permutation_set: stored min_hamming ", set.min_hamming,
              " disagrees with recomputed ", recomputed, " in '", path, "'"));
    set.mean_hamming = mean_pairwise_hamming(set.perms);
    return set;
}

}  // namespace fewshot
