#pragma once

// Iterative testing search for coherent sets. Starting from A_0 = {seed},
// every variable j is tested for positive average latent correlation with
// A_t \ {j}; the Benjamini-Yekutieli rejections form A_{t+1}. The search
// stops at a fixed point, an empty set, a revisited set (cycle) or the
// iteration cap.

#include "lamb/latentcorr.hpp"
#include "lamb/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace lamb {

/// Benjamini-Yekutieli step-up procedure at FDR level q. Returns the
/// rejected indices (sorted).
inline IndexSet by_reject(std::span<const double> pvalues, double q) {
	if (!(q > 0.0 && q < 1.0))
		throw std::invalid_argument("FDR level q must lie in (0,1)");
	for (double p : pvalues)
		if (!(p >= 0.0 && p <= 1.0))
			throw std::invalid_argument("p-values must lie in [0,1]");
	const std::size_t d = pvalues.size();
	if (d == 0)
		return {};

	std::vector<std::size_t> order(d);
	std::iota(order.begin(), order.end(), 0);
	std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pvalues[a] < pvalues[b]; });

	double harmonic = 0.0;
	for (std::size_t i = 1; i <= d; ++i)
		harmonic += 1.0 / static_cast<double>(i);
	const double slope = q / (static_cast<double>(d) * harmonic);

	std::size_t k_star = 0;
	for (std::size_t k = d; k >= 1; --k)
		if (pvalues[order[k - 1]] <= static_cast<double>(k) * slope) {
			k_star = k;
			break;
		}
	if (k_star == 0)
		return {};
	const double cutoff = pvalues[order[k_star - 1]];
	IndexSet out;
	for (std::size_t j = 0; j < d; ++j)
		if (pvalues[j] <= cutoff)
			out.push_back(j);
	return out;
}

struct StepResult {
	IndexSet next;
	std::vector<double> pvalues; // one per variable
};

/// One testing sweep against A. For a singleton A = {j}, variable j itself
/// gets p-value 1.
inline StepResult step_detail(const StandardizedMatrix& u, const IndexSet& set, double q) {
	if (set.empty())
		throw std::invalid_argument("step needs a nonempty set");
	const SetTester tester(u, set);
	StepResult r;
	r.pvalues.resize(u.d());
	for (std::size_t j = 0; j < u.d(); ++j) {
		if (set.size() == 1 && set.front() == j)
			r.pvalues[j] = 1.0;
		else
			r.pvalues[j] = tester.test(j).pvalue;
	}
	r.next = by_reject(r.pvalues, q);
	return r;
}

inline IndexSet step(const StandardizedMatrix& u, const IndexSet& set, double q) {
	return step_detail(u, set, q).next;
}

enum class StopReason { fixed_point, cycle, empty, max_iter };

inline std::string to_string(StopReason r) {
	switch (r) {
	case StopReason::fixed_point: return "fixed_point";
	case StopReason::cycle: return "cycle";
	case StopReason::empty: return "empty";
	case StopReason::max_iter: return "max_iter";
	}
	return "?";
}

struct SearchOutcome {
	std::size_t seed = 0;
	std::vector<IndexSet> trajectory; // A_0 ... A_T
	IndexSet terminal;
	StopReason reason = StopReason::max_iter;
	int iterations = 0;
	std::vector<double> terminal_pvalues; // from the sweep that produced A_T
};

struct IndexSetHash {
	std::size_t operator()(const IndexSet& s) const noexcept {
		std::size_t h = 1469598103934665603ull;
		for (std::size_t v : s) {
			h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
			h *= 1099511628211ull;
		}
		return h ^ s.size();
	}
};

inline SearchOutcome search(const StandardizedMatrix& u, std::size_t seed, double q, int max_iter) {
	if (seed >= u.d())
		throw std::out_of_range("seed " + std::to_string(seed) + " out of range");
	SearchOutcome out;
	out.seed = seed;
	out.trajectory.push_back({seed});
	std::unordered_set<IndexSet, IndexSetHash> seen{out.trajectory.front()};

	for (int t = 0; t < max_iter; ++t) {
		auto r = step_detail(u, out.trajectory.back(), q);
		out.iterations = t + 1;
		const bool same = r.next == out.trajectory.back();
		const bool revisit = !same && seen.contains(r.next);
		out.terminal_pvalues = std::move(r.pvalues);
		out.trajectory.push_back(r.next);
		if (r.next.empty()) {
			out.reason = StopReason::empty;
			out.terminal.clear();
			return out;
		}
		if (same) {
			out.reason = StopReason::fixed_point;
			out.terminal = std::move(r.next);
			return out;
		}
		if (revisit) {
			out.reason = StopReason::cycle;
			out.terminal = std::move(r.next);
			return out;
		}
		seen.insert(std::move(r.next));
	}
	out.reason = StopReason::max_iter;
	out.terminal = out.trajectory.back();
	return out;
}

struct CoherentSetResult {
	IndexSet members;
	std::map<std::size_t, double> member_pvalues;
	std::size_t seeds_reaching = 0;
	StopReason reason = StopReason::fixed_point;
	std::vector<std::size_t> seeds;
};

struct MineOptions {
	double q = 0.05;
	int max_iter = 100;
	unsigned threads = 1;
};

/// Canonical output order: most-reached first, then larger sets, then
/// lexicographic members.
inline void sort_results(std::vector<CoherentSetResult>& results) {
	std::sort(results.begin(), results.end(), [](const CoherentSetResult& a, const CoherentSetResult& b) {
		if (a.seeds_reaching != b.seeds_reaching)
			return a.seeds_reaching > b.seeds_reaching;
		if (a.members.size() != b.members.size())
			return a.members.size() > b.members.size();
		return a.members < b.members;
	});
}

/// Runs one search per seed and merges identical terminal sets. Empty and
/// singleton terminals are dropped.
inline std::vector<CoherentSetResult> mine_all(const StandardizedMatrix& u, const IndexSet& seeds,
                                               const MineOptions& opts = {}) {
	if (seeds.empty())
		throw std::invalid_argument("mine_all needs at least one seed");
	std::vector<SearchOutcome> outcomes(seeds.size());
	parallel_for(seeds.size(), opts.threads,
	             [&](std::size_t k) { outcomes[k] = search(u, seeds[k], opts.q, opts.max_iter); });

	std::map<IndexSet, CoherentSetResult> merged;
	for (auto& o : outcomes) {
		if (o.terminal.size() < 2)
			continue;
		auto [it, inserted] = merged.try_emplace(o.terminal);
		auto& r = it->second;
		if (inserted) {
			r.members = o.terminal;
			r.reason = o.reason;
			for (std::size_t j : o.terminal)
				r.member_pvalues[j] = o.terminal_pvalues[j];
		}
		++r.seeds_reaching;
		r.seeds.push_back(o.seed);
	}
	std::vector<CoherentSetResult> results;
	results.reserve(merged.size());
	for (auto& [key, r] : merged)
		results.push_back(std::move(r));
	sort_results(results);
	return results;
}

inline std::vector<CoherentSetResult> mine_all(const StandardizedMatrix& u, const MineOptions& opts = {}) {
	IndexSet seeds(u.d());
	std::iota(seeds.begin(), seeds.end(), 0);
	return mine_all(u, seeds, opts);
}

inline double jaccard(const IndexSet& a, const IndexSet& b) {
	if (a.empty() && b.empty())
		return 1.0;
	std::size_t inter = 0;
	auto ia = a.begin();
	auto ib = b.begin();
	while (ia != a.end() && ib != b.end()) {
		if (*ia < *ib)
			++ia;
		else if (*ib < *ia)
			++ib;
		else {
			++inter;
			++ia;
			++ib;
		}
	}
	return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

/// Greedy grouping by Jaccard overlap with each group's representative (its
/// most-reached set). Returns one representative per group with the group's
/// seed counts folded in.
inline std::vector<CoherentSetResult> dedup(std::vector<CoherentSetResult> results, double jaccard_threshold) {
	if (!(jaccard_threshold > 0.0 && jaccard_threshold <= 1.0))
		throw std::invalid_argument("Jaccard threshold must lie in (0,1]");
	sort_results(results);
	std::vector<CoherentSetResult> groups;
	for (auto& r : results) {
		auto it = std::find_if(groups.begin(), groups.end(), [&](const CoherentSetResult& g) {
			return jaccard(g.members, r.members) >= jaccard_threshold;
		});
		if (it == groups.end()) {
			groups.push_back(std::move(r));
		} else {
			it->seeds_reaching += r.seeds_reaching;
			it->seeds.insert(it->seeds.end(), r.seeds.begin(), r.seeds.end());
			std::sort(it->seeds.begin(), it->seeds.end());
		}
	}
	sort_results(groups);
	return groups;
}

struct Neighborhood {
	IndexSet target;
	IndexSet neighbors; // raw rejection set of one sweep against the target
	std::vector<double> pvalues;
};

/// Single testing sweep against a fixed target set.
inline Neighborhood neighborhood(const StandardizedMatrix& u, const IndexSet& target, double q) {
	auto r = step_detail(u, make_index_set(target), q);
	return {make_index_set(target), std::move(r.next), std::move(r.pvalues)};
}

} // namespace lamb
