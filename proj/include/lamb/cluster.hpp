#pragma once

// Baseline set detection: distances between binary columns and
// average-linkage agglomerative clustering (nearest-neighbour chain).

#include "lamb/dataset.hpp"
#include "lamb/latentcorr.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace lamb {

enum class DistanceKind { l1, l2, binary, correlation };

inline std::string to_string(DistanceKind k) {
	switch (k) {
	case DistanceKind::l1: return "l1";
	case DistanceKind::l2: return "l2";
	case DistanceKind::binary: return "binary";
	case DistanceKind::correlation: return "correlation";
	}
	return "?";
}

inline DistanceKind parse_distance_kind(std::string_view s) {
	if (s == "l1")
		return DistanceKind::l1;
	if (s == "l2")
		return DistanceKind::l2;
	if (s == "binary")
		return DistanceKind::binary;
	if (s == "correlation")
		return DistanceKind::correlation;
	throw std::invalid_argument("unknown distance '" + std::string(s) + "'");
}

namespace detail {

/// Distance from column sums s_j, s_k, co-occurrence c and sample size n.
inline double distance_from_counts(DistanceKind kind, double n, double sj, double sk, double c) {
	switch (kind) {
	case DistanceKind::l1: return sj + sk - 2.0 * c;
	case DistanceKind::l2: return std::sqrt(sj + sk - 2.0 * c);
	case DistanceKind::binary:
		return c > 0.0 ? sj * sk / c : std::numeric_limits<double>::infinity();
	case DistanceKind::correlation: {
		const double denom = std::sqrt(sj * (n - sj) * sk * (n - sk));
		const double r = denom > 0.0 ? (n * c - sj * sk) / denom : 0.0;
		return std::sqrt(std::max(0.0, 2.0 * (1.0 - r)));
	}
	}
	return 0.0;
}

inline std::vector<std::vector<std::uint64_t>> column_bitsets(const BinaryDataset& ds) {
	const std::size_t words = (ds.n() + 63) / 64;
	std::vector<std::vector<std::uint64_t>> bits(ds.d(), std::vector<std::uint64_t>(words, 0));
	for (std::size_t j = 0; j < ds.d(); ++j)
		for (Index i : ds.column(j))
			bits[j][i / 64] |= std::uint64_t{1} << (i % 64);
	return bits;
}

} // namespace detail

/// Pearson correlation of two binary columns.
inline double column_correlation(const BinaryDataset& ds, std::size_t j, std::size_t k) {
	const double n = static_cast<double>(ds.n());
	const double sj = static_cast<double>(ds.column_sum(j)), sk = static_cast<double>(ds.column_sum(k));
	std::size_t c = 0;
	for (Index i : ds.column(j))
		c += ds.get(i, k) ? 1 : 0;
	const double denom = std::sqrt(sj * (n - sj) * sk * (n - sk));
	return denom > 0.0 ? (n * static_cast<double>(c) - sj * sk) / denom : 0.0;
}

/// Distance between columns j and k. `binary` returns +inf when the two
/// columns never co-occur.
inline double distance(const BinaryDataset& ds, DistanceKind kind, std::size_t j, std::size_t k) {
	if (j == k)
		throw std::invalid_argument("distance needs two distinct columns");
	std::size_t c = 0;
	for (Index i : ds.column(j))
		c += ds.get(i, k) ? 1 : 0;
	return detail::distance_from_counts(kind, static_cast<double>(ds.n()), static_cast<double>(ds.column_sum(j)),
	                                    static_cast<double>(ds.column_sum(k)), static_cast<double>(c));
}

/// Condensed upper-triangular distance matrix: entry for j < k at
/// j*d - j*(j+1)/2 + (k - j - 1).
class CondensedDistances {
public:
	explicit CondensedDistances(std::size_t d) : d_(d), data_(d * (d - (d > 0 ? 1 : 0)) / 2) {}
	std::size_t size() const noexcept { return d_; }
	double& at(std::size_t j, std::size_t k) noexcept { return data_[offset(j, k)]; }
	double at(std::size_t j, std::size_t k) const noexcept { return data_[offset(j, k)]; }

private:
	std::size_t offset(std::size_t j, std::size_t k) const noexcept {
		if (j > k)
			std::swap(j, k);
		return j * d_ - j * (j + 1) / 2 + (k - j - 1);
	}
	std::size_t d_;
	std::vector<double> data_;
};

inline CondensedDistances distance_matrix(const BinaryDataset& ds, DistanceKind kind) {
	const auto bits = detail::column_bitsets(ds);
	CondensedDistances out(ds.d());
	const double n = static_cast<double>(ds.n());
	for (std::size_t j = 0; j < ds.d(); ++j) {
		const double sj = static_cast<double>(ds.column_sum(j));
		for (std::size_t k = j + 1; k < ds.d(); ++k) {
			std::size_t c = 0;
			for (std::size_t w = 0; w < bits[j].size(); ++w)
				c += static_cast<std::size_t>(std::popcount(bits[j][w] & bits[k][w]));
			out.at(j, k) = detail::distance_from_counts(kind, n, sj, static_cast<double>(ds.column_sum(k)),
			                                            static_cast<double>(c));
		}
	}
	return out;
}

struct Merge {
	std::size_t a = 0; // node ids: 0..d-1 leaves, d+k the k-th merge
	std::size_t b = 0;
	double height = 0.0;
	std::size_t size = 0;
};

/// Average-linkage dendrogram (d - 1 merges, ordered by height).
inline std::vector<Merge> average_linkage(CondensedDistances dist) {
	const std::size_t d = dist.size();
	std::vector<std::size_t> size(d, 1);
	std::vector<bool> active(d, true);
	struct RawMerge {
		std::size_t a, b;
		double h;
	};
	std::vector<RawMerge> raw;
	raw.reserve(d > 0 ? d - 1 : 0);
	std::vector<std::size_t> chain;
	std::size_t remaining = d;

	while (remaining > 1) {
		if (chain.empty()) {
			for (std::size_t x = 0; x < d; ++x)
				if (active[x]) {
					chain.push_back(x);
					break;
				}
		}
		const std::size_t a = chain.back();
		const std::size_t prev = chain.size() >= 2 ? chain[chain.size() - 2] : d;
		std::size_t best = d;
		double best_d = std::numeric_limits<double>::infinity();
		for (std::size_t x = 0; x < d; ++x) {
			if (!active[x] || x == a)
				continue;
			const double v = dist.at(a, x);
			if (best == d || v < best_d) {
				best = x;
				best_d = v;
			}
		}
		if (prev != d && !(dist.at(a, prev) > best_d))
			best = prev;

		if (best != prev) {
			chain.push_back(best);
			continue;
		}
		chain.pop_back();
		chain.pop_back();
		const std::size_t keep = std::min(a, best), drop = std::max(a, best);
		raw.push_back({keep, drop, dist.at(a, best)});
		const double wk = static_cast<double>(size[keep]), wd = static_cast<double>(size[drop]);
		for (std::size_t x = 0; x < d; ++x) {
			if (!active[x] || x == keep || x == drop)
				continue;
			const double dk = dist.at(keep, x), dd = dist.at(drop, x);
			dist.at(keep, x) = (std::isinf(dk) || std::isinf(dd)) ? std::numeric_limits<double>::infinity()
			                                                       : (wk * dk + wd * dd) / (wk + wd);
		}
		size[keep] += size[drop];
		active[drop] = false;
		--remaining;
	}

	std::stable_sort(raw.begin(), raw.end(), [](const RawMerge& x, const RawMerge& y) { return x.h < y.h; });

	// Relabel slot indices into dendrogram node ids.
	std::vector<std::size_t> parent(d);
	for (std::size_t x = 0; x < d; ++x)
		parent[x] = x;
	auto find = [&](std::size_t x) {
		while (parent[x] != x)
			x = parent[x] = parent[parent[x]];
		return x;
	};
	std::vector<std::size_t> node_of(d), root_size(d, 1);
	for (std::size_t x = 0; x < d; ++x)
		node_of[x] = x;
	std::vector<Merge> merges;
	merges.reserve(raw.size());
	for (std::size_t k = 0; k < raw.size(); ++k) {
		const std::size_t ra = find(raw[k].a), rb = find(raw[k].b);
		Merge m;
		m.a = std::min(node_of[ra], node_of[rb]);
		m.b = std::max(node_of[ra], node_of[rb]);
		m.height = raw[k].h;
		m.size = root_size[ra] + root_size[rb];
		parent[rb] = ra;
		root_size[ra] = m.size;
		node_of[ra] = d + k;
		merges.push_back(m);
	}
	return merges;
}

/// Leaves under dendrogram node `node`.
inline IndexSet cluster_members(const std::vector<Merge>& merges, std::size_t d, std::size_t node) {
	IndexSet out;
	std::vector<std::size_t> stack{node};
	while (!stack.empty()) {
		const std::size_t x = stack.back();
		stack.pop_back();
		if (x < d) {
			out.push_back(x);
		} else {
			stack.push_back(merges[x - d].a);
			stack.push_back(merges[x - d].b);
		}
	}
	std::sort(out.begin(), out.end());
	return out;
}

/// Average-linkage clustering, then the cluster (size >= 2, any height)
/// whose size is closest to `target_size`; ties go to the lowest merge.
inline IndexSet baseline_cluster(const BinaryDataset& ds, DistanceKind kind, std::size_t target_size) {
	if (ds.d() < 2)
		throw std::invalid_argument("baseline clustering needs at least two columns");
	const auto merges = average_linkage(distance_matrix(ds, kind));
	std::size_t best = 0;
	std::size_t best_gap = std::numeric_limits<std::size_t>::max();
	for (std::size_t k = 0; k < merges.size(); ++k) {
		const std::size_t s = merges[k].size;
		const std::size_t gap = s > target_size ? s - target_size : target_size - s;
		if (gap < best_gap) {
			best_gap = gap;
			best = k;
		}
	}
	return cluster_members(merges, ds.d(), ds.d() + best);
}

} // namespace lamb
