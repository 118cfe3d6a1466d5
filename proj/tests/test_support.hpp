#pragma once

#include "lamb/lamb.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace lamb::testing {

inline std::string data_path(const std::string& name) { return std::string(LAMB_DATA_DIR) + "/" + name; }

inline BinaryDataset toy() { return load_dense_csv(data_path("toy.csv")); }

inline std::size_t col_index(const BinaryDataset& ds, const std::string& label) {
	const auto& l = ds.col_labels();
	return static_cast<std::size_t>(std::find(l.begin(), l.end(), label) - l.begin());
}

/// Two-sided Kolmogorov-Smirnov distance between the sample and a CDF.
template <class Cdf>
double ks_distance(std::vector<double> x, Cdf&& cdf) {
	std::sort(x.begin(), x.end());
	const double n = static_cast<double>(x.size());
	double worst = 0.0;
	for (std::size_t k = 0; k < x.size(); ++k) {
		const double f = cdf(x[k]);
		worst = std::max({worst, std::abs(f - static_cast<double>(k) / n), std::abs(static_cast<double>(k + 1) / n - f)});
	}
	return worst;
}

inline BinaryDataset random_dataset(std::mt19937_64& rng, std::size_t n, std::size_t d, double p) {
	std::bernoulli_distribution bern(p);
	std::vector<Cell> cells;
	for (std::size_t i = 0; i < n; ++i)
		for (std::size_t j = 0; j < d; ++j)
			if (bern(rng))
				cells.emplace_back(i, j);
	return BinaryDataset(detail::numbered_labels(n, "r"), detail::numbered_labels(d, "c"), cells);
}

inline ColMatrix random_matrix(std::mt19937_64& rng, std::size_t n, std::size_t d) {
	std::normal_distribution<double> normal;
	ColMatrix m(n, d);
	for (double& v : m.values())
		v = normal(rng);
	return m;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
	const double n = static_cast<double>(a.size());
	double ma = 0, mb = 0;
	for (std::size_t k = 0; k < a.size(); ++k) {
		ma += a[k];
		mb += b[k];
	}
	ma /= n;
	mb /= n;
	double sab = 0, saa = 0, sbb = 0;
	for (std::size_t k = 0; k < a.size(); ++k) {
		sab += (a[k] - ma) * (b[k] - mb);
		saa += (a[k] - ma) * (a[k] - ma);
		sbb += (b[k] - mb) * (b[k] - mb);
	}
	return sab / std::sqrt(saa * sbb);
}

} // namespace lamb::testing
