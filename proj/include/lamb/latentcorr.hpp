#pragma once

// Conditionally standardized residuals U_ij = (X_ij - theta_ij) / sqrt(theta_ij (1 - theta_ij)),
// sample latent correlations and their CLT-based one-sided p-values.

#include "lamb/dataset.hpp"
#include "lamb/matrix.hpp"
#include "lamb/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

namespace lamb {

/// Sorted, duplicate-free set of variable indices.
using IndexSet = std::vector<std::size_t>;

inline IndexSet make_index_set(std::vector<std::size_t> v) {
	std::sort(v.begin(), v.end());
	v.erase(std::unique(v.begin(), v.end()), v.end());
	return v;
}

inline bool contains(const IndexSet& set, std::size_t j) { return std::binary_search(set.begin(), set.end(), j); }

class StandardizedMatrix {
public:
	StandardizedMatrix() = default;

	/// Wraps precomputed values (e.g. synthetic test matrices).
	static StandardizedMatrix from_values(ColMatrix u) {
		for (double v : u.values())
			if (!std::isfinite(v))
				throw std::invalid_argument("standardized values must be finite");
		StandardizedMatrix m;
		m.u_ = std::move(u);
		return m;
	}

	std::size_t n() const noexcept { return u_.rows(); }
	std::size_t d() const noexcept { return u_.cols(); }
	double operator()(std::size_t i, std::size_t j) const noexcept { return u_(i, j); }
	std::span<const double> col(std::size_t j) const noexcept { return u_.col(j); }
	const ColMatrix& values() const noexcept { return u_; }

private:
	friend StandardizedMatrix standardize(const BinaryDataset&, const ColMatrix&);
	ColMatrix u_;
};

/// U_ij from the data and a threshold matrix strictly inside (0,1).
inline StandardizedMatrix standardize(const BinaryDataset& ds, const ColMatrix& theta) {
	if (theta.rows() != ds.n() || theta.cols() != ds.d())
		throw std::invalid_argument("standardize: theta is " + std::to_string(theta.rows()) + "x" +
		                            std::to_string(theta.cols()) + ", data is " + std::to_string(ds.n()) + "x" +
		                            std::to_string(ds.d()));
	StandardizedMatrix out;
	out.u_ = ColMatrix(ds.n(), ds.d());
	for (std::size_t j = 0; j < ds.d(); ++j) {
		const auto th = theta.col(j);
		auto u = out.u_.col(j);
		for (std::size_t i = 0; i < ds.n(); ++i) {
			const double t = th[i];
			if (!(t > 0.0 && t < 1.0))
				throw std::invalid_argument("standardize: theta must lie strictly inside (0,1)");
			u[i] = -std::sqrt(t / (1.0 - t));
		}
		for (Index i : ds.column(j))
			u[i] = std::sqrt((1.0 - th[i]) / th[i]);
	}
	return out;
}

struct TestStatistic {
	double psi_hat = 0.0;
	double sigma_hat = 0.0;
	double z = 0.0;
	double pvalue = 1.0;
	std::size_t j = 0;
	IndexSet set;
};

/// One-sided p-value 1 - Phi(sqrt(n) psi / sigma); the sigma = 0 case gives
/// 0 for positive psi and 1 otherwise.
inline void finish_statistic(TestStatistic& s, std::size_t n) {
	if (s.sigma_hat > 0.0) {
		s.z = std::sqrt(static_cast<double>(n)) * s.psi_hat / s.sigma_hat;
		s.pvalue = normal_sf(s.z);
	} else if (s.psi_hat > 0.0) {
		s.z = std::numeric_limits<double>::infinity();
		s.pvalue = 0.0;
	} else {
		s.z = s.psi_hat < 0.0 ? -std::numeric_limits<double>::infinity() : 0.0;
		s.pvalue = 1.0;
	}
}

/// Precomputes row sums of U over a set A so that every variable can be
/// tested against A \ {j} in O(n).
class SetTester {
public:
	SetTester(const StandardizedMatrix& u, IndexSet set) : u_(&u), set_(std::move(set)), row_sum_(u.n(), 0.0) {
		if (set_.empty())
			throw std::invalid_argument("test set must be nonempty");
		for (std::size_t k : set_) {
			if (k >= u.d())
				throw std::out_of_range("test set index " + std::to_string(k) + " out of range");
			const auto col = u.col(k);
			for (std::size_t i = 0; i < u.n(); ++i)
				row_sum_[i] += col[i];
		}
	}

	const IndexSet& set() const noexcept { return set_; }

	/// psi_hat(j, A\{j}) and sigma_hat(j, A\{j}) with p-value. Throws when
	/// A\{j} is empty.
	TestStatistic test(std::size_t j) const {
		if (j >= u_->d())
			throw std::out_of_range("variable index " + std::to_string(j) + " out of range");
		const bool self = contains(set_, j);
		const std::size_t m = set_.size() - (self ? 1 : 0);
		if (m == 0)
			throw std::invalid_argument("test set without the tested variable is empty");
		const double inv_m = 1.0 / static_cast<double>(m);
		const auto uj = u_->col(j);
		double psi = 0.0, var = 0.0;
		for (std::size_t i = 0; i < u_->n(); ++i) {
			const double avg = (self ? row_sum_[i] - uj[i] : row_sum_[i]) * inv_m;
			const double prod = uj[i] * avg;
			psi += prod;
			var += prod * prod;
		}
		const double inv_n = 1.0 / static_cast<double>(u_->n());
		TestStatistic s;
		s.j = j;
		s.set = set_;
		s.psi_hat = psi * inv_n;
		s.sigma_hat = std::sqrt(var * inv_n);
		finish_statistic(s, u_->n());
		return s;
	}

private:
	const StandardizedMatrix* u_;
	IndexSet set_;
	std::vector<double> row_sum_;
};

/// (1/n) sum_i U_ij U_ik
inline double pairwise_psi(const StandardizedMatrix& u, std::size_t j, std::size_t k) {
	if (j == k)
		throw std::invalid_argument("pairwise_psi needs two distinct variables");
	if (j >= u.d() || k >= u.d())
		throw std::out_of_range("pairwise_psi: variable index out of range");
	const auto a = u.col(j), b = u.col(k);
	double s = 0.0;
	for (std::size_t i = 0; i < u.n(); ++i)
		s += a[i] * b[i];
	return s / static_cast<double>(u.n());
}

inline TestStatistic test_statistic(const StandardizedMatrix& u, std::size_t j, const IndexSet& set) {
	if (u.n() < 2)
		throw std::invalid_argument("p-values need at least two samples");
	return SetTester(u, make_index_set(set)).test(j);
}

inline double avg_psi(const StandardizedMatrix& u, std::size_t j, const IndexSet& set) {
	return SetTester(u, make_index_set(set)).test(j).psi_hat;
}

inline double sigma_hat(const StandardizedMatrix& u, std::size_t j, const IndexSet& set) {
	return SetTester(u, make_index_set(set)).test(j).sigma_hat;
}

inline TestStatistic pvalue(const StandardizedMatrix& u, std::size_t j, const IndexSet& set) {
	return test_statistic(u, j, set);
}

/// d x d matrix of pairwise psi_hat (diagonal = mean of U_j^2).
inline ColMatrix psi_matrix(const StandardizedMatrix& u) {
	ColMatrix out(u.d(), u.d());
	const double inv_n = 1.0 / static_cast<double>(u.n());
	for (std::size_t j = 0; j < u.d(); ++j)
		for (std::size_t k = j; k < u.d(); ++k) {
			const auto a = u.col(j), b = u.col(k);
			double s = 0.0;
			for (std::size_t i = 0; i < u.n(); ++i)
				s += a[i] * b[i];
			out(j, k) = out(k, j) = s * inv_n;
		}
	return out;
}

inline void write_psi_csv(const ColMatrix& psi, const std::vector<std::string>& labels, std::ostream& out) {
	out.precision(17);
	out << "";
	for (const auto& l : labels)
		out << ',' << detail::quote_csv(l);
	out << '\n';
	for (std::size_t j = 0; j < psi.rows(); ++j) {
		out << detail::quote_csv(labels[j]);
		for (std::size_t k = 0; k < psi.cols(); ++k)
			out << ',' << psi(j, k);
		out << '\n';
	}
}

} // namespace lamb
