#pragma once

// Estimation of the threshold matrix under theta_ij = 1 - exp(-tau_i alpha_j).
//
// The default estimator alternates two exact coordinate solves:
//   * tau-step: each tau_i maximizes its row log-likelihood
//       l_i(t) = sum_j [x_ij log(1 - e^{-t a_j}) - (1 - x_ij) t a_j]
//     over [tau_min, tau_max] (strictly concave, one root of l_i').
//   * alpha-step: each alpha_j solves the moment constraint
//       xbar_j = (1/n) sum_i (1 - e^{-tau_i a_j})      (strictly increasing).
// The (tau, alpha) -> (c tau, alpha / c) invariance is fixed by rescaling the
// interior taus to mean one after every tau-step.
//
// The optional gamma-prior estimator inverts g(a) = 1 - (beta/(beta+a))^zeta
// for alpha and takes tau_i as the posterior mean under Gamma(zeta, beta).

#include "lamb/dataset.hpp"
#include "lamb/matrix.hpp"
#include "lamb/numerics.hpp"
#include "lamb/parallel.hpp"

#include <boost/math/distributions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace lamb {

struct TauBounds {
	double min = 1e-6;
	double max = 1e4;
};

struct ThresholdFit {
	std::vector<double> alpha; // per variable
	std::vector<double> tau;   // per sample
	double eps_theta = 0.0;    // clamp used by theta(); 0 means 1/(2n)
	bool converged = false;
	int iterations = 0;
	double constraint_residual = 0.0;
	double tol = 0.0;

	std::size_t n() const noexcept { return tau.size(); }
	std::size_t d() const noexcept { return alpha.size(); }

	double clamp_eps() const noexcept {
		return eps_theta > 0.0 ? eps_theta : 0.5 / static_cast<double>(std::max<std::size_t>(n(), 1));
	}

	/// Clamped estimate of theta_ij.
	double theta(std::size_t i, std::size_t j) const noexcept {
		const double eps = clamp_eps();
		const double raw = -std::expm1(-tau[i] * alpha[j]);
		return std::clamp(raw, eps, 1.0 - eps);
	}
};

/// n x d matrix of 1 - exp(-tau_i alpha_j), clamped into [eps, 1 - eps].
inline ColMatrix theta_matrix(const ThresholdFit& fit, double eps_theta) {
	if (!(eps_theta > 0.0 && eps_theta < 0.5))
		throw std::invalid_argument("eps_theta must lie in (0, 0.5)");
	ColMatrix theta(fit.n(), fit.d());
	for (std::size_t j = 0; j < fit.d(); ++j) {
		auto col = theta.col(j);
		for (std::size_t i = 0; i < fit.n(); ++i)
			col[i] = std::clamp(-std::expm1(-fit.tau[i] * fit.alpha[j]), eps_theta, 1.0 - eps_theta);
	}
	return theta;
}

inline ColMatrix theta_matrix(const ThresholdFit& fit) { return theta_matrix(fit, fit.clamp_eps()); }

/// Starting values: alpha0_j = -log(1 - xbar_j), the exact solution when
/// every tau is one, and tau0_i = (row mean) / (grand mean), clamped.
inline std::pair<std::vector<double>, std::vector<double>> init_params(const ColumnStats& stats,
                                                                       const BinaryDataset& ds,
                                                                       TauBounds bounds = {}) {
	std::vector<double> alpha(stats.xbar.size());
	for (std::size_t j = 0; j < alpha.size(); ++j)
		alpha[j] = -std::log1p(-stats.xbar[j]);

	std::vector<double> tau(ds.n(), 1.0);
	std::vector<double> row_count(ds.n(), 0.0);
	for (std::size_t j = 0; j < ds.d(); ++j)
		for (Index i : ds.column(j))
			row_count[i] += 1.0;
	double total = 0.0;
	for (double r : row_count)
		total += r;
	const double grand = total / static_cast<double>(ds.n());
	if (grand > 0.0)
		for (std::size_t i = 0; i < ds.n(); ++i)
			tau[i] = std::clamp(row_count[i] / grand, bounds.min, bounds.max);
	return {std::move(alpha), std::move(tau)};
}

namespace detail {

inline void check_alpha(std::span<const double> alpha) {
	for (double a : alpha)
		if (!(a > 0.0) || !std::isfinite(a))
			throw std::invalid_argument("alpha entries must be finite and positive");
}

/// l'(t) and l''(t) for a row given its ones and sum of alpha over zeros.
inline std::pair<double, double> tau_score(double t, std::span<const double> alpha, std::span<const Index> ones,
                                           double zero_alpha_sum) {
	double score = -zero_alpha_sum;
	double curvature = 0.0;
	for (Index j : ones) {
		const double a = alpha[j];
		const double u = t * a;
		if (u > 700.0)
			continue;
		const double em = -std::expm1(-u); // 1 - e^{-u}
		score += a * std::exp(-u) / em;
		curvature -= a * a * std::exp(-u) / (em * em);
	}
	return {score, curvature};
}

/// Row solve with the ones given as column indices.
inline double solve_tau_sparse(std::span<const double> alpha, std::span<const Index> ones, double alpha_sum,
                               TauBounds bounds, std::optional<double> start = std::nullopt) {
	double zero_sum = alpha_sum;
	for (Index j : ones)
		zero_sum -= alpha[j];
	if (ones.empty())
		return bounds.min;
	if (ones.size() == alpha.size())
		return bounds.max;
	zero_sum = std::max(zero_sum, 0.0);

	if (tau_score(bounds.max, alpha, ones, zero_sum).first >= 0.0)
		return bounds.max;
	if (tau_score(bounds.min, alpha, ones, zero_sum).first <= 0.0)
		return bounds.min;

	// Solve in s = log t: the score is monotone in s and far better scaled.
	auto fdf = [&](double s) {
		const double t = std::exp(s);
		auto [f, df] = tau_score(t, alpha, ones, zero_sum);
		return std::pair{f, df * t};
	};
	std::optional<double> s0;
	if (start && *start > bounds.min && *start < bounds.max)
		s0 = std::log(*start);
	const auto root = newton_bisect(fdf, std::log(bounds.min), std::log(bounds.max), 1e-13, s0);
	return std::clamp(std::exp(root.x), bounds.min, bounds.max);
}

} // namespace detail

/// Maximizer over [bounds.min, bounds.max] of the row log-likelihood
/// sum_j [x_j log(1 - e^{-t a_j}) - (1 - x_j) t a_j].
inline double solve_tau(std::span<const double> alpha, std::span<const std::uint8_t> x_row, TauBounds bounds = {}) {
	if (alpha.size() != x_row.size())
		throw std::invalid_argument("solve_tau: alpha and row lengths differ");
	detail::check_alpha(alpha);
	std::vector<Index> ones;
	double alpha_sum = 0.0;
	for (std::size_t j = 0; j < alpha.size(); ++j) {
		alpha_sum += alpha[j];
		if (x_row[j])
			ones.push_back(static_cast<Index>(j));
	}
	return detail::solve_tau_sparse(alpha, ones, alpha_sum, bounds);
}

/// Row log-likelihood l(t) for a 0/1 row.
inline double row_loglik(double t, std::span<const double> alpha, std::span<const std::uint8_t> x_row) {
	double ll = 0.0;
	for (std::size_t j = 0; j < alpha.size(); ++j)
		ll += x_row[j] ? std::log(-std::expm1(-t * alpha[j])) : -t * alpha[j];
	return ll;
}

/// Unique alpha with (1/n) sum_i (1 - e^{-tau_i alpha}) = xbar.
inline double solve_alpha(std::span<const double> tau, double xbar, std::optional<double> start = std::nullopt) {
	if (!(xbar > 0.0 && xbar < 1.0))
		throw std::invalid_argument("solve_alpha: column mean must lie in (0,1), got " + std::to_string(xbar));
	if (tau.empty())
		throw std::invalid_argument("solve_alpha: empty tau");
	for (double t : tau)
		if (!(t > 0.0))
			throw std::invalid_argument("solve_alpha: tau entries must be positive");
	const double inv_n = 1.0 / static_cast<double>(tau.size());
	auto fdf = [&](double a) {
		double h = 0.0, dh = 0.0;
		for (double t : tau) {
			h += -std::expm1(-t * a);
			dh += t * std::exp(-t * a);
		}
		return std::pair{h * inv_n - xbar, dh * inv_n};
	};
	double hi = 1.0;
	while (fdf(hi).first <= 0.0) {
		hi *= 2.0;
		if (hi > 1e300)
			throw NumericalError("solve_alpha: cannot bracket root");
	}
	return newton_bisect(fdf, 0.0, hi, 1e-14, start).x;
}

/// max_j |xbar_j - (1/n) sum_i (1 - e^{-tau_i alpha_j})|
inline double constraint_residual(std::span<const double> alpha, std::span<const double> tau,
                                  std::span<const double> xbar) {
	double worst = 0.0;
	for (std::size_t j = 0; j < alpha.size(); ++j) {
		double m = 0.0;
		for (double t : tau)
			m += -std::expm1(-t * alpha[j]);
		worst = std::max(worst, std::abs(xbar[j] - m / static_cast<double>(tau.size())));
	}
	return worst;
}

struct FitOptions {
	double tol = 1e-8;
	int max_iter = 500;
	TauBounds bounds{};
	double eps_theta = 0.0; // 0 -> 1/(2n)
	unsigned threads = 1;
};

/// Alternating constrained maximum likelihood fit under the empirical prior.
/// Returns converged=false (not an error) if `max_iter` sweeps do not reach
/// a sup-norm parameter change below `tol`.
inline ThresholdFit fit_empirical(const BinaryDataset& ds, const FitOptions& opts = {}) {
	if (ds.d() == 0)
		throw DatasetError("no informative columns");
	if (ds.n() < 2 || ds.d() < 2)
		throw DatasetError("threshold fit needs at least 2 rows and 2 columns");
	const auto stats = column_means(ds);
	auto [alpha, tau] = init_params(stats, ds, opts.bounds);
	const auto rows = ds.rows();
	const std::size_t n = ds.n(), d = ds.d();

	std::vector<bool> interior(n);
	for (std::size_t i = 0; i < n; ++i)
		interior[i] = !rows[i].empty() && rows[i].size() < d;

	ThresholdFit fit;
	fit.tol = opts.tol;
	fit.eps_theta = opts.eps_theta;
	std::vector<double> prev_alpha, prev_tau;
	for (int sweep = 1; sweep <= opts.max_iter; ++sweep) {
		prev_alpha = alpha;
		prev_tau = tau;

		double alpha_sum = 0.0;
		for (double a : alpha)
			alpha_sum += a;
		parallel_for(n, opts.threads, [&](std::size_t i) {
			tau[i] = detail::solve_tau_sparse(alpha, rows[i], alpha_sum, opts.bounds, prev_tau[i]);
		});

		double mean = 0.0;
		std::size_t count = 0;
		for (std::size_t i = 0; i < n; ++i)
			if (interior[i]) {
				mean += tau[i];
				++count;
			}
		if (count > 0 && mean > 0.0) {
			mean /= static_cast<double>(count);
			for (std::size_t i = 0; i < n; ++i)
				if (interior[i])
					tau[i] = std::clamp(tau[i] / mean, opts.bounds.min, opts.bounds.max);
			for (double& a : alpha)
				a *= mean;
		}

		parallel_for(d, opts.threads, [&](std::size_t j) { alpha[j] = solve_alpha(tau, stats.xbar[j], alpha[j]); });

		double change = 0.0;
		for (std::size_t j = 0; j < d; ++j)
			change = std::max(change, std::abs(alpha[j] - prev_alpha[j]));
		for (std::size_t i = 0; i < n; ++i)
			change = std::max(change, std::abs(tau[i] - prev_tau[i]));
		fit.iterations = sweep;
		if (change < opts.tol) {
			fit.converged = true;
			break;
		}
	}
	fit.constraint_residual = constraint_residual(alpha, tau, stats.xbar);
	fit.alpha = std::move(alpha);
	fit.tau = std::move(tau);
	return fit;
}

// ---------------------------------------------------------------------------
// Gamma prior path

struct GammaPrior {
	double zeta = 3.0; // shape
	double beta = 1.0; // rate

	void validate() const {
		if (!(zeta > 0.0) || !(beta > 0.0) || !std::isfinite(zeta) || !std::isfinite(beta))
			throw std::invalid_argument("gamma prior needs zeta > 0 and beta > 0");
	}
	double mean() const noexcept { return zeta / beta; }
	double quantile(double p) const {
		return boost::math::quantile(boost::math::gamma_distribution<double>(zeta, 1.0 / beta), p);
	}
	double log_density(double t) const {
		return zeta * std::log(beta) - std::lgamma(zeta) + (zeta - 1.0) * std::log(t) - beta * t;
	}
};

/// Conditions under which the moment bounds for the gamma model hold
/// (zeta >= 3, beta > 6 max alpha). Returns human-readable warnings.
inline std::vector<std::string> gamma_prior_warnings(const GammaPrior& prior, std::span<const double> alpha) {
	std::vector<std::string> out;
	if (prior.zeta < 3.0)
		out.push_back("gamma prior shape zeta=" + std::to_string(prior.zeta) +
		              " is below 3; moment conditions for the CLT are not guaranteed");
	double amax = 0.0;
	for (double a : alpha)
		amax = std::max(amax, a);
	if (!(prior.beta > 6.0 * amax))
		out.push_back("gamma prior rate beta=" + std::to_string(prior.beta) + " is not above 6 * max alpha = " +
		              std::to_string(6.0 * amax) + "; moment conditions (beta > 6M, zeta >= 3) do not hold");
	return out;
}

/// E[f(tau)] under the gamma prior, by adaptive quadrature.
template <class F>
double gamma_expectation(const GammaPrior& prior, F&& f, double rel_tol = 1e-11) {
	prior.validate();
	auto integrand = [&](double t) { return t > 0.0 ? f(t) * std::exp(prior.log_density(t)) : 0.0; };
	const double mode = std::max(0.0, (prior.zeta - 1.0) / prior.beta);
	double upper = prior.quantile(1.0 - 1e-12);
	double total = mode > 0.0 ? integrate(integrand, 0.0, mode, rel_tol) + integrate(integrand, mode, upper, rel_tol)
	                          : integrate(integrand, 0.0, upper, rel_tol);
	// Extend the range until the tail stops contributing (f may grow).
	for (int k = 0; k < 60; ++k) {
		const double tail = integrate(integrand, upper, 2.0 * upper, rel_tol);
		total += tail;
		upper *= 2.0;
		if (std::abs(tail) <= 1e-15 * std::abs(total))
			return total;
	}
	throw NumericalError("gamma_expectation: expectation does not appear to be finite");
}

/// g^{-1}(xbar) for g(a) = E[1 - e^{-tau a}] = 1 - (beta / (beta + a))^zeta.
inline double alpha_from_mean_gamma(double xbar, const GammaPrior& prior) {
	if (!(xbar > 0.0 && xbar < 1.0))
		throw std::invalid_argument("column mean must lie in (0,1)");
	return prior.beta * std::expm1(-std::log1p(-xbar) / prior.zeta);
}

namespace detail {

inline double posterior_mean_tau_sparse(std::span<const double> alpha, std::span<const Index> ones,
                                        double alpha_sum, const GammaPrior& prior) {
	double zero_sum = alpha_sum;
	for (Index j : ones)
		zero_sum -= alpha[j];
	zero_sum = std::max(zero_sum, 0.0);

	// Work in s = log t, where the integrand t * kernel(t) is smooth and
	// unimodal even for zeta < 1.
	auto h = [&](double s) {
		const double t = std::exp(s);
		double v = prior.zeta * s - (prior.beta + zero_sum) * t;
		for (Index j : ones)
			v += std::log(-std::expm1(-t * alpha[j]));
		return v;
	};
	auto fdf = [&](double s) {
		const double t = std::exp(s);
		auto [score, curv] = tau_score(t, alpha, ones, 0.0);
		const double f = prior.zeta - (prior.beta + zero_sum) * t + score * t;
		const double df = -(prior.beta + zero_sum) * t + score * t + curv * t * t;
		return std::pair{f, df};
	};

	double lo = std::log(prior.mean()) - 1.0, hi = std::log(prior.mean()) + 1.0;
	while (fdf(lo).first <= 0.0) {
		lo -= 4.0;
		if (lo < -700.0)
			throw NumericalError("posterior_mean_tau_gamma: cannot bracket posterior mode");
	}
	while (fdf(hi).first >= 0.0) {
		hi += 4.0;
		if (hi > 700.0)
			throw NumericalError("posterior_mean_tau_gamma: cannot bracket posterior mode");
	}
	const double mode = newton_bisect(fdf, lo, hi, 1e-12).x;
	const double peak = h(mode);

	double left = mode - 1.0, right = mode + 1.0;
	while (h(left) > peak - 60.0)
		left -= 1.0 + (mode - left);
	while (h(right) > peak - 60.0)
		right += 1.0 + (right - mode);

	auto density = [&](double s) { return std::exp(h(s) - peak); };
	auto weighted = [&](double s) { return std::exp(s + h(s) - peak); };
	const double tol = 1e-11;
	const double z = integrate(density, left, mode, tol) + integrate(density, mode, right, tol);
	const double m = integrate(weighted, left, mode, tol) + integrate(weighted, mode, right, tol);
	if (!(z > 0.0))
		throw NumericalError("posterior_mean_tau_gamma: zero posterior mass");
	return m / z;
}

} // namespace detail

/// Posterior mean of tau for one row under a Gamma(zeta, beta) prior and
/// likelihood prod_j (1 - e^{-t a_j})^{x_j} (e^{-t a_j})^{1 - x_j}.
inline double posterior_mean_tau_gamma(std::span<const std::uint8_t> x_row, std::span<const double> alpha,
                                       const GammaPrior& prior) {
	prior.validate();
	if (alpha.size() != x_row.size())
		throw std::invalid_argument("posterior_mean_tau_gamma: alpha and row lengths differ");
	if (alpha.empty())
		return prior.mean();
	detail::check_alpha(alpha);
	std::vector<Index> ones;
	double alpha_sum = 0.0;
	for (std::size_t j = 0; j < alpha.size(); ++j) {
		alpha_sum += alpha[j];
		if (x_row[j])
			ones.push_back(static_cast<Index>(j));
	}
	return detail::posterior_mean_tau_sparse(alpha, ones, alpha_sum, prior);
}

/// Gamma-prior fit: alpha_j = g^{-1}(xbar_j), tau_i = posterior mean.
inline ThresholdFit fit_gamma(const BinaryDataset& ds, const GammaPrior& prior, const FitOptions& opts = {}) {
	prior.validate();
	if (ds.d() == 0)
		throw DatasetError("no informative columns");
	const auto stats = column_means(ds);
	ThresholdFit fit;
	fit.eps_theta = opts.eps_theta;
	fit.tol = opts.tol;
	fit.alpha.resize(ds.d());
	for (std::size_t j = 0; j < ds.d(); ++j)
		fit.alpha[j] = alpha_from_mean_gamma(stats.xbar[j], prior);
	double alpha_sum = 0.0;
	for (double a : fit.alpha)
		alpha_sum += a;
	const auto rows = ds.rows();
	fit.tau.resize(ds.n());
	parallel_for(ds.n(), opts.threads, [&](std::size_t i) {
		fit.tau[i] = std::clamp(detail::posterior_mean_tau_sparse(fit.alpha, rows[i], alpha_sum, prior),
		                        opts.bounds.min, opts.bounds.max);
	});
	fit.converged = true;
	fit.iterations = 1;
	fit.constraint_residual = constraint_residual(fit.alpha, fit.tau, stats.xbar);
	return fit;
}

} // namespace lamb
