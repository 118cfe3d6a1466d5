#pragma once

// Scalar numerical helpers shared by the estimation and testing code:
// normal distribution functions, safeguarded 1-D root finding and
// adaptive quadrature.

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>

namespace lamb {

class NumericalError : public std::runtime_error {
public:
	using std::runtime_error::runtime_error;
};

/// Standard normal CDF, Phi(z).
inline double normal_cdf(double z) {
	return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

/// Upper tail 1 - Phi(z), computed without cancellation for large z.
inline double normal_sf(double z) {
	return 0.5 * std::erfc(z / std::numbers::sqrt2);
}

/// Standard normal quantile Phi^{-1}(p). Returns -inf / +inf at 0 / 1.
inline double normal_quantile(double p) {
	if (!(p >= 0.0 && p <= 1.0))
		throw NumericalError("normal_quantile: p outside [0,1]");
	if (p == 0.0)
		return -std::numeric_limits<double>::infinity();
	if (p == 1.0)
		return std::numeric_limits<double>::infinity();
	static const boost::math::normal_distribution<double> standard{};
	return boost::math::quantile(standard, p);
}

struct RootResult {
	double x = 0.0;
	int iterations = 0;
	bool converged = false;
};

/// Root of a monotone function on [lo, hi] by Newton steps that fall back
/// to bisection whenever the step leaves the current bracket.
///
/// `fdf(x)` returns {f(x), f'(x)}. f(lo) and f(hi) must have opposite signs
/// (checked). Terminates when the bracket or the step is below
/// `xtol * max(1, |x|)`.
template <class FDF>
RootResult newton_bisect(FDF&& fdf, double lo, double hi, double xtol, std::optional<double> x0 = std::nullopt,
                         int max_iter = 200) {
	const double flo = fdf(lo).first;
	const double fhi = fdf(hi).first;
	if (flo == 0.0)
		return {lo, 0, true};
	if (fhi == 0.0)
		return {hi, 0, true};
	if ((flo > 0) == (fhi > 0))
		throw NumericalError("newton_bisect: root not bracketed");
	const bool increasing = flo < 0;

	double x = (x0 && *x0 > lo && *x0 < hi) ? *x0 : 0.5 * (lo + hi);
	for (int it = 1; it <= max_iter; ++it) {
		auto [f, df] = fdf(x);
		if (f == 0.0)
			return {x, it, true};
		if ((f < 0) == increasing)
			lo = x;
		else
			hi = x;

		double next = (df != 0.0 && std::isfinite(df)) ? x - f / df : lo - 1.0;
		if (!(next > lo && next < hi))
			next = 0.5 * (lo + hi);
		const double scale = std::max(1.0, std::abs(next));
		if (std::abs(next - x) <= xtol * scale || (hi - lo) <= xtol * scale)
			return {next, it, true};
		x = next;
	}
	return {x, max_iter, false};
}

/// Adaptive Gauss-Kronrod (15 point) integral over a finite interval.
/// Throws NumericalError if the estimated relative error exceeds `rel_tol`.
template <class F>
double integrate(F&& f, double a, double b, double rel_tol = 1e-10) {
	double err = 0.0;
	double l1 = 0.0;
	const double value = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
	    std::forward<F>(f), a, b, 20, rel_tol, &err, &l1);
	if (!std::isfinite(value))
		throw NumericalError("integrate: non-finite result");
	if (l1 > 0.0 && err > 100.0 * rel_tol * l1)
		throw NumericalError("integrate: quadrature did not converge (error " + std::to_string(err) + ")");
	return value;
}

} // namespace lamb
