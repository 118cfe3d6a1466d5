#pragma once

// Simulation study: planted equicorrelated block in a latent Gaussian
// matrix, thresholded with theta_ij = 1 - exp(-tau_i alpha_j), then scored
// for LAMB and four distance-based clustering baselines.

#include "lamb/cluster.hpp"
#include "lamb/dataset.hpp"
#include "lamb/latentcorr.hpp"
#include "lamb/matrix.hpp"
#include "lamb/miner.hpp"
#include "lamb/numerics.hpp"
#include "lamb/parallel.hpp"
#include "lamb/threshold.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace lamb {

enum class TauMode { random_expo1, fixed_one };

inline std::string to_string(TauMode m) { return m == TauMode::random_expo1 ? "random" : "fixed"; }

inline TauMode parse_tau_mode(std::string_view s) {
	if (s == "random" || s == "random_expo1")
		return TauMode::random_expo1;
	if (s == "fixed" || s == "fixed_one")
		return TauMode::fixed_one;
	throw std::invalid_argument("unknown tau_mode '" + std::string(s) + "' (use random or fixed)");
}

struct SimulationSpec {
	std::size_t n = 101;
	std::size_t d = 1000;
	std::size_t m = 100;
	double rho = 0.0;
	TauMode tau_mode = TauMode::random_expo1;
	double alpha_lo = 0.05;
	double alpha_hi = 0.5;
	std::uint64_t rng_seed = 1;

	void validate() const {
		if (n < 2 || d < 2)
			throw std::invalid_argument("simulation needs n >= 2 and d >= 2");
		if (m > d)
			throw std::invalid_argument("planted block size m exceeds d");
		if (!(rho >= 0.0 && rho < 1.0))
			throw std::invalid_argument("rho must lie in [0,1)");
		if (!(alpha_lo > 0.0 && alpha_hi >= alpha_lo))
			throw std::invalid_argument("alpha range must satisfy 0 < lo <= hi");
	}
};

using Rng = std::mt19937_64;

/// Independent stream for replicate `rep` of a study seeded with `seed`.
inline Rng replicate_rng(std::uint64_t seed, std::uint64_t rep) {
	std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
	                  static_cast<std::uint32_t>(rep), static_cast<std::uint32_t>(rep >> 32), 0x4c414d42u};
	return Rng(seq);
}

/// n x d latent matrix: the first m columns are Z = sqrt(rho) W + sqrt(1-rho) e
/// (equicorrelation rho), the rest iid N(0,1).
inline ColMatrix gen_latent(const SimulationSpec& spec, Rng& rng) {
	spec.validate();
	std::normal_distribution<double> normal(0.0, 1.0);
	ColMatrix z(spec.n, spec.d);
	const double shared = std::sqrt(spec.rho), own = std::sqrt(1.0 - spec.rho);
	for (std::size_t i = 0; i < spec.n; ++i) {
		const double w = normal(rng);
		for (std::size_t j = 0; j < spec.d; ++j) {
			const double e = normal(rng);
			z(i, j) = j < spec.m ? shared * w + own * e : e;
		}
	}
	return z;
}

struct ThresholdDraw {
	ColMatrix theta;
	std::vector<double> tau;
	std::vector<double> alpha;
};

inline ThresholdDraw gen_thresholds(const SimulationSpec& spec, Rng& rng) {
	spec.validate();
	ThresholdDraw out;
	std::uniform_real_distribution<double> unif(spec.alpha_lo, spec.alpha_hi);
	out.alpha.resize(spec.d);
	for (double& a : out.alpha)
		a = spec.alpha_lo == spec.alpha_hi ? spec.alpha_lo : unif(rng);
	std::exponential_distribution<double> expo(1.0);
	out.tau.resize(spec.n);
	for (double& t : out.tau)
		t = spec.tau_mode == TauMode::random_expo1 ? expo(rng) : 1.0;
	out.theta = ColMatrix(spec.n, spec.d);
	for (std::size_t j = 0; j < spec.d; ++j)
		for (std::size_t i = 0; i < spec.n; ++i)
			out.theta(i, j) = -std::expm1(-out.tau[i] * out.alpha[j]);
	return out;
}

/// X_ij = 1{Z_ij <= Phi^{-1}(theta_ij)}
inline BinaryDataset threshold_data(const ColMatrix& z, const ColMatrix& theta) {
	if (z.rows() != theta.rows() || z.cols() != theta.cols())
		throw std::invalid_argument("threshold_data: shape mismatch");
	std::vector<Cell> cells;
	for (std::size_t j = 0; j < z.cols(); ++j)
		for (std::size_t i = 0; i < z.rows(); ++i)
			if (z(i, j) <= normal_quantile(theta(i, j)))
				cells.emplace_back(i, j);
	return BinaryDataset(detail::numbered_labels(z.rows(), ""), detail::numbered_labels(z.cols(), "V"), cells);
}

struct SimulatedData {
	BinaryDataset data;
	ThresholdDraw thresholds;
	IndexSet truth;
};

inline SimulatedData simulate(const SimulationSpec& spec, Rng& rng) {
	auto z = gen_latent(spec, rng);
	auto th = gen_thresholds(spec, rng);
	SimulatedData out{threshold_data(z, th.theta), std::move(th), {}};
	for (std::size_t j = 0; j < spec.m; ++j)
		out.truth.push_back(j);
	return out;
}

struct EvalResult {
	double fpr = 0.0;
	double tdr = 0.0;
	IndexSet selected;
	IndexSet truth;
};

/// FPR = |B \ A| / |B| (0 for empty B), TDR = |A n B| / |A|.
inline EvalResult evaluate(const IndexSet& selected, const IndexSet& truth) {
	if (truth.empty())
		throw std::invalid_argument("evaluate: truth set is empty");
	const IndexSet b = make_index_set(selected), a = make_index_set(truth);
	std::size_t hits = 0;
	for (std::size_t j : b)
		hits += contains(a, j) ? 1 : 0;
	EvalResult r;
	r.fpr = b.empty() ? 0.0 : static_cast<double>(b.size() - hits) / static_cast<double>(b.size());
	r.tdr = static_cast<double>(hits) / static_cast<double>(a.size());
	r.selected = b;
	r.truth = a;
	return r;
}

enum class Method { lamb, l1, l2, binary, correlation };

inline std::string to_string(Method m) {
	switch (m) {
	case Method::lamb: return "lamb";
	case Method::l1: return "l1";
	case Method::l2: return "l2";
	case Method::binary: return "binary";
	case Method::correlation: return "correlation";
	}
	return "?";
}

inline Method parse_method(std::string_view s) {
	if (s == "lamb")
		return Method::lamb;
	if (s == "l1")
		return Method::l1;
	if (s == "l2")
		return Method::l2;
	if (s == "binary")
		return Method::binary;
	if (s == "correlation")
		return Method::correlation;
	throw std::invalid_argument("unknown method '" + std::string(s) + "'");
}

struct StudyOptions {
	double q = 0.05;
	int max_iter = 100;
	double fpr_gate = 0.05;
	unsigned threads = 1;
};

/// Selected set (original column indices) of one method on one dataset.
/// Degenerate columns are removed first; LAMB reports the mined set with
/// the largest overlap with the truth.
inline IndexSet run_method(const BinaryDataset& raw, Method method, const IndexSet& truth, std::size_t target_size,
                           const StudyOptions& opts = {}) {
	std::vector<std::size_t> original;
	for (std::size_t j = 0; j < raw.d(); ++j) {
		const std::size_t s = raw.column_sum(j);
		if (s > 0 && s < raw.n())
			original.push_back(j);
	}
	const auto ds = filter_degenerate(raw).first;
	if (ds.d() < 2)
		return {};
	IndexSet local;
	if (method == Method::lamb) {
		FitOptions fo;
		const auto fit = fit_empirical(ds, fo);
		const auto u = standardize(ds, theta_matrix(fit));
		MineOptions mo;
		mo.q = opts.q;
		mo.max_iter = opts.max_iter;
		const auto results = mine_all(u, mo);
		std::size_t best_hits = 0;
		std::size_t best_false = 0;
		for (const auto& r : results) {
			std::size_t hits = 0;
			for (std::size_t j : r.members)
				hits += contains(truth, original[j]) ? 1 : 0;
			const std::size_t wrong = r.members.size() - hits;
			if (hits > best_hits || (hits == best_hits && hits > 0 && wrong < best_false)) {
				best_hits = hits;
				best_false = wrong;
				local = r.members;
			}
		}
	} else {
		const DistanceKind kind = method == Method::l1     ? DistanceKind::l1
		                          : method == Method::l2   ? DistanceKind::l2
		                          : method == Method::binary ? DistanceKind::binary
		                                                     : DistanceKind::correlation;
		local = baseline_cluster(ds, kind, target_size);
	}
	IndexSet out;
	for (std::size_t j : local)
		out.push_back(original[j]);
	return out;
}

struct StudyRow {
	Method method = Method::lamb;
	double rho = 0.0;
	TauMode tau_mode = TauMode::random_expo1;
	std::size_t spec_index = 0;
	std::size_t rep = 0;
	double fpr = 0.0;
	double tdr = 0.0;       // raw
	double gated_tdr = 0.0; // tdr if fpr < gate, else 0
};

/// Every (spec, rep) draws its own dataset from replicate_rng(spec.rng_seed,
/// rep); all methods are scored on that same dataset.
inline std::vector<StudyRow> run_study(const std::vector<SimulationSpec>& grid, const std::vector<Method>& methods,
                                       std::size_t reps, const StudyOptions& opts = {}) {
	if (reps < 1)
		throw std::invalid_argument("study needs reps >= 1");
	for (const auto& s : grid)
		s.validate();
	const std::size_t jobs = grid.size() * reps;
	std::vector<std::vector<StudyRow>> per_job(jobs);
	parallel_for(jobs, opts.threads, [&](std::size_t job) {
		const std::size_t g = job / reps, rep = job % reps;
		const auto& spec = grid[g];
		auto rng = replicate_rng(spec.rng_seed, rep);
		const auto sim = simulate(spec, rng);
		for (Method method : methods) {
			const auto chosen = run_method(sim.data, method, sim.truth, spec.m, opts);
			const auto ev = evaluate(chosen, sim.truth);
			StudyRow row;
			row.method = method;
			row.rho = spec.rho;
			row.tau_mode = spec.tau_mode;
			row.spec_index = g;
			row.rep = rep;
			row.fpr = ev.fpr;
			row.tdr = ev.tdr;
			row.gated_tdr = ev.fpr < opts.fpr_gate ? ev.tdr : 0.0;
			per_job[job].push_back(row);
		}
	});
	std::vector<StudyRow> rows;
	for (auto& v : per_job)
		rows.insert(rows.end(), v.begin(), v.end());
	return rows;
}

struct StudySummary {
	Method method;
	double rho;
	TauMode tau_mode;
	std::size_t spec_index;
	std::size_t reps;
	double mean_fpr;
	double mean_tdr; // mean of gated TDR
};

inline std::vector<StudySummary> summarize(const std::vector<StudyRow>& rows) {
	std::map<std::pair<std::size_t, int>, StudySummary> acc;
	for (const auto& r : rows) {
		auto key = std::pair{r.spec_index, static_cast<int>(r.method)};
		auto [it, inserted] = acc.try_emplace(key, StudySummary{r.method, r.rho, r.tau_mode, r.spec_index, 0, 0.0, 0.0});
		it->second.reps += 1;
		it->second.mean_fpr += r.fpr;
		it->second.mean_tdr += r.gated_tdr;
	}
	std::vector<StudySummary> out;
	for (auto& [k, s] : acc) {
		s.mean_fpr /= static_cast<double>(s.reps);
		s.mean_tdr /= static_cast<double>(s.reps);
		out.push_back(s);
	}
	return out;
}

/// Per-replicate CSV: method,rho,tau_mode,rep,fpr,tdr (tdr is FPR-gated).
inline void write_study_csv(const std::vector<StudyRow>& rows, std::ostream& out) {
	out << "method,rho,tau_mode,rep,fpr,tdr\n";
	for (const auto& r : rows) {
		char buf[160];
		std::snprintf(buf, sizeof buf, "%s,%.6g,%s,%zu,%.6f,%.6f\n", to_string(r.method).c_str(), r.rho,
		              to_string(r.tau_mode).c_str(), r.rep, r.fpr, r.gated_tdr);
		out << buf;
	}
}

inline void write_summary_csv(const std::vector<StudySummary>& rows, std::ostream& out) {
	out << "method,rho,tau_mode,reps,mean_fpr,mean_tdr\n";
	for (const auto& r : rows) {
		char buf[160];
		std::snprintf(buf, sizeof buf, "%s,%.6g,%s,%zu,%.6f,%.6f\n", to_string(r.method).c_str(), r.rho,
		              to_string(r.tau_mode).c_str(), r.reps, r.mean_fpr, r.mean_tdr);
		out << buf;
	}
}

// ---------------------------------------------------------------------------
// Study configuration (key=value text)

struct StudyConfig {
	SimulationSpec base;
	std::vector<double> rhos{0.0};
	std::vector<TauMode> tau_modes{TauMode::random_expo1};
	std::vector<Method> methods{Method::lamb, Method::l1, Method::l2, Method::binary, Method::correlation};
	std::size_t reps = 1;
	StudyOptions options;

	std::vector<SimulationSpec> grid() const {
		std::vector<SimulationSpec> out;
		for (TauMode mode : tau_modes)
			for (double rho : rhos) {
				auto s = base;
				s.rho = rho;
				s.tau_mode = mode;
				out.push_back(s);
			}
		return out;
	}
};

namespace detail {

inline std::vector<std::string> split_list(const std::string& v) {
	std::vector<std::string> out;
	std::string cur;
	for (char c : v) {
		if (c == ',') {
			out.push_back(trim(cur));
			cur.clear();
		} else {
			cur.push_back(c);
		}
	}
	out.push_back(trim(cur));
	out.erase(std::remove(out.begin(), out.end(), std::string{}), out.end());
	return out;
}

inline double parse_double(const std::string& key, const std::string& v) {
	std::size_t pos = 0;
	double x = 0.0;
	try {
		x = std::stod(v, &pos);
	} catch (...) {
		pos = 0;
	}
	if (pos != v.size() || v.empty())
		throw std::invalid_argument("study config: '" + key + "' expects a number, got '" + v + "'");
	return x;
}

inline std::uint64_t parse_count(const std::string& key, const std::string& v) {
	const double x = parse_double(key, v);
	if (x < 0 || x != std::floor(x))
		throw std::invalid_argument("study config: '" + key + "' expects a non-negative integer, got '" + v + "'");
	return static_cast<std::uint64_t>(x);
}

} // namespace detail

/// Parses lines "key = value"; '#' starts a comment. Lists are comma
/// separated. Unknown keys are rejected.
inline StudyConfig parse_study_config(std::istream& in) {
	StudyConfig cfg;
	std::string line;
	std::size_t line_no = 0;
	while (std::getline(in, line)) {
		++line_no;
		if (auto hash = line.find('#'); hash != std::string::npos)
			line.erase(hash);
		detail::strip_cr(line);
		if (detail::is_blank(line))
			continue;
		const auto eq = line.find('=');
		if (eq == std::string::npos)
			throw std::invalid_argument("study config line " + std::to_string(line_no) + ": expected key=value");
		const std::string key = detail::trim(line.substr(0, eq));
		const std::string value = detail::trim(line.substr(eq + 1));
		if (key == "n")
			cfg.base.n = detail::parse_count(key, value);
		else if (key == "d")
			cfg.base.d = detail::parse_count(key, value);
		else if (key == "m")
			cfg.base.m = detail::parse_count(key, value);
		else if (key == "rho") {
			cfg.rhos.clear();
			for (const auto& v : detail::split_list(value))
				cfg.rhos.push_back(detail::parse_double(key, v));
		} else if (key == "tau_mode") {
			cfg.tau_modes.clear();
			for (const auto& v : detail::split_list(value))
				cfg.tau_modes.push_back(parse_tau_mode(v));
		} else if (key == "alpha_lo")
			cfg.base.alpha_lo = detail::parse_double(key, value);
		else if (key == "alpha_hi")
			cfg.base.alpha_hi = detail::parse_double(key, value);
		else if (key == "rng_seed")
			cfg.base.rng_seed = detail::parse_count(key, value);
		else if (key == "reps")
			cfg.reps = detail::parse_count(key, value);
		else if (key == "methods") {
			cfg.methods.clear();
			for (const auto& v : detail::split_list(value))
				cfg.methods.push_back(parse_method(v));
		} else if (key == "fdr")
			cfg.options.q = detail::parse_double(key, value);
		else if (key == "max_iter")
			cfg.options.max_iter = static_cast<int>(detail::parse_count(key, value));
		else if (key == "fpr_gate")
			cfg.options.fpr_gate = detail::parse_double(key, value);
		else
			throw std::invalid_argument("study config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
	}
	if (cfg.rhos.empty() || cfg.tau_modes.empty() || cfg.methods.empty())
		throw std::invalid_argument("study config: rho, tau_mode and methods must be nonempty");
	if (cfg.reps < 1)
		throw std::invalid_argument("study config: reps must be at least 1");
	if (!(cfg.options.q > 0.0 && cfg.options.q < 1.0))
		throw std::invalid_argument("study config: fdr must lie in (0,1)");
	for (const auto& s : cfg.grid())
		s.validate();
	return cfg;
}

inline StudyConfig load_study_config(const std::string& path) {
	std::ifstream in(path);
	if (!in)
		throw std::invalid_argument("cannot read study config '" + path + "'");
	return parse_study_config(in);
}

} // namespace lamb
