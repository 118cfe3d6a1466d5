#pragma once

// JSON, text-table and CSV serialization of fits, mined sets and
// neighborhoods.

#include "lamb/dataset.hpp"
#include "lamb/miner.hpp"
#include "lamb/threshold.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace lamb {

using Json = nlohmann::ordered_json;

inline Json fit_to_json(const ThresholdFit& fit, const std::vector<std::string>& col_labels) {
	if (col_labels.size() != fit.d())
		throw std::invalid_argument("fit_to_json: label count does not match alpha");
	Json j;
	j["alpha"] = fit.alpha;
	j["tau"] = fit.tau;
	j["meta"] = {{"tol", fit.tol},
	             {"iterations", fit.iterations},
	             {"residual", fit.constraint_residual},
	             {"converged", fit.converged},
	             {"eps_theta", fit.clamp_eps()}};
	j["col_labels"] = col_labels;
	return j;
}

struct LoadedFit {
	ThresholdFit fit;
	std::vector<std::string> col_labels;
};

inline LoadedFit fit_from_json(const Json& j) {
	try {
		LoadedFit out;
		out.fit.alpha = j.at("alpha").get<std::vector<double>>();
		out.fit.tau = j.at("tau").get<std::vector<double>>();
		const auto& meta = j.at("meta");
		out.fit.tol = meta.at("tol").get<double>();
		out.fit.iterations = meta.at("iterations").get<int>();
		out.fit.constraint_residual = meta.at("residual").get<double>();
		out.fit.converged = meta.value("converged", true);
		out.fit.eps_theta = meta.value("eps_theta", 0.0);
		if (j.contains("col_labels"))
			out.col_labels = j.at("col_labels").get<std::vector<std::string>>();
		else
			out.col_labels = detail::numbered_labels(out.fit.alpha.size(), "V");
		if (out.col_labels.size() != out.fit.alpha.size())
			throw std::invalid_argument("col_labels and alpha differ in length");
		for (double a : out.fit.alpha)
			if (!(a > 0.0 && std::isfinite(a)))
				throw std::invalid_argument("alpha entries must be positive and finite");
		for (double t : out.fit.tau)
			if (!(t > 0.0 && std::isfinite(t)))
				throw std::invalid_argument("tau entries must be positive and finite");
		return out;
	} catch (const Json::exception& e) {
		throw std::invalid_argument(std::string("malformed fit JSON: ") + e.what());
	}
}

inline LoadedFit load_fit(const std::string& path) {
	std::ifstream in(path);
	if (!in)
		throw std::invalid_argument("cannot read fit file '" + path + "'");
	Json j;
	try {
		in >> j;
	} catch (const Json::exception& e) {
		throw std::invalid_argument("fit file '" + path + "' is not valid JSON: " + e.what());
	}
	return fit_from_json(j);
}

inline Json results_to_json(const std::vector<CoherentSetResult>& results, const std::vector<std::string>& labels) {
	Json arr = Json::array();
	for (const auto& r : results) {
		Json item;
		std::vector<std::string> members;
		for (std::size_t j : r.members)
			members.push_back(labels.at(j));
		std::sort(members.begin(), members.end());
		item["members"] = members;
		item["seeds_reaching"] = r.seeds_reaching;
		item["reason"] = to_string(r.reason);
		Json p = Json::object();
		std::vector<std::pair<std::string, double>> pv;
		for (const auto& [j, v] : r.member_pvalues)
			pv.emplace_back(labels.at(j), v);
		std::sort(pv.begin(), pv.end());
		for (const auto& [l, v] : pv)
			p[l] = v;
		item["pvalues"] = p;
		arr.push_back(std::move(item));
	}
	return arr;
}

namespace detail {

inline std::vector<std::string> sorted_labels(const IndexSet& set, const std::vector<std::string>& labels) {
	std::vector<std::string> out;
	for (std::size_t j : set)
		out.push_back(labels.at(j));
	std::sort(out.begin(), out.end());
	return out;
}

inline std::string join(const std::vector<std::string>& v, std::string_view sep) {
	std::string out;
	for (std::size_t k = 0; k < v.size(); ++k) {
		if (k)
			out += sep;
		out += v[k];
	}
	return out;
}

inline std::string format_p(double p) {
	char buf[32];
	std::snprintf(buf, sizeof buf, "%.3g", p);
	return buf;
}

inline std::string format_exact(double v) {
	char buf[40];
	std::snprintf(buf, sizeof buf, "%.17g", v);
	return buf;
}

} // namespace detail

/// Human-readable listing: one line per set, most-reached first.
inline void write_results_table(const std::vector<CoherentSetResult>& results, const std::vector<std::string>& labels,
                                std::ostream& out) {
	out << "rank  size  seeds  reason       members\n";
	std::size_t rank = 1;
	for (const auto& r : results) {
		char head[64];
		std::snprintf(head, sizeof head, "%4zu  %4zu  %5zu  %-11s  ", rank++, r.members.size(), r.seeds_reaching,
		              to_string(r.reason).c_str());
		out << head << detail::join(detail::sorted_labels(r.members, labels), ", ") << '\n';
	}
}

/// Long format: set,label,pvalue,seeds_reaching,reason
inline void write_results_csv(const std::vector<CoherentSetResult>& results, const std::vector<std::string>& labels,
                              std::ostream& out) {
	out << "set,label,pvalue,seeds_reaching,reason\n";
	std::size_t id = 1;
	for (const auto& r : results) {
		std::vector<std::pair<std::string, double>> rows;
		for (const auto& [j, p] : r.member_pvalues)
			rows.emplace_back(labels.at(j), p);
		std::sort(rows.begin(), rows.end());
		for (const auto& [l, p] : rows)
			out << id << ',' << detail::quote_csv(l) << ',' << detail::format_exact(p) << ',' << r.seeds_reaching
			    << ',' << to_string(r.reason) << '\n';
		++id;
	}
}

struct NeighborhoodReport {
	std::vector<std::string> target;
	std::vector<std::pair<std::string, double>> neighbors; // excludes target, ascending p
};

inline NeighborhoodReport make_neighborhood_report(const Neighborhood& nb, const std::vector<std::string>& labels) {
	NeighborhoodReport r;
	r.target = detail::sorted_labels(nb.target, labels);
	std::vector<std::size_t> idx;
	for (std::size_t j : nb.neighbors)
		if (!contains(nb.target, j))
			idx.push_back(j);
	std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
		if (nb.pvalues[a] != nb.pvalues[b])
			return nb.pvalues[a] < nb.pvalues[b];
		return labels[a] < labels[b];
	});
	for (std::size_t j : idx)
		r.neighbors.emplace_back(labels[j], nb.pvalues[j]);
	return r;
}

inline Json neighborhoods_to_json(const std::vector<NeighborhoodReport>& reports) {
	Json arr = Json::array();
	for (const auto& r : reports) {
		Json item;
		item["target"] = r.target;
		Json nbs = Json::array();
		for (const auto& [l, p] : r.neighbors)
			nbs.push_back(Json{{"label", l}, {"pvalue", p}});
		item["neighbors"] = nbs;
		arr.push_back(std::move(item));
	}
	return arr;
}

/// Target first, neighbors following, one block per target.
inline void write_neighborhoods_table(const std::vector<NeighborhoodReport>& reports, std::ostream& out) {
	for (std::size_t k = 0; k < reports.size(); ++k) {
		if (k)
			out << '\n';
		const auto& r = reports[k];
		out << "target: " << detail::join(r.target, ", ") << '\n';
		if (r.neighbors.empty())
			out << "  (no neighbors)\n";
		for (const auto& [l, p] : r.neighbors)
			out << "  " << l << "  p=" << detail::format_p(p) << '\n';
	}
}

inline void write_neighborhoods_csv(const std::vector<NeighborhoodReport>& reports, std::ostream& out) {
	out << "target,label,pvalue\n";
	for (const auto& r : reports) {
		const std::string t = detail::quote_csv(detail::join(r.target, "|"));
		for (const auto& [l, p] : r.neighbors)
			out << t << ',' << detail::quote_csv(l) << ',' << detail::format_exact(p) << '\n';
	}
}

/// Writes `content` to `path` through a temporary sibling file and a rename,
/// so a failed run never leaves a partial report behind.
inline void write_file_atomic(const std::string& path, const std::string& content) {
	namespace fs = std::filesystem;
	const fs::path target(path);
	fs::path tmp = target;
	tmp += ".tmp." + std::to_string(static_cast<unsigned long long>(std::hash<std::string>{}(path) & 0xffffff));
	{
		std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
		if (!out)
			throw std::runtime_error("cannot write '" + tmp.string() + "'");
		out << content;
		out.flush();
		if (!out) {
			out.close();
			std::error_code ec;
			fs::remove(tmp, ec);
			throw std::runtime_error("write to '" + tmp.string() + "' failed");
		}
	}
	std::error_code ec;
	fs::rename(tmp, target, ec);
	if (ec) {
		fs::remove(tmp, ec);
		throw std::runtime_error("cannot move report into place at '" + path + "'");
	}
}

} // namespace lamb
