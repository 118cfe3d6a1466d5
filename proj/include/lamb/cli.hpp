#pragma once

// Command-line front end: estimate, mine, neighborhood, simulate, convert.
// run_cli() is the whole program minus process setup so it can be driven
// from tests.

#include "lamb/dataset.hpp"
#include "lamb/io.hpp"
#include "lamb/latentcorr.hpp"
#include "lamb/miner.hpp"
#include "lamb/parallel.hpp"
#include "lamb/simlab.hpp"
#include "lamb/threshold.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace lamb {

struct PriorChoice {
	bool gamma = false;
	GammaPrior params{};

	std::string describe() const {
		if (!gamma)
			return "empirical";
		return "gamma:" + detail::format_exact(params.zeta) + "," + detail::format_exact(params.beta);
	}
};

inline PriorChoice parse_prior(const std::string& s) {
	PriorChoice p;
	if (s == "empirical")
		return p;
	if (s.rfind("gamma:", 0) != 0)
		throw std::invalid_argument("--prior must be 'empirical' or 'gamma:ZETA,BETA', got '" + s + "'");
	const auto parts = detail::split_list(s.substr(6));
	if (parts.size() != 2)
		throw std::invalid_argument("--prior gamma needs two values: gamma:ZETA,BETA");
	p.gamma = true;
	p.params.zeta = detail::parse_double("prior", parts[0]);
	p.params.beta = detail::parse_double("prior", parts[1]);
	p.params.validate();
	return p;
}

enum class OutputFormat { json, table, csv, transactions, triplets };

inline std::string to_string(OutputFormat f) {
	switch (f) {
	case OutputFormat::json: return "json";
	case OutputFormat::table: return "table";
	case OutputFormat::csv: return "csv";
	case OutputFormat::transactions: return "transactions";
	case OutputFormat::triplets: return "triplets";
	}
	return "?";
}

inline OutputFormat parse_output_format(const std::string& s) {
	if (s == "json")
		return OutputFormat::json;
	if (s == "table")
		return OutputFormat::table;
	if (s == "csv")
		return OutputFormat::csv;
	if (s == "transactions")
		return OutputFormat::transactions;
	if (s == "triplets")
		return OutputFormat::triplets;
	throw std::invalid_argument("unknown output format '" + s + "'");
}

inline std::optional<bool> parse_tristate(const std::string& flag, const std::string& v) {
	if (v == "auto")
		return std::nullopt;
	if (v == "yes")
		return true;
	if (v == "no")
		return false;
	throw std::invalid_argument(flag + " must be auto, yes or no");
}

/// Effective settings of one invocation, defaults resolved.
struct RunConfig {
	std::string command;
	std::string input_path;
	std::string input_format; // empty: inferred from the extension
	std::string csv_header = "auto";
	std::string csv_row_labels = "auto";
	double fdr_q = 0.05;
	int max_iter = 100;
	std::string prior = "empirical";
	double eps_theta = 0.0; // 0: 1/(2n), or the value stored in --fit
	std::vector<std::string> seeds{"all"};
	std::vector<std::string> targets;
	std::string fit_path;
	double jaccard = 1.0;
	unsigned threads = 0; // 0: LAMB_THREADS or hardware concurrency
	std::string output_path;
	std::string output_format;
	bool to_stdout = false;
	std::string study_config;
	bool summary = false;

	InputFormat resolved_input_format() const {
		if (!input_format.empty())
			return parse_input_format(input_format);
		const auto ext = std::filesystem::path(input_path).extension().string();
		return ext == ".csv" ? InputFormat::csv : InputFormat::transactions;
	}

	CsvOptions csv_options() const {
		return {parse_tristate("--csv-header", csv_header), parse_tristate("--csv-row-labels", csv_row_labels)};
	}

	void validate() const {
		if (!(fdr_q > 0.0 && fdr_q < 1.0))
			throw std::invalid_argument("--fdr must lie in (0,1)");
		if (max_iter < 1)
			throw std::invalid_argument("--max-iter must be at least 1");
		if (!(eps_theta == 0.0 || (eps_theta > 0.0 && eps_theta < 0.5)))
			throw std::invalid_argument("--eps-theta must lie in (0, 0.5)");
		if (!(jaccard > 0.0 && jaccard <= 1.0))
			throw std::invalid_argument("--jaccard must lie in (0,1]");
		parse_prior(prior);
		csv_options();
		if (output_path.empty() && !to_stdout)
			throw std::invalid_argument("no destination: pass --output FILE or --stdout");
	}

	/// Thread count is left out on purpose: reports do not depend on it.
	Json to_json() const {
		Json j;
		j["command"] = command;
		if (command == "simulate") {
			j["config"] = study_config;
			j["summary"] = summary;
			return j;
		}
		j["input"] = input_path;
		j["format"] = to_string(resolved_input_format());
		if (resolved_input_format() == InputFormat::csv) {
			j["csv_header"] = csv_header;
			j["csv_row_labels"] = csv_row_labels;
		}
		if (command == "convert")
			return j;
		j["prior"] = fit_path.empty() ? prior : std::string("from-fit");
		j["eps_theta"] = eps_theta;
		if (!fit_path.empty())
			j["fit"] = fit_path;
		if (command == "estimate")
			return j;
		j["fdr"] = fdr_q;
		if (command == "mine") {
			j["max_iter"] = max_iter;
			j["seeds"] = seeds;
			j["jaccard"] = jaccard;
		} else {
			j["targets"] = targets;
		}
		j["output_format"] = output_format;
		return j;
	}
};

struct CliStreams {
	std::ostream& out;
	std::ostream& err;
};

namespace detail {

struct PreparedData {
	BinaryDataset data; // after filtering
	std::vector<std::string> removed;
	ThresholdFit fit;
	std::string prior;
};

inline void emit(const RunConfig& cfg, const std::string& content, CliStreams io) {
	if (!cfg.output_path.empty())
		write_file_atomic(cfg.output_path, content);
	if (cfg.to_stdout)
		io.out << content;
}

inline unsigned resolved_threads(const RunConfig& cfg) { return cfg.threads > 0 ? cfg.threads : default_threads(); }

inline std::pair<BinaryDataset, std::vector<std::string>> load_filtered(const RunConfig& cfg) {
	const auto raw = load_dataset(cfg.input_path, cfg.resolved_input_format(), cfg.csv_options());
	auto filtered = filter_degenerate(raw);
	if (filtered.first.d() == 0)
		throw DatasetError("no informative columns");
	return filtered;
}

inline PreparedData prepare(const RunConfig& cfg, CliStreams io) {
	auto [data, removed] = load_filtered(cfg);
	PreparedData p{std::move(data), std::move(removed), {}, {}};
	FitOptions fo;
	fo.threads = resolved_threads(cfg);
	fo.eps_theta = cfg.eps_theta;
	if (!cfg.fit_path.empty()) {
		auto loaded = load_fit(cfg.fit_path);
		if (loaded.col_labels != p.data.col_labels())
			throw std::invalid_argument("fit file '" + cfg.fit_path +
			                            "' does not match the informative columns of the input");
		if (loaded.fit.n() != p.data.n())
			throw std::invalid_argument("fit file '" + cfg.fit_path + "' has " + std::to_string(loaded.fit.n()) +
			                            " rows, input has " + std::to_string(p.data.n()));
		p.fit = std::move(loaded.fit);
		if (cfg.eps_theta > 0.0)
			p.fit.eps_theta = cfg.eps_theta;
		p.prior = "from-fit";
	} else if (const auto prior = parse_prior(cfg.prior); prior.gamma) {
		p.prior = prior.describe();
		p.fit = fit_gamma(p.data, prior.params, fo);
		for (const auto& w : gamma_prior_warnings(prior.params, p.fit.alpha))
			io.err << "warning: " << w << '\n';
	} else {
		p.prior = prior.describe();
		p.fit = fit_empirical(p.data, fo);
	}
	if (!p.fit.converged)
		io.err << "warning: threshold fit did not converge after " << p.fit.iterations << " iterations (residual "
		       << p.fit.constraint_residual << ")\n";
	return p;
}

inline Json fit_summary(const PreparedData& p) {
	return Json{{"prior", p.prior},
	            {"converged", p.fit.converged},
	            {"iterations", p.fit.iterations},
	            {"residual", p.fit.constraint_residual},
	            {"tol", p.fit.tol},
	            {"eps_theta", p.fit.clamp_eps()},
	            {"n", p.data.n()},
	            {"d", p.data.d()}};
}

inline std::string comment_header(const RunConfig& cfg) { return "# " + cfg.to_json().dump() + "\n"; }

inline std::size_t find_label(const BinaryDataset& ds, const std::string& label, std::vector<std::string>& unknown) {
	const auto& labels = ds.col_labels();
	const auto it = std::find(labels.begin(), labels.end(), label);
	if (it == labels.end()) {
		unknown.push_back(label);
		return 0;
	}
	return static_cast<std::size_t>(it - labels.begin());
}

inline std::string unknown_message(const std::vector<std::string>& unknown, const std::vector<std::string>& removed) {
	std::string msg = "unknown label(s): ";
	for (std::size_t k = 0; k < unknown.size(); ++k) {
		if (k)
			msg += ", ";
		msg += "'" + unknown[k] + "'";
		if (std::find(removed.begin(), removed.end(), unknown[k]) != removed.end())
			msg += " (removed as degenerate)";
	}
	return msg;
}

} // namespace detail

inline void cmd_estimate(const RunConfig& cfg, CliStreams io) {
	const auto p = detail::prepare(cfg, io);
	Json j = fit_to_json(p.fit, p.data.col_labels());
	j["removed_columns"] = p.removed;
	j["config"] = cfg.to_json();
	detail::emit(cfg, j.dump(2) + "\n", io);
}

inline void cmd_mine(const RunConfig& cfg, CliStreams io) {
	const auto p = detail::prepare(cfg, io);
	const auto u = standardize(p.data, theta_matrix(p.fit));

	IndexSet seeds;
	if (cfg.seeds.size() == 1 && cfg.seeds.front() == "all") {
		for (std::size_t j = 0; j < p.data.d(); ++j)
			seeds.push_back(j);
	} else {
		std::vector<std::string> unknown;
		for (const auto& s : cfg.seeds)
			seeds.push_back(detail::find_label(p.data, s, unknown));
		if (!unknown.empty())
			throw std::invalid_argument(detail::unknown_message(unknown, p.removed));
		seeds = make_index_set(seeds);
	}

	MineOptions mo;
	mo.q = cfg.fdr_q;
	mo.max_iter = cfg.max_iter;
	mo.threads = detail::resolved_threads(cfg);
	auto results = dedup(mine_all(u, seeds, mo), cfg.jaccard);

	const auto& labels = p.data.col_labels();
	std::ostringstream body;
	switch (parse_output_format(cfg.output_format)) {
	case OutputFormat::json: {
		Json j;
		j["config"] = cfg.to_json();
		j["fit"] = detail::fit_summary(p);
		j["removed_columns"] = p.removed;
		j["sets"] = results_to_json(results, labels);
		body << j.dump(2) << '\n';
		break;
	}
	case OutputFormat::table:
		body << detail::comment_header(cfg);
		write_results_table(results, labels, body);
		break;
	case OutputFormat::csv:
		body << detail::comment_header(cfg);
		write_results_csv(results, labels, body);
		break;
	default: throw std::invalid_argument("mine writes json, table or csv");
	}
	detail::emit(cfg, body.str(), io);
}

/// Each --target value names one target set; labels inside a value are
/// joined with '|'.
inline void cmd_neighborhood(const RunConfig& cfg, CliStreams io) {
	if (cfg.targets.empty())
		throw std::invalid_argument("neighborhood needs at least one --target");
	const auto p = detail::prepare(cfg, io);

	std::vector<IndexSet> targets;
	std::vector<std::string> unknown;
	for (const auto& t : cfg.targets) {
		IndexSet set;
		std::string cur;
		std::vector<std::string> parts;
		for (char c : t) {
			if (c == '|') {
				parts.push_back(cur);
				cur.clear();
			} else {
				cur.push_back(c);
			}
		}
		parts.push_back(cur);
		for (const auto& label : parts)
			set.push_back(detail::find_label(p.data, label, unknown));
		targets.push_back(make_index_set(set));
	}
	if (!unknown.empty())
		throw std::invalid_argument(detail::unknown_message(unknown, p.removed));

	const auto u = standardize(p.data, theta_matrix(p.fit));
	std::vector<NeighborhoodReport> reports;
	for (const auto& t : targets)
		reports.push_back(make_neighborhood_report(neighborhood(u, t, cfg.fdr_q), p.data.col_labels()));

	std::ostringstream body;
	switch (parse_output_format(cfg.output_format)) {
	case OutputFormat::json: {
		Json j;
		j["config"] = cfg.to_json();
		j["fit"] = detail::fit_summary(p);
		j["removed_columns"] = p.removed;
		j["neighborhoods"] = neighborhoods_to_json(reports);
		body << j.dump(2) << '\n';
		break;
	}
	case OutputFormat::table:
		body << detail::comment_header(cfg);
		write_neighborhoods_table(reports, body);
		break;
	case OutputFormat::csv:
		body << detail::comment_header(cfg);
		write_neighborhoods_csv(reports, body);
		break;
	default: throw std::invalid_argument("neighborhood writes json, table or csv");
	}
	detail::emit(cfg, body.str(), io);
}

inline void cmd_simulate(const RunConfig& cfg, CliStreams io) {
	const auto study = load_study_config(cfg.study_config);
	auto options = study.options;
	options.threads = detail::resolved_threads(cfg);
	const auto rows = run_study(study.grid(), study.methods, study.reps, options);
	std::ostringstream body;
	const auto fmt = parse_output_format(cfg.output_format);
	if (fmt == OutputFormat::csv) {
		if (cfg.summary)
			write_summary_csv(summarize(rows), body);
		else
			write_study_csv(rows, body);
	} else if (fmt == OutputFormat::json) {
		Json j;
		j["config"] = cfg.to_json();
		Json runs = Json::array();
		for (const auto& r : rows)
			runs.push_back(Json{{"method", to_string(r.method)},
			                    {"rho", r.rho},
			                    {"tau_mode", to_string(r.tau_mode)},
			                    {"rep", r.rep},
			                    {"fpr", r.fpr},
			                    {"tdr", r.gated_tdr},
			                    {"raw_tdr", r.tdr}});
		Json summ = Json::array();
		for (const auto& s : summarize(rows))
			summ.push_back(Json{{"method", to_string(s.method)},
			                    {"rho", s.rho},
			                    {"tau_mode", to_string(s.tau_mode)},
			                    {"reps", s.reps},
			                    {"mean_fpr", s.mean_fpr},
			                    {"mean_tdr", s.mean_tdr}});
		j["runs"] = runs;
		j["summary"] = summ;
		body << j.dump(2) << '\n';
	} else {
		throw std::invalid_argument("simulate writes csv or json");
	}
	detail::emit(cfg, body.str(), io);
}

inline void cmd_convert(const RunConfig& cfg, CliStreams io) {
	const auto ds = load_dataset(cfg.input_path, cfg.resolved_input_format(), cfg.csv_options());
	std::ostringstream body;
	switch (parse_output_format(cfg.output_format)) {
	case OutputFormat::csv: write_dense_csv(ds, body); break;
	case OutputFormat::transactions: write_transactions(ds, body); break;
	case OutputFormat::triplets: write_triplets(ds, body); break;
	default: throw std::invalid_argument("convert writes csv, transactions or triplets");
	}
	detail::emit(cfg, body.str(), io);
}

/// Parses arguments and runs one subcommand. Returns the process exit code.
inline int run_cli(int argc, const char* const* argv, CliStreams io) {
	CLI::App app{"lamb: latent association mining for binary data"};
	app.require_subcommand(1);
	RunConfig cfg;

	auto add_output = [&](CLI::App* sub, const std::string& default_format, const std::string& formats) {
		sub->add_option("--output,-o", cfg.output_path, "Report file (written atomically)");
		sub->add_option("--output-format", cfg.output_format, "One of: " + formats + " (default " + default_format + ")");
		sub->add_flag("--stdout", cfg.to_stdout, "Also print the report on stdout");
		sub->add_option("--threads", cfg.threads, "Worker threads (default: LAMB_THREADS or all cores)");
	};
	auto add_input = [&](CLI::App* sub) {
		sub->add_option("--input,-i", cfg.input_path, "Input data file")->required();
		sub->add_option("--format", cfg.input_format, "transactions, csv or triplets (default: by extension)");
		sub->add_option("--csv-header", cfg.csv_header, "CSV header row: auto, yes or no");
		sub->add_option("--csv-row-labels", cfg.csv_row_labels, "CSV row-label column: auto, yes or no");
	};
	auto add_fit = [&](CLI::App* sub) {
		sub->add_option("--prior", cfg.prior, "empirical or gamma:ZETA,BETA");
		sub->add_option("--eps-theta", cfg.eps_theta, "Clamp for fitted theta (default 1/(2n))");
		sub->add_option("--fit", cfg.fit_path, "Reuse a fit exported by 'estimate'");
	};

	auto* estimate = app.add_subcommand("estimate", "Fit threshold parameters and export them as JSON");
	add_input(estimate);
	add_fit(estimate);
	add_output(estimate, "json", "json");

	auto* mine = app.add_subcommand("mine", "Mine coherent sets from every seed");
	add_input(mine);
	add_fit(mine);
	mine->add_option("--fdr", cfg.fdr_q, "FDR level q");
	mine->add_option("--max-iter", cfg.max_iter, "Iteration cap per seed");
	mine->add_option("--seeds", cfg.seeds, "'all' or a comma-separated list of labels")->delimiter(',');
	mine->add_option("--jaccard", cfg.jaccard, "Group sets with Jaccard overlap at least this (1 = exact)");
	add_output(mine, "json", "json, table, csv");

	auto* nb = app.add_subcommand("neighborhood", "One testing sweep against each target set");
	add_input(nb);
	add_fit(nb);
	nb->add_option("--fdr", cfg.fdr_q, "FDR level q");
	nb->add_option("--target,-t", cfg.targets, "Target labels; join several with '|' for a multi-item target")
	    ->required();
	add_output(nb, "json", "json, table, csv");

	auto* sim = app.add_subcommand("simulate", "Run a simulation study from a key=value config");
	sim->add_option("--config,-c", cfg.study_config, "Study config file")->required();
	sim->add_flag("--summary", cfg.summary, "Write per-setting means instead of per-replicate rows");
	add_output(sim, "csv", "csv, json");

	auto* conv = app.add_subcommand("convert", "Convert between input formats");
	add_input(conv);
	add_output(conv, "csv", "csv, transactions, triplets");

	try {
		app.parse(argc, argv);
	} catch (const CLI::ParseError& e) {
		const int code = app.exit(e, io.out, io.err);
		return code == 0 || e.get_exit_code() == 0 ? code : std::max(code, 2);
	}

	try {
		const auto* chosen = app.get_subcommands().front();
		cfg.command = chosen->get_name();
		if (cfg.output_format.empty())
			cfg.output_format = cfg.command == "simulate" || cfg.command == "convert" ? "csv" : "json";
		cfg.validate();
		if (cfg.command == "estimate") {
			if (parse_output_format(cfg.output_format) != OutputFormat::json)
				throw std::invalid_argument("estimate writes json only");
			cmd_estimate(cfg, io);
		} else if (cfg.command == "mine") {
			cmd_mine(cfg, io);
		} else if (cfg.command == "neighborhood") {
			cmd_neighborhood(cfg, io);
		} else if (cfg.command == "simulate") {
			cmd_simulate(cfg, io);
		} else {
			cmd_convert(cfg, io);
		}
	} catch (const std::exception& e) {
		io.err << "error: " << e.what() << '\n';
		return 1;
	}
	return 0;
}

} // namespace lamb
