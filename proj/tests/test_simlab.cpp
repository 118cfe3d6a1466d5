#include "test_support.hpp"

#include <gtest/gtest.h>

#include <numeric>
#include <sstream>

using namespace lamb;
using lamb::testing::col_index;
using lamb::testing::pearson;
using lamb::testing::toy;

namespace {

std::vector<double> column(const ColMatrix& m, std::size_t j) {
	std::vector<double> out(m.rows());
	for (std::size_t i = 0; i < m.rows(); ++i)
		out[i] = m(i, j);
	return out;
}

SimulationSpec small_spec(double rho, TauMode mode = TauMode::random_expo1) {
	SimulationSpec s;
	s.n = 60;
	s.d = 40;
	s.m = 8;
	s.rho = rho;
	s.tau_mode = mode;
	s.rng_seed = 17;
	return s;
}

BinaryDataset from_columns(std::size_t n, const std::vector<std::vector<Index>>& cols) {
	std::vector<Cell> cells;
	for (std::size_t j = 0; j < cols.size(); ++j)
		for (Index i : cols[j])
			cells.emplace_back(i, j);
	return BinaryDataset(detail::numbered_labels(n, ""), detail::numbered_labels(cols.size(), "V"), cells);
}

IndexSet range_of(std::size_t count) {
	IndexSet out(count);
	std::iota(out.begin(), out.end(), std::size_t{0});
	return out;
}

} // namespace

TEST(GenLatent, BlockCorrelationAndUnitVariance) {
	SimulationSpec s;
	s.n = 5000;
	s.d = 6;
	s.m = 3;
	s.rho = 0.5;
	Rng rng(1);
	const auto z = gen_latent(s, rng);
	EXPECT_NEAR(pearson(column(z, 0), column(z, 1)), 0.5, 0.03);
	EXPECT_NEAR(pearson(column(z, 1), column(z, 2)), 0.5, 0.03);
	EXPECT_NEAR(pearson(column(z, 0), column(z, 4)), 0.0, 0.04);
	EXPECT_NEAR(pearson(column(z, 4), column(z, 5)), 0.0, 0.04);
	for (std::size_t j = 0; j < s.d; ++j) {
		const auto c = column(z, j);
		const double mean = std::accumulate(c.begin(), c.end(), 0.0) / c.size();
		double var = 0.0;
		for (double v : c)
			var += (v - mean) * (v - mean);
		EXPECT_NEAR(var / c.size(), 1.0, 0.06) << j;
	}
}

TEST(GenLatent, RhoZeroIsIndependent) {
	SimulationSpec s;
	s.n = 4000;
	s.d = 4;
	s.m = 4;
	s.rho = 0.0;
	Rng rng(2);
	const auto z = gen_latent(s, rng);
	for (std::size_t j = 1; j < 4; ++j)
		EXPECT_NEAR(pearson(column(z, 0), column(z, j)), 0.0, 0.05);
}

TEST(GenThresholds, FixedModeRowsIdentical) {
	auto s = small_spec(0.3, TauMode::fixed_one);
	Rng rng(3);
	const auto th = gen_thresholds(s, rng);
	for (double t : th.tau)
		EXPECT_EQ(t, 1.0);
	for (std::size_t j = 0; j < s.d; ++j) {
		EXPECT_GE(th.alpha[j], s.alpha_lo);
		EXPECT_LE(th.alpha[j], s.alpha_hi);
		for (std::size_t i = 1; i < s.n; ++i)
			EXPECT_EQ(th.theta(i, j), th.theta(0, j));
	}
}

TEST(GenThresholds, HalfAtLogTwo) {
	auto s = small_spec(0.0, TauMode::fixed_one);
	s.alpha_lo = s.alpha_hi = std::log(2.0);
	Rng rng(4);
	const auto th = gen_thresholds(s, rng);
	EXPECT_NEAR(th.theta(3, 5), 0.5, 1e-15);
}

TEST(GenThresholds, RandomModeMeanMatchesLaplaceTransform) {
	// tau ~ Expo(1): E[1 - exp(-tau a)] = a / (1 + a)
	SimulationSpec s;
	s.n = 40000;
	s.d = 2;
	s.m = 0;
	s.alpha_lo = s.alpha_hi = 0.4;
	Rng rng(5);
	const auto th = gen_thresholds(s, rng);
	double sum = 0.0;
	for (std::size_t i = 0; i < s.n; ++i)
		sum += th.theta(i, 0);
	EXPECT_NEAR(sum / s.n, 0.4 / 1.4, 0.004);
}

TEST(ThresholdData, HalfIsSignOfLatent) {
	Rng rng(6);
	const auto z = lamb::testing::random_matrix(rng, 30, 5);
	ColMatrix theta(30, 5);
	for (double& v : theta.values())
		v = 0.5;
	const auto x = threshold_data(z, theta);
	for (std::size_t i = 0; i < 30; ++i)
		for (std::size_t j = 0; j < 5; ++j)
			EXPECT_EQ(x.get(i, j), z(i, j) <= 0.0);
	EXPECT_EQ(x.col_labels()[0], "V1");
	EXPECT_EQ(x.row_labels()[0], "1");
}

TEST(ThresholdData, TinyThresholdGivesZeros) {
	Rng rng(7);
	const auto z = lamb::testing::random_matrix(rng, 50, 3);
	ColMatrix theta(50, 3);
	for (double& v : theta.values())
		v = 1e-300;
	EXPECT_EQ(threshold_data(z, theta).cell_count(), 0u);
	EXPECT_THROW(threshold_data(z, ColMatrix(50, 2)), std::invalid_argument);
}

TEST(ThresholdData, MarginalMeanTracksTheta) {
	Rng rng(8);
	const auto z = lamb::testing::random_matrix(rng, 20000, 2);
	ColMatrix theta(20000, 2);
	for (std::size_t i = 0; i < 20000; ++i) {
		theta(i, 0) = 0.1;
		theta(i, 1) = 0.7;
	}
	const auto x = threshold_data(z, theta);
	EXPECT_NEAR(x.column_sum(0) / 20000.0, 0.1, 0.008);
	EXPECT_NEAR(x.column_sum(1) / 20000.0, 0.7, 0.01);
}

TEST(Simulate, TruthAndShapes) {
	const auto s = small_spec(0.5);
	auto rng = replicate_rng(s.rng_seed, 0);
	const auto sim = simulate(s, rng);
	EXPECT_EQ(sim.data.n(), s.n);
	EXPECT_EQ(sim.data.d(), s.d);
	EXPECT_EQ(sim.truth, range_of(s.m));
}

TEST(Simulate, ReplicateStreamsReproduceAndDiffer) {
	const auto s = small_spec(0.5);
	auto a = replicate_rng(9, 3), b = replicate_rng(9, 3), c = replicate_rng(9, 4), e = replicate_rng(10, 3);
	const auto x = simulate(s, a).data;
	EXPECT_EQ(x, simulate(s, b).data);
	EXPECT_NE(x, simulate(s, c).data);
	EXPECT_NE(x, simulate(s, e).data);
}

TEST(Simulate, SpecValidation) {
	SimulationSpec s;
	s.m = s.d + 1;
	EXPECT_THROW(s.validate(), std::invalid_argument);
	s = SimulationSpec{};
	s.rho = 1.0;
	EXPECT_THROW(s.validate(), std::invalid_argument);
	s = SimulationSpec{};
	s.alpha_lo = 0.0;
	EXPECT_THROW(s.validate(), std::invalid_argument);
}

TEST(Distance, ToyPairs) {
	const auto ds = toy();
	const std::size_t i1 = col_index(ds, "Item1"), i2 = col_index(ds, "Item2");
	const std::size_t i3 = col_index(ds, "Item3"), i4 = col_index(ds, "Item4");
	EXPECT_EQ(distance(ds, DistanceKind::l1, i1, i2), 2.0);
	EXPECT_EQ(distance(ds, DistanceKind::l1, i3, i4), 2.0);
	EXPECT_DOUBLE_EQ(distance(ds, DistanceKind::l2, i1, i2), std::sqrt(2.0));
	EXPECT_NEAR(column_correlation(ds, i1, i2), 2.0 / 3.0, 1e-12);
	EXPECT_NEAR(distance(ds, DistanceKind::correlation, i1, i2), std::sqrt(2.0 / 3.0), 1e-12);
	EXPECT_NEAR(distance(ds, DistanceKind::binary, i1, i2), 36.0 / 5.0, 1e-12);
	EXPECT_THROW(distance(ds, DistanceKind::l1, i1, i1), std::invalid_argument);
}

TEST(Distance, IdenticalAndDisjointColumns) {
	const auto ds = from_columns(6, {{0, 1, 2}, {0, 1, 2}, {3, 4}});
	EXPECT_EQ(distance(ds, DistanceKind::l1, 0, 1), 0.0);
	EXPECT_EQ(distance(ds, DistanceKind::correlation, 0, 1), 0.0);
	EXPECT_TRUE(std::isinf(distance(ds, DistanceKind::binary, 0, 2)));
	EXPECT_EQ(distance(ds, DistanceKind::l1, 0, 2), 5.0);
}

TEST(Distance, MatrixMatchesPairwise) {
	std::mt19937_64 rng(12);
	const auto ds = lamb::testing::random_dataset(rng, 150, 12, 0.3);
	for (auto kind : {DistanceKind::l1, DistanceKind::l2, DistanceKind::binary, DistanceKind::correlation}) {
		const auto m = distance_matrix(ds, kind);
		for (std::size_t j = 0; j < 12; ++j)
			for (std::size_t k = j + 1; k < 12; ++k)
				EXPECT_DOUBLE_EQ(m.at(j, k), distance(ds, kind, j, k)) << to_string(kind);
	}
	EXPECT_EQ(parse_distance_kind("l2"), DistanceKind::l2);
	EXPECT_THROW(parse_distance_kind("cosine"), std::invalid_argument);
}

TEST(AverageLinkage, MatchesNaiveAgglomeration) {
	// O(d^3) reference: repeatedly merge the closest pair of clusters using
	// the mean of all leaf-to-leaf distances.
	std::mt19937_64 rng(13);
	std::uniform_real_distribution<double> unif(0.0, 10.0);
	for (int rep = 0; rep < 30; ++rep) {
		const std::size_t d = 2 + rng() % 12;
		CondensedDistances dist(d);
		for (std::size_t j = 0; j < d; ++j)
			for (std::size_t k = j + 1; k < d; ++k)
				dist.at(j, k) = unif(rng);
		std::vector<IndexSet> clusters;
		for (std::size_t j = 0; j < d; ++j)
			clusters.push_back({j});
		std::vector<double> naive_heights;
		while (clusters.size() > 1) {
			double best = std::numeric_limits<double>::infinity();
			std::size_t ba = 0, bb = 0;
			for (std::size_t a = 0; a < clusters.size(); ++a)
				for (std::size_t b = a + 1; b < clusters.size(); ++b) {
					double s = 0.0;
					for (auto x : clusters[a])
						for (auto y : clusters[b])
							s += dist.at(x, y);
					s /= static_cast<double>(clusters[a].size() * clusters[b].size());
					if (s < best) {
						best = s;
						ba = a;
						bb = b;
					}
				}
			naive_heights.push_back(best);
			clusters[ba].insert(clusters[ba].end(), clusters[bb].begin(), clusters[bb].end());
			clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(bb));
		}
		const auto merges = average_linkage(dist);
		ASSERT_EQ(merges.size(), d - 1);
		std::sort(naive_heights.begin(), naive_heights.end());
		for (std::size_t k = 0; k < merges.size(); ++k)
			EXPECT_NEAR(merges[k].height, naive_heights[k], 1e-9);
		EXPECT_EQ(merges.back().size, d);
		EXPECT_EQ(cluster_members(merges, d, 2 * d - 2), range_of(d));
	}
}

TEST(BaselineCluster, SeparatedBlocks) {
	const auto ds = from_columns(8, {{0, 1, 2, 3}, {0, 1, 2, 3}, {0, 1, 2}, {4, 5, 6, 7}, {4, 5, 6, 7}, {5, 6, 7}});
	for (auto kind : {DistanceKind::l1, DistanceKind::l2, DistanceKind::correlation}) {
		EXPECT_EQ(baseline_cluster(ds, kind, 3), (IndexSet{0, 1, 2})) << to_string(kind);
		EXPECT_EQ(baseline_cluster(ds, kind, 2), (IndexSet{0, 1})) << to_string(kind);
	}
	EXPECT_THROW(baseline_cluster(from_columns(3, {{0}}), DistanceKind::l1, 2), std::invalid_argument);
}

TEST(BaselineCluster, CorrelationFindsStrongBlock) {
	SimulationSpec s;
	s.n = 300;
	s.d = 60;
	s.m = 10;
	s.rho = 0.9;
	s.tau_mode = TauMode::fixed_one;
	s.alpha_lo = 0.3;
	s.alpha_hi = 0.8;
	auto rng = replicate_rng(1, 0);
	const auto sim = simulate(s, rng);
	const auto chosen = run_method(sim.data, Method::correlation, sim.truth, s.m);
	EXPECT_GT(evaluate(chosen, sim.truth).tdr, 0.5);
}

TEST(Evaluate, Examples) {
	const auto r = evaluate({1, 2, 3, 10}, {0, 1, 2, 3, 4});
	EXPECT_DOUBLE_EQ(r.fpr, 0.25);
	EXPECT_DOUBLE_EQ(r.tdr, 0.6);
	const auto empty = evaluate({}, {0, 1});
	EXPECT_EQ(empty.fpr, 0.0);
	EXPECT_EQ(empty.tdr, 0.0);
	EXPECT_EQ(evaluate({0, 1}, {0, 1}).tdr, 1.0);
	EXPECT_THROW(evaluate({1}, {}), std::invalid_argument);
}

TEST(Evaluate, FprPlusPrecisionIsOne) {
	std::mt19937_64 rng(14);
	for (int rep = 0; rep < 200; ++rep) {
		IndexSet b, a;
		for (std::size_t j = 0; j < 30; ++j) {
			if (rng() % 3 == 0)
				b.push_back(j);
			if (rng() % 2 == 0)
				a.push_back(j);
		}
		if (a.empty() || b.empty())
			continue;
		const auto r = evaluate(b, a);
		const double precision = r.tdr * a.size() / b.size();
		EXPECT_NEAR(r.fpr + precision, 1.0, 1e-12);
	}
}

TEST(RunMethod, InvariantToRowOrder) {
	const auto s = small_spec(0.7);
	auto rng = replicate_rng(s.rng_seed, 1);
	const auto sim = simulate(s, rng);
	std::vector<std::size_t> perm(s.n);
	std::iota(perm.begin(), perm.end(), 0);
	std::shuffle(perm.begin(), perm.end(), rng);
	std::vector<Cell> cells;
	for (const auto& [i, j] : sim.data.cells())
		cells.emplace_back(perm[i], j);
	const BinaryDataset shuffled(sim.data.row_labels(), sim.data.col_labels(), cells);
	for (Method m : {Method::lamb, Method::l1, Method::correlation})
		EXPECT_EQ(run_method(sim.data, m, sim.truth, s.m), run_method(shuffled, m, sim.truth, s.m)) << to_string(m);
}

TEST(RunMethod, MapsBackPastDegenerateColumns) {
	// column 0 is all zeros; the block lives in columns 1..3
	const auto ds = from_columns(8, {{}, {0, 1, 2, 3}, {0, 1, 2, 3}, {0, 1, 2}, {4, 5, 6, 7}, {5, 6}});
	EXPECT_EQ(run_method(ds, Method::l1, {1, 2, 3}, 3), (IndexSet{1, 2, 3}));
}

TEST(Study, DeterministicAcrossThreads) {
	std::vector<SimulationSpec> grid{small_spec(0.0), small_spec(0.6, TauMode::fixed_one)};
	const std::vector<Method> methods{Method::lamb, Method::l2, Method::binary};
	StudyOptions one, four;
	four.threads = 4;
	const auto a = run_study(grid, methods, 3, one);
	const auto b = run_study(grid, methods, 3, four);
	ASSERT_EQ(a.size(), 2u * 3u * 3u);
	std::ostringstream sa, sb;
	write_study_csv(a, sa);
	write_study_csv(b, sb);
	EXPECT_EQ(sa.str(), sb.str());
	EXPECT_EQ(a[0].method, Method::lamb);
	EXPECT_EQ(a[1].method, Method::l2);
	EXPECT_EQ(a[3].rep, 1u);
	for (const auto& r : a)
		EXPECT_TRUE(r.gated_tdr == (r.fpr < one.fpr_gate ? r.tdr : 0.0));
}

TEST(Study, NullBlockYieldsLittleForLamb) {
	const auto rows = run_study({small_spec(0.0)}, {Method::lamb}, 5);
	double tdr = 0.0;
	for (const auto& r : rows)
		tdr += r.gated_tdr;
	EXPECT_LT(tdr / 5.0, 0.2);
}

TEST(Study, SummaryAveragesAndCsv) {
	const auto rows = run_study({small_spec(0.6)}, {Method::lamb, Method::l1}, 4);
	const auto sum = summarize(rows);
	ASSERT_EQ(sum.size(), 2u);
	double fpr = 0.0;
	for (const auto& r : rows)
		if (r.method == Method::l1)
			fpr += r.fpr;
	const auto& l1 = sum[0].method == Method::l1 ? sum[0] : sum[1];
	EXPECT_EQ(l1.reps, 4u);
	EXPECT_NEAR(l1.mean_fpr, fpr / 4.0, 1e-15);
	std::ostringstream out;
	write_summary_csv(sum, out);
	EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "method,rho,tau_mode,reps,mean_fpr,mean_tdr");
	EXPECT_THROW(run_study({small_spec(0.0)}, {Method::l1}, 0), std::invalid_argument);
}

TEST(StudyConfig, ParsesKeysAndLists) {
	std::istringstream in("# grid\nn = 50\nd=30\nm=5\nrho = 0.6, 0.7\ntau_mode = random, fixed\n"
	                      "methods = lamb,correlation\nreps=2\nfdr=0.1\nrng_seed=9 # trailing\n");
	const auto cfg = parse_study_config(in);
	EXPECT_EQ(cfg.base.n, 50u);
	EXPECT_EQ(cfg.base.m, 5u);
	EXPECT_EQ(cfg.reps, 2u);
	EXPECT_EQ(cfg.options.q, 0.1);
	EXPECT_EQ(cfg.base.rng_seed, 9u);
	EXPECT_EQ(cfg.methods, (std::vector<Method>{Method::lamb, Method::correlation}));
	const auto grid = cfg.grid();
	ASSERT_EQ(grid.size(), 4u);
	EXPECT_EQ(grid[1].rho, 0.7);
	EXPECT_EQ(grid[2].tau_mode, TauMode::fixed_one);
}

TEST(StudyConfig, Rejections) {
	auto fails = [](const std::string& text) {
		std::istringstream in(text);
		try {
			parse_study_config(in);
		} catch (const std::invalid_argument& e) {
			return std::string(e.what());
		}
		return std::string();
	};
	EXPECT_NE(fails("colour = red\n").find("unknown key 'colour'"), std::string::npos);
	EXPECT_NE(fails("n 5\n").find("key=value"), std::string::npos);
	EXPECT_FALSE(fails("rho = abc\n").empty());
	EXPECT_FALSE(fails("methods = lamb, kmeans\n").empty());
	EXPECT_FALSE(fails("fdr = 1.5\n").empty());
	EXPECT_FALSE(fails("m = 2000\n").empty());
	EXPECT_FALSE(fails("reps = 0\n").empty());
	EXPECT_TRUE(fails("").empty());
}

TEST(Names, RoundTrip) {
	for (Method m : {Method::lamb, Method::l1, Method::l2, Method::binary, Method::correlation})
		EXPECT_EQ(parse_method(to_string(m)), m);
	EXPECT_EQ(parse_tau_mode("random_expo1"), TauMode::random_expo1);
	EXPECT_EQ(parse_tau_mode(to_string(TauMode::fixed_one)), TauMode::fixed_one);
	EXPECT_THROW(parse_tau_mode("gamma"), std::invalid_argument);
}
