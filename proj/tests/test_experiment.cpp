#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "gbeta/experiment.hpp"
#include "gbeta/io.hpp"
#include "test_util.hpp"

using namespace gbeta;

TEST(PopulationGenerator, KIsNOver25) {
    Population pop = generate_population_paper(125, 0);
    EXPECT_EQ(pop.n_nodes(), 125);
    EXPECT_EQ(pop.n_subpops(), 5);
    EXPECT_THROW(generate_population_paper(120, 0), BadN);
    EXPECT_THROW(generate_population_paper(0, 0), BadN);
}

TEST(PopulationGenerator, FirstNodeMembershipUniformOverK) {
    // Node 1's first membership is uniform over the K subpopulations.
    const int n = 100, k = 4;
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    const int reps = 4000;
    for (int s = 0; s < reps; ++s) {
        Population pop = generate_population_paper(n, static_cast<std::uint64_t>(s));
        for (int c = 0; c < pop.n_subpops(); ++c) {
            const auto& sp = pop.subpops()[static_cast<std::size_t>(c)];
            if (std::binary_search(sp.begin(), sp.end(), 1))
                counts[static_cast<std::size_t>(c)] += 1;
        }
    }
    // Every subpopulation should contain node 1 at a rate near
    // P(member) = E[1 + Y_1] / K = (1 + (K-1)/K) / K.
    double want = (1.0 + static_cast<double>(k - 1) / k) / k;
    for (int c = 0; c < k; ++c) {
        double freq = static_cast<double>(counts[static_cast<std::size_t>(c)]) / reps;
        EXPECT_NEAR(freq, want, 4 * std::sqrt(want * (1 - want) / reps)) << "subpop " << c;
    }
}

TEST(PopulationGenerator, SizesAreBalanced) {
    // Mean max/min subpopulation size ratio stays small at N=250.
    double ratio_acc = 0;
    const int reps = 60;
    for (int s = 0; s < reps; ++s) {
        Population pop = generate_population_paper(250, 1000 + static_cast<std::uint64_t>(s));
        std::size_t lo = SIZE_MAX, hi = 0;
        for (const auto& sp : pop.subpops()) {
            lo = std::min(lo, sp.size());
            hi = std::max(hi, sp.size());
        }
        ratio_acc += static_cast<double>(hi) / static_cast<double>(lo);
    }
    EXPECT_LE(ratio_acc / reps, 1.5);
}

TEST(PopulationGenerator, MembershipCountsFollowOnePlusBinomial) {
    // Total membership mass equals sum_i (1 + Y_i); mean per node is
    // 1 + (K-1)/K, close to 2 for moderate K.
    const int n = 250;
    double total = 0;
    const int reps = 50;
    for (int s = 0; s < reps; ++s) {
        Population pop = generate_population_paper(n, 77 + static_cast<std::uint64_t>(s));
        for (const auto& sp : pop.subpops()) total += static_cast<double>(sp.size());
    }
    double mean_memberships = total / (reps * n);
    double want = 1.0 + 9.0 / 10.0;  // K = 10
    EXPECT_NEAR(mean_memberships, want, 0.05);
}

TEST(DrawThetaStar, RangeDefaultsAndDeterminism) {
    Population pop = generate_population_paper(50, 3);
    ThetaStarSpec spec;
    EXPECT_EQ(spec.lo, -1.25);
    EXPECT_EQ(spec.hi, -0.75);
    EXPECT_EQ(spec.brokerage, 0.25);
    Theta a = draw_theta_star(pop, spec, 5, true);
    Theta b = draw_theta_star(pop, spec, 5, true);
    EXPECT_EQ(a.v, b.v);
    ASSERT_EQ(static_cast<int>(a.v.size()), 51);
    for (int i = 0; i < 50; ++i) {
        ASSERT_GE(a.v[static_cast<std::size_t>(i)], spec.lo);
        ASSERT_LE(a.v[static_cast<std::size_t>(i)], spec.hi);
    }
    EXPECT_EQ(a.v.back(), 0.25);
    Theta c = draw_theta_star(pop, spec, 6, true);
    EXPECT_NE(a.v, c.v);
}

TEST(SummarizeRate, ExactLawGivesConstantR) {
    std::vector<TrialRecord> recs;
    for (int n : {50, 100, 200})
        for (int rep = 0; rep < 5; ++rep) {
            TrialRecord t;
            t.n = n;
            t.rep = rep;
            t.converged = true;
            t.error_sup = 2.0 * std::sqrt(std::log(n) / n);
            t.error_degrees = t.error_sup;
            recs.push_back(t);
        }
    RateSummary s = summarize_rate(recs);
    EXPECT_TRUE(s.rate_consistent);
    for (const auto& row : s.rows) EXPECT_NEAR(row.rate_r, 2.0, 1e-12);
}

TEST(SummarizeRate, WrongLawFailsTheFlag) {
    // A non-shrinking error violates the sqrt(log N / N) law: r grows like
    // sqrt(N / log N).
    std::vector<TrialRecord> recs;
    for (int n : {50, 100, 200, 400, 800})
        for (int rep = 0; rep < 3; ++rep) {
            TrialRecord t;
            t.n = n;
            t.rep = rep;
            t.converged = true;
            t.error_sup = 0.5;
            recs.push_back(t);
        }
    EXPECT_FALSE(summarize_rate(recs).rate_consistent);
}

TEST(SummarizeRate, InsufficientDataThrows) {
    std::vector<TrialRecord> recs(3);
    for (auto& t : recs) {
        t.n = 50;
        t.converged = true;
    }
    EXPECT_THROW(summarize_rate(recs), InsufficientData);
}

TEST(RunExperiment, RecordsSatisfyErrorDecomposition) {
    ExperimentConfig cfg;
    cfg.n_values = {25, 50};
    cfg.replications = 3;
    cfg.seed = 11;
    cfg.burn_in_sweeps = 20;
    std::vector<TrialRecord> trials = run_experiment(cfg);
    ASSERT_EQ(trials.size(), 6u);
    for (const auto& t : trials) {
        ASSERT_EQ(t.error_sup, std::max(t.error_degrees, t.error_brokerage));
        ASSERT_GE(t.error_sup, 0.0);
    }
    // Deterministic ordering: (n, rep) lexicographic.
    EXPECT_EQ(trials[0].n, 25);
    EXPECT_EQ(trials[5].n, 50);
    EXPECT_EQ(trials[5].rep, 2);
}

TEST(RunExperiment, CsvIsByteStableAcrossRuns) {
    ExperimentConfig cfg;
    cfg.n_values = {25};
    cfg.replications = 4;
    cfg.seed = 21;
    cfg.burn_in_sweeps = 15;
    std::ostringstream a, b;
    write_trials_csv(a, run_experiment(cfg));
    write_trials_csv(b, run_experiment(cfg));
    EXPECT_EQ(a.str(), b.str());
    EXPECT_EQ(a.str().substr(0, a.str().find('\n')),
              "n,rep,seed,converged,error_sup,error_degrees,error_brokerage,iterations,wall_ms");
}

TEST(RunExperiment, CsvRoundTripsThroughReader) {
    ExperimentConfig cfg;
    cfg.n_values = {25};
    cfg.replications = 3;
    cfg.seed = 31;
    cfg.burn_in_sweeps = 15;
    std::vector<TrialRecord> trials = run_experiment(cfg);
    std::ostringstream os;
    write_trials_csv(os, trials);
    std::string path = testing::TempDir() + "/trials_roundtrip.csv";
    {
        std::ofstream f(path);
        f << os.str();
    }
    std::vector<TrialRecord> back = read_trials_csv(path);
    ASSERT_EQ(back.size(), trials.size());
    for (std::size_t k = 0; k < back.size(); ++k) {
        EXPECT_EQ(back[k].n, trials[k].n);
        EXPECT_EQ(back[k].rep, trials[k].rep);
        EXPECT_EQ(back[k].seed, trials[k].seed);
        EXPECT_EQ(back[k].converged, trials[k].converged);
        EXPECT_EQ(back[k].error_sup, trials[k].error_sup);
        EXPECT_EQ(back[k].iterations, trials[k].iterations);
    }
}

TEST(Io, PopulationJsonRoundTrip) {
    Population pop = oracle::figure_population();
    json j = population_to_json(pop);
    Population back = population_from_json(j);
    EXPECT_EQ(back.n_nodes(), pop.n_nodes());
    EXPECT_EQ(back.subpops(), pop.subpops());
    EXPECT_THROW(population_from_json(json{{"n_nodes", 3}}), IoError);
}

TEST(Io, ModelJsonRoundTrip) {
    ModelSpec m(Variant::sparse_brokerage, oracle::chain_population(2), 0.3);
    json j = model_to_json(m);
    ModelSpec back = model_from_json(j);
    EXPECT_EQ(back.variant(), Variant::sparse_brokerage);
    EXPECT_EQ(back.alpha(), 0.3);
    EXPECT_EQ(back.n_nodes(), 5);
    EXPECT_THROW(variant_from_string("nope"), IoError);
}

TEST(Io, GraphCsvRoundTripAndValidation) {
    Rng rng(4);
    Graph g = oracle::random_graph(rng, 6, 0.5);
    std::string path = testing::TempDir() + "/graph_io_test.csv";
    save_graph_csv(path, g);
    Graph back = load_graph_csv(path);
    EXPECT_TRUE(back == g);

    {
        std::ofstream f(path);
        f << "i,j\n2,2\n";
    }
    EXPECT_THROW(load_graph_csv(path, 6), IoError);
    {
        std::ofstream f(path);
        f << "i,j\n1,2\n2,1\n";
    }
    EXPECT_THROW(load_graph_csv(path, 6), IoError);
    {
        std::ofstream f(path);
        f << "i,j\n1,9\n";
    }
    EXPECT_THROW(load_graph_csv(path, 6), IoError);
}

TEST(Io, ThetaJsonIsFlatArray) {
    Theta t(std::vector<double>{-1.0, -0.5, 0.25});
    json j = theta_to_json(t);
    ASSERT_TRUE(j.is_array());
    EXPECT_EQ(theta_from_json(j).v, t.v);
}

TEST(PopulationGenerator, Min3HoldsOverwhelminglyAtPaperScale) {
    int ok = 0;
    const int reps = 100;
    for (int s = 0; s < reps; ++s)
        if (generate_population_paper(125, 5000 + static_cast<std::uint64_t>(s))
                .assumption_min3())
            ++ok;
    EXPECT_GE(ok, 95);
}

TEST(PopulationGenerator, AssumptionBSurveyOnGeneratedPopulations) {
    // Report-only survey: the checker runs on random generator output and
    // the report is populated; no verdict asserted on the random structure.
    for (int s = 0; s < 5; ++s) {
        Population pop = generate_population_paper(100, 400 + static_cast<std::uint64_t>(s));
        SubpopGraph sg = build_subpop_graph(pop);
        AssumptionBReport rep =
            check_assumption_B(sg, 2.0, 0.0, pop.max_neighborhood_size());
        EXPECT_EQ(static_cast<int>(rep.counts.size()), std::max(sg.diameter(), 1));
        EXPECT_EQ(rep.b2_growth_log_ratio.size(), rep.counts.size());
    }
}

TEST(RunExperiment, SummaryCountsMin3Violations) {
    ExperimentConfig cfg;
    cfg.n_values = {25, 50};
    cfg.replications = 2;
    cfg.seed = 77;
    cfg.burn_in_sweeps = 10;
    RateSummary s = summarize_rate(run_experiment(cfg));
    for (const auto& row : s.rows) {
        EXPECT_GE(row.min3_violations, 0);
        EXPECT_LE(row.min3_violations, row.trials);
    }
}
