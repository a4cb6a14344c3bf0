#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <cmath>

#include "gbeta/estimator.hpp"
#include "gbeta/sampler.hpp"
#include "test_util.hpp"

using namespace gbeta;

namespace {

Graph cycle4() {
    Graph g(4);
    g.set_edge(1, 2, true);
    g.set_edge(2, 3, true);
    g.set_edge(3, 4, true);
    g.set_edge(1, 4, true);
    return g;
}

std::vector<ModelSpec> all_variants(const Population& pop) {
    return {ModelSpec(Variant::beta, pop), ModelSpec(Variant::brokerage, pop),
            ModelSpec(Variant::sparse_brokerage, pop, 0.3),
            ModelSpec(Variant::size_dependent, pop)};
}

}  // namespace

TEST(PseudoLoglik, ZeroThetaGivesMLogHalf) {
    Rng rng(1);
    Population pop = oracle::random_population(rng, 6, 2);
    for (const ModelSpec& model : all_variants(Population(pop))) {
        if (model.variant() == Variant::sparse_brokerage) continue;  // reference shifts it
        Graph g = oracle::random_graph(rng, 6);
        EXPECT_NEAR(pseudo_loglik(Theta::zeros(model), g, model), 15.0 * std::log(0.5), 1e-12);
    }
}

TEST(PseudoLoglik, TriangleClosedForm) {
    ModelSpec brok(Variant::brokerage, oracle::triangle_population());
    Graph g(3);
    g.set_edge(1, 2, true);
    g.set_edge(1, 3, true);
    g.set_edge(2, 3, true);
    Theta t(std::vector<double>{0, 0, 0, 1.0});
    // Each conditional is logistic(3): flipping any edge toggles 3 brokerage units.
    EXPECT_NEAR(pseudo_loglik(t, g, brok), 3 * std::log(logistic(3.0)), 1e-12);
}

TEST(PseudoGrad, EmptyGraphBetaAnalytic) {
    ModelSpec beta(Variant::beta, oracle::triangle_population());
    Graph g(3);
    std::vector<double> grad = pseudo_grad(Theta::zeros(beta), g, beta);
    for (double c : grad) EXPECT_NEAR(c, -1.0, 1e-14);
}

TEST(PseudoGrad, MatchesFiniteDifferences) {
    Rng rng(2);
    Population pop = oracle::random_population(rng, 5, 2);
    const double h = 1e-5;
    for (const ModelSpec& model : all_variants(Population(pop))) {
        for (int trial = 0; trial < 10; ++trial) {
            Theta t = oracle::random_theta(rng, model);
            Graph g = oracle::random_graph(rng, 5);
            std::vector<double> grad = pseudo_grad(t, g, model);
            for (int c = 0; c < model.p(); ++c) {
                Theta tp = t, tm = t;
                tp.v[static_cast<std::size_t>(c)] += h;
                tm.v[static_cast<std::size_t>(c)] -= h;
                double fd =
                    (pseudo_loglik(tp, g, model) - pseudo_loglik(tm, g, model)) / (2 * h);
                double scale = std::max({1.0, std::fabs(fd), std::fabs(grad[static_cast<std::size_t>(c)])});
                ASSERT_NEAR(grad[static_cast<std::size_t>(c)], fd, 1e-6 * scale);
            }
        }
    }
}

TEST(PseudoHessian, SymmetricAndDiagonalExample) {
    ModelSpec beta(Variant::beta, oracle::triangle_population());
    Rng rng(3);
    Graph g = oracle::random_graph(rng, 3);
    Eigen::MatrixXd h = pseudo_hessian(Theta::zeros(beta), g, beta);
    EXPECT_TRUE(h.isApprox(h.transpose()));
    // (i,i) entry: sum over the N-1 incident edges of -1/4.
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(h(i, i), -2.0 / 4.0, 1e-14);
}

TEST(PseudoHessian, MatchesDifferencedGradient) {
    Rng rng(4);
    Population pop = oracle::random_population(rng, 5, 2);
    const double h = 1e-5;
    for (const ModelSpec& model : all_variants(Population(pop))) {
        Theta t = oracle::random_theta(rng, model);
        Graph g = oracle::random_graph(rng, 5);
        Eigen::MatrixXd hess = pseudo_hessian(t, g, model);
        for (int c = 0; c < model.p(); ++c) {
            Theta tp = t, tm = t;
            tp.v[static_cast<std::size_t>(c)] += h;
            tm.v[static_cast<std::size_t>(c)] -= h;
            std::vector<double> gp = pseudo_grad(tp, g, model);
            std::vector<double> gm = pseudo_grad(tm, g, model);
            for (int r = 0; r < model.p(); ++r) {
                double fd = (gp[static_cast<std::size_t>(r)] - gm[static_cast<std::size_t>(r)]) /
                            (2 * h);
                double scale = std::max({1.0, std::fabs(fd), std::fabs(hess(r, c))});
                ASSERT_NEAR(hess(r, c), fd, 1e-5 * scale);
            }
        }
    }
}

TEST(PseudoHessian, NegativeSemidefiniteEverywhere) {
    Rng rng(5);
    for (int trial = 0; trial < 30; ++trial) {
        int n = 4 + static_cast<int>(rng.below(4));
        Population pop = oracle::random_population(rng, n, 2);
        for (const ModelSpec& model : all_variants(Population(pop))) {
            Theta t = oracle::random_theta(rng, model, -2.0, 2.0);
            Graph g = oracle::random_graph(rng, n);
            Eigen::MatrixXd h = pseudo_hessian(t, g, model);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
            ASSERT_LE(es.eigenvalues().maxCoeff(), 1e-10);
        }
    }
}

TEST(FitMple, FourCycleClosedForm) {
    ModelSpec beta(Variant::beta, Population({{1, 2, 3, 4}}, 4));
    FitResult fit = fit_mple(cycle4(), beta, 1e-10);
    ASSERT_EQ(fit.status, FitStatus::converged);
    EXPECT_TRUE(fit.in_theta_tilde_set);
    for (int i = 1; i <= 4; ++i) EXPECT_NEAR(fit.theta_hat.degree(i), std::log(2.0) / 2, 1e-8);
}

TEST(FitMple, IsolatedNodeIsDegenerate) {
    ModelSpec beta(Variant::beta, Population({{1, 2, 3, 4}}, 4));
    Graph g(4);
    g.set_edge(1, 2, true);
    g.set_edge(2, 3, true);  // node 4 isolated
    EXPECT_EQ(fit_mple(g, beta, 1e-8).status, FitStatus::degenerate_data);
}

TEST(MleBeta, CompleteGraphIsDegenerate) {
    ModelSpec beta(Variant::beta, Population({{1, 2, 3, 4}}, 4));
    Graph g(4);
    for (std::int64_t m = 0; m < 6; ++m) g.set_edge(m, true);
    EXPECT_EQ(mle_beta(g, beta, 1e-8).status, FitStatus::degenerate_data);
    EXPECT_THROW(mle_beta(g, ModelSpec(Variant::brokerage, Population({{1, 2, 3, 4}}, 4)), 1e-8),
                 WrongVariant);
}

TEST(MleBeta, CycleAgreesWithMpleAndReproducesDegrees) {
    ModelSpec beta(Variant::beta, Population({{1, 2, 3, 4}}, 4));
    Graph g = cycle4();
    FitResult mle = mle_beta(g, beta, 1e-12);
    FitResult mple = fit_mple(g, beta, 1e-12);
    ASSERT_EQ(mle.status, FitStatus::converged);
    ASSERT_EQ(mple.status, FitStatus::converged);
    for (int i = 0; i < 4; ++i)
        EXPECT_NEAR(mle.theta_hat.v[static_cast<std::size_t>(i)],
                    mple.theta_hat.v[static_cast<std::size_t>(i)], 1e-10);
    // First-order condition: fitted expected degrees match observed.
    for (int i = 1; i <= 4; ++i) {
        double mu = 0;
        for (int j = 1; j <= 4; ++j)
            if (j != i)
                mu += logistic(mle.theta_hat.degree(i) + mle.theta_hat.degree(j));
        EXPECT_NEAR(mu, g.degree(i), 1e-8);
    }
}

TEST(MleBeta, AgreesWithMpleOnRandomNondegenerateGraphs) {
    Rng rng(6);
    const int n = 20;
    std::vector<int> all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), 1);
    ModelSpec beta(Variant::beta, Population({all}, n));
    int done = 0;
    while (done < 20) {
        Graph g = oracle::random_graph(rng, n, 0.5);
        bool degen = false;
        for (int i = 1; i <= n; ++i)
            if (g.degree(i) == 0 || g.degree(i) == n - 1) degen = true;
        if (degen) continue;
        ++done;
        FitResult a = mle_beta(g, beta, 1e-12);
        FitResult b = fit_mple(g, beta, 1e-12);
        ASSERT_EQ(a.status, FitStatus::converged);
        ASSERT_EQ(b.status, FitStatus::converged);
        for (int i = 0; i < n; ++i)
            ASSERT_NEAR(a.theta_hat.v[static_cast<std::size_t>(i)],
                        b.theta_hat.v[static_cast<std::size_t>(i)], 1e-10);
    }
}

TEST(FitMple, RecoversSimulatedBrokerageDataAsLocalMax) {
    Population pop({{1, 2, 3}, {3, 4, 5}}, 5);
    ModelSpec model(Variant::brokerage, pop);
    Theta star = Theta::constant(model, 0.0, 0.3);
    // First draw with all degrees interior; very sparse draws at N=5 put
    // the optimum at infinity and make the probe meaningless.
    Graph x(5);
    for (std::uint64_t seed = 100;; ++seed) {
        GibbsConfig cfg;
        cfg.seed = seed;
        x = gibbs_sample(star, model, cfg, 1).front();
        bool interior = true;
        for (int i = 1; i <= 5; ++i)
            if (x.degree(i) == 0 || x.degree(i) == 4) interior = false;
        if (interior) break;
    }

    FitResult fit = fit_mple(x, model, 1e-8);
    ASSERT_EQ(fit.status, FitStatus::converged);
    EXPECT_TRUE(fit.in_theta_tilde_set);
    EXPECT_LE(fit.grad_inf_norm, 1e-8);

    // Local-maximum probe; global by concavity of the pseudo-loglikelihood.
    double best = pseudo_loglik(fit.theta_hat, x, model);
    Rng rng(78);
    for (int k = 0; k < 100; ++k) {
        Theta perturbed = fit.theta_hat;
        for (auto& v : perturbed.v) v += rng.uniform(-0.5, 0.5);
        ASSERT_GE(best + 1e-7, pseudo_loglik(perturbed, x, model));
    }
}

TEST(FitMple, TraceRecordsMonotoneObjective) {
    Population pop({{1, 2, 3}, {3, 4, 5}}, 5);
    ModelSpec model(Variant::brokerage, pop);
    GibbsConfig cfg;
    cfg.seed = 5;
    Graph x = gibbs_sample(Theta::constant(model, -0.5, 0.2), model, cfg, 1).front();
    FitResult fit = fit_mple(x, model, 1e-8);
    ASSERT_GE(fit.trace.size(), 2u);
    for (std::size_t k = 1; k + 1 < fit.trace.size(); ++k)
        ASSERT_GE(fit.trace[k + 1].first, fit.trace[k].first);
}

TEST(FitMple, WarmStartReachesSameOptimum) {
    Population pop({{1, 2, 3}, {3, 4, 5}}, 5);
    ModelSpec model(Variant::brokerage, pop);
    GibbsConfig cfg;
    cfg.seed = 13;
    Graph x = gibbs_sample(Theta::constant(model, -0.7, 0.25), model, cfg, 1).front();
    FitOptions warm;
    warm.beta_warm_start = true;
    FitResult a = fit_mple(x, model, 1e-10);
    FitResult b = fit_mple(x, model, 1e-10, warm);
    ASSERT_EQ(a.status, FitStatus::converged);
    ASSERT_EQ(b.status, FitStatus::converged);
    for (std::size_t k = 0; k < a.theta_hat.v.size(); ++k)
        ASSERT_NEAR(a.theta_hat.v[k], b.theta_hat.v[k], 1e-8);
}

// At the data-generating theta*, the expected pseudo-gradient over the
// enumerated law vanishes: theta* is the population-level optimum.
TEST(Estimator, PopulationOptimumAtThetaStar) {
    Population pop({{1, 2, 3}, {3, 4}}, 4);
    for (Variant v : {Variant::brokerage, Variant::size_dependent}) {
        ModelSpec model(v, pop);
        Theta star = Theta::constant(model, -0.4, 0.3);
        EnumerationResult res = enumerate_exact(star, model, true);
        std::vector<double> eg(static_cast<std::size_t>(model.p()), 0.0);
        for (std::size_t mask = 0; mask < res.log_probs.size(); ++mask) {
            Graph g(4);
            for (std::int64_t m = 0; m < 6; ++m) g.set_edge(m, (mask >> m) & 1ULL);
            std::vector<double> grad = pseudo_grad(star, g, model);
            double w = std::exp(res.log_probs[mask]);
            for (std::size_t c = 0; c < eg.size(); ++c) eg[c] += w * grad[c];
        }
        for (double c : eg) ASSERT_NEAR(c, 0.0, 1e-8);
    }
}

TEST(Estimator, NodeRelabelingPermutesEstimate) {
    Population pop({{1, 2, 3}, {3, 4, 5}}, 5);
    ModelSpec model(Variant::brokerage, pop);
    GibbsConfig cfg;
    cfg.seed = 21;
    Graph x = gibbs_sample(Theta::constant(model, -0.5, 0.2), model, cfg, 1).front();

    // Permutation sigma: node v -> perm[v-1].
    const std::vector<int> perm = {3, 5, 1, 2, 4};
    std::vector<std::vector<int>> sp2;
    for (const auto& sp : pop.subpops()) {
        std::vector<int> s;
        for (int v : sp) s.push_back(perm[static_cast<std::size_t>(v - 1)]);
        sp2.push_back(s);
    }
    Population pop2(sp2, 5);
    ModelSpec model2(Variant::brokerage, pop2);
    Graph x2(5);
    for (int i = 1; i <= 5; ++i)
        for (int j = i + 1; j <= 5; ++j)
            if (x.edge(i, j))
                x2.set_edge(perm[static_cast<std::size_t>(i - 1)],
                            perm[static_cast<std::size_t>(j - 1)], true);

    FitResult a = fit_mple(x, model, 1e-10);
    FitResult b = fit_mple(x2, model2, 1e-10);
    ASSERT_EQ(a.status, FitStatus::converged);
    ASSERT_EQ(b.status, FitStatus::converged);
    for (int i = 1; i <= 5; ++i)
        ASSERT_NEAR(a.theta_hat.degree(i),
                    b.theta_hat.degree(perm[static_cast<std::size_t>(i - 1)]), 1e-7);
    ASSERT_NEAR(a.theta_hat.v.back(), b.theta_hat.v.back(), 1e-7);
}

TEST(Estimator, StatusInvariantInThetaTildeSet) {
    Rng rng(9);
    Population pop = oracle::random_population(rng, 5, 2);
    ModelSpec model(Variant::brokerage, pop);
    Graph g = oracle::random_graph(rng, 5, 0.4);
    for (double gamma : {1e-2, 1e-6}) {
        FitResult fit = fit_mple(g, model, gamma);
        ASSERT_EQ(fit.in_theta_tilde_set, fit.grad_inf_norm <= gamma);
        if (fit.status == FitStatus::converged) {
            ASSERT_TRUE(fit.in_theta_tilde_set);
        }
    }
}
