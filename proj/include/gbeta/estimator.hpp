#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cmath>
#include <optional>
#include <vector>

#include "gbeta/model.hpp"

namespace gbeta {

enum class FitStatus { converged, max_iterations, diverged, degenerate_data };

inline const char* fit_status_name(FitStatus s) {
    switch (s) {
        case FitStatus::converged: return "converged";
        case FitStatus::max_iterations: return "max_iterations";
        case FitStatus::diverged: return "diverged";
        case FitStatus::degenerate_data: return "degenerate_data";
    }
    return "?";
}

struct FitResult {
    Theta theta_hat;
    double grad_inf_norm = std::numeric_limits<double>::infinity();
    double gamma = 0.0;
    bool in_theta_tilde_set = false;  // grad_inf_norm <= gamma
    int iterations = 0;
    FitStatus status = FitStatus::max_iterations;
    std::vector<std::pair<double, double>> trace;  // (objective, grad sup-norm)
};

struct FitOptions {
    int max_iterations = 200;
    double divergence_guard = 50.0;  // ||theta||_inf beyond this is hopeless
    std::optional<Theta> init;
    bool beta_warm_start = false;  // start dependent fits from a Model-1 fit
};

// Per-edge building blocks of the pseudo-loglikelihood for one fixed
// observation. The statistic delta of flipping edge m touches only the two
// degree coordinates and the brokerage coordinate, and does not depend on
// theta, so everything theta-dependent reduces to M logistic evaluations:
//
//   eta_m     = theta_i + theta_j + theta_{N+1} db_m + dloga_m
//   loglik    = sum_m [ x_m eta_m - log(1 + e^{eta_m}) ]
//   gradient  = sum_m ( x_m - logistic(eta_m) ) delta_m
//   hessian   = -sum_m logistic'(eta_m) delta_m delta_m^T
class EdgeTerms {
public:
    EdgeTerms(const Graph& g, const ModelSpec& model) : p_(model.p()), n_(model.n_nodes()) {
        SharedPartnerCounts counts(model.population(), g);
        const EdgeIndex& idx = g.index();
        terms_.reserve(static_cast<std::size_t>(idx.total()));
        const bool dep = model.has_brokerage();
        const bool sparse =
            model.variant() == Variant::sparse_brokerage && model.alpha() != 0.0;
        for (std::int64_t m = 0; m < idx.total(); ++m) {
            auto [i, j] = idx.pair(m);
            Term t;
            t.i = i;
            t.j = j;
            t.x = g.edge(m) ? 1 : 0;
            if (dep || sparse) {
                EdgeFlipDelta d = edge_flip_delta(g, i, j, model, counts);
                t.db = dep ? d.d_suff_brokerage : 0.0;
                t.dloga = d.d_log_ref;
            }
            terms_.push_back(t);
        }
    }

    int p() const { return p_; }

    double pseudo_loglik(const Theta& theta) const {
        const double tb = p_ > n_ ? theta.v.back() : 0.0;
        double ll = 0;
        for (const Term& t : terms_) {
            double eta = theta.degree(t.i) + theta.degree(t.j) + tb * t.db + t.dloga;
            ll += t.x * eta - log1pexp(eta);
        }
        return ll;
    }

    Eigen::VectorXd pseudo_grad(const Theta& theta) const {
        const double tb = p_ > n_ ? theta.v.back() : 0.0;
        Eigen::VectorXd grad = Eigen::VectorXd::Zero(p_);
        for (const Term& t : terms_) {
            double eta = theta.degree(t.i) + theta.degree(t.j) + tb * t.db + t.dloga;
            double r = t.x - logistic(eta);
            grad[t.i - 1] += r;
            grad[t.j - 1] += r;
            if (p_ > n_) grad[n_] += r * t.db;
        }
        return grad;
    }

    Eigen::MatrixXd pseudo_hessian(const Theta& theta) const {
        const double tb = p_ > n_ ? theta.v.back() : 0.0;
        Eigen::MatrixXd h = Eigen::MatrixXd::Zero(p_, p_);
        for (const Term& t : terms_) {
            double eta = theta.degree(t.i) + theta.degree(t.j) + tb * t.db + t.dloga;
            double s = logistic(eta);
            double w = s * (1.0 - s);
            const int a = t.i - 1, b = t.j - 1;
            h(a, a) -= w;
            h(b, b) -= w;
            h(a, b) -= w;
            h(b, a) -= w;
            if (p_ > n_ && t.db != 0.0) {
                double wd = w * t.db;
                h(a, n_) -= wd;
                h(n_, a) -= wd;
                h(b, n_) -= wd;
                h(n_, b) -= wd;
                h(n_, n_) -= wd * t.db;
            }
        }
        return h;
    }

private:
    struct Term {
        int i = 0, j = 0;
        double db = 0.0;
        double dloga = 0.0;
        int x = 0;
    };
    int p_, n_;
    std::vector<Term> terms_;
};

inline double pseudo_loglik(const Theta& theta, const Graph& g, const ModelSpec& model) {
    check_bound(theta, model);
    return EdgeTerms(g, model).pseudo_loglik(theta);
}

inline std::vector<double> pseudo_grad(const Theta& theta, const Graph& g,
                                       const ModelSpec& model) {
    check_bound(theta, model);
    Eigen::VectorXd v = EdgeTerms(g, model).pseudo_grad(theta);
    return std::vector<double>(v.data(), v.data() + v.size());
}

inline Eigen::MatrixXd pseudo_hessian(const Theta& theta, const Graph& g,
                                      const ModelSpec& model) {
    check_bound(theta, model);
    return EdgeTerms(g, model).pseudo_hessian(theta);
}

namespace detail {

inline void finish(FitResult& res, const Theta& theta, double gn, double gamma) {
    res.theta_hat = theta;
    res.grad_inf_norm = gn;
    res.in_theta_tilde_set = gn <= gamma;
}

// Damped Newton ascent on a concave objective. Shared by fit_mple and
// mle_beta; the two callers differ only in how objective/gradient/hessian
// are produced.
template <typename Obj, typename Grad, typename Hess>
inline FitResult newton_ascent(Theta theta, double gamma, const FitOptions& opts, Obj&& obj,
                               Grad&& grad, Hess&& neg_hess) {
    FitResult res;
    res.gamma = gamma;
    const int p = static_cast<int>(theta.v.size());
    Eigen::Map<Eigen::VectorXd> th(theta.v.data(), p);

    double f = obj(theta);
    for (int it = 0; it < opts.max_iterations; ++it) {
        Eigen::VectorXd g = grad(theta);
        double gn = g.lpNorm<Eigen::Infinity>();
        res.trace.emplace_back(f, gn);
        if (!std::isfinite(f) || !std::isfinite(gn) || theta.sup_norm() > opts.divergence_guard) {
            res.status = FitStatus::diverged;
            res.iterations = it;
            finish(res, theta, gn, gamma);
            return res;
        }
        if (gn <= gamma) {
            res.status = FitStatus::converged;
            res.iterations = it;
            finish(res, theta, gn, gamma);
            return res;
        }

        Eigen::MatrixXd a = neg_hess(theta);  // positive semidefinite
        Eigen::VectorXd dir;
        bool ok = false;
        double ridge = 0.0;
        for (int attempt = 0; attempt < 4 && !ok; ++attempt) {
            Eigen::MatrixXd aw = a;
            if (attempt > 0) {
                ridge = (attempt == 1 ? 1e-8 * a.trace() / p : ridge * 1e4);
                aw.diagonal().array() += ridge;
            }
            Eigen::LDLT<Eigen::MatrixXd> ldlt(aw);
            if (ldlt.info() != Eigen::Success) continue;
            dir = ldlt.solve(g);
            ok = dir.allFinite() && g.dot(dir) > 0;
        }
        bool used_newton = ok;
        const Eigen::VectorXd newton_dir = ok ? dir : Eigen::VectorXd();
        if (!ok) dir = g;  // gradient-ascent fallback

        // Backtracking: halve until ascent.
        double step = 1.0;
        double f_new = f;
        Theta cand = theta;
        Eigen::Map<Eigen::VectorXd> cv(cand.v.data(), p);
        bool improved = false;
        for (int h = 0; h < 60; ++h) {
            cv = th + step * dir;
            f_new = obj(cand);
            if (std::isfinite(f_new) && f_new > f) {
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if (!improved && used_newton) {
            // The objective is flat at double resolution near the optimum,
            // where comparisons ride on last-ulp noise. Endgame criterion:
            // take the full Newton step if it contracts the gradient norm.
            cv = th + newton_dir;
            Eigen::VectorXd g_trial = grad(cand);
            if (g_trial.allFinite() && g_trial.lpNorm<Eigen::Infinity>() < 0.9 * gn) {
                f_new = obj(cand);
                improved = true;
            }
        }
        if (!improved) {
            // Numerically at a maximum but the gradient still above gamma.
            res.status = FitStatus::max_iterations;
            res.iterations = it;
            finish(res, theta, gn, gamma);
            return res;
        }
        th = cv;
        f = f_new;
    }
    res.status = FitStatus::max_iterations;
    res.iterations = opts.max_iterations;
    Eigen::VectorXd g_final = grad(theta);
    double gn = g_final.lpNorm<Eigen::Infinity>();
    res.trace.emplace_back(f, gn);
    finish(res, theta, gn, gamma);
    return res;
}

}  // namespace detail

inline FitResult mle_beta(const Graph& g, const ModelSpec& model, double gamma = 1e-6,
                          const FitOptions& opts = {});

// Maximum pseudo-likelihood fit: damped Newton ascent with backtracking on
// the pseudo-loglikelihood, stopping when ||g(theta;x)||_inf <= gamma.
inline FitResult fit_mple(const Graph& g, const ModelSpec& model, double gamma = 1e-6,
                          const FitOptions& opts = {}) {
    if (model.variant() == Variant::beta) {
        // Boundary degrees push the optimum to infinity; report instead of loop.
        for (int i = 1; i <= model.n_nodes(); ++i) {
            int d = g.degree(i);
            if (d == 0 || d == model.n_nodes() - 1) {
                FitResult res;
                res.gamma = gamma;
                res.status = FitStatus::degenerate_data;
                res.theta_hat = opts.init ? *opts.init : Theta::zeros(model);
                EdgeTerms terms(g, model);
                res.grad_inf_norm =
                    terms.pseudo_grad(res.theta_hat).lpNorm<Eigen::Infinity>();
                res.in_theta_tilde_set = res.grad_inf_norm <= gamma;
                return res;
            }
        }
    }
    Theta theta;
    if (opts.init) {
        theta = *opts.init;
        check_bound(theta, model);
    } else if (opts.beta_warm_start && model.has_brokerage()) {
        theta = Theta::zeros(model);
        ModelSpec beta_model(Variant::beta, model.population_ptr());
        FitResult warm = mle_beta(g, beta_model, std::max(gamma, 1e-4));
        if (warm.status == FitStatus::converged)
            for (int i = 0; i < model.n_nodes(); ++i) theta.v[static_cast<std::size_t>(i)] =
                warm.theta_hat.v[static_cast<std::size_t>(i)];
    } else {
        theta = Theta::zeros(model);
    }

    EdgeTerms terms(g, model);
    return detail::newton_ascent(
        std::move(theta), gamma, opts, [&](const Theta& t) { return terms.pseudo_loglik(t); },
        [&](const Theta& t) { return terms.pseudo_grad(t); },
        [&](const Theta& t) { return Eigen::MatrixXd(-terms.pseudo_hessian(t)); });
}

// Exact MLE for the beta variant via the mean-value equations
// mu_i(theta) = sum_{j != i} logistic(theta_i + theta_j) = d_i. Independent
// of the pseudo-likelihood code path: works from the analytic moment map and
// Fisher information. For Model 1 the two coincide.
inline FitResult mle_beta(const Graph& g, const ModelSpec& model, double gamma,
                          const FitOptions& opts) {
    if (model.variant() != Variant::beta)
        throw WrongVariant("mle_beta requires the beta variant");
    const int n = model.n_nodes();
    Eigen::VectorXd deg(n);
    for (int i = 1; i <= n; ++i) deg[i - 1] = g.degree(i);
    for (int i = 0; i < n; ++i)
        if (deg[i] == 0 || deg[i] == n - 1) {
            FitResult res;
            res.gamma = gamma;
            res.status = FitStatus::degenerate_data;
            res.theta_hat = Theta::zeros(model);
            res.grad_inf_norm = std::numeric_limits<double>::infinity();
            return res;
        }

    auto loglik = [&](const Theta& t) {
        double ll = 0;
        for (int i = 1; i <= n; ++i) ll += deg[i - 1] * t.degree(i);
        for (int i = 1; i <= n; ++i)
            for (int j = i + 1; j <= n; ++j) ll -= log1pexp(t.degree(i) + t.degree(j));
        return ll;
    };
    auto grad = [&](const Theta& t) {
        Eigen::VectorXd f = deg;
        for (int i = 1; i <= n; ++i)
            for (int j = i + 1; j <= n; ++j) {
                double mu = logistic(t.degree(i) + t.degree(j));
                f[i - 1] -= mu;
                f[j - 1] -= mu;
            }
        return f;
    };
    auto fisher = [&](const Theta& t) {
        Eigen::MatrixXd info = Eigen::MatrixXd::Zero(n, n);
        for (int i = 1; i <= n; ++i)
            for (int j = i + 1; j <= n; ++j) {
                double mu = logistic(t.degree(i) + t.degree(j));
                double w = mu * (1.0 - mu);
                info(i - 1, i - 1) += w;
                info(j - 1, j - 1) += w;
                info(i - 1, j - 1) += w;
                info(j - 1, i - 1) += w;
            }
        return info;
    };
    Theta init = opts.init ? *opts.init : Theta::zeros(model);
    return detail::newton_ascent(std::move(init), gamma, opts, loglik, grad, fisher);
}

}  // namespace gbeta
