// SPDX-FileCopyrightText: (c) 2026 tailor contributors
//
// SPDX-License-Identifier: Apache-2.0

#include "tailor/irt.hpp"

#include <algorithm>
#include <cmath>

#include "tailor/errors.hpp"

namespace tailor {

namespace {

constexpr double kProbEps = 1e-9;

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

double clamp_prob(double p) { return std::clamp(p, kProbEps, 1.0 - kProbEps); }

struct PenaltyScales {
    double inv_la2;  // 1 / log_alpha_prior_sd^2
    double inv_b2;
    double inv_t2;
};

PenaltyScales scales_of(const FitConfig& cfg) {
    return {1.0 / (cfg.log_alpha_prior_sd * cfg.log_alpha_prior_sd),
            1.0 / (cfg.beta_prior_sd * cfg.beta_prior_sd),
            1.0 / (cfg.theta_prior_sd * cfg.theta_prior_sd)};
}

void check_shapes(const ScoreMatrix& m, const std::vector<ItemParams>& items,
                  const std::vector<AbilityParams>& abilities) {
    if (items.size() != m.cols() || abilities.size() != m.rows()) {
        throw DimensionMismatch("parameter vectors do not match matrix shape: " +
                                std::to_string(items.size()) + " items for " +
                                std::to_string(m.cols()) + " columns, " +
                                std::to_string(abilities.size()) + " abilities for " +
                                std::to_string(m.rows()) + " rows");
    }
}

// Column data term plus this item's ridge penalty; the piece of the global
// objective an item update can change.
double item_objective(const ScoreMatrix& m, std::size_t j, double alpha, double beta,
                      const std::vector<double>& thetas, const PenaltyScales& ps) {
    double obj = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double p = clamp_prob(sigmoid(alpha * (thetas[i] - beta)));
        obj += m.at(i, j) ? std::log(p) : std::log1p(-p);
    }
    double la = std::log(alpha);
    obj -= 0.5 * la * la * ps.inv_la2;
    obj -= 0.5 * beta * beta * ps.inv_b2;
    return obj;
}

// Row data term plus this row's ridge penalty.
double theta_objective(const ScoreMatrix& m, std::size_t i, double theta,
                       const std::vector<double>& alphas, const std::vector<double>& betas,
                       const PenaltyScales& ps) {
    double obj = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) {
        double p = clamp_prob(sigmoid(alphas[j] * (theta - betas[j])));
        obj += m.at(i, j) ? std::log(p) : std::log1p(-p);
    }
    obj -= 0.5 * theta * theta * ps.inv_t2;
    return obj;
}

}  // namespace

double p_correct(double theta, const ItemParams& item) {
    return sigmoid(item.alpha * (theta - item.beta));
}

double log_likelihood(const ScoreMatrix& m, const std::vector<ItemParams>& items,
                      const std::vector<AbilityParams>& abilities, const FitConfig& cfg) {
    m.validate();
    check_shapes(m, items, abilities);
    const PenaltyScales ps = scales_of(cfg);

    double ll = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            double p = clamp_prob(p_correct(abilities[i].theta, items[j]));
            ll += m.at(i, j) ? std::log(p) : std::log1p(-p);
        }
    }
    for (const auto& item : items) {
        double la = std::log(item.alpha);
        ll -= 0.5 * la * la * ps.inv_la2;
        ll -= 0.5 * item.beta * item.beta * ps.inv_b2;
    }
    for (const auto& a : abilities) {
        ll -= 0.5 * a.theta * a.theta * ps.inv_t2;
    }
    return ll;
}

LogLikelihoodGradient log_likelihood_gradient(const ScoreMatrix& m,
                                              const std::vector<ItemParams>& items,
                                              const std::vector<AbilityParams>& abilities,
                                              const FitConfig& cfg) {
    m.validate();
    check_shapes(m, items, abilities);
    const PenaltyScales ps = scales_of(cfg);

    LogLikelihoodGradient g;
    g.d_alpha.assign(items.size(), 0.0);
    g.d_beta.assign(items.size(), 0.0);
    g.d_theta.assign(abilities.size(), 0.0);

    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            double residual = static_cast<double>(m.at(i, j)) -
                              clamp_prob(p_correct(abilities[i].theta, items[j]));
            double gap = abilities[i].theta - items[j].beta;
            g.d_alpha[j] += residual * gap;
            g.d_beta[j] -= residual * items[j].alpha;
            g.d_theta[i] += residual * items[j].alpha;
        }
    }
    for (std::size_t j = 0; j < items.size(); ++j) {
        g.d_alpha[j] -= std::log(items[j].alpha) / items[j].alpha * ps.inv_la2;
        g.d_beta[j] -= items[j].beta * ps.inv_b2;
    }
    for (std::size_t i = 0; i < abilities.size(); ++i) {
        g.d_theta[i] -= abilities[i].theta * ps.inv_t2;
    }
    return g;
}

FitResult fit_2pl(const ScoreMatrix& m, const FitConfig& cfg) {
    m.validate();
    const std::size_t R = m.rows(), C = m.cols();
    if (R < 2 || C < 2) {
        throw PreconditionViolation("fit needs at least 2 rows and 2 columns, got " +
                                    std::to_string(R) + "x" + std::to_string(C));
    }
    const PenaltyScales ps = scales_of(cfg);

    std::vector<double> col_mean(C, 0.0);
    for (std::size_t j = 0; j < C; ++j) {
        double sum = 0.0;
        for (std::size_t i = 0; i < R; ++i) sum += m.at(i, j);
        col_mean[j] = sum / static_cast<double>(R);
    }
    std::vector<bool> usable(C);
    std::size_t usable_count = 0;
    for (std::size_t j = 0; j < C; ++j) {
        usable[j] = col_mean[j] > 0.0 && col_mean[j] < 1.0;
        if (usable[j]) ++usable_count;
    }
    if (usable_count == 0) {
        throw DegenerateMatrix("every column is constant; nothing to fit");
    }

    std::vector<double> alphas(C), betas(C);
    for (std::size_t j = 0; j < C; ++j) {
        if (!usable[j]) {
            // Constant column: no information about discrimination. Pin at
            // the floor and at the difficulty bound matching the direction.
            alphas[j] = cfg.alpha_min;
            betas[j] = col_mean[j] >= 1.0 ? cfg.beta_min : cfg.beta_max;
            continue;
        }
        alphas[j] = 1.0;
        double err = std::clamp(1.0 - col_mean[j], 0.01, 0.99);
        betas[j] = std::clamp(std::log(err / (1.0 - err)), cfg.beta_min, cfg.beta_max);
    }

    std::vector<double> thetas(R);
    {
        std::vector<double> row_score(R, 0.0);
        for (std::size_t i = 0; i < R; ++i) {
            double sum = 0.0;
            for (std::size_t j = 0; j < C; ++j) {
                if (usable[j]) sum += m.at(i, j);
            }
            row_score[i] = sum / static_cast<double>(usable_count);
        }
        double mean = 0.0;
        for (double s : row_score) mean += s;
        mean /= static_cast<double>(R);
        double var = 0.0;
        for (double s : row_score) var += (s - mean) * (s - mean);
        double sd = std::sqrt(var / static_cast<double>(R));
        for (std::size_t i = 0; i < R; ++i) {
            thetas[i] = sd > 1e-9 ? std::clamp((row_score[i] - mean) / sd, cfg.theta_min,
                                               cfg.theta_max)
                                  : 0.0;
        }
    }

    auto update_item = [&](std::size_t j) {
        double a = alphas[j], b = betas[j];
        double g_a = 0.0, g_b = 0.0, h_aa = 0.0, h_bb = 0.0, h_ab = 0.0;
        for (std::size_t i = 0; i < R; ++i) {
            double gap = thetas[i] - b;
            double p = clamp_prob(sigmoid(a * gap));
            double residual = static_cast<double>(m.at(i, j)) - p;
            double w = p * (1.0 - p);
            g_a += residual * gap;
            g_b -= residual * a;
            h_aa -= w * gap * gap;
            h_bb -= w * a * a;
            h_ab += a * w * gap - residual;
        }
        double la = std::log(a);
        g_a -= la / a * ps.inv_la2;
        g_b -= b * ps.inv_b2;
        h_aa += (la - 1.0) / (a * a) * ps.inv_la2;
        h_bb -= ps.inv_b2;

        double det = h_aa * h_bb - h_ab * h_ab;
        double da, db;
        if (h_aa < 0.0 && det > 0.0) {
            da = -(h_bb * g_a - h_ab * g_b) / det;
            db = -(h_aa * g_b - h_ab * g_a) / det;
        } else {
            // Hessian not usable here; fall back to a conservative ascent
            // step, still subject to the line search below.
            double scale = 1.0 + std::abs(h_aa) + std::abs(h_bb);
            da = g_a / scale;
            db = g_b / scale;
        }

        double base = item_objective(m, j, a, b, thetas, ps);
        for (double t = 1.0; t >= 1.0 / 1024.0; t *= 0.5) {
            double ca = std::clamp(a + t * da, cfg.alpha_min, cfg.alpha_max);
            double cb = std::clamp(b + t * db, cfg.beta_min, cfg.beta_max);
            if (item_objective(m, j, ca, cb, thetas, ps) > base) {
                alphas[j] = ca;
                betas[j] = cb;
                return;
            }
        }
    };

    auto update_theta = [&](std::size_t i) {
        double th = thetas[i];
        double g = 0.0, h = 0.0;
        for (std::size_t j = 0; j < C; ++j) {
            double p = clamp_prob(sigmoid(alphas[j] * (th - betas[j])));
            double residual = static_cast<double>(m.at(i, j)) - p;
            g += residual * alphas[j];
            h -= p * (1.0 - p) * alphas[j] * alphas[j];
        }
        g -= th * ps.inv_t2;
        h -= ps.inv_t2;

        double d = -g / h;  // h < 0 always: the ridge term bounds it away from 0
        double base = theta_objective(m, i, th, alphas, betas, ps);
        for (double t = 1.0; t >= 1.0 / 1024.0; t *= 0.5) {
            double cand = std::clamp(th + t * d, cfg.theta_min, cfg.theta_max);
            if (theta_objective(m, i, cand, alphas, betas, ps) > base) {
                thetas[i] = cand;
                return;
            }
        }
    };

    // Rescaling thetas to mean 0 / sd 1 with the matching item compensation
    // leaves every response probability unchanged; only the ridge terms move.
    auto standardize = [&]() {
        double mean = 0.0;
        for (double t : thetas) mean += t;
        mean /= static_cast<double>(R);
        double var = 0.0;
        for (double t : thetas) var += (t - mean) * (t - mean);
        double sd = std::sqrt(var / static_cast<double>(R));
        if (sd < 1e-9) {
            for (double& t : thetas) t -= mean;
            return;
        }
        for (double& t : thetas) {
            t = std::clamp((t - mean) / sd, cfg.theta_min, cfg.theta_max);
        }
        for (std::size_t j = 0; j < C; ++j) {
            if (!usable[j]) continue;
            alphas[j] = std::clamp(alphas[j] * sd, cfg.alpha_min, cfg.alpha_max);
            betas[j] = std::clamp((betas[j] - mean) / sd, cfg.beta_min, cfg.beta_max);
        }
    };

    auto pack = [&]() {
        FitResult out;
        out.items.reserve(C);
        for (std::size_t j = 0; j < C; ++j) {
            out.items.push_back({m.item_ids[j], alphas[j], betas[j], !usable[j]});
        }
        out.abilities.reserve(R);
        for (std::size_t i = 0; i < R; ++i) {
            out.abilities.push_back({m.row_ids[i], thetas[i]});
        }
        return out;
    };

    standardize();
    FitResult best = pack();
    double best_ll = log_likelihood(m, best.items, best.abilities, cfg);
    FitReport report;

    // The update sweeps ascend the raw objective but the re-identification
    // step can walk it back, so sweep objectives may cycle instead of
    // settling. Track the best standardized point and stop once two sweeps
    // in a row fail to improve on it by tol.
    int stalled = 0;
    for (int sweep = 1; sweep <= cfg.max_iterations; ++sweep) {
        for (std::size_t j = 0; j < C; ++j) {
            if (usable[j]) update_item(j);
        }
        for (std::size_t i = 0; i < R; ++i) update_theta(i);
        standardize();

        FitResult result = pack();
        double ll = log_likelihood(m, result.items, result.abilities, cfg);
        report.iterations = sweep;
        if (ll > best_ll + cfg.tol) {
            stalled = 0;
        } else {
            ++stalled;
        }
        if (ll > best_ll) {
            best_ll = ll;
            best = std::move(result);
            report.trace.push_back(ll);
        }
        if (stalled >= 2) {
            report.converged = true;
            break;
        }
    }

    report.log_likelihood = best_ll;
    best.report = std::move(report);
    return best;
}

std::vector<std::string> select_top_k(const std::vector<ItemParams>& items, int k) {
    if (k < 1) throw PreconditionViolation("k must be >= 1");

    std::vector<const ItemParams*> usable;
    usable.reserve(items.size());
    for (const auto& item : items) {
        if (!item.degenerate) usable.push_back(&item);
    }
    if (static_cast<int>(usable.size()) < k) {
        throw InsufficientItems("need " + std::to_string(k) + " usable items, have " +
                                std::to_string(usable.size()));
    }
    std::sort(usable.begin(), usable.end(), [](const ItemParams* a, const ItemParams* b) {
        if (a->alpha != b->alpha) return a->alpha > b->alpha;
        return a->item_id < b->item_id;
    });

    std::vector<std::string> out;
    out.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) out.push_back(usable[static_cast<std::size_t>(i)]->item_id);
    return out;
}

}  // namespace tailor
