// SPDX-FileCopyrightText: (c) 2026 tailor contributors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "tailor/score_matrix.hpp"

namespace tailor {

struct ItemParams {
    std::string item_id;
    double alpha = 1.0;  // discrimination
    double beta = 0.0;   // difficulty
    // Constant response column: parameters are pinned, item is excluded from
    // selection.
    bool degenerate = false;
};

struct AbilityParams {
    std::string row_id;
    double theta = 0.0;
};

struct FitConfig {
    int max_iterations = 500;
    double tol = 1e-6;
    double alpha_min = 0.05, alpha_max = 10.0;
    double beta_min = -6.0, beta_max = 6.0;
    double theta_min = -4.0, theta_max = 4.0;
    // Ridge scales; the penalty is zero at alpha=1, beta=0, theta=0.
    double log_alpha_prior_sd = 1.0;
    double beta_prior_sd = 2.0;
    double theta_prior_sd = 1.0;
};

struct FitReport {
    double log_likelihood = 0.0;  // penalized, at the returned parameters
    int iterations = 0;
    bool converged = false;
    std::vector<double> trace;  // objective after each accepted sweep
};

struct FitResult {
    std::vector<ItemParams> items;       // matrix column order
    std::vector<AbilityParams> abilities;  // matrix row order
    FitReport report;
};

// Two-parameter logistic response curve: sigmoid(alpha * (theta - beta)).
double p_correct(double theta, const ItemParams& item);

// Penalized Bernoulli log-likelihood of the whole matrix. Probabilities are
// clamped to [eps, 1-eps], eps = 1e-9. The ridge terms vanish at the prior
// mode, so a 1x1 matrix at default parameters scores exactly log 0.5.
double log_likelihood(const ScoreMatrix& m,
                      const std::vector<ItemParams>& items,
                      const std::vector<AbilityParams>& abilities,
                      const FitConfig& cfg = {});

struct LogLikelihoodGradient {
    std::vector<double> d_alpha;
    std::vector<double> d_beta;
    std::vector<double> d_theta;
};

// Analytic gradient of log_likelihood. Exposed so tests can cross-check the
// optimizer against finite differences.
LogLikelihoodGradient log_likelihood_gradient(const ScoreMatrix& m,
                                              const std::vector<ItemParams>& items,
                                              const std::vector<AbilityParams>& abilities,
                                              const FitConfig& cfg = {});

// Joint MLE by alternating damped Newton sweeps (items then abilities), with
// the ability scale re-identified to mean 0 / sd 1 after every sweep. Needs
// at least 2 rows and 2 columns. Constant columns come back flagged
// degenerate; a matrix with no usable column throws DegenerateMatrix.
FitResult fit_2pl(const ScoreMatrix& m, const FitConfig& cfg = {});

// Top k item ids by discrimination, ties broken by item_id ascending.
// Degenerate items never qualify; fewer than k usable items throws
// InsufficientItems.
std::vector<std::string> select_top_k(const std::vector<ItemParams>& items, int k);

}  // namespace tailor
