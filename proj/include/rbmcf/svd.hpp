// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cstdint>
#include <vector>

#include "rbmcf/data.hpp"

namespace rbmcf {

// Truncated factorization R ~= U diag(lambda) V^T with orthonormal columns
// and lambda descending.
struct SvdModel {
    Eigen::MatrixXd U;       // N x q
    Eigen::VectorXd lambda;  // q, descending, >= 0
    Eigen::MatrixXd V;       // M x q
    int q = 0;

    // Keep only the leading q' triplets.
    SvdModel truncate(int q_keep) const;
};

// Rating matrix with zeros for missing entries (rows: users, cols: items).
Eigen::SparseMatrix<double> rating_matrix(const RatingDataset& d);

// Top-q singular triplets by block power iteration (subspace iteration with
// QR re-orthonormalization and a Rayleigh-Ritz projection each sweep).
// Residual contract per kept triplet: |R v_i - lambda_i u_i| and
// |R^T u_i - lambda_i v_i| <= 1e-9 * lambda_1.
SvdModel svd_fit(const Eigen::SparseMatrix<double>& R, int q, uint64_t seed = 7,
                 int max_iters = 2000);
SvdModel svd_fit(const Eigen::MatrixXd& R, int q, uint64_t seed = 7, int max_iters = 2000);

double svd_predict(const SvdModel& model, int user, int item);

struct QSweepRow {
    int q;
    double rmse;
};

// Fit once at max(qs), truncate for each q, evaluate RMSE on held-out
// entries. round_pred rounds predictions to the nearest integer level before
// scoring; the default compares raw real predictions to integer truth.
std::vector<QSweepRow> q_sweep(const SplitDataset& split, const std::vector<int>& qs,
                               bool round_pred = false, uint64_t seed = 7);

}  // namespace rbmcf
