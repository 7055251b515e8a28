// SPDX-License-Identifier: Apache-2.0
#include "rbmcf/svd.hpp"

#include <algorithm>
#include <cmath>

#include "rbmcf/errors.hpp"
#include "rbmcf/inference.hpp"
#include "rbmcf/rng.hpp"

namespace rbmcf {

SvdModel SvdModel::truncate(int q_keep) const {
    if (q_keep < 1 || q_keep > q) throw ArgumentError("SvdModel::truncate: q out of range");
    SvdModel out;
    out.U = U.leftCols(q_keep);
    out.lambda = lambda.head(q_keep);
    out.V = V.leftCols(q_keep);
    out.q = q_keep;
    return out;
}

Eigen::SparseMatrix<double> rating_matrix(const RatingDataset& d) {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(d.num_ratings());
    for (size_t u = 0; u < d.users.size(); ++u)
        for (const auto& r : d.users[u])
            trips.emplace_back(static_cast<int>(u), r.item, static_cast<double>(r.level));
    Eigen::SparseMatrix<double> R(static_cast<int>(d.num_users()),
                                  static_cast<int>(d.num_items()));
    R.setFromTriplets(trips.begin(), trips.end());
    return R;
}

namespace {

template <typename Mat>
SvdModel svd_fit_impl(const Mat& R, int q, uint64_t seed, int max_iters) {
    const int N = static_cast<int>(R.rows());
    const int M = static_cast<int>(R.cols());
    if (q < 1 || q > std::min(N, M)) throw ArgumentError("svd_fit: q out of range");

    RngStream rng(seed, 0x53564400ull);
    Eigen::MatrixXd V(M, q);
    for (int c = 0; c < q; ++c)
        for (int r = 0; r < M; ++r) V(r, c) = rng.next_normal();
    V = Eigen::HouseholderQR<Eigen::MatrixXd>(V).householderQ() *
        Eigen::MatrixXd::Identity(M, q);

    const double tol = 1e-9;
    Eigen::MatrixXd U;
    Eigen::VectorXd lambda;

    for (int iter = 0; iter < max_iters; ++iter) {
        // Power step on R^T R with a Rayleigh-Ritz projection.
        Eigen::MatrixXd W = R * V;                     // N x q
        Eigen::MatrixXd G = W.transpose() * W;         // q x q, = V^T R^T R V
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
        if (es.info() != Eigen::Success) throw ConvergenceError("svd_fit: Ritz eigensolve failed");

        // Eigen returns ascending order; flip to descending.
        Eigen::MatrixXd rot(q, q);
        lambda.resize(q);
        for (int c = 0; c < q; ++c) {
            rot.col(c) = es.eigenvectors().col(q - 1 - c);
            lambda(c) = std::sqrt(std::max(0.0, es.eigenvalues()(q - 1 - c)));
        }
        V = V * rot;
        U = W * rot;  // = R * V (rotated)
        for (int c = 0; c < q; ++c) {
            double nrm = U.col(c).norm();
            if (nrm > 0.0) U.col(c) /= nrm;
        }

        double scale = std::max(lambda(0), 1e-300);
        Eigen::MatrixXd res_v = R.transpose() * U;     // M x q
        Eigen::MatrixXd res_u = R * V;                 // N x q
        double worst = 0.0;
        for (int c = 0; c < q; ++c) {
            worst = std::max(worst, (res_u.col(c) - lambda(c) * U.col(c)).norm());
            worst = std::max(worst, (res_v.col(c) - lambda(c) * V.col(c)).norm());
        }
        if (worst <= tol * scale) {
            SvdModel out;
            out.U = std::move(U);
            out.lambda = std::move(lambda);
            out.V = std::move(V);
            out.q = q;
            return out;
        }

        // Next subspace: one more multiplication by R^T R, re-orthonormalized.
        Eigen::MatrixXd Y = R.transpose() * (R * V);
        V = Eigen::HouseholderQR<Eigen::MatrixXd>(Y).householderQ() *
            Eigen::MatrixXd::Identity(M, q);

        if (iter == max_iters - 1)
            throw ConvergenceError("svd_fit: no convergence after " + std::to_string(max_iters) +
                                   " sweeps (residual " + std::to_string(worst / scale) + ")");
    }
    throw ConvergenceError("svd_fit: iteration cap reached");
}

}  // namespace

SvdModel svd_fit(const Eigen::SparseMatrix<double>& R, int q, uint64_t seed, int max_iters) {
    return svd_fit_impl(R, q, seed, max_iters);
}

SvdModel svd_fit(const Eigen::MatrixXd& R, int q, uint64_t seed, int max_iters) {
    return svd_fit_impl(R, q, seed, max_iters);
}

double svd_predict(const SvdModel& model, int user, int item) {
    if (user < 0 || user >= model.U.rows()) throw IndexError("svd_predict: user out of range");
    if (item < 0 || item >= model.V.rows()) throw IndexError("svd_predict: item out of range");
    double acc = 0.0;
    for (int t = 0; t < model.q; ++t) acc += model.U(user, t) * model.lambda(t) * model.V(item, t);
    return acc;
}

std::vector<QSweepRow> q_sweep(const SplitDataset& split, const std::vector<int>& qs,
                               bool round_pred, uint64_t seed) {
    if (qs.empty()) throw ArgumentError("q_sweep: empty q list");
    int q_max = *std::max_element(qs.begin(), qs.end());
    Eigen::SparseMatrix<double> R = rating_matrix(split.train);
    SvdModel full = svd_fit(R, q_max, seed);

    std::vector<QSweepRow> out;
    out.reserve(qs.size());
    for (int q : qs) {
        SvdModel m = full.truncate(q);
        std::vector<double> pred, truth;
        for (size_t u = 0; u < split.test.users.size(); ++u) {
            for (const auto& r : split.test.users[u]) {
                double x = svd_predict(m, static_cast<int>(u), r.item);
                if (round_pred) x = std::nearbyint(x);
                pred.push_back(x);
                truth.push_back(static_cast<double>(r.level));
            }
        }
        out.push_back({q, rmse(pred, truth)});
    }
    return out;
}

}  // namespace rbmcf
