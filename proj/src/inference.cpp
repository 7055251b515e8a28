// SPDX-License-Identifier: Apache-2.0
#include "rbmcf/inference.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace rbmcf {

namespace {

double softplus(double x) {
    if (x > 35.0) return x;
    if (x < -35.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

bool observes(const VisibleState& v, int item) {
    return std::binary_search(v.items.begin(), v.items.end(), item);
}

}  // namespace

double rbm_score(const VisibleState& vobs, int item, int level, const RbmParams& p) {
    vobs.validate(p);
    if (item < 0 || item >= p.m) throw IndexError("rbm_score: item out of range");
    if (level < 1 || level > p.K) throw ArgumentError("rbm_score: level out of range");
    if (observes(vobs, item)) throw ArgumentError("rbm_score: item already observed");

    double log_s = p.bias_v(item, level);
    for (int j = 0; j < p.F; ++j) {
        double g = p.c[j] + p.w(item, j, level);
        for (size_t t = 0; t < vobs.items.size(); ++t)
            g += p.w(vobs.items[t], j, vobs.levels[t]);
        log_s += softplus(g);
    }
    return log_s;
}

int rbm_predict(const VisibleState& vobs, int item, const RbmParams& p) {
    int best = 1;
    double best_score = rbm_score(vobs, item, 1, p);
    for (int k = 2; k <= p.K; ++k) {
        double s = rbm_score(vobs, item, k, p);
        if (s > best_score) {
            best = k;
            best_score = s;
        }
    }
    return best;
}

double rmse(const std::vector<double>& pred, const std::vector<double>& truth) {
    if (pred.empty() || pred.size() != truth.size())
        throw ArgumentError("rmse: inputs must be equal-length and non-empty");
    double acc = 0.0;
    for (size_t t = 0; t < pred.size(); ++t) {
        double d = pred[t] - truth[t];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(pred.size()));
}

PredictionResult evaluate_rbm(const RbmParams& p, const SplitDataset& split,
                              bool weighted_mean) {
    if (static_cast<int>(split.train.num_items()) != p.m)
        throw ArgumentError("evaluate_rbm: model/dataset item count mismatch");
    if (split.test.num_ratings() == 0) throw ArgumentError("evaluate_rbm: empty test set");

    // Flatten test pairs so the prediction loop can run data-parallel.
    struct Pair {
        size_t user;
        int item;
        int level;
    };
    std::vector<Pair> pairs;
    for (size_t u = 0; u < split.test.users.size(); ++u)
        for (const auto& r : split.test.users[u]) pairs.push_back({u, r.item, r.level});

    PredictionResult out;
    out.rows.resize(pairs.size());

#pragma omp parallel for schedule(dynamic, 16)
    for (long t = 0; t < static_cast<long>(pairs.size()); ++t) {
        const Pair& q = pairs[static_cast<size_t>(t)];
        VisibleState vobs = split.train.visible_state(q.user);
        double pred;
        if (weighted_mean) {
            // Softmax over per-level log scores, then the mean level.
            std::vector<double> ls(static_cast<size_t>(p.K));
            for (int k = 1; k <= p.K; ++k) ls[static_cast<size_t>(k - 1)] = rbm_score(vobs, q.item, k, p);
            double mx = *std::max_element(ls.begin(), ls.end());
            double z = 0.0, mean = 0.0;
            for (int k = 1; k <= p.K; ++k) {
                double w = std::exp(ls[static_cast<size_t>(k - 1)] - mx);
                z += w;
                mean += w * k;
            }
            pred = mean / z;
        } else {
            pred = static_cast<double>(rbm_predict(vobs, q.item, p));
        }
        out.rows[static_cast<size_t>(t)] = {
            split.test.user_ids[q.user],
            split.test.item_ids[static_cast<size_t>(q.item)],
            static_cast<double>(q.level), pred};
    }

    std::vector<double> preds(out.rows.size()), truths(out.rows.size());
    for (size_t t = 0; t < out.rows.size(); ++t) {
        preds[t] = out.rows[t].prediction;
        truths[t] = out.rows[t].truth;
    }
    out.rmse = rmse(preds, truths);
    return out;
}

void write_report_csv(const PredictionResult& r, std::ostream& out) {
    out << "userId,movieId,truth,prediction\n";
    for (const auto& row : r.rows)
        out << row.user_ext << ',' << row.item_ext << ',' << row.truth << ','
            << row.prediction << '\n';
    out << "RMSE," << r.rmse << '\n';
}

}  // namespace rbmcf
