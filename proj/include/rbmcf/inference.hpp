// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <vector>

#include "rbmcf/data.hpp"
#include "rbmcf/model.hpp"

namespace rbmcf {

// log S(k'; i', V_obs): the log of the unnormalized conditional probability
// that the user rates item `item` at `level`, given the observed ratings.
// Differences of log scores across levels are exact log-probability ratios.
double rbm_score(const VisibleState& vobs, int item, int level, const RbmParams& p);

// argmax over levels of rbm_score; ties break toward the lower level.
int rbm_predict(const VisibleState& vobs, int item, const RbmParams& p);

double rmse(const std::vector<double>& pred, const std::vector<double>& truth);

struct PredictionResult {
    struct Row {
        int64_t user_ext;
        int64_t item_ext;
        double truth;
        double prediction;
    };
    std::vector<Row> rows;
    double rmse = 0.0;
};

// Predict every test rating from the user's train-side observations.
// weighted_mean: probability-weighted mean level instead of the argmax
// (analysis mode; the default follows the argmax rule).
PredictionResult evaluate_rbm(const RbmParams& p, const SplitDataset& split,
                              bool weighted_mean = false);

// Report CSV: userId,movieId,truth,prediction rows plus `RMSE,<value>` footer.
void write_report_csv(const PredictionResult& r, std::ostream& out);

}  // namespace rbmcf
