// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "rbmcf/data.hpp"
#include "rbmcf/model.hpp"
#include "rbmcf/parallel.hpp"
#include "rbmcf/rng.hpp"

namespace rbmcf {

struct TrainConfig {
    int F = 100;              // hidden units
    int K = 5;                // rating levels
    int T = 1;                // Gibbs steps
    double eta = 0.001;       // learning rate
    int global_batch = 512;   // users per optimizer step
    int epochs = 100;
    uint64_t seed = 1;
    int workers = 1;
    double init_sigma = 0.01; // weight-init std-dev
    bool shuffle = true;
    bool track_nll = false;   // exact NLL per epoch; tiny instances only
    bool verify_sync = false; // cross-worker parameter hash check per epoch

    void validate() const;
};

struct TrainHistory {
    struct Epoch {
        int epoch;
        double seconds;
        double recon_err;
        std::optional<double> nll;
    };
    std::vector<Epoch> epochs;
};

struct TrainResult {
    RbmParams params;
    TrainHistory history;
};

// W ~ Normal(0, init_sigma^2); b and c zero.
RbmParams init_params(const TrainConfig& cfg, int m, RngStream& rng);

// Theta <- Theta + eta * g. Throws NumericError naming the first offending
// index if any entry turns non-finite.
void apply_update(RbmParams& p, const Gradients& g, double eta);

// Mini-batch CD training. Every worker of the group calls this collectively
// with identical data and config; after every step all workers hold
// bit-identical parameters (shard sums are exact, the reduction order is
// pinned, and per-user RNG streams are rank-independent).
TrainResult train(const RatingDataset& data, const TrainConfig& cfg, Reducer& reducer);

// History CSV: epoch, seconds, recon_err, nll_or_blank.
void write_history_csv(const TrainHistory& h, std::ostream& out);

}  // namespace rbmcf
