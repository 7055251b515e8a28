// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "rbmcf/model.hpp"
#include "rbmcf/rng.hpp"

namespace rbmcf {

// h_j ~ Bernoulli(p(h_j=1|v)), independent draws in ascending j order.
HiddenState sample_hidden(const VisibleState& v, const RbmParams& p, RngStream& rng);

// For each masked item in ascending order, a categorical level draw from
// p(v_i|h). The mask is preserved exactly.
VisibleState sample_visible(const HiddenState& h, const RbmParams& p,
                            const std::vector<int>& mask, RngStream& rng);

struct GibbsResult {
    HiddenState h0_prob;   // p(h|v0), probability-tagged
    VisibleState vT;       // visible state after T full steps
    HiddenState hT_prob;   // p(h|vT), probability-tagged
};

// T alternating steps of binary hidden samples and visible samples starting
// at v0. Probability-tagged hidden states are returned for statistics; binary
// samples drive the chain.
GibbsResult gibbs_chain(const VisibleState& v0, const RbmParams& p, int T, RngStream& rng);

// CD-T sufficient statistics over a batch. positive/negative hold SUMS over
// users (not means); dividing once at the very end keeps the shard-mean
// identity exact. Per-user contributions are quantized to multiples of 2^-30,
// which makes every accumulation below 2^23 users exactly representable and
// therefore independent of summation order and batch partitioning.
struct CdBatchStats {
    Gradients positive;       // sum over users of v0 x h0_prob cross terms
    Gradients negative;       // same over T-step Gibbs samples
    double recon_err_sum = 0; // sum of per-user one-step reconstruction error fractions
    long count = 0;           // users accumulated

    CdBatchStats() = default;
    explicit CdBatchStats(const RbmParams& p) : positive(p), negative(p) {}

    void merge(const CdBatchStats& other);
    Gradients mean_gradients() const;  // (positive - negative) / count

    // Flat layout for the allreduce: [dW..., db..., dc..., recon_err_sum, count].
    std::vector<double> to_buffer() const;
    static CdBatchStats from_buffer(const std::vector<double>& buf, const RbmParams& p);
};

// Round to the nearest multiple of 2^-30. Applied to hidden probabilities
// before they enter the statistics.
inline double quantize_stat(double x) {
    return std::nearbyint(x * 0x1.0p30) * 0x1.0p-30;
}

// Statistics for one shard of a batch. stream_ids must be shard-invariant
// (derived from user identity, not position), so any partition of the batch
// reproduces the full-batch chains draw for draw. OpenMP-parallel over users.
CdBatchStats cd_batch_stats(const std::vector<VisibleState>& batch,
                            const std::vector<uint64_t>& stream_ids,
                            const RbmParams& p, int T, uint64_t seed,
                            bool with_recon = false);

// Serial reference for cd_batch_stats; kept as the oracle the parallel kernel
// is tested against (results must be bit-identical).
CdBatchStats cd_batch_stats_serial(const std::vector<VisibleState>& batch,
                                   const std::vector<uint64_t>& stream_ids,
                                   const RbmParams& p, int T, uint64_t seed,
                                   bool with_recon = false);

// Mean CD gradients over a non-empty batch (ascent direction of the update
// rule: Theta <- Theta + eta * grad). Streams are derived per user from the
// base rng as (stream ^ index); use cd_batch_stats directly when sharding.
Gradients cd_statistics(const std::vector<VisibleState>& batch, const RbmParams& p,
                        int T, RngStream& rng);

}  // namespace rbmcf
