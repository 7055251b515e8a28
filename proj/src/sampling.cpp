// SPDX-License-Identifier: Apache-2.0
#include "rbmcf/sampling.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace rbmcf {

HiddenState sample_hidden(const VisibleState& v, const RbmParams& p, RngStream& rng) {
    std::vector<double> hp = hidden_conditional(v, p);
    HiddenState h;
    h.binary = true;
    h.values.resize(p.F);
    for (int j = 0; j < p.F; ++j) h.values[j] = rng.next_bernoulli(hp[j]) ? 1.0 : 0.0;
    return h;
}

VisibleState sample_visible(const HiddenState& h, const RbmParams& p,
                            const std::vector<int>& mask, RngStream& rng) {
    if (!h.binary) throw ArgumentError("sample_visible: hidden state must be binary-tagged");
    VisibleState out;
    out.items = mask;
    out.levels.resize(mask.size());
    for (size_t t = 0; t < mask.size(); ++t) {
        std::vector<double> probs = visible_conditional(h, p, mask[t]);
        double u = rng.next_double();
        double cdf = 0.0;
        int level = p.K;
        for (int k = 1; k <= p.K; ++k) {
            cdf += probs[k - 1];
            if (u < cdf) {
                level = k;
                break;
            }
        }
        out.levels[t] = level;
    }
    return out;
}

GibbsResult gibbs_chain(const VisibleState& v0, const RbmParams& p, int T, RngStream& rng) {
    if (T < 1) throw ArgumentError("gibbs_chain: T must be >= 1");
    GibbsResult r;
    r.h0_prob.values = hidden_conditional(v0, p);
    r.h0_prob.binary = false;

    VisibleState v = v0;
    for (int t = 0; t < T; ++t) {
        HiddenState hs = sample_hidden(v, p, rng);
        v = sample_visible(hs, p, v.items, rng);
    }
    r.vT = std::move(v);
    r.hT_prob.values = hidden_conditional(r.vT, p);
    r.hT_prob.binary = false;
    return r;
}

void CdBatchStats::merge(const CdBatchStats& other) {
    if (count == 0) {
        *this = other;
        return;
    }
    if (other.count == 0) return;
    for (size_t t = 0; t < positive.dW.size(); ++t) positive.dW[t] += other.positive.dW[t];
    for (size_t t = 0; t < positive.db.size(); ++t) positive.db[t] += other.positive.db[t];
    for (size_t t = 0; t < positive.dc.size(); ++t) positive.dc[t] += other.positive.dc[t];
    for (size_t t = 0; t < negative.dW.size(); ++t) negative.dW[t] += other.negative.dW[t];
    for (size_t t = 0; t < negative.db.size(); ++t) negative.db[t] += other.negative.db[t];
    for (size_t t = 0; t < negative.dc.size(); ++t) negative.dc[t] += other.negative.dc[t];
    recon_err_sum += other.recon_err_sum;
    count += other.count;
}

Gradients CdBatchStats::mean_gradients() const {
    if (count < 1) throw ArgumentError("CdBatchStats: empty batch");
    Gradients g;
    g.m = positive.m;
    g.F = positive.F;
    g.K = positive.K;
    double inv = static_cast<double>(count);
    auto diff = [inv](const std::vector<double>& a, const std::vector<double>& b) {
        std::vector<double> out(a.size());
        for (size_t t = 0; t < a.size(); ++t) out[t] = (a[t] - b[t]) / inv;
        return out;
    };
    g.dW = diff(positive.dW, negative.dW);
    g.db = diff(positive.db, negative.db);
    g.dc = diff(positive.dc, negative.dc);
    return g;
}

std::vector<double> CdBatchStats::to_buffer() const {
    std::vector<double> buf;
    buf.reserve(positive.dW.size() + positive.db.size() + positive.dc.size() + 2);
    auto push_diff = [&](const std::vector<double>& a, const std::vector<double>& b) {
        for (size_t t = 0; t < a.size(); ++t) buf.push_back(a[t] - b[t]);
    };
    push_diff(positive.dW, negative.dW);
    push_diff(positive.db, negative.db);
    push_diff(positive.dc, negative.dc);
    buf.push_back(recon_err_sum);
    buf.push_back(static_cast<double>(count));
    return buf;
}

CdBatchStats CdBatchStats::from_buffer(const std::vector<double>& buf, const RbmParams& p) {
    CdBatchStats s(p);
    size_t need = s.positive.dW.size() + s.positive.db.size() + s.positive.dc.size() + 2;
    if (buf.size() != need) throw ShapeError("CdBatchStats::from_buffer: size mismatch");
    size_t off = 0;
    for (size_t t = 0; t < s.positive.dW.size(); ++t) s.positive.dW[t] = buf[off++];
    for (size_t t = 0; t < s.positive.db.size(); ++t) s.positive.db[t] = buf[off++];
    for (size_t t = 0; t < s.positive.dc.size(); ++t) s.positive.dc[t] = buf[off++];
    s.recon_err_sum = buf[off++];
    s.count = static_cast<long>(buf[off++]);
    return s;
}

namespace {

void accumulate_user(CdBatchStats& acc, const VisibleState& v0, uint64_t stream_id,
                     const RbmParams& p, int T, uint64_t seed, bool with_recon) {
    RngStream rng(seed, stream_id);
    GibbsResult g = gibbs_chain(v0, p, T, rng);

    // Hidden probabilities enter the statistics quantized so that sums stay
    // exactly representable under any accumulation order.
    std::vector<double> q0(p.F), qT(p.F);
    for (int j = 0; j < p.F; ++j) {
        q0[j] = quantize_stat(g.h0_prob.values[j]);
        qT[j] = quantize_stat(g.hT_prob.values[j]);
    }

    for (size_t t = 0; t < v0.items.size(); ++t) {
        int i = v0.items[t];
        int k0 = v0.levels[t];
        int kT = g.vT.levels[t];
        acc.positive.dbv(i, k0) += 1.0;
        acc.negative.dbv(i, kT) += 1.0;
        for (int j = 0; j < p.F; ++j) {
            acc.positive.dw(i, j, k0) += q0[j];
            acc.negative.dw(i, j, kT) += qT[j];
        }
    }
    for (int j = 0; j < p.F; ++j) {
        acc.positive.dc[j] += q0[j];
        acc.negative.dc[j] += qT[j];
    }

    if (with_recon && !v0.items.empty()) {
        long wrong = 0;
        for (size_t t = 0; t < v0.items.size(); ++t) {
            std::vector<double> probs = visible_conditional(g.h0_prob, p, v0.items[t]);
            int best = 1;
            for (int k = 2; k <= p.K; ++k)
                if (probs[k - 1] > probs[best - 1]) best = k;
            if (best != v0.levels[t]) ++wrong;
        }
        acc.recon_err_sum += quantize_stat(static_cast<double>(wrong) /
                                           static_cast<double>(v0.items.size()));
    }
    ++acc.count;
}

}  // namespace

CdBatchStats cd_batch_stats_serial(const std::vector<VisibleState>& batch,
                                   const std::vector<uint64_t>& stream_ids,
                                   const RbmParams& p, int T, uint64_t seed,
                                   bool with_recon) {
    if (batch.size() != stream_ids.size())
        throw ShapeError("cd_batch_stats: one stream id per user required");
    CdBatchStats acc(p);
    for (size_t u = 0; u < batch.size(); ++u)
        accumulate_user(acc, batch[u], stream_ids[u], p, T, seed, with_recon);
    return acc;
}

CdBatchStats cd_batch_stats(const std::vector<VisibleState>& batch,
                            const std::vector<uint64_t>& stream_ids,
                            const RbmParams& p, int T, uint64_t seed,
                            bool with_recon) {
    if (batch.size() != stream_ids.size())
        throw ShapeError("cd_batch_stats: one stream id per user required");
#ifdef _OPENMP
    int nt = omp_get_max_threads();
    if (nt > 1 && batch.size() > 1) {
        std::vector<CdBatchStats> parts(static_cast<size_t>(nt), CdBatchStats(p));
#pragma omp parallel
        {
            CdBatchStats& mine = parts[static_cast<size_t>(omp_get_thread_num())];
#pragma omp for schedule(static)
            for (long u = 0; u < static_cast<long>(batch.size()); ++u)
                accumulate_user(mine, batch[static_cast<size_t>(u)],
                                stream_ids[static_cast<size_t>(u)], p, T, seed, with_recon);
        }
        CdBatchStats acc(p);
        for (auto& part : parts) acc.merge(part);
        return acc;
    }
#endif
    return cd_batch_stats_serial(batch, stream_ids, p, T, seed, with_recon);
}

Gradients cd_statistics(const std::vector<VisibleState>& batch, const RbmParams& p,
                        int T, RngStream& rng) {
    if (batch.empty()) throw ArgumentError("cd_statistics: empty batch");
    std::vector<uint64_t> streams(batch.size());
    for (size_t u = 0; u < batch.size(); ++u) streams[u] = rng.stream() ^ (u + 1);
    return cd_batch_stats(batch, streams, p, T, rng.seed(), false).mean_gradients();
}

}  // namespace rbmcf
