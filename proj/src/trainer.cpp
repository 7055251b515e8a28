// SPDX-License-Identifier: Apache-2.0
#include "rbmcf/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>

#include "rbmcf/sampling.hpp"

namespace rbmcf {

void TrainConfig::validate() const {
    if (F < 1 || K < 1 || T < 1) throw ArgumentError("TrainConfig: F, K, T must be positive");
    if (!(eta > 0.0) || !std::isfinite(eta)) throw ArgumentError("TrainConfig: eta must be positive");
    if (global_batch < 1) throw ArgumentError("TrainConfig: global_batch must be positive");
    if (epochs < 0) throw ArgumentError("TrainConfig: epochs must be >= 0");
    if (workers < 1) throw ArgumentError("TrainConfig: workers must be >= 1");
    if (global_batch < workers) throw ArgumentError("TrainConfig: global_batch must be >= workers");
    if (init_sigma < 0.0) throw ArgumentError("TrainConfig: init_sigma must be >= 0");
}

RbmParams init_params(const TrainConfig& cfg, int m, RngStream& rng) {
    if (m < 1) throw ArgumentError("init_params: m must be >= 1");
    RbmParams p(m, cfg.F, cfg.K);
    for (double& w : p.W) w = cfg.init_sigma * rng.next_normal();
    return p;
}

void apply_update(RbmParams& p, const Gradients& g, double eta) {
    if (!g.shape_matches(p)) throw ShapeError("apply_update: gradient/parameter shape mismatch");
    if (!std::isfinite(eta)) throw ArgumentError("apply_update: eta must be finite");
    auto axpy = [eta](std::vector<double>& x, const std::vector<double>& d, const char* name) {
        for (size_t t = 0; t < x.size(); ++t) {
            x[t] += eta * d[t];
            if (!std::isfinite(x[t]))
                throw NumericError(std::string("apply_update: non-finite ") + name + "[" +
                                   std::to_string(t) + "]");
        }
    };
    axpy(p.W, g.dW, "W");
    axpy(p.b, g.db, "b");
    axpy(p.c, g.dc, "c");
}

namespace {

// 64-bit FNV-1a over the raw parameter bytes.
uint64_t hash_params(const RbmParams& p) {
    uint64_t h = 0xcbf29ce484222325ull;
    auto feed = [&h](const std::vector<double>& v) {
        const uint8_t* bytes = reinterpret_cast<const uint8_t*>(v.data());
        for (size_t t = 0; t < v.size() * 8; ++t) {
            h ^= bytes[t];
            h *= 0x100000001b3ull;
        }
    };
    feed(p.W);
    feed(p.b);
    feed(p.c);
    return h;
}

// All workers hold the same hash iff P * sum(x^2) == (sum x)^2 per 16-bit
// hash slice; slices keep every product exactly representable for P <= 1024.
void verify_params_in_sync(const RbmParams& p, Reducer& reducer) {
    uint64_t h = hash_params(p);
    std::vector<double> buf(8);
    for (int t = 0; t < 4; ++t) {
        double x = static_cast<double>((h >> (16 * t)) & 0xffffull);
        buf[static_cast<size_t>(t)] = x;
        buf[static_cast<size_t>(t) + 4] = x * x;
    }
    reducer.allreduce_sum(buf);
    double P = static_cast<double>(reducer.world_size());
    for (int t = 0; t < 4; ++t) {
        double sx = buf[static_cast<size_t>(t)];
        double sxx = buf[static_cast<size_t>(t) + 4];
        if (P * sxx != sx * sx)
            throw NumericError("train: worker parameters diverged (sync check failed)");
    }
}

}  // namespace

TrainResult train(const RatingDataset& data, const TrainConfig& cfg, Reducer& reducer) {
    cfg.validate();
    if (data.num_users() == 0) throw ArgumentError("train: empty dataset");
    if (cfg.workers != reducer.world_size())
        throw ArgumentError("train: reducer world size does not match cfg.workers");

    const int P = reducer.world_size();
    const int rank = reducer.rank();
    const size_t n_users = data.num_users();
    const int m = static_cast<int>(data.num_items());

    RngStream init_rng(cfg.seed, 0x1217ull);
    RbmParams params = init_params(cfg, m, init_rng);

    TrainResult result{std::move(params), {}};
    RbmParams& theta = result.params;

    std::vector<int> order(n_users);
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto t0 = std::chrono::steady_clock::now();

        if (cfg.shuffle) {
            // Identical shuffle on every worker: keyed by (seed, epoch) only.
            std::iota(order.begin(), order.end(), 0);
            RngStream rng(cfg.seed, detail::hash3(0x5348464cull, static_cast<uint64_t>(epoch), 0));
            for (size_t t = n_users - 1; t > 0; --t) {
                size_t r = static_cast<size_t>(rng.next_u64() % (t + 1));
                std::swap(order[t], order[r]);
            }
        }

        double recon_sum = 0.0;
        double user_count = 0.0;
        size_t steps = (n_users + static_cast<size_t>(cfg.global_batch) - 1) /
                       static_cast<size_t>(cfg.global_batch);
        for (size_t step = 0; step < steps; ++step) {
            size_t lo = step * static_cast<size_t>(cfg.global_batch);
            size_t hi = std::min(n_users, lo + static_cast<size_t>(cfg.global_batch));
            auto shards = shard_ranges(hi - lo, P);
            auto [soff, slen] = shards[static_cast<size_t>(rank)];

            std::vector<VisibleState> shard;
            std::vector<uint64_t> streams;
            shard.reserve(slen);
            streams.reserve(slen);
            for (size_t t = 0; t < slen; ++t) {
                int uid = order[lo + soff + t];
                shard.push_back(data.visible_state(static_cast<size_t>(uid)));
                streams.push_back(user_stream_id(static_cast<uint64_t>(epoch), step,
                                                 static_cast<uint64_t>(uid)));
            }

            CdBatchStats stats = cd_batch_stats(shard, streams, theta, cfg.T, cfg.seed,
                                                /*with_recon=*/true);
            std::vector<double> buf = stats.to_buffer();
            reducer.allreduce_sum(buf);
            CdBatchStats total = CdBatchStats::from_buffer(buf, theta);
            recon_sum += total.recon_err_sum;
            user_count += static_cast<double>(total.count);

            apply_update(theta, total.mean_gradients(), cfg.eta);
        }

        if (cfg.verify_sync) verify_params_in_sync(theta, reducer);

        TrainHistory::Epoch rec;
        rec.epoch = epoch;
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        rec.recon_err = user_count > 0.0 ? recon_sum / user_count : 0.0;
        if (cfg.track_nll) {
            std::vector<VisibleState> all;
            all.reserve(n_users);
            for (size_t u = 0; u < n_users; ++u) all.push_back(data.visible_state(u));
            rec.nll = exact_nll(all, theta);
        }
        result.history.epochs.push_back(rec);
    }
    return result;
}

void write_history_csv(const TrainHistory& h, std::ostream& out) {
    out << "epoch,seconds,recon_err,nll\n";
    for (const auto& e : h.epochs) {
        out << e.epoch << ',' << e.seconds << ',' << e.recon_err << ',';
        if (e.nll) out << *e.nll;
        out << '\n';
    }
}

}  // namespace rbmcf
