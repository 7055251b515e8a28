// SPDX-License-Identifier: Apache-2.0
//
// Compares the serial reference CD kernel against the OpenMP one on a
// synthetic batch and verifies their outputs are bit-identical.

#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "rbmcf/bench.hpp"
#include "rbmcf/rng.hpp"
#include "rbmcf/sampling.hpp"

namespace {

std::vector<rbmcf::VisibleState> synthetic_batch(int users, int m, int K, int rated_per_user,
                                                 uint64_t seed) {
    std::vector<rbmcf::VisibleState> batch;
    batch.reserve(static_cast<size_t>(users));
    for (int u = 0; u < users; ++u) {
        rbmcf::RngStream rng(seed, 0x42415443ull ^ static_cast<uint64_t>(u));
        rbmcf::VisibleState v;
        // rated_per_user distinct items via a partial Fisher-Yates over [0, m)
        std::vector<int> pool(static_cast<size_t>(m));
        for (int i = 0; i < m; ++i) pool[static_cast<size_t>(i)] = i;
        for (int t = 0; t < rated_per_user; ++t) {
            size_t pick = static_cast<size_t>(t) +
                          static_cast<size_t>(rng.next_u64() % static_cast<uint64_t>(m - t));
            std::swap(pool[static_cast<size_t>(t)], pool[pick]);
            v.items.push_back(pool[static_cast<size_t>(t)]);
        }
        std::sort(v.items.begin(), v.items.end());
        for (int t = 0; t < rated_per_user; ++t)
            v.levels.push_back(1 + static_cast<int>(rng.next_u64() % static_cast<uint64_t>(K)));
        batch.push_back(std::move(v));
    }
    return batch;
}

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() &&
           (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

}  // namespace

int main(int argc, char** argv) {
    int users = 512, m = 2000, F = 100, K = 5, T = 1, rated = 40;
    int reps = 5, warmup = 1;
    for (int i = 1; i + 1 < argc; i += 2) {
        std::string key = argv[i];
        int val = std::atoi(argv[i + 1]);
        if (key == "--users") users = val;
        else if (key == "--items") m = val;
        else if (key == "--hidden") F = val;
        else if (key == "--gibbs") T = val;
        else if (key == "--rated") rated = val;
        else if (key == "--reps") reps = val;
        else if (key == "--warmup") warmup = val;
        else { std::fprintf(stderr, "unknown option %s\n", key.c_str()); return 1; }
    }

    rbmcf::RbmParams p(m, F, K);
    rbmcf::RngStream init(7, 0x4b42ull);
    for (auto& w : p.W) w = 0.01 * init.next_normal();
    std::vector<rbmcf::VisibleState> batch = synthetic_batch(users, m, K, rated, 11);
    std::vector<uint64_t> streams(batch.size());
    for (size_t u = 0; u < batch.size(); ++u) streams[u] = 0x1000 + u;

    rbmcf::CdBatchStats serial_stats(p), parallel_stats(p);
    auto run_serial = [&] {
        serial_stats = rbmcf::cd_batch_stats_serial(batch, streams, p, T, 99, true);
    };
    auto run_parallel = [&] {
        parallel_stats = rbmcf::cd_batch_stats(batch, streams, p, T, 99, true);
    };

    rbmcf::TimingSample ts = rbmcf::time_epoch(run_serial, warmup, reps, "serial");
    rbmcf::TimingSample tp = rbmcf::time_epoch(run_parallel, warmup, reps, "openmp");

    bool identical = bit_equal(serial_stats.positive.dW, parallel_stats.positive.dW) &&
                     bit_equal(serial_stats.positive.db, parallel_stats.positive.db) &&
                     bit_equal(serial_stats.positive.dc, parallel_stats.positive.dc) &&
                     bit_equal(serial_stats.negative.dW, parallel_stats.negative.dW) &&
                     bit_equal(serial_stats.negative.db, parallel_stats.negative.db) &&
                     bit_equal(serial_stats.negative.dc, parallel_stats.negative.dc) &&
                     serial_stats.recon_err_sum == parallel_stats.recon_err_sum &&
                     serial_stats.count == parallel_stats.count;

    int threads = 1;
#ifdef _OPENMP
    threads = omp_get_max_threads();
#endif
    std::printf("batch: %d users, %d items, F=%d, K=%d, T=%d, %d rated/user\n",
                users, m, F, K, T, rated);
    std::printf("serial reference: %.6f s (median of %d)\n", ts.seconds, reps);
    std::printf("openmp (%d threads): %.6f s (median of %d)\n", threads, tp.seconds, reps);
    std::printf("speedup: %.3fx\n", rbmcf::speedup(ts.seconds, tp.seconds));
    std::printf("bit-identical statistics: %s\n", identical ? "yes" : "NO");
    return identical ? 0 : 1;
}
