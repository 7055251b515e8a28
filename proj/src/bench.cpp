// SPDX-License-Identifier: Apache-2.0
#include "rbmcf/bench.hpp"

#include <algorithm>
#include <chrono>
#include <ostream>

namespace rbmcf {

double speedup(double t1, double tP) {
    if (!(t1 > 0.0) || !(tP > 0.0)) throw ArgumentError("speedup: times must be positive");
    return t1 / tP;
}

TimingSample time_epoch(const std::function<void()>& run, int warmup, int reps,
                        const std::string& label) {
    if (reps < 1) throw ArgumentError("time_epoch: reps must be >= 1");
    if (warmup < 0) throw ArgumentError("time_epoch: warmup must be >= 0");

    for (int t = 0; t < warmup; ++t) run();

    TimingSample s;
    s.label = label;
    s.repetitions = reps;
    s.raw.reserve(static_cast<size_t>(reps));
    for (int t = 0; t < reps; ++t) {
        auto t0 = std::chrono::steady_clock::now();
        run();
        s.raw.push_back(
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    std::vector<double> sorted = s.raw;
    std::sort(sorted.begin(), sorted.end());
    size_t n = sorted.size();
    s.seconds = (n % 2 == 1) ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    return s;
}

void write_scaling_csv(const ScalingReport& r, std::ostream& out) {
    out << "# timing scope: training epoch loop only (median over repetitions); "
           "data loading and model serialization excluded\n";
    if (r.partial) out << "# PARTIAL REPORT: one or more worker counts aborted\n";
    size_t max_raw = 0;
    for (const auto& row : r.rows) max_raw = std::max(max_raw, row.raw.size());
    out << "P,mode,global_batch,per_worker_batch,epoch_seconds,speedup,efficiency";
    for (size_t t = 0; t < max_raw; ++t) out << ",raw_" << t;
    out << '\n';
    for (const auto& row : r.rows) {
        out << row.P << ',' << (row.mode == ScalingMode::Strong ? "strong" : "weak") << ','
            << row.global_batch << ',' << row.per_worker_batch << ',';
        if (row.failed) {
            out << "error,,";
        } else {
            out << row.epoch_seconds << ',' << row.speedup << ',' << row.efficiency;
        }
        for (double x : row.raw) out << ',' << x;
        out << '\n';
    }
}

}  // namespace rbmcf
