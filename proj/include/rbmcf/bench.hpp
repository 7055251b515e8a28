// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "rbmcf/errors.hpp"

namespace rbmcf {

struct TimingSample {
    std::string label;
    double seconds = 0.0;           // median over repetitions, monotonic clock
    std::vector<double> raw;        // every timed repetition
    int repetitions = 0;
};

// t1 / tP; both inputs must be positive.
double speedup(double t1, double tP);

// Runs `warmup` untimed executions, then `reps` timed ones; records the
// median wall-clock seconds (steady clock, never wall time).
TimingSample time_epoch(const std::function<void()>& run, int warmup, int reps,
                        const std::string& label = "epoch");

enum class ScalingMode { Strong, Weak };

struct ScalingReport {
    struct Row {
        int P;
        ScalingMode mode;
        int global_batch;
        int per_worker_batch;
        double epoch_seconds;    // median
        double speedup;          // t1 / tP
        double efficiency;       // speedup / P
        std::vector<double> raw; // raw timed repetitions
        bool failed = false;
        std::string error;
    };
    std::vector<Row> rows;
    bool partial = false;        // some P rows aborted
};

// CSV with a header comment documenting the timing scope (the epoch loop
// only; data loading and serialization are excluded). Derived columns are
// recomputed from the raw samples.
void write_scaling_csv(const ScalingReport& r, std::ostream& out);

}  // namespace rbmcf
