// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "rbmcf/errors.hpp"

namespace rbmcf {

enum class Transport { InProcess, SocketRing };

struct WorkerGroup {
    int P = 1;
    int rank = 0;
    Transport transport = Transport::InProcess;
    std::vector<std::string> endpoints;  // "host:port", one per rank (socket mode)
    double timeout_sec = 30.0;
};

// Contiguous split of n elements over P shards; sizes differ by at most one,
// remainder goes to low ranks. Returned as (offset, count) per shard.
std::vector<std::pair<size_t, size_t>> shard_ranges(size_t n, int P);

// Same split applied to a list of user ids.
std::vector<std::vector<int>> shard_batch(const std::vector<int>& batch, int P);

// Blocking collective sum. Every worker passes an equal-length buffer and
// receives the elementwise sum, bit-identical across workers and transports.
//
// The reduction order is pinned: the buffer is cut into P chunks of
// ceil(n/P) elements (final chunk short) and chunk c accumulates its ranks'
// contributions left-to-right starting at rank c, wrapping around. This is
// exactly the order a ring reduce-scatter produces, and the in-process
// reducer replays it, so the two transports agree bit for bit.
class Reducer {
public:
    virtual ~Reducer() = default;
    virtual int world_size() const = 0;
    virtual int rank() const = 0;
    virtual void allreduce_sum(std::vector<double>& buf) = 0;
};

// Size-weighted mean across workers: sum_p(w_p * x_p) / sum_p(w_p).
// weight must be >= 0 and the group total positive.
std::vector<double> allreduce_weighted_mean(const std::vector<double>& local, double weight,
                                            Reducer& reducer);

namespace detail {

// Sums slots[0..P-1] (equal-length buffers) into out using the pinned
// per-chunk order described on Reducer.
void reduce_pinned_order(const std::vector<const std::vector<double>*>& slots,
                         std::vector<double>& out);

class TimedBarrier {
public:
    explicit TimedBarrier(int parties) : parties_(parties) {}
    void arrive_and_wait(double timeout_sec);

private:
    std::mutex mu_;
    std::condition_variable cv_;
    int parties_;
    int waiting_ = 0;
    uint64_t generation_ = 0;
};

}  // namespace detail

// Shared state for P in-process workers (threads). Each worker constructs an
// InProcessReducer over the same group.
class InProcessGroup {
public:
    explicit InProcessGroup(int P, double timeout_sec = 30.0);

    int world_size() const { return P_; }

private:
    friend class InProcessReducer;
    int P_;
    double timeout_sec_;
    detail::TimedBarrier barrier_;
    std::vector<const std::vector<double>*> slots_;
    std::vector<uint64_t> seqs_;
    std::vector<double> result_;
    std::mutex result_mu_;
};

class InProcessReducer : public Reducer {
public:
    InProcessReducer(InProcessGroup& group, int rank);

    int world_size() const override { return group_.P_; }
    int rank() const override { return rank_; }
    void allreduce_sum(std::vector<double>& buf) override;

private:
    InProcessGroup& group_;
    int rank_;
    uint64_t seq_ = 0;
};

// Ring allreduce over TCP stream sockets: reduce-scatter then allgather,
// 2(P-1) steps, each moving ~1/P of the buffer. Requires P >= 2.
class SocketRingReducer : public Reducer {
public:
    explicit SocketRingReducer(const WorkerGroup& group);
    ~SocketRingReducer() override;

    SocketRingReducer(const SocketRingReducer&) = delete;
    SocketRingReducer& operator=(const SocketRingReducer&) = delete;

    int world_size() const override { return P_; }
    int rank() const override { return rank_; }
    void allreduce_sum(std::vector<double>& buf) override;

    // Payload + framing bytes pushed onto the wire so far.
    uint64_t bytes_sent() const { return bytes_sent_; }

private:
    void exchange(const double* out_data, size_t out_count,
                  double* in_data, size_t in_count);

    int P_;
    int rank_;
    double timeout_sec_;
    int fd_right_ = -1;  // we send to rank+1
    int fd_left_ = -1;   // we receive from rank-1
    uint64_t seq_ = 0;
    uint64_t bytes_sent_ = 0;
};

}  // namespace rbmcf
