// SPDX-License-Identifier: Apache-2.0
#include "rbmcf/parallel.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cerrno>
#include <cstring>
#include <thread>

namespace rbmcf {

std::vector<std::pair<size_t, size_t>> shard_ranges(size_t n, int P) {
    if (P <= 0) throw ArgumentError("shard_ranges: P must be positive");
    std::vector<std::pair<size_t, size_t>> out(static_cast<size_t>(P));
    size_t base = n / static_cast<size_t>(P);
    size_t rem = n % static_cast<size_t>(P);
    size_t off = 0;
    for (int p = 0; p < P; ++p) {
        size_t len = base + (static_cast<size_t>(p) < rem ? 1 : 0);
        out[static_cast<size_t>(p)] = {off, len};
        off += len;
    }
    return out;
}

std::vector<std::vector<int>> shard_batch(const std::vector<int>& batch, int P) {
    auto ranges = shard_ranges(batch.size(), P);
    std::vector<std::vector<int>> out;
    out.reserve(ranges.size());
    for (auto [off, len] : ranges)
        out.emplace_back(batch.begin() + static_cast<long>(off),
                         batch.begin() + static_cast<long>(off + len));
    return out;
}

std::vector<double> allreduce_weighted_mean(const std::vector<double>& local, double weight,
                                            Reducer& reducer) {
    if (weight < 0.0) throw ArgumentError("allreduce_weighted_mean: negative weight");
    std::vector<double> buf(local.size() + 1);
    for (size_t t = 0; t < local.size(); ++t) buf[t] = weight * local[t];
    buf[local.size()] = weight;
    reducer.allreduce_sum(buf);
    double total_w = buf[local.size()];
    if (!(total_w > 0.0)) throw ArgumentError("allreduce_weighted_mean: total weight must be positive");
    std::vector<double> out(local.size());
    for (size_t t = 0; t < local.size(); ++t) out[t] = buf[t] / total_w;
    return out;
}

namespace detail {

void reduce_pinned_order(const std::vector<const std::vector<double>*>& slots,
                         std::vector<double>& out) {
    int P = static_cast<int>(slots.size());
    size_t n = slots[0]->size();
    out.resize(n);
    size_t chunk = (n + static_cast<size_t>(P) - 1) / static_cast<size_t>(P);
    if (chunk == 0) return;
    for (int c = 0; c < P; ++c) {
        size_t lo = static_cast<size_t>(c) * chunk;
        size_t hi = std::min(n, lo + chunk);
        for (size_t e = lo; e < hi; ++e) {
            double acc = (*slots[static_cast<size_t>(c)])[e];
            for (int t = 1; t < P; ++t)
                acc += (*slots[static_cast<size_t>((c + t) % P)])[e];
            out[e] = acc;
        }
    }
}

void TimedBarrier::arrive_and_wait(double timeout_sec) {
    std::unique_lock<std::mutex> lock(mu_);
    uint64_t gen = generation_;
    if (++waiting_ == parties_) {
        waiting_ = 0;
        ++generation_;
        cv_.notify_all();
        return;
    }
    auto deadline = std::chrono::steady_clock::now() +
                    std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                        std::chrono::duration<double>(timeout_sec));
    if (!cv_.wait_until(lock, deadline, [&] { return generation_ != gen; }))
        throw TransportError("in-process collective: peer did not arrive within timeout");
}

}  // namespace detail

InProcessGroup::InProcessGroup(int P, double timeout_sec)
    : P_(P), timeout_sec_(timeout_sec), barrier_(P),
      slots_(static_cast<size_t>(P), nullptr), seqs_(static_cast<size_t>(P), 0) {
    if (P < 1) throw ArgumentError("InProcessGroup: P must be >= 1");
}

InProcessReducer::InProcessReducer(InProcessGroup& group, int rank)
    : group_(group), rank_(rank) {
    if (rank < 0 || rank >= group.world_size())
        throw ArgumentError("InProcessReducer: rank out of range");
}

void InProcessReducer::allreduce_sum(std::vector<double>& buf) {
    auto& g = group_;
    g.slots_[static_cast<size_t>(rank_)] = &buf;
    g.seqs_[static_cast<size_t>(rank_)] = seq_;
    g.barrier_.arrive_and_wait(g.timeout_sec_);

    for (int p = 0; p < g.P_; ++p) {
        if (g.slots_[static_cast<size_t>(p)]->size() != buf.size())
            throw ProtocolError("in-process collective: element-count mismatch");
        if (g.seqs_[static_cast<size_t>(p)] != seq_)
            throw ProtocolError("in-process collective: desynchronized sequence numbers");
    }
    if (rank_ == 0) detail::reduce_pinned_order(g.slots_, g.result_);
    g.barrier_.arrive_and_wait(g.timeout_sec_);

    std::vector<double> mine = g.result_;  // every worker copies the same bytes
    g.barrier_.arrive_and_wait(g.timeout_sec_);
    buf = std::move(mine);
    ++seq_;
}

namespace {

constexpr char kMagic[4] = {'R', 'B', 'A', 'R'};
constexpr uint8_t kVersion = 1;
constexpr size_t kHeaderLen = 4 + 1 + 8 + 8;  // magic, version, seq, element count

void put_u64le(uint8_t* p, uint64_t v) {
    for (int t = 0; t < 8; ++t) p[t] = static_cast<uint8_t>(v >> (8 * t));
}

uint64_t get_u64le(const uint8_t* p) {
    uint64_t v = 0;
    for (int t = 0; t < 8; ++t) v |= static_cast<uint64_t>(p[t]) << (8 * t);
    return v;
}

struct Endpoint {
    std::string host;
    uint16_t port;
};

Endpoint parse_endpoint(const std::string& s) {
    size_t colon = s.rfind(':');
    if (colon == std::string::npos || colon + 1 >= s.size())
        throw ArgumentError("bad endpoint (want host:port): " + s);
    int port = std::stoi(s.substr(colon + 1));
    if (port <= 0 || port > 65535) throw ArgumentError("bad port in endpoint: " + s);
    return {s.substr(0, colon), static_cast<uint16_t>(port)};
}

void set_nonblocking(int fd) {
    int flags = fcntl(fd, F_GETFL, 0);
    fcntl(fd, F_SETFL, flags | O_NONBLOCK);
}

double remaining_sec(std::chrono::steady_clock::time_point deadline) {
    return std::chrono::duration<double>(deadline - std::chrono::steady_clock::now()).count();
}

}  // namespace

SocketRingReducer::SocketRingReducer(const WorkerGroup& group)
    : P_(group.P), rank_(group.rank), timeout_sec_(group.timeout_sec) {
    if (group.transport != Transport::SocketRing)
        throw ArgumentError("SocketRingReducer: group transport is not socket-ring");
    if (P_ < 2) throw ArgumentError("SocketRingReducer: requires P >= 2");
    if (static_cast<int>(group.endpoints.size()) != P_)
        throw ArgumentError("SocketRingReducer: need one endpoint per rank");
    if (rank_ < 0 || rank_ >= P_) throw ArgumentError("SocketRingReducer: rank out of range");

    Endpoint me = parse_endpoint(group.endpoints[static_cast<size_t>(rank_)]);
    Endpoint right = parse_endpoint(group.endpoints[static_cast<size_t>((rank_ + 1) % P_)]);
    auto deadline = std::chrono::steady_clock::now() +
                    std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                        std::chrono::duration<double>(timeout_sec_));

    int listen_fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd < 0) throw TransportError("socket() failed");
    int one = 1;
    setsockopt(listen_fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_ANY);
    addr.sin_port = htons(me.port);
    if (bind(listen_fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        close(listen_fd);
        throw TransportError("bind failed on port " + std::to_string(me.port));
    }
    if (listen(listen_fd, 4) != 0) {
        close(listen_fd);
        throw TransportError("listen failed");
    }

    // Connect to the right neighbour, retrying until its listener is up.
    while (true) {
        int fd = ::socket(AF_INET, SOCK_STREAM, 0);
        if (fd < 0) {
            close(listen_fd);
            throw TransportError("socket() failed");
        }
        addrinfo hints{}, *res = nullptr;
        hints.ai_family = AF_INET;
        hints.ai_socktype = SOCK_STREAM;
        std::string port_str = std::to_string(right.port);
        if (getaddrinfo(right.host.c_str(), port_str.c_str(), &hints, &res) == 0 && res) {
            int rc = connect(fd, res->ai_addr, res->ai_addrlen);
            freeaddrinfo(res);
            if (rc == 0) {
                fd_right_ = fd;
                break;
            }
        }
        close(fd);
        if (remaining_sec(deadline) <= 0.0) {
            close(listen_fd);
            throw TransportError("timed out connecting to " + group.endpoints[static_cast<size_t>((rank_ + 1) % P_)]);
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }

    // Accept the connection from the left neighbour.
    pollfd pfd{listen_fd, POLLIN, 0};
    int pr = poll(&pfd, 1, static_cast<int>(std::max(0.0, remaining_sec(deadline)) * 1000.0));
    if (pr <= 0) {
        close(listen_fd);
        close(fd_right_);
        fd_right_ = -1;
        throw TransportError("timed out waiting for left neighbour to connect");
    }
    fd_left_ = accept(listen_fd, nullptr, nullptr);
    close(listen_fd);
    if (fd_left_ < 0) {
        close(fd_right_);
        fd_right_ = -1;
        throw TransportError("accept failed");
    }
    setsockopt(fd_right_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    setsockopt(fd_left_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    set_nonblocking(fd_right_);
    set_nonblocking(fd_left_);

    // Hello exchange: verify version (via the frame header), group size and
    // neighbour rank before any collective runs.
    std::vector<double> hello = {static_cast<double>(P_), static_cast<double>(rank_)};
    std::vector<double> peer(2);
    exchange(hello.data(), hello.size(), peer.data(), peer.size());
    int left = (rank_ + P_ - 1) % P_;
    if (static_cast<int>(peer[0]) != P_ || static_cast<int>(peer[1]) != left)
        throw ProtocolError("ring handshake: neighbour reported unexpected group/rank");
}

SocketRingReducer::~SocketRingReducer() {
    if (fd_right_ >= 0) close(fd_right_);
    if (fd_left_ >= 0) close(fd_left_);
}

// Simultaneously push one frame to the right neighbour and pull one from the
// left, multiplexed with poll so large chunks cannot deadlock the ring.
void SocketRingReducer::exchange(const double* out_data, size_t out_count,
                                 double* in_data, size_t in_count) {
    std::vector<uint8_t> out_frame(kHeaderLen + out_count * 8);
    std::memcpy(out_frame.data(), kMagic, 4);
    out_frame[4] = kVersion;
    put_u64le(out_frame.data() + 5, seq_);
    put_u64le(out_frame.data() + 13, out_count);
    for (size_t t = 0; t < out_count; ++t) {
        uint64_t bits;
        std::memcpy(&bits, &out_data[t], 8);
        put_u64le(out_frame.data() + kHeaderLen + t * 8, bits);
    }
    std::vector<uint8_t> in_frame(kHeaderLen + in_count * 8);

    size_t sent = 0, received = 0;
    bool header_checked = false;
    auto deadline = std::chrono::steady_clock::now() +
                    std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                        std::chrono::duration<double>(timeout_sec_));
    while (sent < out_frame.size() || received < in_frame.size()) {
        pollfd pfds[2];
        int n = 0;
        int send_idx = -1, recv_idx = -1;
        if (sent < out_frame.size()) {
            pfds[n] = {fd_right_, POLLOUT, 0};
            send_idx = n++;
        }
        if (received < in_frame.size()) {
            pfds[n] = {fd_left_, POLLIN, 0};
            recv_idx = n++;
        }
        double rem = remaining_sec(deadline);
        if (rem <= 0.0) throw TransportError("collective timed out");
        int pr = poll(pfds, static_cast<nfds_t>(n), static_cast<int>(rem * 1000.0) + 1);
        if (pr < 0) throw TransportError("poll failed");
        if (pr == 0) continue;

        if (send_idx >= 0 && (pfds[send_idx].revents & (POLLOUT | POLLERR | POLLHUP))) {
            ssize_t w = send(fd_right_, out_frame.data() + sent, out_frame.size() - sent,
                             MSG_NOSIGNAL);
            if (w < 0) {
                if (errno != EAGAIN && errno != EWOULDBLOCK)
                    throw TransportError("peer connection lost during send");
            } else {
                sent += static_cast<size_t>(w);
                bytes_sent_ += static_cast<uint64_t>(w);
            }
        }
        if (recv_idx >= 0 && (pfds[recv_idx].revents & (POLLIN | POLLERR | POLLHUP))) {
            ssize_t r = recv(fd_left_, in_frame.data() + received, in_frame.size() - received, 0);
            if (r == 0) throw TransportError("peer disconnected");
            if (r < 0) {
                if (errno != EAGAIN && errno != EWOULDBLOCK)
                    throw TransportError("peer connection lost during recv");
            } else {
                received += static_cast<size_t>(r);
            }
        }
        // Validate the header as soon as it is complete.
        if (!header_checked && received >= kHeaderLen) {
            header_checked = true;
            if (std::memcmp(in_frame.data(), kMagic, 4) != 0)
                throw ProtocolError("bad frame magic");
            if (in_frame[4] != kVersion)
                throw ProtocolError("handshake-version mismatch");
            if (get_u64le(in_frame.data() + 5) != seq_)
                throw ProtocolError("desynchronized collective sequence number");
            if (get_u64le(in_frame.data() + 13) != in_count)
                throw ProtocolError("element-count mismatch in collective");
        }
    }
    for (size_t t = 0; t < in_count; ++t) {
        uint64_t bits = get_u64le(in_frame.data() + kHeaderLen + t * 8);
        std::memcpy(&in_data[t], &bits, 8);
    }
}

void SocketRingReducer::allreduce_sum(std::vector<double>& buf) {
    ++seq_;
    const size_t n = buf.size();

    // Control round: agree on the element count before moving payload.
    double n_out = static_cast<double>(n);
    double n_in = 0.0;
    exchange(&n_out, 1, &n_in, 1);
    if (static_cast<size_t>(n_in) != n)
        throw ProtocolError("element-count mismatch in collective");

    const size_t P = static_cast<size_t>(P_);
    const size_t chunk = (n + P - 1) / P;
    auto range = [&](size_t c) {
        size_t lo = std::min(n, c * chunk);
        size_t hi = std::min(n, lo + chunk);
        return std::pair<size_t, size_t>(lo, hi);
    };

    std::vector<double> incoming(chunk);

    // Reduce-scatter: after P-1 steps rank r holds the fully reduced
    // chunk (r+1) mod P, accumulated left-to-right from its chunk index.
    for (int s = 0; s < P_ - 1; ++s) {
        size_t send_c = static_cast<size_t>(((rank_ - s) % P_ + P_) % P_);
        size_t recv_c = static_cast<size_t>(((rank_ - s - 1) % P_ + P_) % P_);
        auto [slo, shi] = range(send_c);
        auto [rlo, rhi] = range(recv_c);
        exchange(buf.data() + slo, shi - slo, incoming.data(), rhi - rlo);
        for (size_t e = 0; e < rhi - rlo; ++e) buf[rlo + e] = incoming[e] + buf[rlo + e];
    }

    // Allgather the reduced chunks around the ring.
    for (int s = 0; s < P_ - 1; ++s) {
        size_t send_c = static_cast<size_t>(((rank_ + 1 - s) % P_ + P_) % P_);
        size_t recv_c = static_cast<size_t>(((rank_ - s) % P_ + P_) % P_);
        auto [slo, shi] = range(send_c);
        auto [rlo, rhi] = range(recv_c);
        exchange(buf.data() + slo, shi - slo, incoming.data(), rhi - rlo);
        for (size_t e = 0; e < rhi - rlo; ++e) buf[rlo + e] = incoming[e];
    }
}

}  // namespace rbmcf
