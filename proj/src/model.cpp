// SPDX-License-Identifier: Apache-2.0
#include "rbmcf/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rbmcf {

namespace {

// log(1 + exp(x)) without overflow.
double softplus(double x) {
    if (x > 35.0) return x;
    if (x < -35.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

bool RbmParams::all_finite() const {
    auto ok = [](const std::vector<double>& v) {
        return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    };
    return ok(W) && ok(b) && ok(c);
}

void VisibleState::validate(const RbmParams& p) const {
    if (items.size() != levels.size()) throw ShapeError("VisibleState: items/levels size mismatch");
    int prev = -1;
    for (size_t t = 0; t < items.size(); ++t) {
        if (items[t] < 0 || items[t] >= p.m) throw IndexError("VisibleState: item out of range");
        if (items[t] <= prev) throw ShapeError("VisibleState: items must be strictly ascending");
        if (levels[t] < 1 || levels[t] > p.K) throw ShapeError("VisibleState: level out of range");
        prev = items[t];
    }
}

double energy(const VisibleState& v, const HiddenState& h, const RbmParams& p) {
    if (!h.binary) throw ArgumentError("energy: hidden state must be binary-tagged");
    if (static_cast<int>(h.values.size()) != p.F) throw ShapeError("energy: hidden size != F");
    v.validate(p);

    double e = 0.0;
    for (size_t t = 0; t < v.items.size(); ++t) {
        int i = v.items[t], k = v.levels[t];
        e -= p.bias_v(i, k);
        for (int j = 0; j < p.F; ++j) e -= p.w(i, j, k) * h.values[j];
    }
    for (int j = 0; j < p.F; ++j) e -= p.c[j] * h.values[j];
    return e;
}

std::vector<double> visible_conditional(const HiddenState& h, const RbmParams& p, int item) {
    if (static_cast<int>(h.values.size()) != p.F) throw ShapeError("visible_conditional: hidden size != F");
    if (item < 0 || item >= p.m) throw IndexError("visible_conditional: item out of range");

    std::vector<double> logits(p.K);
    for (int k = 1; k <= p.K; ++k) {
        double z = p.bias_v(item, k);
        for (int j = 0; j < p.F; ++j) z += h.values[j] * p.w(item, j, k);
        logits[k - 1] = z;
    }
    double mx = *std::max_element(logits.begin(), logits.end());
    double denom = 0.0;
    for (double& z : logits) {
        z = std::exp(z - mx);
        denom += z;
    }
    for (double& z : logits) z /= denom;
    return logits;
}

std::vector<double> hidden_conditional(const VisibleState& v, const RbmParams& p) {
    v.validate(p);
    std::vector<double> out(p.F);
    for (int j = 0; j < p.F; ++j) {
        double z = p.c[j];
        for (size_t t = 0; t < v.items.size(); ++t) z += p.w(v.items[t], j, v.levels[t]);
        out[j] = sigmoid(z);
    }
    return out;
}

double log_f_exact(const VisibleState& v, const RbmParams& p) {
    if (p.F > 20) throw CapacityError("log_f_exact: F > 20 enumeration guard");
    v.validate(p);

    // Visible-only part is common to every hidden configuration.
    double vb = 0.0;
    for (size_t t = 0; t < v.items.size(); ++t) vb += p.bias_v(v.items[t], v.levels[t]);

    // Pre-activation of each hidden unit given v.
    std::vector<double> act(p.F);
    for (int j = 0; j < p.F; ++j) {
        double z = p.c[j];
        for (size_t t = 0; t < v.items.size(); ++t) z += p.w(v.items[t], j, v.levels[t]);
        act[j] = z;
    }

    // logsumexp over all 2^F hidden configurations of sum_j h_j * act[j].
    const uint32_t n = 1u << p.F;
    double mx = -std::numeric_limits<double>::infinity();
    std::vector<double> terms(n);
    for (uint32_t mask = 0; mask < n; ++mask) {
        double s = 0.0;
        for (int j = 0; j < p.F; ++j)
            if (mask & (1u << j)) s += act[j];
        terms[mask] = s;
        mx = std::max(mx, s);
    }
    double acc = 0.0;
    for (double s : terms) acc += std::exp(s - mx);
    return vb + mx + std::log(acc);
}

double log_f_factorized(const VisibleState& v, const RbmParams& p) {
    v.validate(p);
    double out = 0.0;
    for (size_t t = 0; t < v.items.size(); ++t) out += p.bias_v(v.items[t], v.levels[t]);
    for (int j = 0; j < p.F; ++j) {
        double z = p.c[j];
        for (size_t t = 0; t < v.items.size(); ++t) z += p.w(v.items[t], j, v.levels[t]);
        out += softplus(z);
    }
    return out;
}

Gradients log_f_gradient_exact(const VisibleState& v, const RbmParams& p) {
    if (p.F > 20) throw CapacityError("log_f_gradient_exact: F > 20 enumeration guard");
    std::vector<double> hp = hidden_conditional(v, p);
    Gradients g(p);
    for (size_t t = 0; t < v.items.size(); ++t) {
        int i = v.items[t], k = v.levels[t];
        g.dbv(i, k) = 1.0;
        for (int j = 0; j < p.F; ++j) g.dw(i, j, k) = hp[j];
    }
    for (int j = 0; j < p.F; ++j) g.dc[j] = hp[j];
    return g;
}

std::vector<VisibleState> enumerate_full_states(int m, int K) {
    double total = std::pow(static_cast<double>(K), m);
    if (total > 4096.0) throw CapacityError("enumerate_full_states: K^m > 4096 enumeration guard");

    std::vector<VisibleState> out;
    out.reserve(static_cast<size_t>(total));
    VisibleState cur;
    cur.items.resize(m);
    cur.levels.assign(m, 1);
    for (int i = 0; i < m; ++i) cur.items[i] = i;
    while (true) {
        out.push_back(cur);
        int pos = m - 1;
        while (pos >= 0 && cur.levels[pos] == K) {
            cur.levels[pos] = 1;
            --pos;
        }
        if (pos < 0) break;
        ++cur.levels[pos];
    }
    return out;
}

double exact_nll(const std::vector<VisibleState>& data, const RbmParams& p) {
    if (p.F > 20) throw CapacityError("exact_nll: F > 20 enumeration guard");
    if (data.empty()) throw ArgumentError("exact_nll: empty data");
    for (const auto& v : data) {
        if (static_cast<int>(v.size()) != p.m)
            throw ArgumentError("exact_nll: data must carry full masks");
        v.validate(p);
    }

    std::vector<VisibleState> states = enumerate_full_states(p.m, p.K);
    std::vector<double> lf(states.size());
    double mx = -std::numeric_limits<double>::infinity();
    for (size_t s = 0; s < states.size(); ++s) {
        lf[s] = log_f_factorized(states[s], p);
        mx = std::max(mx, lf[s]);
    }
    double acc = 0.0;
    for (double x : lf) acc += std::exp(x - mx);
    double log_z = mx + std::log(acc);

    double mean_lf = 0.0;
    for (const auto& v : data) mean_lf += log_f_factorized(v, p);
    mean_lf /= static_cast<double>(data.size());
    return log_z - mean_lf;
}

}  // namespace rbmcf
