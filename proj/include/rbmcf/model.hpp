// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "rbmcf/errors.hpp"

namespace rbmcf {

// Model parameters Theta = (W, b, c) for a softmax-visible RBM over m items,
// F binary hidden units and K rating levels. W is laid out [item][hidden][level],
// row-major and contiguous; b is [item][level]; c is [hidden].
struct RbmParams {
    int m = 0;  // items
    int F = 0;  // hidden units
    int K = 0;  // rating levels

    std::vector<double> W;  // m*F*K
    std::vector<double> b;  // m*K
    std::vector<double> c;  // F

    RbmParams() = default;
    RbmParams(int m_, int F_, int K_)
        : m(m_), F(F_), K(K_),
          W(static_cast<size_t>(m_) * F_ * K_, 0.0),
          b(static_cast<size_t>(m_) * K_, 0.0),
          c(static_cast<size_t>(F_), 0.0) {
        if (m_ <= 0 || F_ <= 0 || K_ <= 0) throw ShapeError("RbmParams: dimensions must be positive");
    }

    // item i in [0,m), hidden j in [0,F), level k in [1,K]
    double& w(int i, int j, int k) { return W[(static_cast<size_t>(i) * F + j) * K + (k - 1)]; }
    double w(int i, int j, int k) const { return W[(static_cast<size_t>(i) * F + j) * K + (k - 1)]; }
    double& bias_v(int i, int k) { return b[static_cast<size_t>(i) * K + (k - 1)]; }
    double bias_v(int i, int k) const { return b[static_cast<size_t>(i) * K + (k - 1)]; }

    bool all_finite() const;
};

// One user's visible configuration: a one-hot level per rated item. Items are
// 0-based and strictly ascending; levels are in [1, K]. Items outside the mask
// do not participate in the model at all.
struct VisibleState {
    std::vector<int> items;
    std::vector<int> levels;

    size_t size() const { return items.size(); }
    void validate(const RbmParams& p) const;
};

// Hidden layer state: either binary samples or activation probabilities.
struct HiddenState {
    std::vector<double> values;
    bool binary = false;
};

// Theta-shaped gradient accumulator.
struct Gradients {
    int m = 0, F = 0, K = 0;
    std::vector<double> dW;
    std::vector<double> db;
    std::vector<double> dc;

    Gradients() = default;
    explicit Gradients(const RbmParams& p)
        : m(p.m), F(p.F), K(p.K),
          dW(p.W.size(), 0.0), db(p.b.size(), 0.0), dc(p.c.size(), 0.0) {}

    double& dw(int i, int j, int k) { return dW[(static_cast<size_t>(i) * F + j) * K + (k - 1)]; }
    double dw(int i, int j, int k) const { return dW[(static_cast<size_t>(i) * F + j) * K + (k - 1)]; }
    double& dbv(int i, int k) { return db[static_cast<size_t>(i) * K + (k - 1)]; }
    double dbv(int i, int k) const { return db[static_cast<size_t>(i) * K + (k - 1)]; }

    bool shape_matches(const RbmParams& p) const { return m == p.m && F == p.F && K == p.K; }
};

double energy(const VisibleState& v, const HiddenState& h, const RbmParams& p);

// p(v_i = k | H), softmax over levels, computed in log space.
std::vector<double> visible_conditional(const HiddenState& h, const RbmParams& p, int item);

// p(h_j = 1 | V), only masked items feed the pre-activation.
std::vector<double> hidden_conditional(const VisibleState& v, const RbmParams& p);

// log f(V; Theta) by literal enumeration over all 2^F hidden configurations.
// Guarded to F <= 20; the oracle never approximates.
double log_f_exact(const VisibleState& v, const RbmParams& p);

// log f(V; Theta) via the factorized product form; no capacity guard.
double log_f_factorized(const VisibleState& v, const RbmParams& p);

// Exact gradient of log f: dW = v * p(h=1|v), db = v, dc = p(h=1|v).
Gradients log_f_gradient_exact(const VisibleState& v, const RbmParams& p);

// G = log Z - mean log f over full-mask data, with Z enumerated over all
// K^m visible configurations. Guarded to K^m <= 4096 and F <= 20.
double exact_nll(const std::vector<VisibleState>& data, const RbmParams& p);

// All K^m full-mask visible configurations, in lexicographic level order.
std::vector<VisibleState> enumerate_full_states(int m, int K);

}  // namespace rbmcf
