// Spectral normalization (power iteration) and virtual batch normalization.
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "ictgan/common.hpp"
#include "ictgan/tensor.hpp"

namespace ictgan {

// Persistent power-iteration vectors for one normalized weight. The weight is
// viewed as a 2-D matrix: rows = first shape dimension (output channels),
// columns = everything else flattened.
template <class Real>
struct SpectralNormState {
    std::vector<Real> u;  // left vector, length rows
    std::vector<Real> v;  // right vector, length cols
    std::int64_t iterations_run = 0;

    void init(int rows, int cols, std::uint64_t seed) {
        Rng rng(seed);
        u.resize(rows);
        v.assign(cols, Real(0));
        double norm = 0;
        for (auto& e : u) {
            e = static_cast<Real>(rng.normal());
            norm += static_cast<double>(e) * e;
        }
        norm = std::sqrt(std::max(norm, 1e-30));
        for (auto& e : u) e = static_cast<Real>(e / norm);
        iterations_run = 0;
    }
};

namespace detail {

template <class Real>
void normalize_vec(std::vector<Real>& x) {
    double n = 0;
    for (Real e : x) n += static_cast<double>(e) * e;
    n = std::sqrt(n);
    if (n < 1e-30) return;
    for (auto& e : x) e = static_cast<Real>(e / n);
}

}  // namespace detail

// Divides the weight by the power-iteration estimate of its largest singular
// value; u/v in `state` are updated in place (warm start across steps).
// Gradient treats sigma = u^T W v with u, v constant.
template <class Real>
TensorPtr<Real> spectral_normalize(Tape<Real>& tape, const TensorPtr<Real>& w,
                                   SpectralNormState<Real>& state, int iters,
                                   Real sigma_floor = Real(1e-12)) {
    if (w->shape.empty()) throw DimensionError("spectral_normalize: scalar weight");
    if (iters < 1) throw ConfigError("spectral_normalize: iters must be >= 1");
    const int rows = w->shape[0];
    const int cols = static_cast<int>(w->size() / rows);
    if (static_cast<int>(state.u.size()) != rows || static_cast<int>(state.v.size()) != cols)
        throw StateError("spectral_normalize: state size does not match weight");

    const Real* m = w->values.data();
    for (int it = 0; it < iters; ++it) {
        // v <- normalize(W^T u)
        for (int j = 0; j < cols; ++j) {
            Real acc = 0;
            for (int i = 0; i < rows; ++i) acc += m[static_cast<std::size_t>(i) * cols + j] * state.u[i];
            state.v[j] = acc;
        }
        detail::normalize_vec(state.v);
        // u <- normalize(W v)
        for (int i = 0; i < rows; ++i) {
            const Real* row = &m[static_cast<std::size_t>(i) * cols];
            Real acc = 0;
            for (int j = 0; j < cols; ++j) acc += row[j] * state.v[j];
            state.u[i] = acc;
        }
        detail::normalize_vec(state.u);
    }
    state.iterations_run += iters;

    Real sigma = 0;
    for (int i = 0; i < rows; ++i) {
        const Real* row = &m[static_cast<std::size_t>(i) * cols];
        Real acc = 0;
        for (int j = 0; j < cols; ++j) acc += row[j] * state.v[j];
        sigma += state.u[i] * acc;
    }
    sigma = std::max(sigma, sigma_floor);

    auto out = make_tensor<Real>(w->shape);
    const Real inv_sigma = Real(1) / sigma;
    for (std::int64_t i = 0; i < w->size(); ++i) out->values[i] = w->values[i] * inv_sigma;
    out->requires_grad = w->requires_grad;
    if (out->requires_grad) {
        // Snapshot u, v: state mutates on the next forward pass.
        auto u = std::make_shared<std::vector<Real>>(state.u);
        auto v = std::make_shared<std::vector<Real>>(state.v);
        tape.record([w, out, u, v, inv_sigma, rows, cols] {
            if (out->grad.empty()) return;
            w->ensure_grad();
            // dW = (1/sigma) * (dWbar - <dWbar, Wbar> u v^T)
            Real dot = 0;
            for (std::int64_t i = 0; i < w->size(); ++i) dot += out->grad[i] * out->values[i];
            for (int i = 0; i < rows; ++i)
                for (int j = 0; j < cols; ++j) {
                    const std::size_t idx = static_cast<std::size_t>(i) * cols + j;
                    w->grad[idx] += inv_sigma * (out->grad[idx] - dot * (*u)[i] * (*v)[j]);
                }
        });
    }
    return out;
}

// Reference statistics for one normalized layer: per-channel mean and mean of
// squares over the reference batch, frozen before first discriminating use.
template <class Real>
struct VbnLayerState {
    std::vector<Real> ref_mean;
    std::vector<Real> ref_sqmean;
    int ref_count = 0;  // number of reference examples
    bool frozen = false;

    void freeze(const std::vector<Real>& mean, const std::vector<Real>& sqmean, int count) {
        if (frozen) throw StateError("VBN reference already frozen");
        ref_mean = mean;
        ref_sqmean = sqmean;
        ref_count = count;
        frozen = true;
    }
};

// Normalizes one example {C,L} with reference-plus-example statistics: the
// reference batch weighs N/(N+1) and the current example 1/(N+1). Learned
// per-channel gain and shift are applied afterwards.
template <class Real>
TensorPtr<Real> virtual_batch_norm(Tape<Real>& tape, const TensorPtr<Real>& x,
                                   const VbnLayerState<Real>& state, const TensorPtr<Real>& gain,
                                   const TensorPtr<Real>& shift, Real eps = Real(1e-5)) {
    if (!state.frozen) throw StateError("virtual_batch_norm: reference statistics not frozen");
    if (x->shape.size() != 2) throw DimensionError("virtual_batch_norm: expected {C,L}");
    const int c = x->shape[0], len = x->shape[1];
    if (static_cast<int>(state.ref_mean.size()) != c)
        throw DimensionError("virtual_batch_norm: channel count mismatch");
    if (gain->size() != c || shift->size() != c)
        throw DimensionError("virtual_batch_norm: gain/shift size mismatch");

    const Real wr = static_cast<Real>(state.ref_count) / static_cast<Real>(state.ref_count + 1);
    const Real we = Real(1) / static_cast<Real>(state.ref_count + 1);

    auto out = make_tensor<Real>(x->shape);
    auto mu_v = std::make_shared<std::vector<Real>>(c);
    auto istd_v = std::make_shared<std::vector<Real>>(c);
    for (int ch = 0; ch < c; ++ch) {
        const Real* xr = &x->values[static_cast<std::size_t>(ch) * len];
        Real m = 0, q = 0;
        for (int t = 0; t < len; ++t) {
            m += xr[t];
            q += xr[t] * xr[t];
        }
        m /= static_cast<Real>(len);
        q /= static_cast<Real>(len);
        const Real mu = wr * state.ref_mean[ch] + we * m;
        const Real var = std::max(wr * state.ref_sqmean[ch] + we * q - mu * mu, Real(0));
        const Real istd = Real(1) / std::sqrt(var + eps);
        (*mu_v)[ch] = mu;
        (*istd_v)[ch] = istd;
        Real* o = &out->values[static_cast<std::size_t>(ch) * len];
        const Real g = gain->values[ch], s = shift->values[ch];
        for (int t = 0; t < len; ++t) o[t] = g * (xr[t] - mu) * istd + s;
    }
    out->requires_grad = x->requires_grad || gain->requires_grad || shift->requires_grad;
    if (out->requires_grad) {
        tape.record([x, gain, shift, out, mu_v, istd_v, c, len, we] {
            if (out->grad.empty()) return;
            if (x->requires_grad) x->ensure_grad();
            if (gain->requires_grad) gain->ensure_grad();
            if (shift->requires_grad) shift->ensure_grad();
            const Real b_over_l = we / static_cast<Real>(len);
            for (int ch = 0; ch < c; ++ch) {
                const Real* xr = &x->values[static_cast<std::size_t>(ch) * len];
                const Real* og = &out->grad[static_cast<std::size_t>(ch) * len];
                const Real mu = (*mu_v)[ch], istd = (*istd_v)[ch];
                const Real g = gain->values[ch];
                if (gain->requires_grad || shift->requires_grad) {
                    Real dg = 0, ds = 0;
                    for (int t = 0; t < len; ++t) {
                        dg += og[t] * (xr[t] - mu) * istd;
                        ds += og[t];
                    }
                    if (gain->requires_grad) gain->grad[ch] += dg;
                    if (shift->requires_grad) shift->grad[ch] += ds;
                }
                if (x->requires_grad) {
                    // The example contributes to mu and var with weight we.
                    Real s1 = 0, s2 = 0;
                    for (int t = 0; t < len; ++t) {
                        s1 += g * og[t];
                        s2 += g * og[t] * (xr[t] - mu);
                    }
                    Real* xg = &x->grad[static_cast<std::size_t>(ch) * len];
                    for (int t = 0; t < len; ++t)
                        xg[t] += istd * (g * og[t] - b_over_l * s1 -
                                         b_over_l * istd * istd * s2 * (xr[t] - mu));
                }
            }
        });
    }
    return out;
}

// Per-channel mean / mean-square over a batch of {C,L} tensors; used to
// freeze a layer's VBN reference.
template <class Real>
void accumulate_vbn_reference(const std::vector<TensorPtr<Real>>& batch,
                              std::vector<Real>& mean_out, std::vector<Real>& sqmean_out) {
    if (batch.empty()) throw StateError("VBN reference batch is empty");
    const int c = batch[0]->shape[0], len = batch[0]->shape[1];
    mean_out.assign(c, Real(0));
    sqmean_out.assign(c, Real(0));
    for (const auto& x : batch) {
        if (x->shape[0] != c || x->shape[1] != len)
            throw DimensionError("VBN reference batch shapes differ");
        for (int ch = 0; ch < c; ++ch) {
            const Real* xr = &x->values[static_cast<std::size_t>(ch) * len];
            for (int t = 0; t < len; ++t) {
                mean_out[ch] += xr[t];
                sqmean_out[ch] += xr[t] * xr[t];
            }
        }
    }
    const Real inv = Real(1) / static_cast<Real>(batch.size() * static_cast<std::size_t>(len));
    for (int ch = 0; ch < c; ++ch) {
        mean_out[ch] *= inv;
        sqmean_out[ch] *= inv;
    }
}

}  // namespace ictgan
