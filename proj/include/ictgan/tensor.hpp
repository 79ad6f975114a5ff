// Tape-based reverse-mode autodiff with the 1-D network ops the GAN needs.
//
// Tensors are dense row-major buffers; a Tape records one backward closure per
// op and replays them in reverse. Gradients accumulate additively, so a tensor
// used twice receives the sum of both paths. Real is float for training and
// double for finite-difference verification.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "ictgan/common.hpp"

namespace ictgan {

template <class Real>
struct Tensor {
    std::vector<int> shape;
    std::vector<Real> values;
    std::vector<Real> grad;  // empty until touched by backward()
    bool requires_grad = false;
    std::string name;

    std::int64_t size() const { return static_cast<std::int64_t>(values.size()); }

    static std::int64_t numel(const std::vector<int>& shape) {
        std::int64_t n = 1;
        for (int d : shape) {
            if (d <= 0) throw DimensionError("tensor dimension must be positive");
            n *= d;
        }
        return n;
    }

    void ensure_grad() {
        if (grad.empty()) grad.assign(values.size(), Real(0));
    }
    void zero_grad() {
        if (!grad.empty()) std::fill(grad.begin(), grad.end(), Real(0));
    }

    bool all_finite() const {
        for (Real v : values)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }
};

template <class Real>
using TensorPtr = std::shared_ptr<Tensor<Real>>;

template <class Real>
TensorPtr<Real> make_tensor(std::vector<int> shape, bool requires_grad = false,
                            std::string name = {}) {
    auto t = std::make_shared<Tensor<Real>>();
    const auto n = Tensor<Real>::numel(shape);
    t->shape = std::move(shape);
    t->values.assign(static_cast<std::size_t>(n), Real(0));
    t->requires_grad = requires_grad;
    t->name = std::move(name);
    return t;
}

template <class Real>
TensorPtr<Real> make_tensor(std::vector<int> shape, const std::vector<Real>& values,
                            bool requires_grad = false, std::string name = {}) {
    auto t = make_tensor<Real>(std::move(shape), requires_grad, std::move(name));
    if (static_cast<std::int64_t>(values.size()) != t->size())
        throw DimensionError("value count does not match shape");
    t->values = values;
    return t;
}

inline std::string shape_str(const std::vector<int>& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

// Records backward closures in execution order.
template <class Real>
class Tape {
public:
    void record(std::function<void()> fn) { nodes_.push_back(std::move(fn)); }

    // Optional NaN/Inf detection on every op output.
    bool verify = false;

    void backward(const TensorPtr<Real>& loss) {
        if (loss->size() != 1)
            throw DimensionError("backward requires a scalar loss, got shape " +
                                 shape_str(loss->shape));
        loss->ensure_grad();
        loss->grad[0] += Real(1);
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
    }

    void clear() { nodes_.clear(); }
    std::size_t num_nodes() const { return nodes_.size(); }

private:
    std::vector<std::function<void()>> nodes_;
};

namespace ops {

template <class Real>
void check_output(const Tape<Real>& tape, const TensorPtr<Real>& t, const char* op) {
    if (tape.verify && !t->all_finite())
        throw NumericalError(std::string("non-finite values in output of ") + op);
}

// ---------------------------------------------------------------------------
// Elementwise ops
// ---------------------------------------------------------------------------

template <class Real>
TensorPtr<Real> add(Tape<Real>& tape, const TensorPtr<Real>& a, const TensorPtr<Real>& b) {
    if (a->shape != b->shape)
        throw DimensionError("add: shape mismatch " + shape_str(a->shape) + " vs " + shape_str(b->shape));
    auto out = make_tensor<Real>(a->shape);
    for (std::int64_t i = 0; i < a->size(); ++i) out->values[i] = a->values[i] + b->values[i];
    out->requires_grad = a->requires_grad || b->requires_grad;
    if (out->requires_grad) {
        tape.record([a, b, out] {
            if (out->grad.empty()) return;
            if (a->requires_grad) {
                a->ensure_grad();
                for (std::int64_t i = 0; i < a->size(); ++i) a->grad[i] += out->grad[i];
            }
            if (b->requires_grad) {
                b->ensure_grad();
                for (std::int64_t i = 0; i < b->size(); ++i) b->grad[i] += out->grad[i];
            }
        });
    }
    check_output(tape, out, "add");
    return out;
}

template <class Real>
TensorPtr<Real> mul(Tape<Real>& tape, const TensorPtr<Real>& a, const TensorPtr<Real>& b) {
    if (a->shape != b->shape)
        throw DimensionError("mul: shape mismatch");
    auto out = make_tensor<Real>(a->shape);
    for (std::int64_t i = 0; i < a->size(); ++i) out->values[i] = a->values[i] * b->values[i];
    out->requires_grad = a->requires_grad || b->requires_grad;
    if (out->requires_grad) {
        tape.record([a, b, out] {
            if (out->grad.empty()) return;
            if (a->requires_grad) {
                a->ensure_grad();
                for (std::int64_t i = 0; i < a->size(); ++i) a->grad[i] += out->grad[i] * b->values[i];
            }
            if (b->requires_grad) {
                b->ensure_grad();
                for (std::int64_t i = 0; i < b->size(); ++i) b->grad[i] += out->grad[i] * a->values[i];
            }
        });
    }
    check_output(tape, out, "mul");
    return out;
}

template <class Real>
TensorPtr<Real> scale(Tape<Real>& tape, const TensorPtr<Real>& a, Real c) {
    auto out = make_tensor<Real>(a->shape);
    for (std::int64_t i = 0; i < a->size(); ++i) out->values[i] = a->values[i] * c;
    out->requires_grad = a->requires_grad;
    if (out->requires_grad) {
        tape.record([a, out, c] {
            if (out->grad.empty()) return;
            a->ensure_grad();
            for (std::int64_t i = 0; i < a->size(); ++i) a->grad[i] += out->grad[i] * c;
        });
    }
    return out;
}

template <class Real>
TensorPtr<Real> leaky_relu(Tape<Real>& tape, const TensorPtr<Real>& x, Real slope) {
    auto out = make_tensor<Real>(x->shape);
    for (std::int64_t i = 0; i < x->size(); ++i) {
        const Real v = x->values[i];
        out->values[i] = v > Real(0) ? v : slope * v;
    }
    out->requires_grad = x->requires_grad;
    if (out->requires_grad) {
        tape.record([x, out, slope] {
            if (out->grad.empty()) return;
            x->ensure_grad();
            for (std::int64_t i = 0; i < x->size(); ++i)
                x->grad[i] += out->grad[i] * (x->values[i] > Real(0) ? Real(1) : slope);
        });
    }
    check_output(tape, out, "leaky_relu");
    return out;
}

template <class Real>
TensorPtr<Real> tanh_act(Tape<Real>& tape, const TensorPtr<Real>& x) {
    auto out = make_tensor<Real>(x->shape);
    for (std::int64_t i = 0; i < x->size(); ++i) out->values[i] = std::tanh(x->values[i]);
    out->requires_grad = x->requires_grad;
    if (out->requires_grad) {
        tape.record([x, out] {
            if (out->grad.empty()) return;
            x->ensure_grad();
            for (std::int64_t i = 0; i < x->size(); ++i) {
                const Real y = out->values[i];
                x->grad[i] += out->grad[i] * (Real(1) - y * y);
            }
        });
    }
    check_output(tape, out, "tanh");
    return out;
}

template <class Real>
TensorPtr<Real> sigmoid(Tape<Real>& tape, const TensorPtr<Real>& x) {
    auto out = make_tensor<Real>(x->shape);
    for (std::int64_t i = 0; i < x->size(); ++i)
        out->values[i] = Real(1) / (Real(1) + std::exp(-x->values[i]));
    out->requires_grad = x->requires_grad;
    if (out->requires_grad) {
        tape.record([x, out] {
            if (out->grad.empty()) return;
            x->ensure_grad();
            for (std::int64_t i = 0; i < x->size(); ++i) {
                const Real y = out->values[i];
                x->grad[i] += out->grad[i] * y * (Real(1) - y);
            }
        });
    }
    check_output(tape, out, "sigmoid");
    return out;
}

// ---------------------------------------------------------------------------
// Reductions and loss kernels
// ---------------------------------------------------------------------------

template <class Real>
TensorPtr<Real> sum(Tape<Real>& tape, const TensorPtr<Real>& x) {
    auto out = make_tensor<Real>({1});
    Real s = 0;
    for (std::int64_t i = 0; i < x->size(); ++i) s += x->values[i];
    out->values[0] = s;
    out->requires_grad = x->requires_grad;
    if (out->requires_grad) {
        tape.record([x, out] {
            if (out->grad.empty()) return;
            x->ensure_grad();
            const Real g = out->grad[0];
            for (std::int64_t i = 0; i < x->size(); ++i) x->grad[i] += g;
        });
    }
    return out;
}

template <class Real>
TensorPtr<Real> mean(Tape<Real>& tape, const TensorPtr<Real>& x) {
    return scale(tape, sum(tape, x), Real(1) / static_cast<Real>(x->size()));
}

// mean((x_i - target)^2), the least-squares score penalty.
template <class Real>
TensorPtr<Real> squared_error_mean(Tape<Real>& tape, const TensorPtr<Real>& x, Real target) {
    if (x->size() == 0) throw DimensionError("squared_error_mean: empty input");
    auto out = make_tensor<Real>({1});
    const Real inv_n = Real(1) / static_cast<Real>(x->size());
    Real s = 0;
    for (std::int64_t i = 0; i < x->size(); ++i) {
        const Real d = x->values[i] - target;
        s += d * d;
    }
    out->values[0] = s * inv_n;
    out->requires_grad = x->requires_grad;
    if (out->requires_grad) {
        tape.record([x, out, target, inv_n] {
            if (out->grad.empty()) return;
            x->ensure_grad();
            const Real g = out->grad[0];
            for (std::int64_t i = 0; i < x->size(); ++i)
                x->grad[i] += g * Real(2) * (x->values[i] - target) * inv_n;
        });
    }
    return out;
}

// mean |a_i - b_i|; subgradient 0 at ties.
template <class Real>
TensorPtr<Real> l1_mean(Tape<Real>& tape, const TensorPtr<Real>& a, const TensorPtr<Real>& b) {
    if (a->shape != b->shape)
        throw DimensionError("l1_mean: shape mismatch");
    auto out = make_tensor<Real>({1});
    const Real inv_n = Real(1) / static_cast<Real>(a->size());
    Real s = 0;
    for (std::int64_t i = 0; i < a->size(); ++i) s += std::abs(a->values[i] - b->values[i]);
    out->values[0] = s * inv_n;
    out->requires_grad = a->requires_grad || b->requires_grad;
    if (out->requires_grad) {
        tape.record([a, b, out, inv_n] {
            if (out->grad.empty()) return;
            const Real g = out->grad[0];
            for (std::int64_t i = 0; i < a->size(); ++i) {
                const Real d = a->values[i] - b->values[i];
                const Real sg = d > Real(0) ? Real(1) : (d < Real(0) ? Real(-1) : Real(0));
                if (a->requires_grad) {
                    a->ensure_grad();
                    a->grad[i] += g * sg * inv_n;
                }
                if (b->requires_grad) {
                    b->ensure_grad();
                    b->grad[i] -= g * sg * inv_n;
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Structured ops
// ---------------------------------------------------------------------------

// Cross-correlation with same-length zero padding at stride 1.
// input {C_in, L}, weight {C_out, C_in, K}, K odd, no bias.
template <class Real>
TensorPtr<Real> conv1d(Tape<Real>& tape, const TensorPtr<Real>& x, const TensorPtr<Real>& w,
                       int stride = 1) {
    if (x->shape.size() != 2 || w->shape.size() != 3)
        throw DimensionError("conv1d: expected input {C,L} and weight {Cout,Cin,K}");
    const int c_in = x->shape[0], len = x->shape[1];
    const int c_out = w->shape[0], k = w->shape[2];
    if (w->shape[1] != c_in)
        throw DimensionError("conv1d: weight input channels " + std::to_string(w->shape[1]) +
                             " do not match input channels " + std::to_string(c_in));
    if (k % 2 == 0) throw ConfigError("conv1d: kernel length must be odd");
    if (stride < 1) throw ConfigError("conv1d: stride must be >= 1");
    const int pad = (k - 1) / 2;
    const int out_len = (len + 2 * pad - k) / stride + 1;
    auto out = make_tensor<Real>({c_out, out_len});

    for (int co = 0; co < c_out; ++co) {
        Real* o = &out->values[static_cast<std::size_t>(co) * out_len];
        for (int ci = 0; ci < c_in; ++ci) {
            const Real* xr = &x->values[static_cast<std::size_t>(ci) * len];
            const Real* wr = &w->values[(static_cast<std::size_t>(co) * c_in + ci) * k];
            for (int t = 0; t < out_len; ++t) {
                const int base = t * stride - pad;
                const int k0 = std::max(0, -base);
                const int k1 = std::min(k, len - base);
                Real acc = 0;
                for (int kk = k0; kk < k1; ++kk) acc += wr[kk] * xr[base + kk];
                o[t] += acc;
            }
        }
    }
    out->requires_grad = x->requires_grad || w->requires_grad;
    if (out->requires_grad) {
        tape.record([x, w, out, c_in, c_out, len, k, pad, stride] {
            if (out->grad.empty()) return;
            const int out_len = out->shape[1];
            if (x->requires_grad) x->ensure_grad();
            if (w->requires_grad) w->ensure_grad();
            for (int co = 0; co < c_out; ++co) {
                const Real* og = &out->grad[static_cast<std::size_t>(co) * out_len];
                for (int ci = 0; ci < c_in; ++ci) {
                    const Real* xr = &x->values[static_cast<std::size_t>(ci) * len];
                    const Real* wr = &w->values[(static_cast<std::size_t>(co) * c_in + ci) * k];
                    Real* xg = x->requires_grad ? &x->grad[static_cast<std::size_t>(ci) * len] : nullptr;
                    Real* wg = w->requires_grad
                                   ? &w->grad[(static_cast<std::size_t>(co) * c_in + ci) * k]
                                   : nullptr;
                    for (int t = 0; t < out_len; ++t) {
                        const int base = t * stride - pad;
                        const int k0 = std::max(0, -base);
                        const int k1 = std::min(k, len - base);
                        const Real g = og[t];
                        if (g == Real(0)) continue;
                        if (xg)
                            for (int kk = k0; kk < k1; ++kk) xg[base + kk] += g * wr[kk];
                        if (wg)
                            for (int kk = k0; kk < k1; ++kk) wg[kk] += g * xr[base + kk];
                    }
                }
            }
        });
    }
    check_output(tape, out, "conv1d");
    return out;
}

// Adjoint of conv1d(stride): maps {C_in, L} -> {C_out, L*stride}.
// weight {C_in, C_out, K}; dilation spreads kernel taps.
template <class Real>
TensorPtr<Real> transposed_conv1d(Tape<Real>& tape, const TensorPtr<Real>& x,
                                  const TensorPtr<Real>& w, int stride = 1, int dilation = 1) {
    if (x->shape.size() != 2 || w->shape.size() != 3)
        throw DimensionError("transposed_conv1d: expected input {C,L} and weight {Cin,Cout,K}");
    const int c_in = x->shape[0], len = x->shape[1];
    const int c_out = w->shape[1], k = w->shape[2];
    if (w->shape[0] != c_in)
        throw DimensionError("transposed_conv1d: weight channels do not match input");
    if (k % 2 == 0) throw ConfigError("transposed_conv1d: kernel length must be odd");
    if (stride < 1 || dilation < 1)
        throw ConfigError("transposed_conv1d: stride and dilation must be >= 1");
    const int pad = dilation * (k - 1) / 2;
    const int out_len = len * stride;
    auto out = make_tensor<Real>({c_out, out_len});

    for (int ci = 0; ci < c_in; ++ci) {
        const Real* xr = &x->values[static_cast<std::size_t>(ci) * len];
        for (int co = 0; co < c_out; ++co) {
            const Real* wr = &w->values[(static_cast<std::size_t>(ci) * c_out + co) * k];
            Real* o = &out->values[static_cast<std::size_t>(co) * out_len];
            for (int t = 0; t < len; ++t) {
                const Real v = xr[t];
                if (v == Real(0)) continue;
                const int base = t * stride - pad;
                for (int kk = 0; kk < k; ++kk) {
                    const int j = base + kk * dilation;
                    if (j >= 0 && j < out_len) o[j] += v * wr[kk];
                }
            }
        }
    }
    out->requires_grad = x->requires_grad || w->requires_grad;
    if (out->requires_grad) {
        tape.record([x, w, out, c_in, c_out, len, k, pad, stride, dilation] {
            if (out->grad.empty()) return;
            const int out_len = out->shape[1];
            if (x->requires_grad) x->ensure_grad();
            if (w->requires_grad) w->ensure_grad();
            for (int ci = 0; ci < c_in; ++ci) {
                const Real* xr = &x->values[static_cast<std::size_t>(ci) * len];
                Real* xg = x->requires_grad ? &x->grad[static_cast<std::size_t>(ci) * len] : nullptr;
                for (int co = 0; co < c_out; ++co) {
                    const Real* wr = &w->values[(static_cast<std::size_t>(ci) * c_out + co) * k];
                    Real* wg = w->requires_grad
                                   ? &w->grad[(static_cast<std::size_t>(ci) * c_out + co) * k]
                                   : nullptr;
                    const Real* og = &out->grad[static_cast<std::size_t>(co) * out_len];
                    for (int t = 0; t < len; ++t) {
                        const int base = t * stride - pad;
                        Real acc = 0;
                        for (int kk = 0; kk < k; ++kk) {
                            const int j = base + kk * dilation;
                            if (j < 0 || j >= out_len) continue;
                            acc += og[j] * wr[kk];
                            if (wg) wg[kk] += og[j] * xr[t];
                        }
                        if (xg) xg[t] += acc;
                    }
                }
            }
        });
    }
    check_output(tape, out, "transposed_conv1d");
    return out;
}

// Non-overlapping max over pairs; gradient to the first maximal index.
template <class Real>
TensorPtr<Real> maxpool1d(Tape<Real>& tape, const TensorPtr<Real>& x) {
    if (x->shape.size() != 2) throw DimensionError("maxpool1d: expected {C,L}");
    const int c = x->shape[0], len = x->shape[1];
    if (len % 2 != 0)
        throw DimensionError("maxpool1d: length " + std::to_string(len) + " is odd");
    const int out_len = len / 2;
    auto out = make_tensor<Real>({c, out_len});
    auto argmax = std::make_shared<std::vector<int>>(static_cast<std::size_t>(c) * out_len);
    for (int ch = 0; ch < c; ++ch) {
        const Real* xr = &x->values[static_cast<std::size_t>(ch) * len];
        Real* o = &out->values[static_cast<std::size_t>(ch) * out_len];
        int* am = &(*argmax)[static_cast<std::size_t>(ch) * out_len];
        for (int t = 0; t < out_len; ++t) {
            const Real a = xr[2 * t], b = xr[2 * t + 1];
            if (b > a) {
                o[t] = b;
                am[t] = 2 * t + 1;
            } else {
                o[t] = a;
                am[t] = 2 * t;
            }
        }
    }
    out->requires_grad = x->requires_grad;
    if (out->requires_grad) {
        tape.record([x, out, argmax, c, len] {
            if (out->grad.empty()) return;
            x->ensure_grad();
            const int out_len = out->shape[1];
            for (int ch = 0; ch < c; ++ch) {
                const Real* og = &out->grad[static_cast<std::size_t>(ch) * out_len];
                Real* xg = &x->grad[static_cast<std::size_t>(ch) * len];
                const int* am = &(*argmax)[static_cast<std::size_t>(ch) * out_len];
                for (int t = 0; t < out_len; ++t) xg[am[t]] += og[t];
            }
        });
    }
    return out;
}

// Affine map: input of N elements, weight {M,N}, bias {M}.
template <class Real>
TensorPtr<Real> dense(Tape<Real>& tape, const TensorPtr<Real>& x, const TensorPtr<Real>& w,
                      const TensorPtr<Real>& b) {
    if (w->shape.size() != 2)
        throw DimensionError("dense: weight must be {M,N}");
    const int m = w->shape[0], n = w->shape[1];
    if (x->size() != n)
        throw DimensionError("dense: input size " + std::to_string(x->size()) +
                             " does not match weight columns " + std::to_string(n));
    if (b->size() != m) throw DimensionError("dense: bias size mismatch");
    auto out = make_tensor<Real>({m});
    for (int i = 0; i < m; ++i) {
        const Real* wr = &w->values[static_cast<std::size_t>(i) * n];
        Real acc = b->values[i];
        for (int j = 0; j < n; ++j) acc += wr[j] * x->values[j];
        out->values[i] = acc;
    }
    out->requires_grad = x->requires_grad || w->requires_grad || b->requires_grad;
    if (out->requires_grad) {
        tape.record([x, w, b, out, m, n] {
            if (out->grad.empty()) return;
            if (x->requires_grad) x->ensure_grad();
            if (w->requires_grad) w->ensure_grad();
            if (b->requires_grad) b->ensure_grad();
            for (int i = 0; i < m; ++i) {
                const Real g = out->grad[i];
                if (g == Real(0)) continue;
                const Real* wr = &w->values[static_cast<std::size_t>(i) * n];
                if (b->requires_grad) b->grad[i] += g;
                if (x->requires_grad)
                    for (int j = 0; j < n; ++j) x->grad[j] += g * wr[j];
                if (w->requires_grad) {
                    Real* wg = &w->grad[static_cast<std::size_t>(i) * n];
                    for (int j = 0; j < n; ++j) wg[j] += g * x->values[j];
                }
            }
        });
    }
    check_output(tape, out, "dense");
    return out;
}

// Concatenate two tensors along an axis (1-D or 2-D).
template <class Real>
TensorPtr<Real> concat(Tape<Real>& tape, const TensorPtr<Real>& a, const TensorPtr<Real>& b,
                       int axis) {
    if (a->shape.size() != b->shape.size())
        throw DimensionError("concat: rank mismatch");
    const int rank = static_cast<int>(a->shape.size());
    if (axis < 0 || axis >= rank) throw DimensionError("concat: invalid axis");
    for (int d = 0; d < rank; ++d)
        if (d != axis && a->shape[d] != b->shape[d])
            throw DimensionError("concat: incompatible shapes " + shape_str(a->shape) + " vs " +
                                 shape_str(b->shape));
    std::vector<int> out_shape = a->shape;
    out_shape[axis] += b->shape[axis];
    auto out = make_tensor<Real>(out_shape);

    // Treat as {outer, inner} blocks around the concat axis.
    std::int64_t outer = 1, a_ax = a->shape[axis], b_ax = b->shape[axis], inner = 1;
    for (int d = 0; d < axis; ++d) outer *= a->shape[d];
    for (int d = axis + 1; d < rank; ++d) inner *= a->shape[d];
    for (std::int64_t o = 0; o < outer; ++o) {
        std::copy_n(&a->values[o * a_ax * inner], a_ax * inner,
                    &out->values[o * (a_ax + b_ax) * inner]);
        std::copy_n(&b->values[o * b_ax * inner], b_ax * inner,
                    &out->values[o * (a_ax + b_ax) * inner + a_ax * inner]);
    }
    out->requires_grad = a->requires_grad || b->requires_grad;
    if (out->requires_grad) {
        tape.record([a, b, out, outer, a_ax, b_ax, inner] {
            if (out->grad.empty()) return;
            for (std::int64_t o = 0; o < outer; ++o) {
                const Real* og = &out->grad[o * (a_ax + b_ax) * inner];
                if (a->requires_grad) {
                    a->ensure_grad();
                    for (std::int64_t i = 0; i < a_ax * inner; ++i)
                        a->grad[o * a_ax * inner + i] += og[i];
                }
                if (b->requires_grad) {
                    b->ensure_grad();
                    for (std::int64_t i = 0; i < b_ax * inner; ++i)
                        b->grad[o * b_ax * inner + i] += og[a_ax * inner + i];
                }
            }
        });
    }
    return out;
}

// out = base + weight * addend, with a learned scalar weight {1}.
template <class Real>
TensorPtr<Real> weighted_add(Tape<Real>& tape, const TensorPtr<Real>& base,
                             const TensorPtr<Real>& addend, const TensorPtr<Real>& weight) {
    if (base->shape != addend->shape)
        throw DimensionError("weighted_add: shape mismatch " + shape_str(base->shape) + " vs " +
                             shape_str(addend->shape));
    if (weight->size() != 1) throw DimensionError("weighted_add: weight must be scalar");
    auto out = make_tensor<Real>(base->shape);
    const Real wv = weight->values[0];
    for (std::int64_t i = 0; i < base->size(); ++i)
        out->values[i] = base->values[i] + wv * addend->values[i];
    out->requires_grad = base->requires_grad || addend->requires_grad || weight->requires_grad;
    if (out->requires_grad) {
        tape.record([base, addend, weight, out, wv] {
            if (out->grad.empty()) return;
            if (base->requires_grad) {
                base->ensure_grad();
                for (std::int64_t i = 0; i < base->size(); ++i) base->grad[i] += out->grad[i];
            }
            if (addend->requires_grad) {
                addend->ensure_grad();
                for (std::int64_t i = 0; i < addend->size(); ++i)
                    addend->grad[i] += out->grad[i] * wv;
            }
            if (weight->requires_grad) {
                weight->ensure_grad();
                Real acc = 0;
                for (std::int64_t i = 0; i < addend->size(); ++i)
                    acc += out->grad[i] * addend->values[i];
                weight->grad[0] += acc;
            }
        });
    }
    return out;
}

// Gathers N scalar tensors into one {N} vector.
template <class Real>
TensorPtr<Real> pack(Tape<Real>& tape, const std::vector<TensorPtr<Real>>& scalars) {
    if (scalars.empty()) throw DimensionError("pack: empty input");
    auto out = make_tensor<Real>({static_cast<int>(scalars.size())});
    for (std::size_t i = 0; i < scalars.size(); ++i) {
        if (scalars[i]->size() != 1) throw DimensionError("pack: inputs must be scalars");
        out->values[i] = scalars[i]->values[0];
        out->requires_grad = out->requires_grad || scalars[i]->requires_grad;
    }
    if (out->requires_grad) {
        tape.record([scalars, out] {
            if (out->grad.empty()) return;
            for (std::size_t i = 0; i < scalars.size(); ++i) {
                if (!scalars[i]->requires_grad) continue;
                scalars[i]->ensure_grad();
                scalars[i]->grad[0] += out->grad[i];
            }
        });
    }
    return out;
}

// Copies values into a fresh constant leaf, cutting the graph.
template <class Real>
TensorPtr<Real> detach(const TensorPtr<Real>& x) {
    auto out = make_tensor<Real>(x->shape, x->values);
    return out;
}

template <class Real>
TensorPtr<Real> reshape(Tape<Real>& tape, const TensorPtr<Real>& x, std::vector<int> shape) {
    if (Tensor<Real>::numel(shape) != x->size())
        throw DimensionError("reshape: element count mismatch");
    auto out = make_tensor<Real>(std::move(shape), x->values);
    out->requires_grad = x->requires_grad;
    if (out->requires_grad) {
        tape.record([x, out] {
            if (out->grad.empty()) return;
            x->ensure_grad();
            for (std::int64_t i = 0; i < x->size(); ++i) x->grad[i] += out->grad[i];
        });
    }
    return out;
}

}  // namespace ops
}  // namespace ictgan
