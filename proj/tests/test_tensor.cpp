// Gradient and operator tests for the autodiff core. Every differentiable op
// is checked against central finite differences at 64-bit precision; the
// optimizer is checked against a hand-computed trajectory.
#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <vector>

#include "ictgan/common.hpp"
#include "ictgan/norm.hpp"
#include "ictgan/optim.hpp"
#include "ictgan/tensor.hpp"

using namespace ictgan;
using R = double;

namespace {

constexpr int kSeeds = 20;
constexpr double kTol = 1e-4;  // per-op tolerance; end-to-end uses 1e-3

TensorPtr<R> random_tensor(std::vector<int> shape, Rng& rng, bool requires_grad = true,
                           double lo = -1.0, double hi = 1.0) {
    auto t = make_tensor<R>(std::move(shape), requires_grad);
    for (auto& v : t->values) v = rng.uniform(lo, hi);
    return t;
}

// Reduces an arbitrary op output to a scalar with fixed random coefficients so
// the whole Jacobian is exercised, then compares tape gradients on every
// entry of every input against central differences.
void check_gradients(
    const std::vector<TensorPtr<R>>& inputs,
    const std::function<TensorPtr<R>(Tape<R>&)>& forward, Rng& rng,
    double tol = kTol, double eps = 1e-6) {
    std::vector<double> coeff;
    auto loss_value = [&](bool build_coeff) {
        Tape<R> tape;
        auto out = forward(tape);
        if (build_coeff) {
            coeff.clear();
            for (std::int64_t i = 0; i < out->size(); ++i) coeff.push_back(rng.uniform(-1.0, 1.0));
        }
        double s = 0;
        for (std::int64_t i = 0; i < out->size(); ++i) s += coeff[static_cast<std::size_t>(i)] * out->values[i];
        return s;
    };
    loss_value(true);

    // Analytic pass; inputs may carry gradients from an earlier check.
    for (const auto& in : inputs) in->grad.clear();
    Tape<R> tape;
    auto out = forward(tape);
    auto loss = make_tensor<R>({1});
    loss->requires_grad = true;
    for (std::int64_t i = 0; i < out->size(); ++i)
        loss->values[0] += coeff[static_cast<std::size_t>(i)] * out->values[i];
    tape.record([out, loss, coeff] {
        out->ensure_grad();
        for (std::int64_t i = 0; i < out->size(); ++i)
            out->grad[i] += coeff[static_cast<std::size_t>(i)] * loss->grad[0];
    });
    tape.backward(loss);

    for (const auto& in : inputs) {
        if (!in->requires_grad) continue;
        in->ensure_grad();
        for (std::int64_t i = 0; i < in->size(); ++i) {
            const double keep = in->values[i];
            in->values[i] = keep + eps;
            const double up = loss_value(false);
            in->values[i] = keep - eps;
            const double down = loss_value(false);
            in->values[i] = keep;
            const double fd = (up - down) / (2 * eps);
            const double an = in->grad[i];
            if (std::abs(fd) < 1e-8 && std::abs(an) < 1e-8) continue;
            const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6});
            INFO("input " << in->name << " entry " << i << " fd=" << fd << " analytic=" << an);
            REQUIRE(rel < tol);
        }
    }
}

}  // namespace

TEST_CASE("elementwise op gradients match finite differences") {
    for (int seed = 0; seed < kSeeds; ++seed) {
        Rng rng(static_cast<std::uint64_t>(seed) + 100);
        auto a = random_tensor({3, 4}, rng);
        auto b = random_tensor({3, 4}, rng);
        check_gradients({a, b}, [&](Tape<R>& t) { return ops::add(t, a, b); }, rng);
        check_gradients({a, b}, [&](Tape<R>& t) { return ops::mul(t, a, b); }, rng);
        check_gradients({a}, [&](Tape<R>& t) { return ops::scale(t, a, R(2.5)); }, rng);
        check_gradients({a}, [&](Tape<R>& t) { return ops::tanh_act(t, a); }, rng);
        check_gradients({a}, [&](Tape<R>& t) { return ops::sigmoid(t, a); }, rng);
        check_gradients({a}, [&](Tape<R>& t) { return ops::leaky_relu(t, a, R(0.2)); }, rng);
    }
}

TEST_CASE("reduction gradients match finite differences") {
    for (int seed = 0; seed < kSeeds; ++seed) {
        Rng rng(static_cast<std::uint64_t>(seed) + 200);
        auto a = random_tensor({2, 6}, rng);
        auto b = random_tensor({2, 6}, rng);
        // Keep |a - b| away from the L1 kink.
        for (std::int64_t i = 0; i < a->size(); ++i)
            if (std::abs(a->values[i] - b->values[i]) < 0.05) a->values[i] += 0.1;
        check_gradients({a}, [&](Tape<R>& t) { return ops::sum(t, a); }, rng);
        check_gradients({a}, [&](Tape<R>& t) { return ops::mean(t, a); }, rng);
        check_gradients({a}, [&](Tape<R>& t) { return ops::squared_error_mean(t, a, R(1)); }, rng);
        check_gradients({a, b}, [&](Tape<R>& t) { return ops::l1_mean(t, a, b); }, rng);
    }
}

TEST_CASE("convolution gradients match finite differences") {
    for (int seed = 0; seed < kSeeds; ++seed) {
        Rng rng(static_cast<std::uint64_t>(seed) + 300);
        for (int stride : {1, 2}) {
            auto x = random_tensor({2, 8}, rng);
            auto w = random_tensor({3, 2, 5}, rng);
            check_gradients({x, w}, [&](Tape<R>& t) { return ops::conv1d(t, x, w, stride); }, rng);
            auto wt = random_tensor({2, 3, 5}, rng);
            check_gradients({x, wt},
                            [&](Tape<R>& t) { return ops::transposed_conv1d(t, x, wt, stride); },
                            rng);
        }
    }
}

TEST_CASE("structural op gradients match finite differences") {
    for (int seed = 0; seed < kSeeds; ++seed) {
        Rng rng(static_cast<std::uint64_t>(seed) + 400);
        auto x = random_tensor({2, 8}, rng);
        check_gradients({x}, [&](Tape<R>& t) { return ops::maxpool1d(t, x); }, rng);

        auto v = random_tensor({6}, rng);
        auto w = random_tensor({3, 6}, rng);
        auto b = random_tensor({3}, rng);
        check_gradients({v, w, b}, [&](Tape<R>& t) { return ops::dense(t, v, w, b); }, rng);

        auto a2 = random_tensor({2, 3}, rng);
        auto b2 = random_tensor({2, 5}, rng);
        check_gradients({a2, b2}, [&](Tape<R>& t) { return ops::concat(t, a2, b2, 1); }, rng);

        auto base = random_tensor({2, 4}, rng);
        auto addend = random_tensor({2, 4}, rng);
        auto weight = random_tensor({1}, rng);
        check_gradients({base, addend, weight},
                        [&](Tape<R>& t) { return ops::weighted_add(t, base, addend, weight); },
                        rng);
    }
}

TEST_CASE("gradient accumulates over reuse of a tensor") {
    auto x = make_tensor<R>({3}, {1.0, 2.0, 3.0});
    x->requires_grad = true;
    Tape<R> tape;
    auto y = ops::add(tape, x, x);  // dy/dx = 2 per entry
    auto loss = ops::sum(tape, y);
    tape.backward(loss);
    for (int i = 0; i < 3; ++i) REQUIRE(x->grad[static_cast<std::size_t>(i)] == Catch::Approx(2.0));
}

TEST_CASE("conv1d and transposed_conv1d satisfy the adjoint identity") {
    // <conv(x), y> == <x, tconv(y)> for the same weight and stride.
    for (int seed = 0; seed < kSeeds; ++seed) {
        Rng rng(static_cast<std::uint64_t>(seed) + 500);
        for (int stride : {1, 2}) {
            const int c_in = 2, c_out = 3, len = 16, k = 5;
            auto x = random_tensor({c_in, len}, rng, false);
            auto w = random_tensor({c_out, c_in, k}, rng, false);
            Tape<R> tape;
            auto cx = ops::conv1d(tape, x, w, stride);
            auto y = random_tensor(cx->shape, rng, false);
            // The adjoint map shares the exact weight values; only the shape
            // roles swap ({C_out, C_in, K} read as {in, out, K} for y).
            auto wt = make_tensor<R>({c_out, c_in, k}, w->values);
            auto ty = ops::transposed_conv1d(tape, y, wt, stride);
            double lhs = 0, rhs = 0;
            for (std::int64_t i = 0; i < cx->size(); ++i) lhs += cx->values[i] * y->values[i];
            for (std::int64_t i = 0; i < x->size(); ++i) rhs += x->values[i] * ty->values[i];
            REQUIRE(lhs == Catch::Approx(rhs).margin(1e-6));
        }
    }
}

TEST_CASE("conv1d worked example") {
    // 1 channel, length 4, kernel 3, stride 1, zero padding 1.
    auto x = make_tensor<R>({1, 4}, {1, 2, 3, 4});
    auto w = make_tensor<R>({1, 1, 3}, {1, 0, -1});
    Tape<R> tape;
    auto y = ops::conv1d(tape, x, w, 1);
    REQUIRE(y->shape == std::vector<int>{1, 4});
    // y[t] = x[t-1] - x[t+1] with zero pad
    REQUIRE(y->values[0] == Catch::Approx(0 - 2));
    REQUIRE(y->values[1] == Catch::Approx(1 - 3));
    REQUIRE(y->values[2] == Catch::Approx(2 - 4));
    REQUIRE(y->values[3] == Catch::Approx(3 - 0));
}

TEST_CASE("maxpool1d selects the larger of each pair") {
    auto x = make_tensor<R>({1, 6}, {1, 5, 2, 2, -3, -1});
    Tape<R> tape;
    auto y = ops::maxpool1d(tape, x);
    REQUIRE(y->shape == std::vector<int>{1, 3});
    REQUIRE(y->values[0] == 5);
    REQUIRE(y->values[1] == 2);
    REQUIRE(y->values[2] == -1);
}

TEST_CASE("backward requires a scalar loss") {
    auto x = make_tensor<R>({2, 2}, {1, 2, 3, 4});
    x->requires_grad = true;
    Tape<R> tape;
    auto y = ops::scale(tape, x, R(2));
    REQUIRE_THROWS_AS(tape.backward(y), DimensionError);
}

TEST_CASE("spectral normalization converges to the true largest singular value") {
    for (int seed = 0; seed < kSeeds; ++seed) {
        Rng rng(static_cast<std::uint64_t>(seed) + 600);
        const int rows = 5, cols = 7;
        auto w = random_tensor({rows, cols}, rng, false);

        // Oracle: power iteration on W^T W in the test itself, 2000 steps.
        std::vector<double> v(cols);
        for (auto& e : v) e = rng.uniform(-1.0, 1.0);
        double sigma_oracle = 0;
        for (int it = 0; it < 2000; ++it) {
            std::vector<double> u(rows, 0.0);
            for (int i = 0; i < rows; ++i)
                for (int j = 0; j < cols; ++j)
                    u[static_cast<std::size_t>(i)] +=
                        w->values[static_cast<std::size_t>(i) * cols + j] * v[static_cast<std::size_t>(j)];
            std::vector<double> v2(cols, 0.0);
            for (int i = 0; i < rows; ++i)
                for (int j = 0; j < cols; ++j)
                    v2[static_cast<std::size_t>(j)] +=
                        w->values[static_cast<std::size_t>(i) * cols + j] * u[static_cast<std::size_t>(i)];
            double n = 0;
            for (double e : v2) n += e * e;
            n = std::sqrt(n);
            for (std::size_t j = 0; j < v2.size(); ++j) v[j] = v2[j] / n;
            double un = 0;
            for (double e : u) un += e * e;
            sigma_oracle = std::sqrt(un) > 0 ? std::sqrt(un) : sigma_oracle;
        }

        SpectralNormState<R> state;
        state.init(rows, cols, static_cast<std::uint64_t>(seed) + 1);
        Tape<R> tape;
        auto wn = spectral_normalize(tape, w, state, 50);
        // w / wn recovers sigma entrywise.
        const double sigma_est = w->values[0] / wn->values[0];
        REQUIRE(sigma_est == Catch::Approx(sigma_oracle).epsilon(1e-3));
    }
}

TEST_CASE("spectral normalization gradient matches finite differences") {
    for (int seed = 0; seed < kSeeds; ++seed) {
        Rng rng(static_cast<std::uint64_t>(seed) + 700);
        auto w = random_tensor({4, 6}, rng);
        SpectralNormState<R> state;
        state.init(4, 6, static_cast<std::uint64_t>(seed) + 1);
        {
            // Converge u/v on the unperturbed weight first so the constant-u,v
            // gradient is exact to first order (envelope condition).
            Tape<R> warm;
            spectral_normalize(warm, w, state, 200);
        }
        const SpectralNormState<R> frozen = state;
        check_gradients({w},
                        [&](Tape<R>& t) {
                            state = frozen;
                            return spectral_normalize(t, w, state, 1);
                        },
                        rng, 1e-3);
    }
}

TEST_CASE("virtual batch norm forward matches the reference-weighted formula") {
    Rng rng(42);
    const int c = 3, len = 8, ref_n = 5;
    std::vector<TensorPtr<R>> ref;
    for (int i = 0; i < ref_n; ++i) ref.push_back(random_tensor({c, len}, rng, false));
    std::vector<R> mean, sqmean;
    accumulate_vbn_reference(ref, mean, sqmean);
    VbnLayerState<R> state;
    state.freeze(mean, sqmean, ref_n);

    auto x = random_tensor({c, len}, rng, false);
    auto gain = make_tensor<R>({c}, {1.5, 0.5, 2.0});
    auto shift = make_tensor<R>({c}, {0.1, -0.2, 0.0});
    Tape<R> tape;
    auto y = virtual_batch_norm(tape, x, state, gain, shift);

    const double wr = static_cast<double>(ref_n) / (ref_n + 1);
    const double we = 1.0 / (ref_n + 1);
    for (int ch = 0; ch < c; ++ch) {
        double m = 0, q = 0;
        for (int t = 0; t < len; ++t) {
            const double v = x->values[static_cast<std::size_t>(ch) * len + t];
            m += v;
            q += v * v;
        }
        m /= len;
        q /= len;
        const double mu = wr * mean[static_cast<std::size_t>(ch)] + we * m;
        const double var = wr * sqmean[static_cast<std::size_t>(ch)] + we * q - mu * mu;
        for (int t = 0; t < len; ++t) {
            const double expect = gain->values[static_cast<std::size_t>(ch)] *
                                      (x->values[static_cast<std::size_t>(ch) * len + t] - mu) /
                                      std::sqrt(var + 1e-5) +
                                  shift->values[static_cast<std::size_t>(ch)];
            REQUIRE(y->values[static_cast<std::size_t>(ch) * len + t] ==
                    Catch::Approx(expect).margin(1e-10));
        }
    }
}

TEST_CASE("virtual batch norm gradient matches finite differences") {
    for (int seed = 0; seed < kSeeds; ++seed) {
        Rng rng(static_cast<std::uint64_t>(seed) + 800);
        const int c = 2, len = 6;
        std::vector<TensorPtr<R>> ref;
        for (int i = 0; i < 4; ++i) ref.push_back(random_tensor({c, len}, rng, false));
        std::vector<R> mean, sqmean;
        accumulate_vbn_reference(ref, mean, sqmean);
        VbnLayerState<R> state;
        state.freeze(mean, sqmean, 4);

        auto x = random_tensor({c, len}, rng);
        auto gain = random_tensor({c}, rng, true, 0.5, 1.5);
        auto shift = random_tensor({c}, rng);
        check_gradients({x, gain, shift},
                        [&](Tape<R>& t) { return virtual_batch_norm(t, x, state, gain, shift); },
                        rng, 1e-3);
    }
}

TEST_CASE("adam follows the hand-computed trajectory on f(w) = w^2") {
    // beta1 = 0, beta2 = 0.9, lr = 0.1, eps = 1e-8, w0 = 1.
    auto w = make_tensor<R>({1}, std::vector<R>{1.0});
    w->requires_grad = true;
    AdamState<R> state;
    state.init(std::vector<TensorPtr<R>>{w});
    AdamConfig<R> cfg{0.1, 0.0, 0.9, 1e-8};

    double m_ref = 0, v_ref = 0, w_ref = 1.0;
    for (int step = 1; step <= 3; ++step) {
        Tape<R> tape;
        auto loss = ops::squared_error_mean(tape, w, R(0));  // w^2 for one element
        tape.backward(loss);
        adam_step(std::vector<TensorPtr<R>>{w}, state, cfg);
        w->zero_grad();

        const double g = 2 * w_ref;
        m_ref = 0 * m_ref + 1.0 * g;
        v_ref = 0.9 * v_ref + 0.1 * g * g;
        const double mh = m_ref / 1.0;  // beta1 = 0: bias correction is 1
        const double vh = v_ref / (1.0 - std::pow(0.9, step));
        w_ref -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
        REQUIRE(w->values[0] == Catch::Approx(w_ref).margin(1e-12));
    }
}

TEST_CASE("adam aborts on non-finite gradients naming the parameter") {
    auto w = make_tensor<R>({1}, std::vector<R>{1.0});
    w->requires_grad = true;
    w->name = "bad_param";
    w->ensure_grad();
    w->grad[0] = std::numeric_limits<R>::quiet_NaN();
    AdamState<R> state;
    state.init(std::vector<TensorPtr<R>>{w});
    AdamConfig<R> cfg;
    REQUIRE_THROWS_WITH(adam_step(std::vector<TensorPtr<R>>{w}, state, cfg),
                        Catch::Matchers::ContainsSubstring("bad_param"));
}
