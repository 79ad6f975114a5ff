// Conditional least-squares GAN: U-net generator with learned-weight skip
// connections mapping inter-ictal windows to ictal windows, an encoder-shaped
// discriminator with spectral and virtual batch normalization, and the
// alternating training loop.
#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "ictgan/checkpoint.hpp"
#include "ictgan/common.hpp"
#include "ictgan/data.hpp"
#include "ictgan/norm.hpp"
#include "ictgan/optim.hpp"
#include "ictgan/tensor.hpp"

namespace ictgan {

// ---------------------------------------------------------------------------
// Architecture
// ---------------------------------------------------------------------------

// Default realized shape sequence (length x channels, input included):
// 2048x1, 1024x64, 512x64, 256x128, 128x128, 64x256, 32x256, 16x512, 8x1024.
// The decoder mirrors it back to 2048x1. Width/length scale factors shrink the
// network proportionally for desk-scale runs.
struct ArchitectureConfig {
    int input_length = 2048;
    std::vector<int> base_channels = {64, 64, 128, 128, 256, 256, 512, 1024};
    double width_scale = 1.0;
    int kernel = 31;
    double leaky_slope = 0.2;

    static constexpr int kBlocks = 8;

    void validate() const {
        if (base_channels.size() != kBlocks)
            throw ConfigError("architecture: channel schedule must have 8 entries");
        if (input_length < 256 || input_length % 256 != 0)
            throw ConfigError("architecture: input length must be a positive multiple of 256");
        if (kernel < 1 || kernel % 2 == 0)
            throw ConfigError("architecture: kernel length must be odd and positive");
        if (width_scale <= 0) throw ConfigError("architecture: width scale must be positive");
    }

    // Channels after each encoder block.
    std::vector<int> channels() const {
        std::vector<int> ch;
        for (int c : base_channels)
            ch.push_back(std::max(1, static_cast<int>(std::lround(c * width_scale))));
        return ch;
    }

    int latent_length() const { return input_length / 256; }
    int latent_channels() const { return channels().back(); }

    // (length, channels) per encoder stage, input included.
    std::vector<std::pair<int, int>> encoder_shapes() const {
        std::vector<std::pair<int, int>> s{{input_length, 1}};
        const auto ch = channels();
        int len = input_length;
        for (int i = 0; i < kBlocks; ++i) {
            len /= 2;
            s.emplace_back(len, ch[i]);
        }
        return s;
    }

    // (length, channels) per decoder stage, from the concatenated entry to the
    // final output.
    std::vector<std::pair<int, int>> decoder_shapes() const {
        const auto ch = channels();
        std::vector<std::pair<int, int>> s;
        int len = 2 * latent_length();
        s.emplace_back(len, ch[7]);  // latent + noise, concatenated along length
        s.emplace_back(len, ch[6]);  // stride-1 entry convolution
        for (int i = 5; i >= 0; --i) {
            len *= 2;
            s.emplace_back(len, ch[i]);
        }
        len *= 2;
        s.emplace_back(len, 1);
        return s;
    }
};

// ---------------------------------------------------------------------------
// Weights
// ---------------------------------------------------------------------------

inline constexpr int kSkipLevels = 7;  // all levels except input and latent

template <class Real>
struct GeneratorWeights {
    ArchitectureConfig arch;
    std::vector<TensorPtr<Real>> enc;   // 8 conv weights {Cout,Cin,K}
    TensorPtr<Real> dec_entry;          // stride-1 conv on the concatenated latent
    std::vector<TensorPtr<Real>> dec;   // 7 stride-2 transposed convs {Cin,Cout,K}
    std::vector<TensorPtr<Real>> skip;  // 7 learned scalars, encoder level 1..7
    std::vector<SpectralNormState<Real>> sn_enc;
    SpectralNormState<Real> sn_dec_entry;
    std::vector<SpectralNormState<Real>> sn_dec;

    void init(std::uint64_t seed) {
        arch.validate();
        const auto ch = arch.channels();
        const int k = arch.kernel;
        Rng rng(Rng::derive_seed(seed, 0xC0DE));
        enc.clear();
        dec.clear();
        skip.clear();
        sn_enc.assign(ArchitectureConfig::kBlocks, {});
        sn_dec.assign(kSkipLevels, {});
        int c_in = 1;
        for (int i = 0; i < ArchitectureConfig::kBlocks; ++i) {
            enc.push_back(random_weight({ch[i], c_in, k}, rng, "g.enc." + std::to_string(i)));
            sn_enc[i].init(ch[i], c_in * k, rng.next_u64());
            c_in = ch[i];
        }
        dec_entry = random_weight({ch[6], ch[7], k}, rng, "g.dec_entry");
        sn_dec_entry.init(ch[6], ch[7] * k, rng.next_u64());
        // Transposed conv weights are {Cin, Cout, K}; channel path
        // ch6 -> ch5 -> ... -> ch0 -> 1.
        std::vector<int> path = {ch[6], ch[5], ch[4], ch[3], ch[2], ch[1], ch[0], 1};
        for (int i = 0; i < kSkipLevels; ++i) {
            dec.push_back(random_weight({path[i], path[i + 1], k}, rng,
                                        "g.dec." + std::to_string(i)));
            sn_dec[i].init(path[i], path[i + 1] * k, rng.next_u64());
        }
        for (int i = 0; i < kSkipLevels; ++i) {
            auto w = make_tensor<Real>({1}, {Real(1)}, true, "g.skip." + std::to_string(i));
            skip.push_back(w);
        }
    }

    std::vector<TensorPtr<Real>> params() const {
        std::vector<TensorPtr<Real>> p = enc;
        p.push_back(dec_entry);
        p.insert(p.end(), dec.begin(), dec.end());
        p.insert(p.end(), skip.begin(), skip.end());
        return p;
    }

private:
    static TensorPtr<Real> random_weight(std::vector<int> shape, Rng& rng, std::string name) {
        auto t = make_tensor<Real>(shape, true, std::move(name));
        const double fan_in = static_cast<double>(shape[1]) * shape[2];
        const double std = std::sqrt(2.0 / fan_in);
        for (auto& v : t->values) v = static_cast<Real>(rng.normal() * std);
        return t;
    }
};

template <class Real>
struct DiscriminatorWeights {
    ArchitectureConfig arch;
    std::vector<TensorPtr<Real>> conv;  // 8 conv weights, same shapes as the encoder
    TensorPtr<Real> fc_w;               // {1, latent size}
    TensorPtr<Real> fc_b;               // {1}
    std::vector<TensorPtr<Real>> vbn_gain;
    std::vector<TensorPtr<Real>> vbn_shift;
    std::vector<VbnLayerState<Real>> vbn;
    std::vector<SpectralNormState<Real>> sn_conv;
    SpectralNormState<Real> sn_fc;

    void init(std::uint64_t seed) {
        arch.validate();
        const auto ch = arch.channels();
        const int k = arch.kernel;
        Rng rng(Rng::derive_seed(seed, 0xD15C));
        conv.clear();
        vbn_gain.clear();
        vbn_shift.clear();
        vbn.assign(ArchitectureConfig::kBlocks, {});
        sn_conv.assign(ArchitectureConfig::kBlocks, {});
        int c_in = 1;
        for (int i = 0; i < ArchitectureConfig::kBlocks; ++i) {
            auto w = make_tensor<Real>({ch[i], c_in, k}, true, "d.conv." + std::to_string(i));
            const double std = std::sqrt(2.0 / (static_cast<double>(c_in) * k));
            for (auto& v : w->values) v = static_cast<Real>(rng.normal() * std);
            conv.push_back(w);
            sn_conv[i].init(ch[i], c_in * k, rng.next_u64());
            auto gain = make_tensor<Real>({ch[i]}, true, "d.vbn_gain." + std::to_string(i));
            std::fill(gain->values.begin(), gain->values.end(), Real(1));
            auto shift = make_tensor<Real>({ch[i]}, true, "d.vbn_shift." + std::to_string(i));
            vbn_gain.push_back(gain);
            vbn_shift.push_back(shift);
            c_in = ch[i];
        }
        const int latent = arch.latent_channels() * arch.latent_length();
        fc_w = make_tensor<Real>({1, latent}, true, "d.fc_w");
        const double std = std::sqrt(1.0 / latent);
        for (auto& v : fc_w->values) v = static_cast<Real>(rng.normal() * std);
        fc_b = make_tensor<Real>({1}, true, "d.fc_b");
        sn_fc.init(1, latent, rng.next_u64());
    }

    std::vector<TensorPtr<Real>> params() const {
        std::vector<TensorPtr<Real>> p = conv;
        p.push_back(fc_w);
        p.push_back(fc_b);
        p.insert(p.end(), vbn_gain.begin(), vbn_gain.end());
        p.insert(p.end(), vbn_shift.begin(), vbn_shift.end());
        return p;
    }

    bool reference_frozen() const {
        for (const auto& s : vbn)
            if (!s.frozen) return false;
        return true;
    }
};

// ---------------------------------------------------------------------------
// Forward passes
// ---------------------------------------------------------------------------

template <class Real>
TensorPtr<Real> sample_to_tensor(const EegSample& s, const ArchitectureConfig& arch) {
    if (s.channels * s.points != arch.input_length)
        throw DimensionError("sample length " + std::to_string(s.channels * s.points) +
                             " does not match architecture input " +
                             std::to_string(arch.input_length));
    auto t = make_tensor<Real>({1, arch.input_length});
    for (std::size_t i = 0; i < s.values.size(); ++i) t->values[i] = static_cast<Real>(s.values[i]);
    return t;
}

template <class Real>
EegSample tensor_to_sample(const TensorPtr<Real>& t, const EegSample& like) {
    EegSample out = like;
    for (std::size_t i = 0; i < out.values.size(); ++i)
        out.values[i] = static_cast<float>(t->values[i]);
    return out;
}

template <class Real>
struct EncodeResult {
    TensorPtr<Real> latent;
    std::vector<TensorPtr<Real>> skips;  // encoder maps, levels 1..7
};

template <class Real>
EncodeResult<Real> encode(Tape<Real>& tape, const TensorPtr<Real>& input,
                          GeneratorWeights<Real>& g, int sn_iters = 1) {
    if (input->shape != std::vector<int>{1, g.arch.input_length})
        throw DimensionError("encode: input shape " + shape_str(input->shape) +
                             " does not match architecture");
    EncodeResult<Real> res;
    auto h = input;
    const Real slope = static_cast<Real>(g.arch.leaky_slope);
    for (int i = 0; i < ArchitectureConfig::kBlocks; ++i) {
        auto w = spectral_normalize(tape, g.enc[i], g.sn_enc[i], sn_iters);
        h = ops::conv1d(tape, h, w);
        h = ops::leaky_relu(tape, h, slope);
        h = ops::maxpool1d(tape, h);
        if (i < kSkipLevels) res.skips.push_back(h);
    }
    res.latent = h;
    return res;
}

// Full generator: encode, concatenate noise along the length axis, decode with
// weighted skips, tanh output head.
template <class Real>
TensorPtr<Real> generate(Tape<Real>& tape, const TensorPtr<Real>& input,
                         const TensorPtr<Real>& noise, GeneratorWeights<Real>& g,
                         int sn_iters = 1) {
    auto enc = encode(tape, input, g, sn_iters);
    if (noise->shape != enc.latent->shape)
        throw DimensionError("generate: noise shape " + shape_str(noise->shape) +
                             " does not match latent " + shape_str(enc.latent->shape));
    const Real slope = static_cast<Real>(g.arch.leaky_slope);
    auto h = ops::concat(tape, enc.latent, noise, 1);
    {
        auto w = spectral_normalize(tape, g.dec_entry, g.sn_dec_entry, sn_iters);
        h = ops::conv1d(tape, h, w);
        h = ops::leaky_relu(tape, h, slope);
        h = ops::weighted_add(tape, h, enc.skips[6], g.skip[6]);
    }
    for (int i = 0; i < kSkipLevels - 1; ++i) {
        auto w = spectral_normalize(tape, g.dec[i], g.sn_dec[i], sn_iters);
        h = ops::transposed_conv1d(tape, h, w, 2);
        h = ops::leaky_relu(tape, h, slope);
        const int level = 5 - i;  // matches encoder map of the same shape
        h = ops::weighted_add(tape, h, enc.skips[level], g.skip[level]);
    }
    auto w = spectral_normalize(tape, g.dec.back(), g.sn_dec.back(), sn_iters);
    h = ops::transposed_conv1d(tape, h, w, 2);
    return ops::tanh_act(tape, h);
}

// Discriminator score in (0, 1); 1 is the real class.
template <class Real>
TensorPtr<Real> discriminate(Tape<Real>& tape, const TensorPtr<Real>& input,
                             DiscriminatorWeights<Real>& d, int sn_iters = 1) {
    if (input->shape != std::vector<int>{1, d.arch.input_length})
        throw DimensionError("discriminate: input shape mismatch");
    if (!d.reference_frozen())
        throw StateError("discriminate: VBN reference statistics not frozen");
    const Real slope = static_cast<Real>(d.arch.leaky_slope);
    auto h = input;
    for (int i = 0; i < ArchitectureConfig::kBlocks; ++i) {
        auto w = spectral_normalize(tape, d.conv[i], d.sn_conv[i], sn_iters);
        h = ops::conv1d(tape, h, w);
        h = virtual_batch_norm(tape, h, d.vbn[i], d.vbn_gain[i], d.vbn_shift[i]);
        h = ops::leaky_relu(tape, h, slope);
        h = ops::maxpool1d(tape, h);
    }
    auto w = spectral_normalize(tape, d.fc_w, d.sn_fc, sn_iters);
    auto logit = ops::dense(tape, h, w, d.fc_b);
    return ops::sigmoid(tape, logit);
}

// Freezes every VBN layer's reference statistics from a batch of real samples.
template <class Real>
void freeze_vbn_reference(DiscriminatorWeights<Real>& d,
                          const std::vector<TensorPtr<Real>>& reference_batch,
                          int sn_iters = 1) {
    if (reference_batch.empty()) throw StateError("VBN reference batch is empty");
    Tape<Real> tape;
    std::vector<TensorPtr<Real>> acts = reference_batch;
    const Real slope = static_cast<Real>(d.arch.leaky_slope);
    for (int i = 0; i < ArchitectureConfig::kBlocks; ++i) {
        auto w = spectral_normalize(tape, d.conv[i], d.sn_conv[i], sn_iters);
        for (auto& h : acts) h = ops::conv1d(tape, h, w);
        std::vector<Real> mean, sqmean;
        accumulate_vbn_reference(acts, mean, sqmean);
        d.vbn[i].freeze(mean, sqmean, static_cast<int>(reference_batch.size()));
        for (auto& h : acts) {
            h = virtual_batch_norm(tape, h, d.vbn[i], d.vbn_gain[i], d.vbn_shift[i]);
            h = ops::leaky_relu(tape, h, slope);
            h = ops::maxpool1d(tape, h);
        }
    }
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

// mean((D(x) - 1)^2) + mean(D(G(x))^2)
template <class Real>
TensorPtr<Real> d_loss(Tape<Real>& tape, const TensorPtr<Real>& real_scores,
                       const TensorPtr<Real>& fake_scores) {
    if (real_scores->size() == 0 || fake_scores->size() == 0)
        throw DimensionError("d_loss: empty score batch");
    auto real_term = ops::squared_error_mean(tape, real_scores, Real(1));
    auto fake_term = ops::squared_error_mean(tape, fake_scores, Real(0));
    return ops::add(tape, real_term, fake_term);
}

// mean((D(G(x)) - 1)^2) + lambda * mean|G(x) - y|
template <class Real>
TensorPtr<Real> g_loss(Tape<Real>& tape, const TensorPtr<Real>& fake_scores,
                       const TensorPtr<Real>& generated, const TensorPtr<Real>& reference,
                       Real lambda) {
    if (lambda < Real(0)) throw ConfigError("g_loss: lambda must be >= 0");
    auto adv = ops::squared_error_mean(tape, fake_scores, Real(1));
    auto l1 = ops::l1_mean(tape, generated, reference);
    return ops::add(tape, adv, ops::scale(tape, l1, lambda));
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct GanTrainConfig {
    double lambda = 100.0;
    double beta1 = 0.0;
    double beta2 = 0.9;
    double g_learning_rate = 1e-4;
    double d_learning_rate = 4e-4;
    int minibatch = 100;
    std::int64_t steps = 1000;
    std::uint64_t seed = 1;
    int sn_iters = 1;
    std::int64_t checkpoint_every = 0;  // 0 disables periodic checkpoints
    std::string checkpoint_path;

    void validate() const {
        if (lambda <= 0) throw ConfigError("train: lambda must be > 0");
        if (minibatch < 2) throw ConfigError("train: minibatch must be >= 2");
        if (steps < 1) throw ConfigError("train: steps must be >= 1");
    }
};

struct TrainLogEntry {
    std::int64_t step = 0;
    double d_loss = 0;
    double g_loss = 0;
    double l1_term = 0;
    double wall_ms = 0;
};

inline void write_training_log(const std::string& path, const std::vector<TrainLogEntry>& log,
                               bool append = false) {
    std::ofstream f(path, append ? std::ios::app : std::ios::trunc);
    if (!f) throw IoError("cannot open training log: " + path);
    if (!append) f << "step,d_loss,g_loss,l1_term,wall_ms\n";
    f.precision(10);
    for (const auto& e : log)
        f << e.step << "," << e.d_loss << "," << e.g_loss << "," << e.l1_term << "," << e.wall_ms
          << "\n";
}

template <class Real>
struct GanModel {
    GeneratorWeights<Real> gen;
    DiscriminatorWeights<Real> disc;
    AdamState<Real> g_adam;
    AdamState<Real> d_adam;
    std::int64_t step = 0;

    void init(const ArchitectureConfig& arch, std::uint64_t seed) {
        gen.arch = arch;
        disc.arch = arch;
        gen.init(seed);
        disc.init(seed);
        g_adam.init(gen.params());
        d_adam.init(disc.params());
        step = 0;
    }
};

// Alternates one discriminator and one generator Adam step per minibatch. The
// VBN reference freezes on the first minibatch's real targets. Appends to
// `model.step` so training can resume from a checkpoint.
template <class Real>
std::vector<TrainLogEntry> train(GanModel<Real>& model, const std::vector<PairedExample>& dataset,
                                 const GanTrainConfig& cfg) {
    cfg.validate();
    if (dataset.empty()) throw StateError("train: empty dataset");
    if (cfg.minibatch > static_cast<int>(dataset.size()))
        throw StateError("train: minibatch exceeds dataset size");
    const auto& arch = model.gen.arch;
    AdamConfig<Real> g_opt{static_cast<Real>(cfg.g_learning_rate), static_cast<Real>(cfg.beta1),
                           static_cast<Real>(cfg.beta2), Real(1e-8)};
    AdamConfig<Real> d_opt{static_cast<Real>(cfg.d_learning_rate), static_cast<Real>(cfg.beta1),
                           static_cast<Real>(cfg.beta2), Real(1e-8)};
    auto g_params = model.gen.params();
    auto d_params = model.disc.params();
    Rng rng(Rng::derive_seed(cfg.seed, static_cast<std::uint64_t>(model.step) + 0x7124));

    std::vector<TrainLogEntry> log;
    const int latent_ch = arch.latent_channels();
    const int latent_len = arch.latent_length();

    for (std::int64_t s = 0; s < cfg.steps; ++s) {
        const auto t0 = std::chrono::steady_clock::now();
        // Minibatch draw (without replacement) and per-example noise.
        std::vector<const PairedExample*> batch;
        {
            std::vector<std::size_t> idx(dataset.size());
            std::iota(idx.begin(), idx.end(), std::size_t{0});
            rng.shuffle(idx);
            for (int i = 0; i < cfg.minibatch; ++i) batch.push_back(&dataset[idx[i]]);
        }
        std::vector<TensorPtr<Real>> noise;
        for (int i = 0; i < cfg.minibatch; ++i) {
            auto z = make_tensor<Real>({latent_ch, latent_len});
            for (auto& v : z->values) v = static_cast<Real>(rng.normal());
            noise.push_back(z);
        }

        if (!model.disc.reference_frozen()) {
            std::vector<TensorPtr<Real>> ref;
            for (const auto* pe : batch) ref.push_back(sample_to_tensor<Real>(pe->target, arch));
            freeze_vbn_reference(model.disc, ref, cfg.sn_iters);
        }

        // Discriminator step: fakes are detached so no generator grads flow.
        double d_loss_val = 0;
        {
            for (auto& p : d_params) p->zero_grad();
            Tape<Real> tape;
            std::vector<TensorPtr<Real>> real_scores, fake_scores;
            for (int i = 0; i < cfg.minibatch; ++i) {
                auto x = sample_to_tensor<Real>(batch[i]->input, arch);
                auto y = sample_to_tensor<Real>(batch[i]->target, arch);
                TensorPtr<Real> fake;
                {
                    Tape<Real> gen_tape;
                    fake = ops::detach(generate(gen_tape, x, noise[i], model.gen, cfg.sn_iters));
                }
                real_scores.push_back(discriminate(tape, y, model.disc, cfg.sn_iters));
                fake_scores.push_back(discriminate(tape, fake, model.disc, cfg.sn_iters));
            }
            auto loss = d_loss(tape, ops::pack(tape, real_scores), ops::pack(tape, fake_scores));
            d_loss_val = static_cast<double>(loss->values[0]);
            if (!std::isfinite(d_loss_val))
                throw NumericalError("NaN discriminator loss at step " +
                                     std::to_string(model.step + 1));
            tape.backward(loss);
            adam_step(d_params, model.d_adam, d_opt);
        }

        // Generator step on the same minibatch and noise draws.
        double g_loss_val = 0, l1_val = 0;
        {
            for (auto& p : g_params) p->zero_grad();
            for (auto& p : d_params) p->zero_grad();
            Tape<Real> tape;
            std::vector<TensorPtr<Real>> fake_scores, l1_terms;
            for (int i = 0; i < cfg.minibatch; ++i) {
                auto x = sample_to_tensor<Real>(batch[i]->input, arch);
                auto y = sample_to_tensor<Real>(batch[i]->target, arch);
                auto fake = generate(tape, x, noise[i], model.gen, cfg.sn_iters);
                fake_scores.push_back(discriminate(tape, fake, model.disc, cfg.sn_iters));
                l1_terms.push_back(ops::l1_mean(tape, fake, y));
            }
            auto adv = ops::squared_error_mean(tape, ops::pack(tape, fake_scores), Real(1));
            auto l1 = ops::mean(tape, ops::pack(tape, l1_terms));
            auto loss = ops::add(tape, adv,
                                 ops::scale(tape, l1, static_cast<Real>(cfg.lambda)));
            g_loss_val = static_cast<double>(loss->values[0]);
            l1_val = static_cast<double>(cfg.lambda) * static_cast<double>(l1->values[0]);
            if (!std::isfinite(g_loss_val))
                throw NumericalError("NaN generator loss at step " + std::to_string(model.step + 1));
            tape.backward(loss);
            adam_step(g_params, model.g_adam, g_opt);
            for (auto& p : d_params) p->zero_grad();
        }

        model.step += 1;
        const auto t1 = std::chrono::steady_clock::now();
        log.push_back({model.step, d_loss_val, g_loss_val, l1_val,
                       std::chrono::duration<double, std::milli>(t1 - t0).count()});
        if (cfg.checkpoint_every > 0 && model.step % cfg.checkpoint_every == 0 &&
            !cfg.checkpoint_path.empty())
            save_gan_checkpoint(model, cfg.checkpoint_path);
    }
    return log;
}

// ---------------------------------------------------------------------------
// Synthesis
// ---------------------------------------------------------------------------

// Draws inputs from the inter-ictal pool (without replacement up to the pool
// size, with replacement beyond it), fresh noise per sample. Operates on a
// copy of the generator so the checkpointed spectral-norm state is untouched
// and repeated calls reproduce bit-identically.
template <class Real>
std::vector<EegSample> synthesize_set(const GanModel<Real>& model,
                                      const std::vector<EegSample>& interictal_pool, int count,
                                      std::uint64_t seed) {
    if (interictal_pool.empty()) throw StateError("synthesize_set: empty inter-ictal pool");
    if (count < 1) throw ConfigError("synthesize_set: count must be >= 1");
    GeneratorWeights<Real> gen = model.gen;  // value copy of SN states; tensors shared
    const auto& arch = gen.arch;
    Rng rng(Rng::derive_seed(seed, 0x5E7));
    std::vector<std::size_t> order(interictal_pool.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);

    std::vector<EegSample> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) {
        const std::size_t pick =
            i < static_cast<int>(order.size())
                ? order[i]
                : static_cast<std::size_t>(
                      rng.uniform_int(0, static_cast<std::int64_t>(interictal_pool.size()) - 1));
        const auto& src = interictal_pool[pick];
        auto x = sample_to_tensor<Real>(src, arch);
        auto z = make_tensor<Real>({arch.latent_channels(), arch.latent_length()});
        for (auto& v : z->values) v = static_cast<Real>(rng.normal());
        Tape<Real> tape;
        auto y = generate(tape, x, z, gen, 1);
        EegSample smp = tensor_to_sample(y, src);
        smp.label = Label::ictal;
        smp.origin = Origin::synthetic;
        out.push_back(std::move(smp));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoint round trip
// ---------------------------------------------------------------------------

template <class Real>
void save_gan_checkpoint(const GanModel<Real>& model, const std::string& path) {
    Checkpoint ck;
    auto put_sn = [&](const std::string& prefix, const SpectralNormState<Real>& s) {
        ck.put<Real>(prefix + ".u", {static_cast<int>(s.u.size())}, s.u);
        ck.put<Real>(prefix + ".v", {static_cast<int>(s.v.size())}, s.v);
    };
    for (const auto& p : model.gen.params()) ck.put_tensor(p->name, *p);
    for (const auto& p : model.disc.params()) ck.put_tensor(p->name, *p);
    for (int i = 0; i < ArchitectureConfig::kBlocks; ++i) {
        put_sn("g.sn_enc." + std::to_string(i), model.gen.sn_enc[i]);
        put_sn("d.sn_conv." + std::to_string(i), model.disc.sn_conv[i]);
    }
    put_sn("g.sn_dec_entry", model.gen.sn_dec_entry);
    for (int i = 0; i < kSkipLevels; ++i)
        put_sn("g.sn_dec." + std::to_string(i), model.gen.sn_dec[i]);
    put_sn("d.sn_fc", model.disc.sn_fc);
    for (int i = 0; i < ArchitectureConfig::kBlocks; ++i) {
        const auto& v = model.disc.vbn[i];
        ck.put<Real>("d.vbn." + std::to_string(i) + ".mean",
                     {static_cast<int>(v.ref_mean.size())}, v.ref_mean);
        ck.put<Real>("d.vbn." + std::to_string(i) + ".sqmean",
                     {static_cast<int>(v.ref_sqmean.size())}, v.ref_sqmean);
        ck.put_scalar<Real>("d.vbn." + std::to_string(i) + ".count",
                            static_cast<Real>(v.ref_count));
        ck.put_scalar<Real>("d.vbn." + std::to_string(i) + ".frozen",
                            v.frozen ? Real(1) : Real(0));
    }
    auto put_adam = [&](const std::string& prefix, const AdamState<Real>& st) {
        for (std::size_t i = 0; i < st.m.size(); ++i) {
            ck.put<Real>(prefix + ".m." + std::to_string(i),
                         {static_cast<int>(st.m[i].size())}, st.m[i]);
            ck.put<Real>(prefix + ".v." + std::to_string(i),
                         {static_cast<int>(st.v[i].size())}, st.v[i]);
        }
        ck.put_scalar<double>(prefix + ".t", static_cast<double>(st.t));
    };
    put_adam("g.adam", model.g_adam);
    put_adam("d.adam", model.d_adam);
    ck.put_scalar<double>("step", static_cast<double>(model.step));
    ck.put_scalar<double>("arch.input_length", model.gen.arch.input_length);
    ck.put_scalar<double>("arch.width_scale", model.gen.arch.width_scale);
    ck.put_scalar<double>("arch.kernel", model.gen.arch.kernel);
    ck.put_scalar<double>("arch.leaky_slope", model.gen.arch.leaky_slope);
    ck.save(path);
}

template <class Real>
GanModel<Real> load_gan_checkpoint(const std::string& path) {
    Checkpoint ck = Checkpoint::load(path);
    ArchitectureConfig arch;
    arch.input_length = static_cast<int>(ck.get_scalar<double>("arch.input_length"));
    arch.width_scale = ck.get_scalar<double>("arch.width_scale");
    arch.kernel = static_cast<int>(ck.get_scalar<double>("arch.kernel"));
    arch.leaky_slope = ck.get_scalar<double>("arch.leaky_slope");
    GanModel<Real> model;
    model.init(arch, 0);
    for (auto& p : model.gen.params()) ck.get_tensor(p->name, *p);
    for (auto& p : model.disc.params()) ck.get_tensor(p->name, *p);
    auto get_sn = [&](const std::string& prefix, SpectralNormState<Real>& s) {
        s.u = ck.get<Real>(prefix + ".u");
        s.v = ck.get<Real>(prefix + ".v");
    };
    for (int i = 0; i < ArchitectureConfig::kBlocks; ++i) {
        get_sn("g.sn_enc." + std::to_string(i), model.gen.sn_enc[i]);
        get_sn("d.sn_conv." + std::to_string(i), model.disc.sn_conv[i]);
    }
    get_sn("g.sn_dec_entry", model.gen.sn_dec_entry);
    for (int i = 0; i < kSkipLevels; ++i)
        get_sn("g.sn_dec." + std::to_string(i), model.gen.sn_dec[i]);
    get_sn("d.sn_fc", model.disc.sn_fc);
    for (int i = 0; i < ArchitectureConfig::kBlocks; ++i) {
        auto& v = model.disc.vbn[i];
        v.ref_mean = ck.get<Real>("d.vbn." + std::to_string(i) + ".mean");
        v.ref_sqmean = ck.get<Real>("d.vbn." + std::to_string(i) + ".sqmean");
        v.ref_count =
            static_cast<int>(ck.get_scalar<Real>("d.vbn." + std::to_string(i) + ".count"));
        v.frozen = ck.get_scalar<Real>("d.vbn." + std::to_string(i) + ".frozen") != Real(0);
    }
    auto get_adam = [&](const std::string& prefix, AdamState<Real>& st) {
        for (std::size_t i = 0; i < st.m.size(); ++i) {
            st.m[i] = ck.get<Real>(prefix + ".m." + std::to_string(i));
            st.v[i] = ck.get<Real>(prefix + ".v." + std::to_string(i));
        }
        st.t = static_cast<std::int64_t>(ck.get_scalar<double>(prefix + ".t"));
    };
    get_adam("g.adam", model.g_adam);
    get_adam("d.adam", model.d_adam);
    model.step = static_cast<std::int64_t>(ck.get_scalar<double>("step"));
    return model;
}

}  // namespace ictgan
