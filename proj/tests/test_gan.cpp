// Architecture, loss, training, and checkpoint tests for the conditional GAN.
#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <vector>

#include "ictgan/gan.hpp"

using namespace ictgan;

namespace {

ArchitectureConfig small_arch(double width_scale = 0.25, int kernel = 5) {
    ArchitectureConfig arch;
    arch.input_length = 256;
    arch.width_scale = width_scale;
    arch.kernel = kernel;
    return arch;
}

EegSample random_sample(Rng& rng, int points_per_channel, Label label) {
    EegSample s;
    s.points = points_per_channel;
    s.values.resize(static_cast<std::size_t>(2) * points_per_channel);
    for (auto& v : s.values) v = static_cast<float>(rng.uniform(-0.9, 0.9));
    s.label = label;
    s.patient_id = "p";
    return s;
}

std::vector<PairedExample> tiny_dataset(Rng& rng, int n, int points_per_channel) {
    std::vector<PairedExample> out;
    for (int i = 0; i < n; ++i) {
        PairedExample pe;
        pe.input = random_sample(rng, points_per_channel, Label::interictal);
        pe.target = random_sample(rng, points_per_channel, Label::ictal);
        out.push_back(std::move(pe));
    }
    return out;
}

}  // namespace

TEST_CASE("default architecture reproduces the published shape schedule") {
    ArchitectureConfig arch;  // defaults: 2048 input, width 1
    arch.validate();
    const std::vector<std::pair<int, int>> enc_expected = {
        {2048, 1},  {1024, 64}, {512, 64}, {256, 128}, {128, 128},
        {64, 256},  {32, 256},  {16, 512}, {8, 1024}};
    REQUIRE(arch.encoder_shapes() == enc_expected);
    const std::vector<std::pair<int, int>> dec_expected = {
        {16, 1024}, {16, 512}, {32, 256},  {64, 256},  {128, 128},
        {256, 128}, {512, 64}, {1024, 64}, {2048, 1}};
    REQUIRE(arch.decoder_shapes() == dec_expected);
}

TEST_CASE("generator output shape equals input shape across width scales") {
    for (double scale : {1.0 / 8, 1.0 / 4, 1.0 / 2}) {
        ArchitectureConfig arch = small_arch(scale);
        GeneratorWeights<float> gen;
        gen.arch = arch;
        gen.init(7);
        auto x = make_tensor<float>({1, arch.input_length});
        auto z = make_tensor<float>({arch.latent_channels(), arch.latent_length()});
        Tape<float> tape;
        auto y = generate(tape, x, z, gen);
        REQUIRE(y->shape == std::vector<int>{1, arch.input_length});
    }
}

TEST_CASE("realized encoder shapes follow the configured schedule") {
    ArchitectureConfig arch = small_arch(0.25);
    GeneratorWeights<float> gen;
    gen.arch = arch;
    gen.init(7);
    auto x = make_tensor<float>({1, arch.input_length});
    Tape<float> tape;
    auto enc = encode(tape, x, gen);
    const auto expected = arch.encoder_shapes();
    REQUIRE(enc.skips.size() == static_cast<std::size_t>(kSkipLevels));
    for (int i = 0; i < kSkipLevels; ++i)
        REQUIRE(enc.skips[static_cast<std::size_t>(i)]->shape ==
                (std::vector<int>{expected[static_cast<std::size_t>(i) + 1].second,
                                  expected[static_cast<std::size_t>(i) + 1].first}));
    REQUIRE(enc.latent->shape ==
            (std::vector<int>{arch.latent_channels(), arch.latent_length()}));
}

TEST_CASE("architecture validation rejects bad configurations") {
    ArchitectureConfig arch;
    arch.input_length = 300;  // not a multiple of 256
    REQUIRE_THROWS_AS(arch.validate(), ConfigError);
    arch = ArchitectureConfig{};
    arch.kernel = 4;  // even
    REQUIRE_THROWS_AS(arch.validate(), ConfigError);
    arch = ArchitectureConfig{};
    arch.width_scale = 0;
    REQUIRE_THROWS_AS(arch.validate(), ConfigError);
}

TEST_CASE("losses match their closed forms on a 5x5 score grid") {
    const double scores[5] = {0.0, 0.25, 0.5, 0.75, 1.0};
    for (double r : scores)
        for (double f : scores) {
            auto real = make_tensor<double>({1}, std::vector<double>{r});
            auto fake = make_tensor<double>({1}, std::vector<double>{f});
            Tape<double> tape;
            auto dl = d_loss(tape, real, fake);
            REQUIRE(dl->values[0] == Catch::Approx((r - 1) * (r - 1) + f * f).margin(1e-12));

            auto gen = make_tensor<double>({1, 2}, std::vector<double>{0.3, -0.2});
            auto ref = make_tensor<double>({1, 2}, std::vector<double>{0.1, 0.4});
            Tape<double> tape2;
            auto gl = g_loss(tape2, fake, gen, ref, 100.0);
            const double l1 = (std::abs(0.3 - 0.1) + std::abs(-0.2 - 0.4)) / 2.0;
            REQUIRE(gl->values[0] ==
                    Catch::Approx((f - 1) * (f - 1) + 100.0 * l1).margin(1e-12));
        }
}

TEST_CASE("zeroing the final decoder weight yields exactly zero output") {
    ArchitectureConfig arch = small_arch();
    GeneratorWeights<float> gen;
    gen.arch = arch;
    gen.init(11);
    std::fill(gen.dec.back()->values.begin(), gen.dec.back()->values.end(), 0.0f);
    Rng rng(1);
    auto x = make_tensor<float>({1, arch.input_length});
    for (auto& v : x->values) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    auto z = make_tensor<float>({arch.latent_channels(), arch.latent_length()});
    Tape<float> tape;
    auto y = generate(tape, x, z, gen);
    for (auto v : y->values) REQUIRE(v == 0.0f);  // tanh(0) = 0
}

TEST_CASE("discriminating before freezing the VBN reference is an error") {
    ArchitectureConfig arch = small_arch();
    DiscriminatorWeights<float> disc;
    disc.arch = arch;
    disc.init(3);
    auto x = make_tensor<float>({1, arch.input_length});
    Tape<float> tape;
    REQUIRE_THROWS_AS(discriminate(tape, x, disc), StateError);
}

TEST_CASE("discriminator produces a score in (0, 1) after freezing") {
    ArchitectureConfig arch = small_arch();
    DiscriminatorWeights<float> disc;
    disc.arch = arch;
    disc.init(3);
    Rng rng(5);
    std::vector<TensorPtr<float>> ref;
    for (int i = 0; i < 3; ++i) {
        auto t = make_tensor<float>({1, arch.input_length});
        for (auto& v : t->values) v = static_cast<float>(rng.uniform(-1.0, 1.0));
        ref.push_back(t);
    }
    freeze_vbn_reference(disc, ref);
    auto x = ref[0];
    Tape<float> tape;
    auto score = discriminate(tape, x, disc);
    REQUIRE(score->size() == 1);
    REQUIRE(score->values[0] > 0.0f);
    REQUIRE(score->values[0] < 1.0f);
}

TEST_CASE("skip weights receive gradient through the generator") {
    ArchitectureConfig arch = small_arch(0.125);
    GeneratorWeights<double> gen;
    gen.arch = arch;
    gen.init(13);
    Rng rng(2);
    auto x = make_tensor<double>({1, arch.input_length});
    for (auto& v : x->values) v = rng.uniform(-1.0, 1.0);
    auto z = make_tensor<double>({arch.latent_channels(), arch.latent_length()});
    for (auto& v : z->values) v = rng.normal();
    Tape<double> tape;
    auto y = generate(tape, x, z, gen);
    auto loss = ops::squared_error_mean(tape, y, 0.5);
    tape.backward(loss);
    int nonzero = 0;
    for (const auto& sw : gen.skip)
        if (!sw->grad.empty() && sw->grad[0] != 0.0) ++nonzero;
    REQUIRE(nonzero == kSkipLevels);
}

TEST_CASE("training runs, logs the documented columns, and resumes step numbering") {
    ArchitectureConfig arch = small_arch(0.125);
    Rng rng(9);
    auto data = tiny_dataset(rng, 8, arch.input_length / 2);
    GanTrainConfig cfg;
    cfg.minibatch = 4;
    cfg.steps = 5;
    cfg.seed = 21;

    GanModel<float> model;
    model.init(arch, 17);
    auto log = train(model, data, cfg);
    REQUIRE(log.size() == 5);
    REQUIRE(model.step == 5);
    for (const auto& e : log) {
        REQUIRE(std::isfinite(e.d_loss));
        REQUIRE(std::isfinite(e.g_loss));
        REQUIRE(e.l1_term >= 0);
    }
    REQUIRE(log.front().step == 1);
    REQUIRE(log.back().step == 5);

    auto log2 = train(model, data, cfg);
    REQUIRE(model.step == 10);
    REQUIRE(log2.front().step == 6);

    const char* path = "test_train_log.csv";
    write_training_log(path, log);
    std::ifstream f(path);
    std::string header;
    std::getline(f, header);
    REQUIRE(header == "step,d_loss,g_loss,l1_term,wall_ms");
    f.close();
    std::remove(path);
}

TEST_CASE("training is deterministic for a fixed seed") {
    ArchitectureConfig arch = small_arch(0.125);
    Rng rng(9);
    auto data = tiny_dataset(rng, 8, arch.input_length / 2);
    GanTrainConfig cfg;
    cfg.minibatch = 4;
    cfg.steps = 4;
    cfg.seed = 33;

    GanModel<float> a, b;
    a.init(arch, 17);
    b.init(arch, 17);
    auto log_a = train(a, data, cfg);
    auto log_b = train(b, data, cfg);
    REQUIRE(log_a.size() == log_b.size());
    for (std::size_t i = 0; i < log_a.size(); ++i) {
        REQUIRE(log_a[i].d_loss == log_b[i].d_loss);
        REQUIRE(log_a[i].g_loss == log_b[i].g_loss);
        REQUIRE(log_a[i].l1_term == log_b[i].l1_term);
    }
    const auto pa = a.gen.params();
    const auto pb = b.gen.params();
    for (std::size_t i = 0; i < pa.size(); ++i)
        REQUIRE(pa[i]->values == pb[i]->values);
}

TEST_CASE("checkpoint round trip preserves training state bit-exactly") {
    ArchitectureConfig arch = small_arch(0.125);
    Rng rng(9);
    auto data = tiny_dataset(rng, 6, arch.input_length / 2);
    GanTrainConfig cfg;
    cfg.minibatch = 3;
    cfg.steps = 3;
    cfg.seed = 5;

    GanModel<float> model;
    model.init(arch, 29);
    train(model, data, cfg);

    const char* path = "test_gan.ckpt";
    save_gan_checkpoint(model, path);
    auto loaded = load_gan_checkpoint<float>(path);
    std::remove(path);

    REQUIRE(loaded.step == model.step);
    const auto pa = model.gen.params();
    const auto pb = loaded.gen.params();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) REQUIRE(pa[i]->values == pb[i]->values);
    const auto da = model.disc.params();
    const auto db = loaded.disc.params();
    for (std::size_t i = 0; i < da.size(); ++i) REQUIRE(da[i]->values == db[i]->values);
    for (std::size_t i = 0; i < model.g_adam.m.size(); ++i) {
        REQUIRE(model.g_adam.m[i] == loaded.g_adam.m[i]);
        REQUIRE(model.g_adam.v[i] == loaded.g_adam.v[i]);
    }
    REQUIRE(model.g_adam.t == loaded.g_adam.t);
    for (int i = 0; i < ArchitectureConfig::kBlocks; ++i) {
        REQUIRE(model.disc.vbn[i].ref_mean == loaded.disc.vbn[i].ref_mean);
        REQUIRE(model.disc.vbn[i].frozen == loaded.disc.vbn[i].frozen);
    }

    // Continued training from the restored state matches the original model.
    GanTrainConfig more = cfg;
    more.steps = 2;
    auto log_orig = train(model, data, more);
    auto log_load = train(loaded, data, more);
    for (std::size_t i = 0; i < log_orig.size(); ++i) {
        REQUIRE(log_orig[i].g_loss == log_load[i].g_loss);
        REQUIRE(log_orig[i].d_loss == log_load[i].d_loss);
    }
}

TEST_CASE("synthesize_set honors count, labels, and seeding") {
    ArchitectureConfig arch = small_arch(0.125);
    GanModel<float> model;
    model.init(arch, 41);
    Rng rng(3);
    std::vector<EegSample> pool;
    for (int i = 0; i < 5; ++i)
        pool.push_back(random_sample(rng, arch.input_length / 2, Label::interictal));

    auto a = synthesize_set(model, pool, 9, 77);
    REQUIRE(a.size() == 9);
    for (const auto& s : a) {
        REQUIRE(s.label == Label::ictal);
        REQUIRE(s.origin == Origin::synthetic);
        REQUIRE(s.values.size() == static_cast<std::size_t>(arch.input_length));
    }
    auto b = synthesize_set(model, pool, 9, 77);
    for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(a[i].values == b[i].values);
    auto c = synthesize_set(model, pool, 9, 78);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i].values != c[i].values) any_diff = true;
    REQUIRE(any_diff);
}

TEST_CASE("training rejects invalid configurations") {
    ArchitectureConfig arch = small_arch(0.125);
    GanModel<float> model;
    model.init(arch, 1);
    Rng rng(1);
    auto data = tiny_dataset(rng, 4, arch.input_length / 2);
    GanTrainConfig cfg;
    cfg.minibatch = 100;  // larger than the dataset
    cfg.steps = 1;
    REQUIRE_THROWS_AS(train(model, data, cfg), StateError);
    cfg.minibatch = 2;
    cfg.lambda = 0;
    REQUIRE_THROWS_AS(train(model, data, cfg), ConfigError);
}
