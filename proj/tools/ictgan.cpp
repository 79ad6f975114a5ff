// Command-line pipeline driver. One subcommand per stage so desk-scale and
// full-scale runs can share intermediate artifacts on disk.
#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "ictgan/common.hpp"
#include "ictgan/data.hpp"
#include "ictgan/eval.hpp"
#include "ictgan/features.hpp"
#include "ictgan/gan.hpp"

namespace {

using namespace ictgan;

// ---------------------------------------------------------------------------
// Key-value run configuration: declared keys with defaults, merged from a
// config file, ICTGAN_* environment variables, then command-line overrides.
// Unknown keys are rejected by name. Every run emits a resolved snapshot.
// ---------------------------------------------------------------------------

class RunConfig {
public:
    void declare(const std::string& key, const std::string& default_value,
                 const std::string& help) {
        order_.push_back(key);
        values_[key] = default_value;
        help_[key] = help;
    }

    void load_file(const std::string& path) {
        std::ifstream f(path);
        if (!f) throw IoError("cannot open config file: " + path);
        std::string line;
        int lineno = 0;
        while (std::getline(f, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const auto trim = [](std::string s) {
                const auto a = s.find_first_not_of(" \t\r");
                const auto b = s.find_last_not_of(" \t\r");
                return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
            };
            if (trim(line).empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw UsageError(path + ":" + std::to_string(lineno) + ": expected key=value");
            set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        }
    }

    void apply_env() {
        for (const auto& key : order_) {
            std::string env = "ICTGAN_";
            for (char c : key) env += static_cast<char>(c == '-' ? '_' : std::toupper(c));
            if (const char* v = std::getenv(env.c_str())) values_[key] = v;
        }
    }

    void apply_overrides(const std::vector<std::string>& kvs) {
        for (const auto& kv : kvs) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw UsageError("override must be key=value: " + kv);
            set(kv.substr(0, eq), kv.substr(eq + 1));
        }
    }

    void set(const std::string& key, const std::string& value) {
        if (!values_.count(key)) throw UsageError("unknown configuration key: " + key);
        values_[key] = value;
    }

    const std::string& str(const std::string& key) const { return values_.at(key); }

    double num(const std::string& key) const {
        try {
            std::size_t pos = 0;
            const double v = std::stod(values_.at(key), &pos);
            if (pos != values_.at(key).size()) throw std::invalid_argument("");
            return v;
        } catch (const std::exception&) {
            throw UsageError("configuration key '" + key + "' is not a number: '" +
                             values_.at(key) + "'");
        }
    }

    std::int64_t integer(const std::string& key) const {
        const double v = num(key);
        if (v != std::floor(v)) throw UsageError("configuration key '" + key + "' must be integral");
        return static_cast<std::int64_t>(v);
    }

    std::uint64_t seed(const std::string& key = "seed") const {
        return static_cast<std::uint64_t>(integer(key));
    }

    std::vector<std::string> list(const std::string& key) const {
        std::vector<std::string> out;
        std::istringstream ss(values_.at(key));
        std::string item;
        while (std::getline(ss, item, ','))
            if (!item.empty()) out.push_back(item);
        return out;
    }

    // Resolved snapshot next to the primary output, for provenance.
    void snapshot(const std::string& out_path) const {
        const std::string path = out_path + ".config";
        std::ofstream f(path);
        if (!f) throw IoError("cannot write config snapshot: " + path);
        for (const auto& key : order_) f << key << "=" << values_.at(key) << "\n";
    }

private:
    std::vector<std::string> order_;
    std::map<std::string, std::string> values_;
    std::map<std::string, std::string> help_;
};

struct GlobalArgs {
    std::string config_path;
    std::string seed;
    std::string jobs;
    std::string out;
    std::vector<std::string> overrides;
};

// Merge order: declared defaults, config file, environment, --set overrides,
// then the dedicated global flags (highest precedence).
void resolve(RunConfig& cfg, const GlobalArgs& g) {
    if (!g.config_path.empty()) cfg.load_file(g.config_path);
    cfg.apply_env();
    cfg.apply_overrides(g.overrides);
    if (!g.seed.empty()) cfg.set("seed", g.seed);
    if (!g.jobs.empty()) cfg.set("jobs", g.jobs);
    if (!g.out.empty()) cfg.set("out", g.out);
}

void declare_common(RunConfig& cfg, const std::string& default_out) {
    cfg.declare("seed", "1", "master random seed");
    cfg.declare("jobs", "1", "worker count for per-patient stages");
    cfg.declare("out", default_out, "primary output path");
}

SegmentConfig segment_config_for(int input_length) {
    SegmentConfig seg;
    seg.window_s = static_cast<double>(input_length) / (2.0 * 256.0);
    return seg;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int cmd_surrogate(const GlobalArgs& g) {
    RunConfig cfg;
    declare_common(cfg, "surrogate.eegd");
    cfg.declare("patient_count", "4", "number of surrogate patients");
    cfg.declare("duration_s", "900", "recording duration per patient, seconds");
    cfg.declare("seizure_count", "6", "seizures per recording");
    cfg.declare("seizure_min_s", "20", "minimum seizure length");
    cfg.declare("seizure_max_s", "30", "maximum seizure length");
    cfg.declare("freq_min_hz", "0.5", "low end of the seizure rhythm range");
    cfg.declare("freq_max_hz", "7", "high end of the seizure rhythm range");
    cfg.declare("fixed_frequency_hz", "0", "pin every patient's rhythm (0 = per-patient draw)");
    cfg.declare("burst_amplitude", "5", "seizure amplitude, multiples of background sigma");
    cfg.declare("alpha_amplitude", "0.3", "10 Hz background component amplitude");
    cfg.declare("guard_s", "10", "guard band excluded around seizures, seconds");
    resolve(cfg, g);

    SurrogateConfig sc;
    sc.seed = cfg.seed();
    sc.patient_count = static_cast<int>(cfg.integer("patient_count"));
    sc.recording_duration_s = cfg.num("duration_s");
    sc.seizure_count = static_cast<int>(cfg.integer("seizure_count"));
    sc.seizure_min_s = cfg.num("seizure_min_s");
    sc.seizure_max_s = cfg.num("seizure_max_s");
    sc.freq_min_hz = cfg.num("freq_min_hz");
    sc.freq_max_hz = cfg.num("freq_max_hz");
    sc.fixed_frequency_hz = cfg.num("fixed_frequency_hz");
    sc.burst_amplitude = cfg.num("burst_amplitude");
    sc.alpha_amplitude = cfg.num("alpha_amplitude");
    sc.interictal_guard_s = cfg.num("guard_s");

    const Dataset ds = surrogate_generate(sc);
    write_dataset(ds, cfg.str("out"));
    cfg.snapshot(cfg.str("out"));
    std::cout << "wrote " << cfg.str("out") << " (" << ds.patients.size() << " patients)\n";
    return 0;
}

int cmd_ingest(const GlobalArgs& g) {
    RunConfig cfg;
    declare_common(cfg, "ingested.eegd");
    cfg.declare("inputs", "",
                "comma-separated entries patient:recording.csv:intervals.csv");
    cfg.declare("guard_s", "60", "interictal guard band when the sidecar lists no interictal");
    resolve(cfg, g);

    const auto entries = cfg.list("inputs");
    if (entries.empty()) throw UsageError("ingest: 'inputs' must list at least one recording");
    Dataset ds;
    ds.provenance = "ingested from CSV";
    for (const auto& e : entries) {
        const auto c1 = e.find(':');
        const auto c2 = e.find(':', c1 == std::string::npos ? e.size() : c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos)
            throw UsageError("ingest: entry must be patient:data.csv:intervals.csv, got '" + e +
                             "'");
        const std::string pid = e.substr(0, c1);
        Recording rec = read_csv_recording(e.substr(c1 + 1, c2 - c1 - 1), e.substr(c2 + 1),
                                           cfg.num("guard_s"));
        PatientRecord* p = nullptr;
        for (auto& existing : ds.patients)
            if (existing.patient_id == pid) p = &existing;
        if (!p) {
            ds.patients.push_back({pid, {}});
            p = &ds.patients.back();
        }
        p->recordings.push_back(std::move(rec));
    }
    write_dataset(ds, cfg.str("out"));
    cfg.snapshot(cfg.str("out"));
    std::cout << "wrote " << cfg.str("out") << " (" << ds.patients.size() << " patients)\n";
    return 0;
}

int cmd_train_gan(const GlobalArgs& g) {
    RunConfig cfg;
    declare_common(cfg, "gan.ckpt");
    cfg.declare("dataset", "", "EEGD0001 dataset path");
    cfg.declare("patient", "", "held-out target patient id");
    cfg.declare("steps", "2000", "training step budget");
    cfg.declare("minibatch", "100", "examples per step");
    cfg.declare("lambda", "100", "L1 reconstruction weight in the generator loss");
    cfg.declare("g_lr", "0.0001", "generator learning rate");
    cfg.declare("d_lr", "0.0004", "discriminator learning rate");
    cfg.declare("input_length", "2048", "flattened window length (2 channels x points)");
    cfg.declare("width_scale", "1", "channel width multiplier");
    cfg.declare("kernel", "31", "convolution kernel length, odd");
    cfg.declare("sn_iters", "1", "power iterations per spectral normalization");
    cfg.declare("checkpoint_every", "0", "periodic checkpoint interval, 0 disables");
    cfg.declare("resume", "", "checkpoint to continue from");
    cfg.declare("log", "train_log.csv", "training log CSV path");
    resolve(cfg, g);

    if (cfg.str("dataset").empty()) throw UsageError("train-gan: 'dataset' is required");
    if (cfg.str("patient").empty()) throw UsageError("train-gan: 'patient' is required");
    const Dataset ds = read_dataset(cfg.str("dataset"));

    ArchitectureConfig arch;
    arch.input_length = static_cast<int>(cfg.integer("input_length"));
    arch.width_scale = cfg.num("width_scale");
    arch.kernel = static_cast<int>(cfg.integer("kernel"));
    arch.validate();

    GanTrainConfig tc;
    tc.lambda = cfg.num("lambda");
    tc.g_learning_rate = cfg.num("g_lr");
    tc.d_learning_rate = cfg.num("d_lr");
    tc.minibatch = static_cast<int>(cfg.integer("minibatch"));
    tc.steps = cfg.integer("steps");
    tc.seed = cfg.seed();
    tc.sn_iters = static_cast<int>(cfg.integer("sn_iters"));
    tc.checkpoint_every = cfg.integer("checkpoint_every");
    tc.checkpoint_path = cfg.str("out");

    WarningLog warnings;
    const auto split =
        lopo_split(ds, cfg.str("patient"), segment_config_for(arch.input_length), tc.seed,
                   &warnings);
    if (split.gan_train_pairs.empty())
        throw StateError("train-gan: no training pairs outside patient " + cfg.str("patient"));
    tc.minibatch = std::min<int>(tc.minibatch, static_cast<int>(split.gan_train_pairs.size()));

    GanModel<float> model;
    const bool resuming = !cfg.str("resume").empty();
    if (resuming)
        model = load_gan_checkpoint<float>(cfg.str("resume"));
    else
        model.init(arch, cfg.seed());

    const auto log = train(model, split.gan_train_pairs, tc);
    save_gan_checkpoint(model, cfg.str("out"));
    write_training_log(cfg.str("log"), log, resuming);
    cfg.snapshot(cfg.str("out"));
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    std::cout << "wrote " << cfg.str("out") << " at step " << model.step << "\n";
    return 0;
}

int cmd_generate(const GlobalArgs& g) {
    RunConfig cfg;
    declare_common(cfg, "synthetic.eegs");
    cfg.declare("checkpoint", "", "trained generator checkpoint");
    cfg.declare("dataset", "", "EEGD0001 dataset holding the target patient");
    cfg.declare("patient", "", "target patient whose interictal pool seeds generation");
    cfg.declare("count", "2000", "synthetic ictal windows to generate");
    resolve(cfg, g);

    if (cfg.str("checkpoint").empty()) throw UsageError("generate: 'checkpoint' is required");
    if (cfg.str("dataset").empty()) throw UsageError("generate: 'dataset' is required");
    if (cfg.str("patient").empty()) throw UsageError("generate: 'patient' is required");

    auto model = load_gan_checkpoint<float>(cfg.str("checkpoint"));
    const Dataset ds = read_dataset(cfg.str("dataset"));
    const PatientRecord* target = ds.find(cfg.str("patient"));
    if (!target) throw StateError("generate: unknown patient id '" + cfg.str("patient") + "'");

    WarningLog warnings;
    const auto pool = segment(*target, SegmentPurpose::gan_train, Label::interictal,
                              segment_config_for(model.gen.arch.input_length), &warnings);
    auto samples = synthesize_set(model, pool, static_cast<int>(cfg.integer("count")),
                                  cfg.seed());
    write_samples(samples, cfg.str("out"));
    cfg.snapshot(cfg.str("out"));
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    std::cout << "wrote " << cfg.str("out") << " (" << samples.size() << " samples)\n";
    return 0;
}

int cmd_features(const GlobalArgs& g) {
    RunConfig cfg;
    declare_common(cfg, "features.csv");
    cfg.declare("input", "", "EEGD0001 dataset or EEGS0001 sample set");
    cfg.declare("window_s", "4", "window length for dataset segmentation, seconds");
    cfg.declare("entropies_on_reconstruction", "0",
                "1 = run entropies on reconstructed subbands instead of coefficients");
    resolve(cfg, g);

    if (cfg.str("input").empty()) throw UsageError("features: 'input' is required");
    std::vector<EegSample> samples;
    {
        std::ifstream f(cfg.str("input"), std::ios::binary);
        if (!f) throw IoError("cannot open input: " + cfg.str("input"));
        char magic[8] = {};
        f.read(magic, 8);
        f.close();
        if (std::memcmp(magic, "EEGS0001", 8) == 0) {
            samples = read_samples(cfg.str("input"));
        } else {
            const Dataset ds = read_dataset(cfg.str("input"));
            SegmentConfig seg;
            seg.window_s = cfg.num("window_s");
            WarningLog warnings;
            for (const auto& p : ds.patients)
                for (Label lab : {Label::ictal, Label::interictal}) {
                    auto w = segment(p, SegmentPurpose::test, lab, seg, &warnings);
                    samples.insert(samples.end(), w.begin(), w.end());
                }
            for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
        }
    }
    if (samples.empty()) throw StateError("features: no windows to featurize");

    FeatureConfig fc;
    fc.entropies_on_reconstruction = cfg.integer("entropies_on_reconstruction") != 0;
    WarningLog warnings;
    std::vector<FeatureVector> rows;
    rows.reserve(samples.size());
    for (const auto& s : samples) rows.push_back(extract_features(s, fc, &warnings));
    write_feature_csv(cfg.str("out"), samples, rows);
    cfg.snapshot(cfg.str("out"));
    std::cout << "wrote " << cfg.str("out") << " (" << rows.size() << " rows, "
              << feature_names().size() << " features, " << warnings.size() << " warnings)\n";
    return 0;
}

int cmd_evaluate(const GlobalArgs& g) {
    RunConfig cfg;
    declare_common(cfg, "report");
    cfg.declare("dataset", "", "EEGD0001 dataset path");
    cfg.declare("synthetic", "",
                "comma-separated entries patient:pool.eegs with synthetic ictal windows");
    cfg.declare("repeats", "15", "shuffled repetitions per patient");
    cfg.declare("train_per_class", "2000", "training windows per class per arm");
    cfg.declare("trees", "100", "random-forest size");
    cfg.declare("exclusion_floor", "0.30", "both-arm gmean floor below which a patient is excluded");
    cfg.declare("window_s", "4", "detector window length, seconds");
    resolve(cfg, g);

    if (cfg.str("dataset").empty()) throw UsageError("evaluate: 'dataset' is required");
    const Dataset ds = read_dataset(cfg.str("dataset"));
    std::map<std::string, std::vector<EegSample>> pools;
    for (const auto& e : cfg.list("synthetic")) {
        const auto c = e.find(':');
        if (c == std::string::npos)
            throw UsageError("evaluate: synthetic entry must be patient:path, got '" + e + "'");
        pools[e.substr(0, c)] = read_samples(e.substr(c + 1));
    }
    if (pools.empty()) throw UsageError("evaluate: 'synthetic' must list at least one pool");

    ExperimentConfig ec;
    ec.repeats = static_cast<int>(cfg.integer("repeats"));
    ec.train_per_class = static_cast<int>(cfg.integer("train_per_class"));
    ec.exclusion_floor = cfg.num("exclusion_floor");
    ec.seed = cfg.seed();
    ec.segment.window_s = cfg.num("window_s");
    ec.forest.tree_count = static_cast<int>(cfg.integer("trees"));

    const int jobs = std::max(1, static_cast<int>(cfg.integer("jobs")));
    ExperimentReport report;
    if (jobs <= 1) {
        report = run_experiment(ds, pools, ec);
    } else {
        // Patients are independent; shard them across workers and merge in
        // dataset order. Per-patient seeds make the shard layout irrelevant.
        std::vector<ExperimentReport> parts(static_cast<std::size_t>(jobs));
        std::vector<std::thread> workers;
        for (int j = 0; j < jobs; ++j)
            workers.emplace_back([&, j] {
                ExperimentConfig shard = ec;
                for (std::size_t i = static_cast<std::size_t>(j); i < ds.patients.size();
                     i += static_cast<std::size_t>(jobs))
                    shard.only_patients.push_back(ds.patients[i].patient_id);
                if (!shard.only_patients.empty())
                    parts[static_cast<std::size_t>(j)] = run_experiment(ds, pools, shard);
            });
        for (auto& w : workers) w.join();
        for (const auto& p : ds.patients)
            for (const auto& part : parts) {
                for (const auto& pr : part.patients)
                    if (pr.patient_id == p.patient_id) report.patients.push_back(pr);
                for (const auto& sk : part.skips)
                    if (sk.first == p.patient_id) report.skips.push_back(sk);
            }
        for (const auto& part : parts)
            report.warnings.insert(report.warnings.end(), part.warnings.begin(),
                                   part.warnings.end());
        finalize_report(report, ec.exclusion_floor);
    }

    if (!verify_report_consistency(report))
        throw StateError("evaluate: report failed its self-consistency check");
    const std::string& out = cfg.str("out");
    write_report_json(out + ".json", report);
    write_report_csv(out + ".csv", report);
    write_histogram_csv(out + "_hist.csv", report.difference_histogram);
    write_histogram_svg(out + "_hist.svg", report.difference_histogram);
    cfg.snapshot(out);
    std::cout << "baseline total " << report.baseline_total << "%, synthetic total "
              << report.synthetic_total << "%, difference " << report.total_difference
              << " (p=" << report.wilcoxon.p_value << ", " << report.exclusions.size()
              << " excluded, " << report.skips.size() << " skipped)\n";
    return 0;
}

int cmd_verify(const GlobalArgs& g) {
    RunConfig cfg;
    declare_common(cfg, "verify.txt");
    cfg.declare("fixture", "data/table1_reference.csv", "bundled per-patient reference table");
    cfg.declare("total_tol", "0.15", "tolerance on the two aggregate totals");
    cfg.declare("diff_tol", "0.1", "tolerance on the total difference");
    cfg.declare("p_tol", "0.003", "tolerance on the significance p-value");
    resolve(cfg, g);

    const auto rows = read_reference_table(cfg.str("fixture"));
    const auto res = run_reference_verification(rows, cfg.num("total_tol"), cfg.num("diff_tol"),
                                                cfg.num("p_tol"));
    for (const auto& c : res.checks)
        std::cout << (c.passed ? "PASS" : "FAIL") << " " << c.name << ": got " << c.value
                  << ", expected " << c.expected << " +/- " << c.tolerance << "\n";
    std::cout << (res.all_passed ? "all checks passed" : "verification FAILED") << "\n";
    return res.all_passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Conditional GAN pipeline for synthetic ictal EEG: surrogate data, training, "
                 "generation, features, detector evaluation, and published-table verification"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may appear after the subcommand

    GlobalArgs g;
    app.add_option("--config", g.config_path, "key=value configuration file")->expected(1);
    app.add_option("--seed", g.seed, "master random seed (overrides config)");
    app.add_option("--jobs", g.jobs, "worker count (overrides config)");
    app.add_option("--out", g.out, "primary output path (overrides config)");
    app.add_option("--set", g.overrides, "explicit key=value override, repeatable");

    int (*run)(const GlobalArgs&) = nullptr;
    const std::pair<const char*, std::pair<const char*, int (*)(const GlobalArgs&)>> cmds[] = {
        {"surrogate", {"generate a synthetic benchmark dataset", &cmd_surrogate}},
        {"ingest", {"convert CSV recordings into an EEGD0001 dataset", &cmd_ingest}},
        {"train-gan", {"train a leave-one-patient-out GAN", &cmd_train_gan}},
        {"generate", {"synthesize ictal windows from a checkpoint", &cmd_generate}},
        {"features", {"extract the 108-feature matrix", &cmd_features}},
        {"evaluate", {"run the two-arm detector experiment", &cmd_evaluate}},
        {"verify", {"recompute the published aggregates from the bundled table", &cmd_verify}},
    };
    for (const auto& [name, desc] : cmds) {
        auto* sub = app.add_subcommand(name, desc.first);
        auto fn = desc.second;
        sub->callback([&run, fn] { run = fn; });
    }

    try {
        app.parse(argc, argv);
        return run(g);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return 3;
    } catch (const FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return 4;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 5;
    } catch (const StateError& e) {
        std::cerr << "state error: " << e.what() << "\n";
        return 6;
    } catch (const DimensionError& e) {
        std::cerr << "dimension error: " << e.what() << "\n";
        return 7;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 10;
    }
}
