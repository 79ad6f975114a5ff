// Dataset model: windowing, normalization, ictal/inter-ictal pairing,
// leave-one-patient-out splits, evaluation-set construction, a surrogate EEG
// generator for desk-scale experiments, and the EEGD0001 interchange format.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ictgan/common.hpp"

namespace ictgan {

enum class Label { interictal = 0, ictal = 1 };
enum class Origin { real = 0, synthetic = 1 };

inline const char* to_string(Label l) { return l == Label::ictal ? "ictal" : "interictal"; }
inline const char* to_string(Origin o) { return o == Origin::synthetic ? "synthetic" : "real"; }

// One fixed-length window: `channels` contiguous rows of `points` samples,
// values normalized to [-1, 1].
struct EegSample {
    std::vector<float> values;  // channels * points, row-major
    int channels = 2;
    int points = 0;
    Label label = Label::interictal;
    Origin origin = Origin::real;
    std::string patient_id;
    std::string recording_id;
    double window_start = 0.0;  // seconds into the recording

    const float* channel(int c) const { return &values[static_cast<std::size_t>(c) * points]; }
    float* channel(int c) { return &values[static_cast<std::size_t>(c) * points]; }
};

struct PairedExample {
    EegSample input;   // interictal
    EegSample target;  // ictal, same patient
};

struct LabeledInterval {
    double start_s = 0;
    double end_s = 0;
    Label label = Label::interictal;
};

struct Recording {
    std::string id;
    int sample_rate = 256;
    std::vector<std::string> channel_names;
    std::vector<std::vector<float>> channels;
    std::vector<LabeledInterval> intervals;
    float norm_scale = 1.0f;  // max-abs divisor applied by normalize_recording

    double duration_s() const {
        return channels.empty() ? 0.0
                                : static_cast<double>(channels[0].size()) / sample_rate;
    }
};

struct PatientRecord {
    std::string patient_id;
    std::vector<Recording> recordings;
};

struct Dataset {
    std::vector<PatientRecord> patients;
    std::string provenance;

    const PatientRecord* find(const std::string& patient_id) const {
        for (const auto& p : patients)
            if (p.patient_id == patient_id) return &p;
        return nullptr;
    }
};

using WarningLog = std::vector<std::string>;

inline void warn(WarningLog* log, const std::string& msg) {
    if (log) log->push_back(msg);
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

// Per-recording max-abs scaling into [-1, 1]; the scale is stored on the
// recording so the mapping can be inverted. All-zero recordings keep scale 1.
inline void normalize_recording(Recording& rec) {
    float max_abs = 0.0f;
    for (const auto& ch : rec.channels)
        for (float v : ch) {
            if (!std::isfinite(v)) throw NumericalError("non-finite sample in recording " + rec.id);
            max_abs = std::max(max_abs, std::abs(v));
        }
    const float scale = max_abs > 0.0f ? max_abs : 1.0f;
    for (auto& ch : rec.channels)
        for (float& v : ch) v /= scale;
    rec.norm_scale = scale;
}

inline void denormalize_recording(Recording& rec) {
    for (auto& ch : rec.channels)
        for (float& v : ch) v *= rec.norm_scale;
    rec.norm_scale = 1.0f;
}

// Interictal intervals = complement of the ictal intervals, trimmed by a guard
// band on each side of every seizure boundary.
inline std::vector<LabeledInterval> derive_interictal_intervals(const Recording& rec,
                                                                double guard_s) {
    std::vector<LabeledInterval> ictal;
    for (const auto& iv : rec.intervals)
        if (iv.label == Label::ictal) ictal.push_back(iv);
    std::sort(ictal.begin(), ictal.end(),
              [](const auto& a, const auto& b) { return a.start_s < b.start_s; });
    std::vector<LabeledInterval> out;
    double cursor = 0.0;
    const double total = rec.duration_s();
    for (const auto& iv : ictal) {
        const double end = iv.start_s - guard_s;
        if (end > cursor) out.push_back({cursor, end, Label::interictal});
        cursor = std::max(cursor, iv.end_s + guard_s);
    }
    if (total > cursor) out.push_back({cursor, total, Label::interictal});
    return out;
}

// ---------------------------------------------------------------------------
// Windowing
// ---------------------------------------------------------------------------

enum class SegmentPurpose { gan_train, detector_train, test };

struct SegmentConfig {
    double window_s = 4.0;
    double train_overlap = 0.75;  // fraction; hop = window * (1 - overlap)
};

// Cuts fixed-length windows of one class from a patient's recordings. Training
// purposes overlap windows inside each labeled interval; test windows do not
// overlap. Every window lies wholly inside one interval of its class.
inline std::vector<EegSample> segment(const PatientRecord& patient, SegmentPurpose purpose,
                                      Label cls, const SegmentConfig& cfg,
                                      WarningLog* warnings = nullptr) {
    std::vector<EegSample> out;
    const bool overlap = purpose != SegmentPurpose::test;
    const double hop = overlap ? cfg.window_s * (1.0 - cfg.train_overlap) : cfg.window_s;
    for (const auto& rec : patient.recordings) {
        const int win_pts = static_cast<int>(std::lround(cfg.window_s * rec.sample_rate));
        const int n_ch = static_cast<int>(rec.channels.size());
        for (const auto& iv : rec.intervals) {
            if (iv.label != cls) continue;
            if (iv.end_s - iv.start_s < cfg.window_s - 1e-9) {
                warn(warnings, "interval [" + std::to_string(iv.start_s) + "," +
                                   std::to_string(iv.end_s) + ") in " + rec.id +
                                   " shorter than window, skipped");
                continue;
            }
            for (double start = iv.start_s; start + cfg.window_s <= iv.end_s + 1e-9; start += hop) {
                const std::int64_t s0 = std::llround(start * rec.sample_rate);
                if (s0 + win_pts > static_cast<std::int64_t>(rec.channels[0].size())) break;
                EegSample smp;
                smp.channels = n_ch;
                smp.points = win_pts;
                smp.values.resize(static_cast<std::size_t>(n_ch) * win_pts);
                for (int c = 0; c < n_ch; ++c)
                    std::copy_n(&rec.channels[c][static_cast<std::size_t>(s0)], win_pts,
                                smp.channel(c));
                smp.label = cls;
                smp.origin = Origin::real;
                smp.patient_id = patient.patient_id;
                smp.recording_id = rec.id;
                smp.window_start = start;
                out.push_back(std::move(smp));
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Pairing and splits
// ---------------------------------------------------------------------------

// Pairs every ictal window of each patient with a uniformly drawn interictal
// window of the same patient (with replacement when counts differ). Patients
// missing either class are excluded with a warning.
inline std::vector<PairedExample> pair_examples(const Dataset& ds,
                                                const std::vector<std::string>& patient_ids,
                                                const SegmentConfig& cfg, std::uint64_t seed,
                                                WarningLog* warnings = nullptr) {
    std::vector<PairedExample> out;
    for (const auto& pid : patient_ids) {
        const PatientRecord* p = ds.find(pid);
        if (!p) throw StateError("pair: unknown patient id '" + pid + "'");
        auto ictal = segment(*p, SegmentPurpose::gan_train, Label::ictal, cfg, warnings);
        auto inter = segment(*p, SegmentPurpose::gan_train, Label::interictal, cfg, warnings);
        if (ictal.empty() || inter.empty()) {
            warn(warnings, "patient " + pid + " lacks " +
                               (ictal.empty() ? "ictal" : "interictal") +
                               " windows, excluded from pairing");
            continue;
        }
        Rng rng(Rng::derive_seed(seed, std::hash<std::string>{}(pid)));
        for (auto& target : ictal) {
            PairedExample pe;
            pe.input = inter[static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<std::int64_t>(inter.size()) - 1))];
            pe.target = std::move(target);
            out.push_back(std::move(pe));
        }
    }
    return out;
}

struct LopoSplit {
    std::vector<PairedExample> gan_train_pairs;  // all patients except target
    const PatientRecord* target = nullptr;       // holdout
};

inline LopoSplit lopo_split(const Dataset& ds, const std::string& target_patient,
                            const SegmentConfig& cfg, std::uint64_t seed,
                            WarningLog* warnings = nullptr) {
    if (!ds.find(target_patient))
        throw StateError("lopo_split: unknown patient id '" + target_patient + "'");
    std::vector<std::string> others;
    for (const auto& p : ds.patients)
        if (p.patient_id != target_patient) others.push_back(p.patient_id);
    LopoSplit split;
    split.gan_train_pairs = pair_examples(ds, others, cfg, seed, warnings);
    split.target = ds.find(target_patient);
    return split;
}

// ---------------------------------------------------------------------------
// Evaluation sets
// ---------------------------------------------------------------------------

struct EvalSetConfig {
    int train_per_class = 2000;
    std::uint64_t seed = 0;
};

struct EvalSets {
    std::vector<EegSample> target_train;    // synthetic ictal + real target interictal
    std::vector<EegSample> baseline_train;  // cross-patient real ictal + same interictal
    std::vector<EegSample> test;            // real target ictal + 2x real target interictal
};

namespace detail {

template <class T>
std::vector<T> sample_n(const std::vector<T>& pool, int n, Rng& rng, const char* what,
                        WarningLog* warnings) {
    if (pool.empty()) throw StateError(std::string("empty pool for ") + what);
    if (static_cast<int>(pool.size()) < n)
        warn(warnings, std::string(what) + ": pool of " + std::to_string(pool.size()) +
                           " sampled with replacement to reach " + std::to_string(n));
    std::vector<T> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i)
        out.push_back(pool[static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1))]);
    return out;
}

}  // namespace detail

// Builds the per-patient training and test sets. The two training arms share
// their interictal half exactly; test interictal windows are disjoint from the
// training interictal windows. Throws StateError when the target has no ictal
// test windows.
inline EvalSets build_eval_sets(const PatientRecord& target,
                                const std::vector<EegSample>& synthetic_pool,
                                const std::vector<EegSample>& cross_ictal_pool,
                                const SegmentConfig& seg_cfg, const EvalSetConfig& cfg,
                                WarningLog* warnings = nullptr) {
    auto test_ictal = segment(target, SegmentPurpose::test, Label::ictal, seg_cfg, warnings);
    if (test_ictal.empty())
        throw StateError("patient " + target.patient_id + " has no ictal test windows");
    auto inter_pool = segment(target, SegmentPurpose::test, Label::interictal, seg_cfg, warnings);
    if (inter_pool.empty())
        throw StateError("patient " + target.patient_id + " has no interictal windows");

    Rng rng(cfg.seed);
    rng.shuffle(inter_pool);

    const int want_test_inter = 2 * static_cast<int>(test_ictal.size());
    const int n_test_inter = std::min<int>(want_test_inter, static_cast<int>(inter_pool.size()) - 1);
    if (n_test_inter < want_test_inter)
        warn(warnings, "patient " + target.patient_id + ": only " + std::to_string(n_test_inter) +
                           " interictal test windows for 2:1 ratio");
    std::vector<EegSample> test_inter(inter_pool.begin(), inter_pool.begin() + n_test_inter);
    std::vector<EegSample> train_inter_pool(inter_pool.begin() + n_test_inter, inter_pool.end());

    auto train_inter =
        detail::sample_n(train_inter_pool, cfg.train_per_class, rng, "target interictal", warnings);
    auto train_synth =
        detail::sample_n(synthetic_pool, cfg.train_per_class, rng, "synthetic ictal", warnings);
    auto train_cross =
        detail::sample_n(cross_ictal_pool, cfg.train_per_class, rng, "cross-patient ictal", warnings);

    EvalSets sets;
    sets.target_train = train_synth;
    sets.target_train.insert(sets.target_train.end(), train_inter.begin(), train_inter.end());
    sets.baseline_train = train_cross;
    sets.baseline_train.insert(sets.baseline_train.end(), train_inter.begin(), train_inter.end());
    sets.test = std::move(test_ictal);
    sets.test.insert(sets.test.end(), test_inter.begin(), test_inter.end());
    return sets;
}

// ---------------------------------------------------------------------------
// Surrogate dataset generator
// ---------------------------------------------------------------------------

// Background: pink noise plus a 10 Hz alpha component. Seizures: an
// amplitude-boosted delta-theta sinusoid, phase-locked to seizure onset, with
// short linear ramps at the interval edges.
struct SurrogateConfig {
    std::uint64_t seed = 1;
    int patient_count = 4;
    double recording_duration_s = 900.0;
    int seizure_count = 6;
    double seizure_min_s = 20.0;
    double seizure_max_s = 30.0;
    double freq_min_hz = 0.5;  // delta-theta range
    double freq_max_hz = 7.0;
    double fixed_frequency_hz = 0.0;  // > 0 pins every patient's rhythm
    double burst_amplitude = 5.0;     // multiple of background sigma
    double alpha_amplitude = 0.3;
    double ramp_s = 1.0;
    double interictal_guard_s = 10.0;
};

namespace detail {

// Paul Kellet's pink noise filter; deterministic given the white stream.
class PinkNoise {
public:
    double next(double white) {
        b0_ = 0.99765 * b0_ + white * 0.0990460;
        b1_ = 0.96300 * b1_ + white * 0.2965164;
        b2_ = 0.57000 * b2_ + white * 1.0526913;
        return (b0_ + b1_ + b2_ + white * 0.1848) * 0.2;
    }

private:
    double b0_ = 0, b1_ = 0, b2_ = 0;
};

}  // namespace detail

inline Dataset surrogate_generate(const SurrogateConfig& cfg) {
    if (cfg.patient_count < 1 || cfg.recording_duration_s <= 0)
        throw ConfigError("surrogate_generate: invalid config");
    if (cfg.fixed_frequency_hz > 0 &&
        (cfg.fixed_frequency_hz < 0.5 || cfg.fixed_frequency_hz > 7.0))
        throw ConfigError("surrogate_generate: fixed frequency outside delta-theta range");
    Dataset ds;
    ds.provenance = "surrogate seed=" + std::to_string(cfg.seed);
    const int sr = 256;
    const std::int64_t n = static_cast<std::int64_t>(std::llround(cfg.recording_duration_s * sr));
    for (int pi = 0; pi < cfg.patient_count; ++pi) {
        Rng rng(Rng::derive_seed(cfg.seed, static_cast<std::uint64_t>(pi) + 101));
        PatientRecord patient;
        patient.patient_id = "p" + std::to_string(pi + 1);
        Recording rec;
        rec.id = patient.patient_id + "_r1";
        rec.sample_rate = sr;
        rec.channel_names = {"F7T3", "F8T4"};
        rec.channels.assign(2, std::vector<float>(static_cast<std::size_t>(n), 0.0f));

        const double freq = cfg.fixed_frequency_hz > 0
                                ? cfg.fixed_frequency_hz
                                : rng.uniform(cfg.freq_min_hz, cfg.freq_max_hz);
        const double burst = cfg.burst_amplitude * rng.uniform(0.85, 1.15);

        // Non-overlapping seizure intervals, placed on an even grid with jitter.
        std::vector<LabeledInterval> seizures;
        const double slot = cfg.recording_duration_s / cfg.seizure_count;
        for (int s = 0; s < cfg.seizure_count; ++s) {
            const double dur = rng.uniform(cfg.seizure_min_s, cfg.seizure_max_s);
            if (dur + 2 * cfg.interictal_guard_s >= slot) continue;
            const double lo = s * slot + cfg.interictal_guard_s;
            const double hi = (s + 1) * slot - dur - cfg.interictal_guard_s;
            const double start = std::floor(rng.uniform(lo, hi) * 2.0) / 2.0;  // 0.5 s grid
            seizures.push_back({start, start + dur, Label::ictal});
        }

        for (int c = 0; c < 2; ++c) {
            detail::PinkNoise pink;
            const double alpha_phase = rng.uniform(0.0, 2.0 * M_PI);
            const double ch_gain = rng.uniform(0.8, 1.2);
            auto& buf = rec.channels[c];
            for (std::int64_t i = 0; i < n; ++i) {
                const double t = static_cast<double>(i) / sr;
                double v = pink.next(rng.normal()) +
                           cfg.alpha_amplitude * std::sin(2.0 * M_PI * 10.0 * t + alpha_phase);
                for (const auto& sz : seizures) {
                    if (t < sz.start_s || t >= sz.end_s) continue;
                    const double ramp =
                        std::min({1.0, (t - sz.start_s) / cfg.ramp_s, (sz.end_s - t) / cfg.ramp_s});
                    v += ch_gain * burst * std::max(ramp, 0.0) *
                         std::sin(2.0 * M_PI * freq * (t - sz.start_s));
                }
                buf[static_cast<std::size_t>(i)] = static_cast<float>(v);
            }
        }
        rec.intervals = seizures;
        auto inter = derive_interictal_intervals(rec, cfg.interictal_guard_s);
        rec.intervals.insert(rec.intervals.end(), inter.begin(), inter.end());
        normalize_recording(rec);
        patient.recordings.push_back(std::move(rec));
        ds.patients.push_back(std::move(patient));
    }
    return ds;
}

// ---------------------------------------------------------------------------
// EEGD0001 interchange format
// ---------------------------------------------------------------------------

namespace detail {

struct ByteWriter {
    std::vector<unsigned char> buf;
    void raw(const void* p, std::size_t len) {
        const auto* b = static_cast<const unsigned char*>(p);
        buf.insert(buf.end(), b, b + len);
    }
    void u8(std::uint8_t v) { raw(&v, 1); }
    void u32(std::uint32_t v) { raw(&v, 4); }
    void u64(std::uint64_t v) { raw(&v, 8); }
    void f32(float v) { raw(&v, 4); }
    void f64(double v) { raw(&v, 8); }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        raw(s.data(), s.size());
    }
};

struct ByteReader {
    const unsigned char* p;
    const unsigned char* end;
    void raw(void* out, std::size_t len) {
        if (p + len > end) throw FormatError("EEGD0001: truncated payload");
        std::memcpy(out, p, len);
        p += len;
    }
    std::uint8_t u8() {
        std::uint8_t v;
        raw(&v, 1);
        return v;
    }
    std::uint32_t u32() {
        std::uint32_t v;
        raw(&v, 4);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v;
        raw(&v, 8);
        return v;
    }
    float f32() {
        float v;
        raw(&v, 4);
        return v;
    }
    double f64() {
        double v;
        raw(&v, 8);
        return v;
    }
    std::string str() {
        const auto len = u32();
        std::string s(len, '\0');
        raw(s.data(), len);
        return s;
    }
};

}  // namespace detail

inline void write_dataset(const Dataset& ds, const std::string& path) {
    detail::ByteWriter w;
    w.raw("EEGD0001", 8);
    w.u32(1);  // version
    w.u32(static_cast<std::uint32_t>(ds.patients.size()));
    w.str(ds.provenance);
    for (const auto& p : ds.patients) {
        w.str(p.patient_id);
        w.u32(static_cast<std::uint32_t>(p.recordings.size()));
        for (const auto& rec : p.recordings) {
            w.str(rec.id);
            w.u32(static_cast<std::uint32_t>(rec.sample_rate));
            w.f32(rec.norm_scale);
            w.u32(static_cast<std::uint32_t>(rec.channels.size()));
            for (const auto& name : rec.channel_names) w.str(name);
            w.u64(rec.channels.empty() ? 0 : rec.channels[0].size());
            for (const auto& ch : rec.channels)
                for (float v : ch) w.f32(v);
            w.u32(static_cast<std::uint32_t>(rec.intervals.size()));
            for (const auto& iv : rec.intervals) {
                w.f64(iv.start_s);
                w.f64(iv.end_s);
                w.u8(iv.label == Label::ictal ? 1 : 0);
            }
        }
    }
    const std::uint32_t crc = crc32(w.buf.data(), w.buf.size());
    w.u32(crc);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open dataset for writing: " + path);
    f.write(reinterpret_cast<const char*>(w.buf.data()), static_cast<std::streamsize>(w.buf.size()));
    if (!f) throw IoError("dataset write failed: " + path);
}

inline Dataset read_dataset(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open dataset: " + path);
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
    if (buf.size() < 20) throw FormatError("EEGD0001: file too short: " + path);
    std::uint32_t stored_crc;
    std::memcpy(&stored_crc, buf.data() + buf.size() - 4, 4);
    if (crc32(buf.data(), buf.size() - 4) != stored_crc)
        throw FormatError("EEGD0001: checksum mismatch: " + path);
    detail::ByteReader r{buf.data(), buf.data() + buf.size() - 4};
    char magic[8];
    r.raw(magic, 8);
    if (std::memcmp(magic, "EEGD0001", 8) != 0)
        throw FormatError("not an EEGD0001 file: " + path);
    const auto version = r.u32();
    if (version != 1)
        throw FormatError("EEGD0001: unsupported version " + std::to_string(version));
    Dataset ds;
    const auto n_patients = r.u32();
    ds.provenance = r.str();
    for (std::uint32_t i = 0; i < n_patients; ++i) {
        PatientRecord p;
        p.patient_id = r.str();
        const auto n_rec = r.u32();
        for (std::uint32_t j = 0; j < n_rec; ++j) {
            Recording rec;
            rec.id = r.str();
            rec.sample_rate = static_cast<int>(r.u32());
            rec.norm_scale = r.f32();
            const auto n_ch = r.u32();
            for (std::uint32_t c = 0; c < n_ch; ++c) rec.channel_names.push_back(r.str());
            const auto n_samp = r.u64();
            rec.channels.assign(n_ch, std::vector<float>(n_samp));
            for (std::uint32_t c = 0; c < n_ch; ++c)
                for (std::uint64_t s = 0; s < n_samp; ++s) rec.channels[c][s] = r.f32();
            const auto n_iv = r.u32();
            for (std::uint32_t k = 0; k < n_iv; ++k) {
                LabeledInterval iv;
                iv.start_s = r.f64();
                iv.end_s = r.f64();
                iv.label = r.u8() ? Label::ictal : Label::interictal;
                rec.intervals.push_back(iv);
            }
            p.recordings.push_back(std::move(rec));
        }
        ds.patients.push_back(std::move(p));
    }
    return ds;
}

// ---------------------------------------------------------------------------
// EEGS0001 windowed-sample format (synthetic pools and other window sets)
// ---------------------------------------------------------------------------

inline void write_samples(const std::vector<EegSample>& samples, const std::string& path) {
    detail::ByteWriter w;
    w.raw("EEGS0001", 8);
    w.u32(1);  // version
    w.u32(static_cast<std::uint32_t>(samples.size()));
    for (const auto& s : samples) {
        w.str(s.patient_id);
        w.str(s.recording_id);
        w.u32(static_cast<std::uint32_t>(s.channels));
        w.u32(static_cast<std::uint32_t>(s.points));
        w.u8(s.label == Label::ictal ? 1 : 0);
        w.u8(s.origin == Origin::synthetic ? 1 : 0);
        w.f64(s.window_start);
        for (float v : s.values) w.f32(v);
    }
    w.u32(crc32(w.buf.data(), w.buf.size()));
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open sample set for writing: " + path);
    f.write(reinterpret_cast<const char*>(w.buf.data()), static_cast<std::streamsize>(w.buf.size()));
    if (!f) throw IoError("sample set write failed: " + path);
}

inline std::vector<EegSample> read_samples(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open sample set: " + path);
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
    if (buf.size() < 20) throw FormatError("EEGS0001: file too short: " + path);
    std::uint32_t stored_crc;
    std::memcpy(&stored_crc, buf.data() + buf.size() - 4, 4);
    if (crc32(buf.data(), buf.size() - 4) != stored_crc)
        throw FormatError("EEGS0001: checksum mismatch: " + path);
    detail::ByteReader r{buf.data(), buf.data() + buf.size() - 4};
    char magic[8];
    r.raw(magic, 8);
    if (std::memcmp(magic, "EEGS0001", 8) != 0)
        throw FormatError("not an EEGS0001 file: " + path);
    const auto version = r.u32();
    if (version != 1)
        throw FormatError("EEGS0001: unsupported version " + std::to_string(version));
    std::vector<EegSample> samples(r.u32());
    for (auto& s : samples) {
        s.patient_id = r.str();
        s.recording_id = r.str();
        s.channels = static_cast<int>(r.u32());
        s.points = static_cast<int>(r.u32());
        s.label = r.u8() ? Label::ictal : Label::interictal;
        s.origin = r.u8() ? Origin::synthetic : Origin::real;
        s.window_start = r.f64();
        s.values.resize(static_cast<std::size_t>(s.channels) * s.points);
        for (float& v : s.values) v = r.f32();
    }
    return samples;
}

// ---------------------------------------------------------------------------
// Generic CSV ingestion: one file per recording (time,ch1,ch2) plus a sidecar
// interval file (start,end,class). Recordings must be sampled at 256 Hz.
// ---------------------------------------------------------------------------

inline Recording read_csv_recording(const std::string& data_path,
                                    const std::string& interval_path,
                                    double interictal_guard_s = 60.0) {
    std::ifstream f(data_path);
    if (!f) throw IoError("cannot open CSV recording: " + data_path);
    Recording rec;
    rec.id = data_path;
    rec.channel_names = {"ch1", "ch2"};
    rec.channels.assign(2, {});
    std::string line;
    std::getline(f, line);  // header
    std::vector<double> times;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string field;
        double t, c1, c2;
        if (!std::getline(ss, field, ',')) throw FormatError("CSV: bad row in " + data_path);
        t = std::stod(field);
        if (!std::getline(ss, field, ',')) throw FormatError("CSV: bad row in " + data_path);
        c1 = std::stod(field);
        if (!std::getline(ss, field, ',')) throw FormatError("CSV: bad row in " + data_path);
        c2 = std::stod(field);
        times.push_back(t);
        rec.channels[0].push_back(static_cast<float>(c1));
        rec.channels[1].push_back(static_cast<float>(c2));
    }
    if (times.size() < 2) throw FormatError("CSV recording too short: " + data_path);
    const double dt = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
    if (std::abs(1.0 / dt - 256.0) > 0.5)
        throw FormatError("CSV recording is not sampled at 256 Hz: " + data_path);
    rec.sample_rate = 256;

    std::ifstream fi(interval_path);
    if (!fi) throw IoError("cannot open interval sidecar: " + interval_path);
    std::getline(fi, line);  // header
    bool has_interictal = false;
    while (std::getline(fi, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string s0, s1, s2;
        if (!std::getline(ss, s0, ',') || !std::getline(ss, s1, ',') || !std::getline(ss, s2))
            throw FormatError("CSV: bad interval row in " + interval_path);
        LabeledInterval iv;
        iv.start_s = std::stod(s0);
        iv.end_s = std::stod(s1);
        if (s2 == "ictal")
            iv.label = Label::ictal;
        else if (s2 == "interictal") {
            iv.label = Label::interictal;
            has_interictal = true;
        } else
            throw FormatError("CSV: unknown interval class '" + s2 + "'");
        if (iv.start_s < 0 || iv.end_s > rec.duration_s() + 1e-6 || iv.end_s <= iv.start_s)
            throw FormatError("CSV: interval out of recording bounds in " + interval_path);
        rec.intervals.push_back(iv);
    }
    if (!has_interictal) {
        auto inter = derive_interictal_intervals(rec, interictal_guard_s);
        rec.intervals.insert(rec.intervals.end(), inter.begin(), inter.end());
    }
    normalize_recording(rec);
    return rec;
}

}  // namespace ictgan
