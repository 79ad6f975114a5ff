// Feature extractor: 7-level discrete wavelet decomposition, sample /
// permutation / distribution entropies, and Welch band powers. 54 features per
// electrode, 108 per two-channel sample.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ictgan/common.hpp"
#include "ictgan/data.hpp"

namespace ictgan {

// ---------------------------------------------------------------------------
// Discrete wavelet transform (Daubechies-4, periodized — orthogonal, so the
// transform is exactly invertible and energy preserving)
// ---------------------------------------------------------------------------

namespace detail {

// Orthonormal db4 (8-tap) analysis lowpass.
inline const std::array<double, 8>& db4_lowpass() {
    static const std::array<double, 8> h = {
        0.230377813308855230, 0.714846570552541500,  0.630880767929590400,
        -0.027983769416983849, -0.187034811718881140, 0.030841381835986965,
        0.032883011666982945,  -0.010597401784997278};
    return h;
}

inline std::array<double, 8> db4_highpass() {
    const auto& h = db4_lowpass();
    std::array<double, 8> g;
    for (int k = 0; k < 8; ++k) g[k] = (k % 2 == 0 ? 1.0 : -1.0) * h[7 - k];
    return g;
}

}  // namespace detail

struct WaveletDecomposition {
    std::vector<std::vector<double>> details;  // d1..dL
    std::vector<double> approx;                // aL
    int levels = 0;

    const std::vector<double>& detail(int level) const {
        if (level < 1 || level > levels) throw DimensionError("wavelet: bad detail level");
        return details[static_cast<std::size_t>(level) - 1];
    }
};

inline WaveletDecomposition dwt(std::span<const double> signal, int levels = 7) {
    const std::size_t n = signal.size();
    if (levels < 1) throw ConfigError("dwt: levels must be >= 1");
    if (n == 0 || n % (std::size_t{1} << levels) != 0)
        throw DimensionError("dwt: signal length " + std::to_string(n) +
                             " not divisible by 2^" + std::to_string(levels));
    const auto& h = detail::db4_lowpass();
    const auto g = detail::db4_highpass();
    WaveletDecomposition dec;
    dec.levels = levels;
    std::vector<double> a(signal.begin(), signal.end());
    for (int lv = 0; lv < levels; ++lv) {
        const std::size_t len = a.size(), half = len / 2;
        std::vector<double> next(half), d(half);
        for (std::size_t i = 0; i < half; ++i) {
            double sa = 0, sd = 0;
            for (int k = 0; k < 8; ++k) {
                const double x = a[(2 * i + static_cast<std::size_t>(k)) % len];
                sa += h[k] * x;
                sd += g[k] * x;
            }
            next[i] = sa;
            d[i] = sd;
        }
        dec.details.push_back(std::move(d));
        a = std::move(next);
    }
    dec.approx = std::move(a);
    return dec;
}

inline std::vector<double> idwt(const WaveletDecomposition& dec) {
    const auto& h = detail::db4_lowpass();
    const auto g = detail::db4_highpass();
    std::vector<double> a = dec.approx;
    for (int lv = dec.levels - 1; lv >= 0; --lv) {
        const auto& d = dec.details[static_cast<std::size_t>(lv)];
        if (d.size() != a.size()) throw DimensionError("idwt: inconsistent decomposition");
        const std::size_t len = 2 * a.size();
        std::vector<double> x(len, 0.0);
        for (std::size_t i = 0; i < a.size(); ++i)
            for (int k = 0; k < 8; ++k) {
                const std::size_t nidx = (2 * i + static_cast<std::size_t>(k)) % len;
                x[nidx] += h[k] * a[i] + g[k] * d[i];
            }
        a = std::move(x);
    }
    return a;
}

// ---------------------------------------------------------------------------
// Entropies
// ---------------------------------------------------------------------------

// Population standard deviation.
inline double series_std(std::span<const double> x) {
    if (x.empty()) return 0.0;
    double mean = 0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double var = 0;
    for (double v : x) var += (v - mean) * (v - mean);
    return std::sqrt(var / static_cast<double>(x.size()));
}

// -ln(A/B) with A/B = matching (m+1)/m templates (Chebyshev distance < r,
// self-matches excluded). Degenerate cases return the conventional upper bound
// ln((N-m-1)(N-m)/2) with a warning; a zero-variance series returns 0.
inline double sample_entropy(std::span<const double> x, int m, double k,
                             WarningLog* warnings = nullptr) {
    const int n = static_cast<int>(x.size());
    const double cap =
        std::log(std::max(1.0, 0.5 * static_cast<double>(n - m - 1) * (n - m)));
    if (n <= m + 1) {
        warn(warnings, "sample_entropy: series of length " + std::to_string(n) +
                           " too short for m=" + std::to_string(m) + ", returning cap");
        return cap;
    }
    const double sd = series_std(x);
    if (sd == 0.0) return 0.0;  // all templates match
    const double r = k * sd;
    const int t = n - m;  // template count for both lengths
    std::int64_t a = 0, b = 0;
    for (int i = 0; i < t; ++i) {
        for (int j = i + 1; j < t; ++j) {
            double dist = 0;
            for (int u = 0; u < m; ++u) dist = std::max(dist, std::abs(x[i + u] - x[j + u]));
            if (dist < r) {
                ++b;
                if (std::max(dist, std::abs(x[i + m] - x[j + m])) < r) ++a;
            }
        }
    }
    if (a == 0 || b == 0) {
        warn(warnings, "sample_entropy: no matching templates, returning cap");
        return cap;
    }
    return -std::log(static_cast<double>(a) / static_cast<double>(b));
}

// Shannon entropy of ordinal patterns (delay 1, ties stable by index),
// normalized by ln(n!) into [0, 1].
inline double permutation_entropy(std::span<const double> x, int order,
                                  WarningLog* warnings = nullptr) {
    const int n = static_cast<int>(x.size());
    if (order < 2) throw ConfigError("permutation_entropy: order must be >= 2");
    if (n < order) {
        warn(warnings, "permutation_entropy: series shorter than order, returning 0");
        return 0.0;
    }
    std::map<std::vector<int>, std::int64_t> counts;
    std::vector<int> perm(static_cast<std::size_t>(order));
    for (int i = 0; i + order <= n; ++i) {
        for (int j = 0; j < order; ++j) perm[static_cast<std::size_t>(j)] = j;
        std::stable_sort(perm.begin(), perm.end(),
                         [&](int a, int b) { return x[i + a] < x[i + b]; });
        counts[perm] += 1;
    }
    const double total = static_cast<double>(n - order + 1);
    double ent = 0;
    for (const auto& [pat, c] : counts) {
        const double p = static_cast<double>(c) / total;
        ent -= p * std::log(p);
    }
    double log_fact = 0;
    for (int i = 2; i <= order; ++i) log_fact += std::log(static_cast<double>(i));
    return log_fact > 0 ? ent / log_fact : 0.0;
}

struct DistributionEntropies {
    double shannon = 0;
    double renyi2 = 0;
    double tsallis2 = 0;
};

// 10-bin equal-width histogram estimate; Renyi and Tsallis of order 2.
inline DistributionEntropies distribution_entropies(std::span<const double> x) {
    if (x.empty()) throw DimensionError("distribution_entropies: empty series");
    constexpr int kBins = 10;
    const auto [mn_it, mx_it] = std::minmax_element(x.begin(), x.end());
    const double mn = *mn_it, mx = *mx_it;
    if (mx == mn) return {};  // single occupied bin
    std::array<std::int64_t, kBins> counts{};
    for (double v : x) {
        int b = static_cast<int>((v - mn) / (mx - mn) * kBins);
        counts[static_cast<std::size_t>(std::clamp(b, 0, kBins - 1))] += 1;
    }
    double shannon = 0, sum_p2 = 0;
    for (std::int64_t c : counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / static_cast<double>(x.size());
        shannon -= p * std::log(p);
        sum_p2 += p * p;
    }
    return {shannon, -std::log(sum_p2), 1.0 - sum_p2};
}

// ---------------------------------------------------------------------------
// Spectral band power (Welch, Hamming window, 50% overlap)
// ---------------------------------------------------------------------------

namespace detail {

inline void fft_radix2(std::vector<std::complex<double>>& a) {
    const std::size_t n = a.size();
    if (n == 0 || (n & (n - 1)) != 0) throw DimensionError("fft: length must be a power of two");
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * M_PI / static_cast<double>(len);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t j = 0; j < len / 2; ++j) {
                const auto u = a[i + j];
                const auto v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

}  // namespace detail

// One-sided Welch power spectral density. Segment length is the largest power
// of two <= min(256, N). Returns (psd, delta_f).
inline std::pair<std::vector<double>, double> welch_psd(std::span<const double> x,
                                                       double fs = 256.0) {
    const std::size_t n = x.size();
    if (n < 2) throw DimensionError("welch_psd: series too short");
    std::size_t seg = 1;
    while (seg * 2 <= std::min<std::size_t>(256, n)) seg *= 2;
    const std::size_t hop = seg / 2;

    std::vector<double> window(seg);
    double u = 0;
    for (std::size_t i = 0; i < seg; ++i) {
        window[i] = 0.54 - 0.46 * std::cos(2.0 * M_PI * static_cast<double>(i) /
                                           static_cast<double>(seg - 1));
        u += window[i] * window[i];
    }
    u /= static_cast<double>(seg);

    std::vector<double> psd(seg / 2 + 1, 0.0);
    int n_segments = 0;
    for (std::size_t start = 0; start + seg <= n; start += hop) {
        std::vector<std::complex<double>> buf(seg);
        for (std::size_t i = 0; i < seg; ++i) buf[i] = x[start + i] * window[i];
        detail::fft_radix2(buf);
        for (std::size_t k = 0; k <= seg / 2; ++k) {
            double p = std::norm(buf[k]) / (fs * static_cast<double>(seg) * u);
            if (k != 0 && k != seg / 2) p *= 2.0;  // one-sided
            psd[k] += p;
        }
        ++n_segments;
    }
    for (auto& p : psd) p /= static_cast<double>(n_segments);
    return {psd, fs / static_cast<double>(seg)};
}

struct BandPower {
    double absolute = 0;
    double relative = 0;
};

// Integrated PSD over [f_lo, f_hi) Hz; relative = band / total.
inline BandPower band_power(std::span<const double> x, double f_lo, double f_hi,
                            double fs = 256.0) {
    if (f_lo < 0 || f_hi > fs / 2 || f_hi < f_lo)
        throw ConfigError("band_power: band [" + std::to_string(f_lo) + "," +
                          std::to_string(f_hi) + "] outside [0, " + std::to_string(fs / 2) + "]");
    const auto [psd, df] = welch_psd(x, fs);
    double total = 0, band = 0;
    for (std::size_t k = 0; k < psd.size(); ++k) {
        const double f = static_cast<double>(k) * df;
        const double p = psd[k] * df;
        total += p;
        if (f >= f_lo && f < f_hi) band += p;
    }
    return {band, total > 0 ? band / total : 0.0};
}

inline double total_power(std::span<const double> x, double fs = 256.0) {
    const auto [psd, df] = welch_psd(x, fs);
    double total = 0;
    for (double p : psd) total += p * df;
    return total;
}

// ---------------------------------------------------------------------------
// Feature vector
// ---------------------------------------------------------------------------

struct FeatureConfig {
    // Entropies run on detail coefficient vectors by default; optionally on
    // the per-level reconstructed subband signals instead.
    bool entropies_on_reconstruction = false;
};

struct FeatureVector {
    std::vector<double> values;  // 108, canonical order
};

inline constexpr int kFeaturesPerElectrode = 54;

namespace detail {

struct Band {
    const char* name;
    double lo, hi;
};

inline const std::array<Band, 8>& feature_bands() {
    static const std::array<Band, 8> bands = {{{"delta", 0.5, 4.0},
                                               {"theta", 4.0, 8.0},
                                               {"alpha", 8.0, 12.0},
                                               {"beta", 13.0, 30.0},
                                               {"gamma", 30.0, 45.0},
                                               {"b0_01", 0.0, 0.1},
                                               {"b01_05", 0.1, 0.5},
                                               {"b12_13", 12.0, 13.0}}};
    return bands;
}

// Reconstruction of a single detail level back at full length.
inline std::vector<double> reconstruct_level(const WaveletDecomposition& dec, int level) {
    WaveletDecomposition only;
    only.levels = dec.levels;
    only.approx.assign(dec.approx.size(), 0.0);
    for (int lv = 1; lv <= dec.levels; ++lv) {
        const auto& d = dec.detail(lv);
        only.details.emplace_back(d.size(), 0.0);
        if (lv == level) only.details.back() = d;
    }
    return idwt(only);
}

}  // namespace detail

inline std::vector<std::string> feature_names() {
    std::vector<std::string> names;
    for (int ch = 1; ch <= 2; ++ch) {
        const std::string p = "ch" + std::to_string(ch) + "_";
        for (int lv : {6, 7})
            for (const char* k : {"k020", "k035"})
                names.push_back(p + "sampen_d" + std::to_string(lv) + "_" + k);
        for (int lv = 3; lv <= 7; ++lv)
            for (int n : {3, 5, 7})
                names.push_back(p + "perm_d" + std::to_string(lv) + "_n" + std::to_string(n));
        for (int lv = 3; lv <= 7; ++lv)
            for (const char* e : {"shannon", "renyi", "tsallis"})
                names.push_back(p + std::string(e) + "_d" + std::to_string(lv));
        for (const char* e : {"shannon", "renyi", "tsallis"}) names.push_back(p + e + "_raw");
        names.push_back(p + "total_power");
        for (const auto& b : detail::feature_bands()) {
            names.push_back(p + "power_" + b.name);
            names.push_back(p + "relpower_" + b.name);
        }
    }
    return names;
}

// 54 named features per electrode in the canonical order of feature_names().
// Pure function of the sample values; warnings (degenerate entropies) are
// collected, not thrown.
inline FeatureVector extract_features(const EegSample& sample, const FeatureConfig& cfg = {},
                                      WarningLog* warnings = nullptr) {
    if (sample.channels != 2) throw DimensionError("extract_features: expected 2 channels");
    FeatureVector fv;
    fv.values.reserve(2 * kFeaturesPerElectrode);
    for (int ch = 0; ch < 2; ++ch) {
        std::vector<double> x(sample.channel(ch), sample.channel(ch) + sample.points);
        const auto dec = dwt(x, 7);
        auto level_series = [&](int lv) {
            return cfg.entropies_on_reconstruction ? detail::reconstruct_level(dec, lv)
                                                   : dec.detail(lv);
        };
        for (int lv : {6, 7}) {
            const auto series = level_series(lv);
            fv.values.push_back(sample_entropy(series, 2, 0.20, warnings));
            fv.values.push_back(sample_entropy(series, 2, 0.35, warnings));
        }
        for (int lv = 3; lv <= 7; ++lv) {
            const auto series = level_series(lv);
            for (int n : {3, 5, 7})
                fv.values.push_back(permutation_entropy(series, n, warnings));
        }
        for (int lv = 3; lv <= 7; ++lv) {
            const auto e = distribution_entropies(level_series(lv));
            fv.values.push_back(e.shannon);
            fv.values.push_back(e.renyi2);
            fv.values.push_back(e.tsallis2);
        }
        {
            const auto e = distribution_entropies(x);
            fv.values.push_back(e.shannon);
            fv.values.push_back(e.renyi2);
            fv.values.push_back(e.tsallis2);
        }
        fv.values.push_back(total_power(x));
        for (const auto& b : detail::feature_bands()) {
            const auto bp = band_power(x, b.lo, b.hi);
            fv.values.push_back(bp.absolute);
            fv.values.push_back(bp.relative);
        }
    }
    return fv;
}

// Feature matrix CSV: canonical header plus label/patient/origin columns.
inline void write_feature_csv(const std::string& path, const std::vector<EegSample>& samples,
                              const std::vector<FeatureVector>& features) {
    if (samples.size() != features.size())
        throw DimensionError("write_feature_csv: row count mismatch");
    std::ofstream f(path);
    if (!f) throw IoError("cannot open feature CSV: " + path);
    f << "patient,label,origin";
    for (const auto& n : feature_names()) f << "," << n;
    f << "\n";
    f.precision(12);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        f << samples[i].patient_id << "," << to_string(samples[i].label) << ","
          << to_string(samples[i].origin);
        for (double v : features[i].values) f << "," << v;
        f << "\n";
    }
    if (!f) throw IoError("feature CSV write failed: " + path);
}

}  // namespace ictgan
