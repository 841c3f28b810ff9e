#include "dac/dataset.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "dac/binio.hpp"
#include "dac/errors.hpp"
#include "dac/rng.hpp"

namespace dac {

namespace {
constexpr char kDataMagic[8] = {'D', 'A', 'C', 'D', 'A', 'T', 'A', '1'};
constexpr std::uint32_t kDataVersion = 1;

std::string fmt(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}
}  // namespace

void validate(const NoisyDataset& ds) {
    if (ds.k < 2) throw InvalidInputError("dataset needs k >= 2 classes");
    const std::size_t n = ds.n();
    if (ds.labels.size() != n || ds.original_labels.size() != n || ds.flags.size() != n) {
        throw InvalidInputError("dataset arrays disagree on sample count");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (ds.labels[i] < 0 || ds.labels[i] >= ds.k || ds.original_labels[i] < 0 ||
            ds.original_labels[i] >= ds.k) {
            throw InvalidInputError("label out of range");
        }
        if (ds.flags[i] & ~(kFlagRandomized | kFlagStructured)) {
            throw InvalidInputError("unknown flag bits");
        }
    }
    for (double x : ds.features.values()) {
        if (!std::isfinite(x)) throw InvalidInputError("non-finite feature value");
    }
}

NoisyDataset from_features_labels(Matrix features, std::vector<std::int32_t> labels,
                                  std::int32_t k) {
    NoisyDataset ds;
    ds.features = std::move(features);
    ds.labels = std::move(labels);
    ds.original_labels = ds.labels;
    ds.flags.assign(ds.labels.size(), 0);
    ds.k = k;
    ds.description = "unlabeled-provenance";
    ds.has_ground_truth = false;
    validate(ds);
    return ds;
}

NoisyDataset subset(const NoisyDataset& ds, std::span<const std::size_t> rows) {
    NoisyDataset out;
    out.features = Matrix(rows.size(), ds.d());
    out.labels.reserve(rows.size());
    out.original_labels.reserve(rows.size());
    out.flags.reserve(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const std::size_t i = rows[r];
        if (i >= ds.n()) throw InvalidInputError("subset row index out of range");
        auto src = ds.features.row(i);
        std::copy(src.begin(), src.end(), out.features.row(r).begin());
        out.labels.push_back(ds.labels[i]);
        out.original_labels.push_back(ds.original_labels[i]);
        out.flags.push_back(ds.flags[i]);
    }
    out.k = ds.k;
    out.description = ds.description + "+subset(n=" + std::to_string(rows.size()) + ")";
    out.has_ground_truth = ds.has_ground_truth;
    return out;
}

NoisyDataset gen_blobs(std::int32_t k, std::size_t d, std::size_t n_per_class, double separation,
                       std::uint64_t seed) {
    if (k < 2) throw ConfigError("gen_blobs: k must be >= 2");
    if (d < 2) throw ConfigError("gen_blobs: d must be >= 2 to place centers on a circle");
    if (!(separation > 0.0) || !std::isfinite(separation)) {
        throw ConfigError("gen_blobs: separation must be positive");
    }
    if (n_per_class == 0) throw ConfigError("gen_blobs: n_per_class must be positive");
    const std::size_t n = n_per_class * static_cast<std::size_t>(k);
    NoisyDataset ds;
    ds.k = k;
    ds.features = Matrix(n, d);
    ds.labels.resize(n);
    // Adjacent centers on a circle of radius r are 2 r sin(pi / k) apart.
    const double radius = separation / (2.0 * std::sin(std::numbers::pi / k));
    Rng rng(seed);
    std::size_t row = 0;
    for (std::int32_t c = 0; c < k; ++c) {
        const double angle = 2.0 * std::numbers::pi * c / k;
        const double cx = radius * std::cos(angle);
        const double cy = radius * std::sin(angle);
        for (std::size_t s = 0; s < n_per_class; ++s, ++row) {
            auto f = ds.features.row(row);
            for (std::size_t t = 0; t < d; ++t) f[t] = rng.normal();
            f[0] += cx;
            f[1] += cy;
            ds.labels[row] = c;
        }
    }
    ds.original_labels = ds.labels;
    ds.flags.assign(n, 0);
    ds.description = "blobs(k=" + std::to_string(k) + ",d=" + std::to_string(d) +
                     ",n_per_class=" + std::to_string(n_per_class) + ",sep=" + fmt(separation) +
                     ",seed=" + std::to_string(seed) + ")";
    return ds;
}

namespace {
void check_fraction(double fraction, const char* what) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) {
        throw InvalidInputError(std::string(what) + ": fraction must lie in [0, 1]");
    }
}
}  // namespace

NoisyDataset inject_uniform(NoisyDataset ds, double fraction, std::uint64_t seed) {
    validate(ds);
    check_fraction(fraction, "inject_uniform");
    Rng rng(seed);
    const std::size_t m =
        static_cast<std::size_t>(fraction * static_cast<double>(ds.n()));
    const auto picked = rng.sample_without_replacement(ds.n(), m);
    for (std::size_t i : picked) {
        ds.labels[i] = static_cast<std::int32_t>(rng.below(static_cast<std::size_t>(ds.k)));
        ds.flags[i] |= kFlagRandomized;
    }
    ds.description += "+uniform(fraction=" + fmt(fraction) + ",seed=" + std::to_string(seed) + ")";
    return ds;
}

NoisyDataset inject_class_flips(NoisyDataset ds, std::span<const std::int32_t> flip_map,
                                double eta, std::uint64_t seed) {
    validate(ds);
    check_fraction(eta, "inject_class_flips");
    if (flip_map.size() != static_cast<std::size_t>(ds.k)) {
        throw InvalidInputError("flip map must have one entry per class");
    }
    for (std::int32_t t : flip_map) {
        if (t < 0 || t >= ds.k) throw InvalidInputError("flip map entry out of range");
    }
    Rng rng(seed);
    for (std::size_t i = 0; i < ds.n(); ++i) {
        if (rng.uniform01() < eta) {
            const std::int32_t flipped = flip_map[static_cast<std::size_t>(ds.labels[i])];
            if (flipped != ds.labels[i]) {
                ds.labels[i] = flipped;
                ds.flags[i] |= kFlagRandomized;
            }
        }
    }
    ds.description += "+class_flips(eta=" + fmt(eta) + ",seed=" + std::to_string(seed) + ")";
    return ds;
}

NoisyDataset inject_class_dependent_circular(NoisyDataset ds, double eta, std::uint64_t seed) {
    std::vector<std::int32_t> flip_map(static_cast<std::size_t>(ds.k));
    for (std::int32_t c = 0; c < ds.k; ++c) flip_map[static_cast<std::size_t>(c)] = (c + 1) % ds.k;
    return inject_class_flips(std::move(ds), flip_map, eta, seed);
}

NoisyDataset inject_smudge(NoisyDataset ds, double fraction, double magnitude, std::size_t width,
                           std::uint64_t seed) {
    validate(ds);
    check_fraction(fraction, "inject_smudge");
    if (width == 0 || width > ds.d()) {
        throw InvalidInputError("inject_smudge: width must lie in 1..d");
    }
    if (!std::isfinite(magnitude)) throw InvalidInputError("inject_smudge: non-finite magnitude");
    Rng rng(seed);
    const std::size_t m =
        static_cast<std::size_t>(fraction * static_cast<double>(ds.n()));
    const auto picked = rng.sample_without_replacement(ds.n(), m);
    for (std::size_t i : picked) {
        auto f = ds.features.row(i);
        for (std::size_t t = 0; t < width; ++t) f[t] = magnitude;
        ds.labels[i] = static_cast<std::int32_t>(rng.below(static_cast<std::size_t>(ds.k)));
        ds.flags[i] |= kFlagRandomized | kFlagStructured;
    }
    ds.description += "+smudge(fraction=" + fmt(fraction) + ",magnitude=" + fmt(magnitude) +
                      ",width=" + std::to_string(width) + ",seed=" + std::to_string(seed) + ")";
    return ds;
}

NoisyDataset inject_degradation(NoisyDataset ds, double fraction, double blend_lambda,
                                std::uint64_t seed) {
    validate(ds);
    check_fraction(fraction, "inject_degradation");
    if (!(blend_lambda >= 0.0 && blend_lambda <= 1.0)) {
        throw InvalidInputError("inject_degradation: blend_lambda must lie in [0, 1]");
    }
    if (ds.n() == 0) return ds;
    // Global feature mean over the untouched dataset.
    std::vector<double> mean(ds.d(), 0.0);
    for (std::size_t i = 0; i < ds.n(); ++i) {
        auto f = ds.features.row(i);
        for (std::size_t t = 0; t < ds.d(); ++t) mean[t] += f[t];
    }
    for (double& v : mean) v /= static_cast<double>(ds.n());
    Rng rng(seed);
    const std::size_t m =
        static_cast<std::size_t>(fraction * static_cast<double>(ds.n()));
    const auto picked = rng.sample_without_replacement(ds.n(), m);
    for (std::size_t i : picked) {
        auto f = ds.features.row(i);
        for (std::size_t t = 0; t < ds.d(); ++t) {
            f[t] = (1.0 - blend_lambda) * f[t] + blend_lambda * mean[t];
        }
        ds.labels[i] = static_cast<std::int32_t>(rng.below(static_cast<std::size_t>(ds.k)));
        ds.flags[i] |= kFlagRandomized | kFlagStructured;
    }
    ds.description += "+degradation(fraction=" + fmt(fraction) + ",lambda=" + fmt(blend_lambda) +
                      ",seed=" + std::to_string(seed) + ")";
    return ds;
}

NoisyDataset inject_class_randomization(NoisyDataset ds, std::int32_t target_class,
                                        std::uint64_t seed) {
    validate(ds);
    if (target_class < 0 || target_class >= ds.k) {
        throw InvalidInputError("inject_class_randomization: target class out of range");
    }
    Rng rng(seed);
    for (std::size_t i = 0; i < ds.n(); ++i) {
        if (ds.labels[i] == target_class) {
            ds.labels[i] = static_cast<std::int32_t>(rng.below(static_cast<std::size_t>(ds.k)));
            ds.flags[i] |= kFlagRandomized;
        }
    }
    ds.description += "+class_randomization(target=" + std::to_string(target_class) +
                      ",seed=" + std::to_string(seed) + ")";
    return ds;
}

void save_dataset(const std::filesystem::path& path, const NoisyDataset& ds) {
    validate(ds);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open dataset for writing: " + path.string());
    binio::Writer w(out);
    w.bytes(kDataMagic, sizeof(kDataMagic));
    w.u32(kDataVersion);
    w.u32(static_cast<std::uint32_t>(ds.k));
    w.u32(static_cast<std::uint32_t>(ds.d()));
    w.u64(ds.n());
    w.str(ds.description);
    for (double x : ds.features.values()) w.f64(x);
    for (std::int32_t v : ds.labels) w.i32(v);
    for (std::int32_t v : ds.original_labels) w.i32(v);
    for (std::uint8_t f : ds.flags) w.u8(f);
    out.flush();
    if (!out) throw IoError("write failed: " + path.string());
}

NoisyDataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open dataset: " + path.string());
    binio::Reader r(in);
    char magic[8];
    r.bytes(magic, sizeof(magic));
    if (!std::equal(magic, magic + 8, kDataMagic)) {
        throw ParseError("not a dataset file (bad magic)", 0);
    }
    const std::uint32_t version = r.u32();
    if (version != kDataVersion) {
        throw VersionError("unsupported dataset version " + std::to_string(version));
    }
    const std::uint32_t k = r.u32();
    if (k < 2 || k > (1u << 20)) throw ParseError("implausible class count", r.offset() - 4);
    const std::uint32_t d = r.u32();
    if (d == 0 || d > (1u << 24)) throw ParseError("implausible feature width", r.offset() - 4);
    const std::uint64_t n = r.u64();
    if (n > (1ull << 32)) throw ParseError("implausible sample count", r.offset() - 8);

    NoisyDataset ds;
    ds.k = static_cast<std::int32_t>(k);
    ds.description = r.str(1u << 20);
    ds.features = Matrix(static_cast<std::size_t>(n), d);
    for (double& x : ds.features.values()) {
        const std::size_t at = r.offset();
        x = r.f64();
        if (!std::isfinite(x)) throw ParseError("non-finite feature value", at);
    }
    ds.labels.resize(static_cast<std::size_t>(n));
    for (std::int32_t& v : ds.labels) {
        const std::size_t at = r.offset();
        v = r.i32();
        if (v < 0 || v >= ds.k) throw ParseError("label out of range", at);
    }
    ds.original_labels.resize(static_cast<std::size_t>(n));
    for (std::int32_t& v : ds.original_labels) {
        const std::size_t at = r.offset();
        v = r.i32();
        if (v < 0 || v >= ds.k) throw ParseError("original label out of range", at);
    }
    ds.flags.resize(static_cast<std::size_t>(n));
    for (std::uint8_t& f : ds.flags) {
        const std::size_t at = r.offset();
        f = r.u8();
        if (f & ~(kFlagRandomized | kFlagStructured)) throw ParseError("unknown flag bits", at);
    }
    r.expect_eof();
    return ds;
}

}  // namespace dac
