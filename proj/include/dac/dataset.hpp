#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dac/matrix.hpp"

namespace dac {

inline constexpr std::uint8_t kFlagRandomized = 0x01;  // label was redrawn/flipped
inline constexpr std::uint8_t kFlagStructured = 0x02;  // features were overwritten/blended

/// Labeled dataset with corruption provenance. `labels` is what training
/// sees; `original_labels` and the per-sample flags record what the noise
/// injectors did, so cleaning quality can be scored afterwards.
struct NoisyDataset {
    Matrix features;  // n x d
    std::vector<std::int32_t> labels;
    std::vector<std::int32_t> original_labels;
    std::vector<std::uint8_t> flags;
    std::int32_t k = 0;
    std::string description;
    /// False for datasets built from bare features+labels; provenance-based
    /// reports degrade to absent in that case.
    bool has_ground_truth = true;

    std::size_t n() const { return features.rows(); }
    std::size_t d() const { return features.cols(); }
    bool randomized(std::size_t i) const { return flags[i] & kFlagRandomized; }
    bool structured(std::size_t i) const { return flags[i] & kFlagStructured; }
};

/// Throws InvalidInputError if the dataset is internally inconsistent.
void validate(const NoisyDataset& ds);

/// Dataset from bare features and labels (no corruption provenance).
NoisyDataset from_features_labels(Matrix features, std::vector<std::int32_t> labels,
                                  std::int32_t k);

/// Rows of `ds` at `rows`, in the given order.
NoisyDataset subset(const NoisyDataset& ds, std::span<const std::size_t> rows);

/// Synthetic Gaussian blobs: class centers are placed on a circle in the
/// first two feature coordinates so that adjacent centers are `separation`
/// apart, remaining coordinates are zero, and unit-variance Gaussian noise is
/// added on every coordinate. Samples are laid out class-major. Requires
/// k >= 2 and d >= 2.
NoisyDataset gen_blobs(std::int32_t k, std::size_t d, std::size_t n_per_class, double separation,
                       std::uint64_t seed);

/// Uniform label noise: floor(fraction * n) samples drawn without
/// replacement get their label redrawn uniformly over all k classes (the
/// redraw may reproduce the original label). Every visited sample is flagged
/// randomized.
NoisyDataset inject_uniform(NoisyDataset ds, double fraction, std::uint64_t seed);

/// Class-dependent label noise: each sample independently flips with
/// probability eta to flip_map[current label]. Samples whose label actually
/// changed are flagged randomized. flip_map must have k entries in 0..k-1.
NoisyDataset inject_class_flips(NoisyDataset ds, std::span<const std::int32_t> flip_map,
                                double eta, std::uint64_t seed);

/// Circular class-dependent noise: flip_map[c] = (c + 1) mod k.
NoisyDataset inject_class_dependent_circular(NoisyDataset ds, double eta, std::uint64_t seed);

/// Structured corruption: floor(fraction * n) samples get their first
/// `width` feature coordinates overwritten with `magnitude` and their label
/// redrawn uniformly. Flags: randomized + structured.
NoisyDataset inject_smudge(NoisyDataset ds, double fraction, double magnitude, std::size_t width,
                           std::uint64_t seed);

/// Structured corruption toward the global feature mean (computed before any
/// sample is touched): x <- (1 - blend_lambda) * x + blend_lambda * mean,
/// label redrawn uniformly. Flags: randomized + structured.
NoisyDataset inject_degradation(NoisyDataset ds, double fraction, double blend_lambda,
                                std::uint64_t seed);

/// Randomizes the labels of every sample currently labeled `target_class`
/// (uniform redraw over all k). Flags visited samples randomized.
NoisyDataset inject_class_randomization(NoisyDataset ds, std::int32_t target_class,
                                        std::uint64_t seed);

/// Versioned binary serialization; load validates everything and throws
/// ParseError (with byte offset) / VersionError rather than returning a
/// partially filled dataset.
void save_dataset(const std::filesystem::path& path, const NoisyDataset& ds);
NoisyDataset load_dataset(const std::filesystem::path& path);

}  // namespace dac
