#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ellreg/matrix.hpp"
#include "ellreg/rng.hpp"

namespace ellreg {

enum class TaskKind { Regression, Classification };

/// Per-feature-column (min, max) used by min-max scaling.
struct Normalization {
    std::vector<double> min;
    std::vector<double> max;
};

struct Dataset {
    Matrix features;  // n x d
    Matrix targets;   // n x k; one-hot rows for classification
    std::optional<Normalization> normalization;
    TaskKind task = TaskKind::Regression;
    std::size_t num_classes = 0;

    std::size_t size() const noexcept { return features.rows(); }
    std::size_t feature_dim() const noexcept { return features.cols(); }
    std::size_t target_dim() const noexcept { return targets.cols(); }

    /// Rows (x, y) of the joint data space.
    Matrix joint() const;

    /// Class index (argmax of the one-hot row) per sample; classification only.
    std::vector<std::size_t> labels() const;
};

Dataset subset(const Dataset& ds, std::span<const std::size_t> rows);

/// Two interleaved half circles with n/2 points each (class 0 on the upper arc),
/// plus N(0, noise^2) jitter on both coordinates.
Dataset two_moons(std::size_t n, double noise, RngStream rng);

/// y = sin(2 pi x) + noise * N(0, 1) with x ~ U[0, 1].
Dataset synthetic_sine(std::size_t n, double noise, RngStream rng);

double sine_target(double x) noexcept;

struct CsvOptions {
    std::vector<std::string> target_columns;
    bool normalize = true;
    /// Fill empty / NA / ? cells with the column mean instead of rejecting the row.
    bool mean_pad = false;
};

/// Header row then comma-separated decimal rows. Every non-target column is a feature.
Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options);

/// Min-max statistics of each column; constant columns keep min == max.
Normalization fit_normalization(const Matrix& features);
/// (x - min) / (max - min), or 0 for constant columns.
Matrix normalize(const Matrix& features, const Normalization& norm);
Matrix denormalize(const Matrix& features, const Normalization& norm);

/// Disjoint subsets with sizes given by rounded cumulative fractions of a seeded shuffle.
std::vector<Dataset> split(const Dataset& ds, std::span<const double> fractions, RngStream rng);

/// The index partition used by split().
std::vector<std::vector<std::size_t>> split_indices(std::size_t n, std::span<const double> fractions,
                                                    RngStream rng);

}  // namespace ellreg
