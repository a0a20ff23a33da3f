#pragma once

#include <cstddef>
#include <span>

namespace ellreg {

/// Pairwise (cascade) summation. Result depends only on the input order.
double pairwise_sum(std::span<const double> values) noexcept;

double mean(std::span<const double> values) noexcept;

/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
double sample_std(std::span<const double> values) noexcept;

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
};

MeanStd mean_std(std::span<const double> values) noexcept;

}  // namespace ellreg
