#include "ellreg/stats.hpp"

#include <cmath>

namespace ellreg {

double pairwise_sum(std::span<const double> values) noexcept {
    constexpr std::size_t kBlock = 32;
    if (values.size() <= kBlock) {
        double s = 0.0;
        for (double v : values) s += v;
        return s;
    }
    const std::size_t half = values.size() / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

namespace {

bool all_equal(std::span<const double> values) noexcept {
    for (double v : values) {
        if (v != values.front()) return false;
    }
    return true;
}

}  // namespace

double mean(std::span<const double> values) noexcept {
    if (values.empty()) return 0.0;
    if (all_equal(values)) return values.front();
    return pairwise_sum(values) / static_cast<double>(values.size());
}

double sample_std(std::span<const double> values) noexcept {
    if (values.size() < 2 || all_equal(values)) return 0.0;
    const double m = mean(values);
    double ss = 0.0;
    for (double v : values) ss += (v - m) * (v - m);
    return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

MeanStd mean_std(std::span<const double> values) noexcept {
    return {mean(values), sample_std(values)};
}

}  // namespace ellreg
