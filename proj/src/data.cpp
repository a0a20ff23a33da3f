#include "ellreg/data.hpp"

#include <algorithm>
#include <cmath>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "ellreg/error.hpp"

namespace ellreg {

Matrix Dataset::joint() const { return hconcat(features, targets); }

std::vector<std::size_t> Dataset::labels() const {
    std::vector<std::size_t> out(size());
    for (std::size_t i = 0; i < size(); ++i) {
        auto r = targets.row(i);
        out[i] = static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin());
    }
    return out;
}

Dataset subset(const Dataset& ds, std::span<const std::size_t> rows) {
    Dataset out;
    out.features = ds.features.select_rows(rows);
    out.targets = ds.targets.select_rows(rows);
    out.normalization = ds.normalization;
    out.task = ds.task;
    out.num_classes = ds.num_classes;
    return out;
}

Dataset two_moons(std::size_t n, double noise, RngStream rng) {
    if (n < 2) throw PreconditionError("two_moons needs at least 2 points");
    if (!(noise >= 0.0)) throw PreconditionError("noise must be non-negative");
    const std::size_t n_upper = n / 2;
    const std::size_t n_lower = n - n_upper;
    Dataset ds;
    ds.features = Matrix(n, 2);
    ds.targets = Matrix(n, 2);
    ds.task = TaskKind::Classification;
    ds.num_classes = 2;
    auto angle = [](std::size_t i, std::size_t count) {
        return count < 2 ? 0.0
                         : std::numbers::pi * static_cast<double>(i) / static_cast<double>(count - 1);
    };
    for (std::size_t i = 0; i < n_upper; ++i) {
        const double t = angle(i, n_upper);
        ds.features(i, 0) = std::cos(t);
        ds.features(i, 1) = std::sin(t);
        ds.targets(i, 0) = 1.0;
    }
    for (std::size_t i = 0; i < n_lower; ++i) {
        const double t = angle(i, n_lower);
        ds.features(n_upper + i, 0) = 1.0 - std::cos(t);
        ds.features(n_upper + i, 1) = 0.5 - std::sin(t);
        ds.targets(n_upper + i, 1) = 1.0;
    }
    if (noise > 0.0) {
        auto engine = rng.engine();
        std::normal_distribution<double> normal(0.0, noise);
        for (double& v : ds.features.values()) v += normal(engine);
    }
    return ds;
}

double sine_target(double x) noexcept { return std::sin(2.0 * std::numbers::pi * x); }

Dataset synthetic_sine(std::size_t n, double noise, RngStream rng) {
    if (n < 1) throw PreconditionError("synthetic_sine needs at least 1 point");
    Dataset ds;
    ds.features = Matrix(n, 1);
    ds.targets = Matrix(n, 1);
    ds.task = TaskKind::Regression;
    auto engine = rng.engine();
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::normal_distribution<double> normal;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = u01(engine);
        ds.features(i, 0) = x;
        ds.targets(i, 0) = sine_target(x) + (noise != 0.0 ? noise * normal(engine) : 0.0);
    }
    return ds;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string trim(std::string s) {
    const auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) cells.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

bool is_missing(const std::string& cell) {
    return cell.empty() || cell == "NA" || cell == "na" || cell == "NaN" || cell == "nan" ||
           cell == "?";
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open CSV file " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw ParseError(path.string() + ": missing header row");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split_line(line);

    std::vector<std::size_t> target_idx;
    for (const auto& name : options.target_columns) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw ParseError(path.string() + ": no column named '" + name + "'");
        target_idx.push_back(static_cast<std::size_t>(it - header.begin()));
    }
    if (target_idx.empty()) throw PreconditionError("at least one target column is required");
    std::vector<std::size_t> feature_idx;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (std::find(target_idx.begin(), target_idx.end(), c) == target_idx.end()) {
            feature_idx.push_back(c);
        }
    }

    const std::size_t ncol = header.size();
    std::vector<double> values;
    std::vector<char> missing;
    std::size_t n_rows = 0;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        const auto cells = split_line(line);
        if (cells.size() != ncol) {
            throw ParseError(path.string() + ": row " + std::to_string(line_no) + " has " +
                             std::to_string(cells.size()) + " cells, header has " +
                             std::to_string(ncol));
        }
        for (std::size_t c = 0; c < ncol; ++c) {
            const auto& cell = cells[c];
            if (is_missing(cell)) {
                if (!options.mean_pad) {
                    throw ParseError(path.string() + ": row " + std::to_string(line_no) +
                                     " column '" + header[c] + "' is missing");
                }
                values.push_back(0.0);
                missing.push_back(1);
                continue;
            }
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (end == cell.c_str() || *end != '\0' || !std::isfinite(v)) {
                throw ParseError(path.string() + ": row " + std::to_string(line_no) + " column '" +
                                 header[c] + "' is not numeric: '" + cell + "'");
            }
            values.push_back(v);
            missing.push_back(0);
        }
        ++n_rows;
    }
    if (n_rows == 0) throw ParseError(path.string() + ": no data rows");

    if (options.mean_pad) {
        for (std::size_t c = 0; c < ncol; ++c) {
            double sum = 0.0;
            std::size_t count = 0;
            for (std::size_t r = 0; r < n_rows; ++r) {
                if (!missing[r * ncol + c]) {
                    sum += values[r * ncol + c];
                    ++count;
                }
            }
            if (count == 0) throw ParseError(path.string() + ": column '" + header[c] + "' is empty");
            for (std::size_t r = 0; r < n_rows; ++r) {
                if (missing[r * ncol + c]) values[r * ncol + c] = sum / static_cast<double>(count);
            }
        }
    }

    Dataset ds;
    ds.task = TaskKind::Regression;
    ds.features = Matrix(n_rows, feature_idx.size());
    ds.targets = Matrix(n_rows, target_idx.size());
    for (std::size_t r = 0; r < n_rows; ++r) {
        for (std::size_t c = 0; c < feature_idx.size(); ++c) {
            ds.features(r, c) = values[r * ncol + feature_idx[c]];
        }
        for (std::size_t c = 0; c < target_idx.size(); ++c) {
            ds.targets(r, c) = values[r * ncol + target_idx[c]];
        }
    }
    if (options.normalize) {
        ds.normalization = fit_normalization(ds.features);
        ds.features = normalize(ds.features, *ds.normalization);
    }
    return ds;
}

Normalization fit_normalization(const Matrix& features) {
    Normalization n;
    n.min.assign(features.cols(), 0.0);
    n.max.assign(features.cols(), 0.0);
    if (features.rows() == 0) return n;
    for (std::size_t c = 0; c < features.cols(); ++c) {
        n.min[c] = n.max[c] = features(0, c);
        for (std::size_t r = 1; r < features.rows(); ++r) {
            n.min[c] = std::min(n.min[c], features(r, c));
            n.max[c] = std::max(n.max[c], features(r, c));
        }
    }
    return n;
}

Matrix normalize(const Matrix& features, const Normalization& norm) {
    if (norm.min.size() != features.cols()) throw ShapeError("normalization width mismatch");
    Matrix out(features.rows(), features.cols());
    for (std::size_t r = 0; r < features.rows(); ++r) {
        for (std::size_t c = 0; c < features.cols(); ++c) {
            const double range = norm.max[c] - norm.min[c];
            out(r, c) = range > 0.0 ? (features(r, c) - norm.min[c]) / range : 0.0;
        }
    }
    return out;
}

Matrix denormalize(const Matrix& features, const Normalization& norm) {
    if (norm.min.size() != features.cols()) throw ShapeError("normalization width mismatch");
    Matrix out(features.rows(), features.cols());
    for (std::size_t r = 0; r < features.rows(); ++r) {
        for (std::size_t c = 0; c < features.cols(); ++c) {
            out(r, c) = norm.min[c] + features(r, c) * (norm.max[c] - norm.min[c]);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

std::vector<std::vector<std::size_t>> split_indices(std::size_t n, std::span<const double> fractions,
                                                    RngStream rng) {
    if (fractions.empty()) throw PreconditionError("split needs at least one fraction");
    double total = 0.0;
    for (double f : fractions) {
        if (!(f > 0.0)) throw PreconditionError("split fractions must be positive");
        total += f;
    }
    if (std::abs(total - 1.0) > 1e-9) throw PreconditionError("split fractions must sum to 1");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto engine = rng.engine();
    std::shuffle(order.begin(), order.end(), engine);

    std::vector<std::vector<std::size_t>> parts;
    double cumulative = 0.0;
    std::size_t begin = 0;
    for (std::size_t p = 0; p < fractions.size(); ++p) {
        cumulative += fractions[p];
        const std::size_t end = p + 1 == fractions.size()
                                    ? n
                                    : std::min(n, static_cast<std::size_t>(std::llround(
                                                      cumulative * static_cast<double>(n))));
        if (end <= begin) {
            throw PreconditionError("split fraction " + std::to_string(p) +
                                    " yields an empty subset");
        }
        parts.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(begin),
                           order.begin() + static_cast<std::ptrdiff_t>(end));
        begin = end;
    }
    return parts;
}

std::vector<Dataset> split(const Dataset& ds, std::span<const double> fractions, RngStream rng) {
    std::vector<Dataset> out;
    for (const auto& idx : split_indices(ds.size(), fractions, rng)) out.push_back(subset(ds, idx));
    return out;
}

}  // namespace ellreg
