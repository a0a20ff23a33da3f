#include "ellreg/run_config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace ellreg {

namespace {

const std::map<std::string, std::string>& defaults() {
    static const std::map<std::string, std::string> d = {
        {"dataset", "two_moons"},
        {"data.n", "1000"},
        {"data.n_baseline", "0"},
        {"data.noise", "0.1"},
        {"data.test_n", "2000"},
        {"data.test_noise", "0.2"},
        {"data.split", "0.667,0.2,0.133"},
        {"csv.path", ""},
        {"csv.targets", ""},
        {"csv.normalize", "true"},
        {"csv.mean_pad", "false"},
        {"model.hidden", "4"},
        {"model.activation", "relu"},
        {"model.slope", "0.1"},
        {"loss", "auto"},
        {"objective", "elliptic"},
        {"elliptic.n_b", "20"},
        {"elliptic.n_t", "5"},
        {"elliptic.sigma_b", "0.05"},
        {"elliptic.xi", "1"},
        {"elliptic.variant", "path_average"},
        {"elliptic.endpoint", "inverse_distance"},
        {"elliptic.simplex_project", "auto"},
        {"elliptic.t_end", "1"},
        {"mixup.alpha", "1"},
        {"optim", "adam"},
        {"lr", "0.01"},
        {"momentum", "0"},
        {"weight_decay", "0"},
        {"adam.beta1", "0.9"},
        {"adam.beta2", "0.999"},
        {"adam.epsilon", "1e-8"},
        {"epochs", "100"},
        {"batch_size", "16"},
        {"seed", "0"},
        {"threads", "0"},
        {"out", "."},
        {"checkpoint", ""},
        {"fk.eps", "0.05"},
        {"fk.sigma", "1"},
        {"fk.n_paths", "200"},
        {"fk.dt", "0.001"},
        {"fk.t_max", "10"},
        {"fk.margin", "0.1"},
        {"fk.boundary_value", "center_loss"},
        {"fk.queries", ""},
        {"fk.max_queries", "100"},
        {"fk.slack", "0.05"},
        {"fk.dynkin_paths", "2000"},
        {"surface.grid", "20"},
        {"bench.objectives", "erm,mixup,elliptic"},
        {"bench.seeds", "10"},
    };
    return d;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

std::string format_real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

RunConfig::RunConfig() : values_(defaults()) {}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
    RunConfig c;
    c.merge_file(path);
    return c;
}

void RunConfig::merge_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file " + path.string());
    merge_stream(in, path.string());
}

void RunConfig::merge_stream(std::istream& in, const std::string& origin) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw UsageError(origin + ":" + std::to_string(line_no) + ": expected key = value");
        }
        set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
}

void RunConfig::set(const std::string& key, const std::string& value) {
    if (!defaults().contains(key)) throw UsageError("unknown config key '" + key + "'");
    if (value.find_first_of(" \t\n") != std::string::npos) {
        throw UsageError("config key '" + key + "': value may not contain whitespace");
    }
    values_[key] = value;
}

void RunConfig::set_assignment(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + assignment + "'");
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

bool RunConfig::has(const std::string& key) const { return values_.contains(key); }

const std::string& RunConfig::str(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw UsageError("unknown config key '" + key + "'");
    return it->second;
}

double RunConfig::real(const std::string& key) const {
    const std::string& s = str(key);
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || *end != '\0' || errno == ERANGE || !std::isfinite(v)) {
        throw UsageError("config key '" + key + "': '" + s + "' is not a real number");
    }
    return v;
}

std::uint64_t RunConfig::u64(const std::string& key) const {
    const std::string& s = str(key);
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
    if (s.empty() || *end != '\0' || errno == ERANGE || s[0] == '-') {
        throw UsageError("config key '" + key + "': '" + s + "' is not a non-negative integer");
    }
    return v;
}

std::size_t RunConfig::count(const std::string& key) const { return static_cast<std::size_t>(u64(key)); }

bool RunConfig::flag(const std::string& key) const {
    const std::string& s = str(key);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw UsageError("config key '" + key + "': '" + s + "' is not a boolean");
}

std::vector<std::string> RunConfig::list(const std::string& key) const {
    std::vector<std::string> out;
    std::istringstream in(str(key));
    std::string item;
    while (std::getline(in, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::vector<double> RunConfig::reals(const std::string& key) const {
    std::vector<double> out;
    for (const auto& item : list(key)) {
        char* end = nullptr;
        const double v = std::strtod(item.c_str(), &end);
        if (*end != '\0' || !std::isfinite(v)) {
            throw UsageError("config key '" + key + "': '" + item + "' is not a real number");
        }
        out.push_back(v);
    }
    return out;
}

std::string RunConfig::echo() const {
    std::string s = "record=config";
    for (const auto& [k, v] : values_) {
        // Output location and thread count do not affect results.
        if (k == "out" || k == "threads") continue;
        s += ' ' + k + '=' + v;
    }
    return s;
}

std::vector<std::map<std::string, std::string>> parse_records(std::istream& in) {
    std::vector<std::map<std::string, std::string>> out;
    std::string line;
    while (std::getline(in, line)) {
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::map<std::string, std::string> rec;
        std::istringstream fields(t);
        std::string field;
        while (fields >> field) {
            const auto eq = field.find('=');
            if (eq == std::string::npos) throw std::runtime_error("malformed record field '" + field + "'");
            rec[field.substr(0, eq)] = field.substr(eq + 1);
        }
        out.push_back(std::move(rec));
    }
    return out;
}

}  // namespace ellreg
