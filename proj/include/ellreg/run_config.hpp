#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace ellreg {

/// Bad command line or configuration (unknown key, malformed value).
struct UsageError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Flat `key = value` configuration. Every key has a default; unknown keys are
/// rejected. Lines starting with '#' are comments.
class RunConfig {
public:
    RunConfig();

    static RunConfig from_file(const std::filesystem::path& path);
    void merge_file(const std::filesystem::path& path);
    void merge_stream(std::istream& in, const std::string& origin);

    /// Throws UsageError naming the key if it is unknown or the value has whitespace.
    void set(const std::string& key, const std::string& value);
    /// "key=value" form used by --set.
    void set_assignment(const std::string& assignment);

    bool has(const std::string& key) const;
    const std::string& str(const std::string& key) const;
    double real(const std::string& key) const;
    std::uint64_t u64(const std::string& key) const;
    std::size_t count(const std::string& key) const;
    bool flag(const std::string& key) const;
    std::vector<std::string> list(const std::string& key) const;
    std::vector<double> reals(const std::string& key) const;

    const std::map<std::string, std::string>& values() const noexcept { return values_; }

    /// Single line "record=config k=v ..." sufficient to rerun.
    std::string echo() const;

private:
    std::map<std::string, std::string> values_;
};

/// Format used in all output files: 17 significant digits.
std::string format_real(double v);

/// Parses "record=... k=v k=v" lines into maps (blank and '#' lines skipped).
std::vector<std::map<std::string, std::string>> parse_records(std::istream& in);

}  // namespace ellreg
