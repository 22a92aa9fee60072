#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace agripolicy::config {

/// `key=value` lines; `#` starts a comment; blank lines ignored. Keys and
/// values are trimmed. Throws RowError on a line without `=` or a repeated key.
std::map<std::string, std::string> parse_key_value(std::string_view text);

/// AGRIPOLICY_<KEY> with the key upper-cased and dashes mapped to underscores.
std::string env_name(std::string_view key);

/// Layered lookup: explicit flag, then environment, then config file, then
/// the caller's default. Keys use underscores (`price_effect`).
class Settings {
public:
    void set_file(std::map<std::string, std::string> file_values) { file_ = std::move(file_values); }
    void set_flag(const std::string& key, std::string value) { flags_[key] = std::move(value); }

    std::optional<std::string> lookup(const std::string& key) const;

    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_real(const std::string& key, double fallback) const;
    std::optional<double> get_optional_real(const std::string& key) const;
    std::size_t get_count(const std::string& key, std::size_t fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;

    /// Every key that was resolved through get_* with the value used.
    const std::map<std::string, std::string>& resolved() const { return resolved_; }

private:
    std::map<std::string, std::string> file_;
    std::map<std::string, std::string> flags_;
    mutable std::map<std::string, std::string> resolved_;
};

}  // namespace agripolicy::config
