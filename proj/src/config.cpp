#include "agripolicy/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>

#include <fmt/format.h>

#include "agripolicy/errors.hpp"

namespace agripolicy::config {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::string normalize_key(std::string_view key) {
    std::string out(key);
    for (auto& c : out) {
        if (c == '-') c = '_';
    }
    return out;
}

}  // namespace

std::map<std::string, std::string> parse_key_value(std::string_view text) {
    std::map<std::string, std::string> out;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        ++line_no;
        auto line = text.substr(start, end - start);
        start = end + 1;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw RowError(line_no, fmt::format("expected key=value, got '{}'", line));
        const auto key = normalize_key(trim(line.substr(0, eq)));
        if (key.empty()) throw RowError(line_no, "empty key");
        if (!out.emplace(key, std::string(trim(line.substr(eq + 1)))).second) {
            throw RowError(line_no, fmt::format("duplicate key '{}'", key));
        }
    }
    return out;
}

std::string env_name(std::string_view key) {
    std::string out = "AGRIPOLICY_";
    for (char c : key) out += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

std::optional<std::string> Settings::lookup(const std::string& key) const {
    if (auto it = flags_.find(key); it != flags_.end()) return it->second;
    if (const char* env = std::getenv(env_name(key).c_str())) return std::string(env);
    if (auto it = file_.find(key); it != file_.end()) return it->second;
    return std::nullopt;
}

std::string Settings::get_string(const std::string& key, const std::string& fallback) const {
    auto v = lookup(key).value_or(fallback);
    resolved_[key] = v;
    return v;
}

std::optional<double> Settings::get_optional_real(const std::string& key) const {
    const auto raw = lookup(key);
    if (!raw || raw->empty()) return std::nullopt;
    double v = 0.0;
    const auto* end = raw->data() + raw->size();
    auto [ptr, ec] = std::from_chars(raw->data(), end, v);
    if (ec != std::errc{} || ptr != end || !std::isfinite(v)) {
        throw InputError(fmt::format("{}: expected a number, got '{}'", key, *raw));
    }
    resolved_[key] = *raw;
    return v;
}

double Settings::get_real(const std::string& key, double fallback) const {
    if (auto v = get_optional_real(key)) return *v;
    resolved_[key] = fmt::format("{}", fallback);
    return fallback;
}

std::uint64_t Settings::get_u64(const std::string& key, std::uint64_t fallback) const {
    const auto raw = lookup(key);
    if (!raw) {
        resolved_[key] = std::to_string(fallback);
        return fallback;
    }
    std::uint64_t v = 0;
    const auto* end = raw->data() + raw->size();
    auto [ptr, ec] = std::from_chars(raw->data(), end, v);
    if (raw->empty() || ec != std::errc{} || ptr != end) {
        throw InputError(fmt::format("{}: expected a non-negative integer, got '{}'", key, *raw));
    }
    resolved_[key] = *raw;
    return v;
}

std::size_t Settings::get_count(const std::string& key, std::size_t fallback) const {
    return static_cast<std::size_t>(get_u64(key, fallback));
}

}  // namespace agripolicy::config
