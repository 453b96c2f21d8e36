#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace lobench {

// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

// Plain-text `key=value` lines, optionally grouped under `[section]` headers.
class KeyValueWriter {
public:
    void section(const std::string& name);
    void comment(const std::string& text);
    void put(const std::string& key, const std::string& value);
    void put(const std::string& key, const char* value) { put(key, std::string(value)); }
    void put(const std::string& key, double value) { put(key, format_double(value)); }
    void put(const std::string& key, int value) { put(key, std::to_string(value)); }
    void put(const std::string& key, std::int64_t value) { put(key, std::to_string(value)); }
    void put(const std::string& key, std::uint64_t value) { put(key, std::to_string(value)); }
    void put(const std::string& key, bool value) { put(key, std::string(value ? "true" : "false")); }
    void put(const std::string& key, std::span<const double> values);

    const std::string& str() const { return text_; }

private:
    std::string text_;
};

// Parses the writer's format. Keys inside a section are addressed as "section.key".
// Errors name the source, the byte offset of the offending line, and the field.
class KeyValueReader {
public:
    KeyValueReader(const std::string& text, std::string source);

    bool has(const std::string& key) const { return values_.contains(key); }
    const std::string& get(const std::string& key) const;
    std::string get_or(const std::string& key, const std::string& fallback) const;
    int get_int(const std::string& key) const;
    int get_int_or(const std::string& key, int fallback) const;
    std::int64_t get_int64(const std::string& key) const;
    std::uint64_t get_uint64_or(const std::string& key, std::uint64_t fallback) const;
    double get_double(const std::string& key) const;
    double get_double_or(const std::string& key, double fallback) const;
    bool get_bool_or(const std::string& key, bool fallback) const;
    std::vector<double> get_doubles(const std::string& key) const;

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    [[noreturn]] void fail(const std::string& key, const std::string& why) const;

    std::string source_;
    std::map<std::string, std::string> values_;
    std::map<std::string, std::size_t> offsets_;
};

// One-line `k=v k=v ...` record.
std::string format_record(const std::vector<std::pair<std::string, std::string>>& fields);
std::vector<std::pair<std::string, std::string>> parse_record(const std::string& line);

}  // namespace lobench
