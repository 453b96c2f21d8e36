#include "lobench/text_format.hpp"

#include "lobench/error.hpp"

#include <charconv>
#include <sstream>

namespace lobench {

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void KeyValueWriter::section(const std::string& name) {
    if (!text_.empty()) text_ += '\n';
    text_ += '[' + name + "]\n";
}

void KeyValueWriter::comment(const std::string& text) { text_ += "# " + text + '\n'; }

void KeyValueWriter::put(const std::string& key, const std::string& value) {
    text_ += key;
    text_ += '=';
    text_ += value;
    text_ += '\n';
}

void KeyValueWriter::put(const std::string& key, std::span<const double> values) {
    std::string joined;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) joined += ',';
        joined += format_double(values[i]);
    }
    put(key, joined);
}

namespace {
std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <class T>
bool parse_number(const std::string& s, T& out) {
    const char* end = s.data() + s.size();
    auto res = std::from_chars(s.data(), end, out);
    return res.ec == std::errc() && res.ptr == end;
}
}  // namespace

KeyValueReader::KeyValueReader(const std::string& text, std::string source) : source_(std::move(source)) {
    std::string section;
    std::size_t offset = 0;
    while (offset < text.size()) {
        auto nl = text.find('\n', offset);
        if (nl == std::string::npos) nl = text.size();
        const std::string line = trim(text.substr(offset, nl - offset));
        if (!line.empty() && line[0] != '#') {
            if (line.front() == '[') {
                if (line.back() != ']')
                    throw ValidationError(source_ + ": malformed section header at byte " + std::to_string(offset));
                section = trim(line.substr(1, line.size() - 2));
            } else {
                const auto eq = line.find('=');
                if (eq == std::string::npos)
                    throw ValidationError(source_ + ": expected key=value at byte " + std::to_string(offset));
                std::string key = trim(line.substr(0, eq));
                if (!section.empty()) key = section + "." + key;
                values_[key] = trim(line.substr(eq + 1));
                offsets_[key] = offset;
            }
        }
        offset = nl + 1;
    }
}

void KeyValueReader::fail(const std::string& key, const std::string& why) const {
    auto it = offsets_.find(key);
    const std::string where = it == offsets_.end() ? "" : " at byte " + std::to_string(it->second);
    throw ValidationError(source_ + where + ", field '" + key + "': " + why);
}

const std::string& KeyValueReader::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) fail(key, "missing");
    return it->second;
}

std::string KeyValueReader::get_or(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

int KeyValueReader::get_int(const std::string& key) const {
    int v = 0;
    if (!parse_number(get(key), v)) fail(key, "not an integer");
    return v;
}

int KeyValueReader::get_int_or(const std::string& key, int fallback) const {
    return has(key) ? get_int(key) : fallback;
}

std::int64_t KeyValueReader::get_int64(const std::string& key) const {
    std::int64_t v = 0;
    if (!parse_number(get(key), v)) fail(key, "not an integer");
    return v;
}

std::uint64_t KeyValueReader::get_uint64_or(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    std::uint64_t v = 0;
    if (!parse_number(get(key), v)) fail(key, "not an unsigned integer");
    return v;
}

double KeyValueReader::get_double(const std::string& key) const {
    double v = 0;
    if (!parse_number(get(key), v)) fail(key, "not a number");
    return v;
}

double KeyValueReader::get_double_or(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}

bool KeyValueReader::get_bool_or(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const auto& v = get(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    fail(key, "not a boolean");
}

std::vector<double> KeyValueReader::get_doubles(const std::string& key) const {
    std::vector<double> out;
    std::stringstream ss(get(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
        double v = 0;
        if (!parse_number(trim(item), v)) fail(key, "bad list element '" + item + "'");
        out.push_back(v);
    }
    return out;
}

std::string format_record(const std::vector<std::pair<std::string, std::string>>& fields) {
    std::string line;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) line += ' ';
        line += fields[i].first + '=' + fields[i].second;
    }
    return line;
}

std::vector<std::pair<std::string, std::string>> parse_record(const std::string& line) {
    std::vector<std::pair<std::string, std::string>> out;
    std::stringstream ss(line);
    std::string tok;
    while (ss >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) throw ValidationError("record: token '" + tok + "' is not key=value");
        out.emplace_back(tok.substr(0, eq), tok.substr(eq + 1));
    }
    return out;
}

}  // namespace lobench
