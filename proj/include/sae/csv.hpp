#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace sae::csv {

/// Quotes a field per RFC 4180 when it contains a comma, quote or line break.
std::string quote(std::string_view field);

/// Splits one CSV record, honouring quoted fields.
std::vector<std::string> split_record(std::string_view line);

/// Shortest decimal representation that round-trips the value.
std::string format_number(double v);
std::string format_number(float v);

class Writer {
public:
    Writer(const std::filesystem::path& path, const std::vector<std::string>& header,
           bool append = false);

    void row(const std::vector<std::string>& fields);

    template <typename... Ts>
    void values(const Ts&... vs) {
        row({to_field(vs)...});
    }

private:
    static std::string to_field(const std::string& s) { return s; }
    static std::string to_field(const char* s) { return s; }
    static std::string to_field(double v) { return format_number(v); }
    static std::string to_field(float v) { return format_number(v); }
    template <typename T>
    static std::string to_field(const T& v) { return std::to_string(v); }

    std::ofstream out_;
};

} // namespace sae::csv
