#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

namespace uem::textio {

/// Shortest decimal form that reads back to the same double.
std::string format_double(double v);
void append_double(std::string& out, double v);

/// Whole-field parse; nullopt on trailing junk or an empty field.
std::optional<double> parse_double(std::string_view s);
std::optional<long long> parse_int(std::string_view s);

std::string read_file(const std::filesystem::path& path);
/// Creates parent directories as needed.
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace uem::textio
