#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace transicd::io {

// Throw ErrorKind::io naming the path when the file cannot be opened.
std::ifstream open_in(const std::string& path, bool binary = false);
std::ofstream open_out(const std::string& path, bool binary = false);

// Throws ErrorKind::io if the stream is in a failed state after writing.
void finish(std::ofstream& out, const std::string& path);

std::string read_text(const std::string& path);
void write_text(const std::string& path, std::string_view text);

std::vector<std::string> split(std::string_view s, char sep);
std::string_view trim(std::string_view s);

// Full-precision decimal rendering that round-trips through strtod.
std::string format_double(double v);

}  // namespace transicd::io
