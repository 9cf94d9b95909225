#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace relanet {

// FNV-1a over the bytes of s.
std::uint64_t fnv1a64(const std::string& s);

// 16-hex-digit rendering of a 64-bit hash.
std::string hex64(std::uint64_t v);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

std::vector<std::string> split(const std::string& s, char sep);
std::string join(const std::vector<std::string>& parts, const std::string& sep);

}  // namespace relanet
