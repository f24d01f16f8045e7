#pragma once

#include <filesystem>
#include <string>

namespace protoflow {

// shortest round-trip decimal form; keeps CSV output bit-reproducible
std::string fmt_double(double v);

void write_file(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace protoflow
