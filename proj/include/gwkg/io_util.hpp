#pragma once
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

namespace gwkg {

// Library-wide failure type; the CLI maps it to exit code 1.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

std::string read_file(const std::filesystem::path& path);

// Writes via a temp file in the same directory followed by rename, so a
// crash never leaves a half-written artifact.
void atomic_write_file(const std::filesystem::path& path, const std::string& contents);

// FNV-1a 64-bit digest as fixed-width hex; used in run manifests.
std::uint64_t fnv1a64(const void* data, std::size_t size);
std::string file_digest(const std::filesystem::path& path);

} // namespace gwkg
