#pragma once

#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace gplvm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitNumerical = 1;
inline constexpr int kExitInput = 2;

/// Runs one command; `args` excludes the program name. Never throws.
int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

/// "A..B" (inclusive) or a single number.
std::vector<std::size_t> parse_latent_range(std::string_view text);

/// Comma-separated names, trimmed, empty entries rejected.
std::vector<std::string> parse_list(std::string_view text);

/// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path &path);

/// Two-column `ticker,sector` table with a header row.
std::map<std::string, std::string> load_sectors(const std::filesystem::path &path);

} // namespace gplvm::cli
