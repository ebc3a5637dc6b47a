#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace kselect::cli {

/// Process exit statuses.
enum Exit : int {
    ok = 0,
    usage = 1,       ///< bad flags, unreadable files, anything else
    parse_error = 2, ///< malformed CSV, Matrix Market, model or config text
    schema_error = 3,
    empty_input = 4,
};

/// Runs one command line (without the program name). Output goes to `out`,
/// diagnostics to `err`; the return value is the exit status.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Writes through a temporary sibling and a rename, creating parent
/// directories. Throws kselect::Error on failure.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Throws kselect::Error naming the file when it cannot be read.
std::string read_file(const std::filesystem::path& path);

} // namespace kselect::cli
