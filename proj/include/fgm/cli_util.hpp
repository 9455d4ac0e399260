#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace fgm::cli {

/// RFC 4180: quote when the field holds a comma, quote, CR or LF; double inner quotes.
std::string csv_escape(std::string_view field);

class CsvWriter {
public:
    explicit CsvWriter(std::ostream& out) : out_(out) {}
    void row(const std::vector<std::string>& fields);

private:
    std::ostream& out_;
};

/// Shortest text that reads back to the same double.
std::string format_double(double v);

/// Lower-case hex SHA-256 of a file's bytes. Throws DataError when unreadable.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_bytes(std::string_view bytes);

/// Worker cap from FGM_THREADS, else the hardware concurrency (at least 1).
/// Throws UsageError on a value that is not a positive integer.
std::size_t thread_cap();

/// Runs task(i) for i in [0, count) on up to `threads` workers. Exceptions are
/// collected and the one from the smallest index is rethrown after all
/// workers finish.
void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& task);

/// Writes `text` to `path`, throwing DataError on failure.
void write_text(const std::filesystem::path& path, const std::string& text);

struct Manifest {
    std::string command;
    nlohmann::json config;
    std::uint64_t seed = 0;
    std::vector<std::filesystem::path> inputs;
    std::vector<std::filesystem::path> outputs;
    double wall_seconds = 0.0;

    nlohmann::json to_json() const;
};

}  // namespace fgm::cli
