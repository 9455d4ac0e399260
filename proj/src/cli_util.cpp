#include "fgm/cli_util.hpp"

#include <openssl/evp.h>

#include <array>
#include <atomic>
#include <charconv>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <memory>
#include <thread>

#include "fgm/error.hpp"

namespace fgm::cli {

std::string csv_escape(std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

void CsvWriter::row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out_ << ',';
        out_ << csv_escape(fields[i]);
    }
    out_ << "\r\n";
}

std::string format_double(double v) {
    std::array<char, 64> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

namespace {

struct DigestDeleter {
    void operator()(EVP_MD_CTX* ctx) const { EVP_MD_CTX_free(ctx); }
};

class Sha256 {
public:
    Sha256() : ctx_(EVP_MD_CTX_new()) {
        if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) {
            throw DataError("SHA-256 initialisation failed");
        }
    }
    void update(const void* data, std::size_t len) { EVP_DigestUpdate(ctx_.get(), data, len); }
    std::string hex() {
        unsigned char md[EVP_MAX_MD_SIZE];
        unsigned int len = 0;
        EVP_DigestFinal_ex(ctx_.get(), md, &len);
        static constexpr char digits[] = "0123456789abcdef";
        std::string out;
        for (unsigned int i = 0; i < len; ++i) {
            out += digits[md[i] >> 4];
            out += digits[md[i] & 15];
        }
        return out;
    }

private:
    std::unique_ptr<EVP_MD_CTX, DigestDeleter> ctx_;
};

}  // namespace

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read '" + path.string() + "'");
    Sha256 h;
    std::array<char, 1 << 16> buf;
    while (in) {
        in.read(buf.data(), buf.size());
        h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    return h.hex();
}

std::string sha256_bytes(std::string_view bytes) {
    Sha256 h;
    h.update(bytes.data(), bytes.size());
    return h.hex();
}

std::size_t thread_cap() {
    const char* env = std::getenv("FGM_THREADS");
    if (env && *env) {
        std::size_t v = 0;
        const std::string_view s(env);
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc() || res.ptr != s.data() + s.size() || v == 0) {
            throw UsageError("FGM_THREADS must be a positive integer, got '" + std::string(s) + "'");
        }
        return v;
    }
    return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& task) {
    std::vector<std::exception_ptr> errors(count);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                task(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t n = std::min(std::max<std::size_t>(threads, 1), std::max<std::size_t>(count, 1));
    if (n == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw DataError("failed writing '" + path.string() + "'");
}

nlohmann::json Manifest::to_json() const {
    nlohmann::json j;
    j["command"] = command;
    j["config"] = config;
    j["seed"] = seed;
    nlohmann::json in = nlohmann::json::object();
    for (const auto& p : inputs) in[p.string()] = sha256_file(p);
    j["inputs"] = std::move(in);
    nlohmann::json out = nlohmann::json::array();
    for (const auto& p : outputs) out.push_back(p.string());
    j["outputs"] = std::move(out);
    j["wall_seconds"] = wall_seconds;
    return j;
}

}  // namespace fgm::cli
