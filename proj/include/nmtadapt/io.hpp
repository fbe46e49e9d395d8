#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "nmtadapt/sha256.hpp"

namespace nmtadapt::io {

namespace fs = std::filesystem;

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// All artifact writes go through here: temp-then-rename so a crash never
// leaves a half-written file under the output directory.
inline void atomic_write(const fs::path& path, std::string_view content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write file: " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw std::runtime_error("short write: " + tmp.string());
    }
    fs::rename(tmp, path);
}

inline std::vector<std::string> read_lines(const fs::path& path) {
    std::string text = read_file(path);
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t nl = text.find('\n', start);
        if (nl == std::string::npos) {
            lines.push_back(text.substr(start));
            break;
        }
        std::string line = text.substr(start, nl - start);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(std::move(line));
        start = nl + 1;
    }
    return lines;
}

inline std::string file_sha256(const fs::path& path) { return Sha256::hex(read_file(path)); }

// Exclusive per-output-directory lock. Held for the duration of a command.
class DirLock {
public:
    explicit DirLock(const fs::path& dir) : lock_path_(dir / ".lock") {
        fs::create_directories(dir);
        std::error_code ec;
        if (fs::exists(lock_path_)) {
            throw std::runtime_error("output directory is locked: " + lock_path_.string());
        }
        std::ofstream out(lock_path_);
        out << "locked\n";
    }
    ~DirLock() {
        std::error_code ec;
        fs::remove(lock_path_, ec);
    }
    DirLock(const DirLock&) = delete;
    DirLock& operator=(const DirLock&) = delete;

private:
    fs::path lock_path_;
};

}  // namespace nmtadapt::io
