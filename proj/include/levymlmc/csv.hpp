#pragma once

// CSV output: one '#' metadata line, a header row, then rows in %.17g.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "levymlmc/config.hpp"

#ifndef LEVYMLMC_VERSION
#define LEVYMLMC_VERSION "dev"
#endif

namespace levymlmc {

struct CsvMeta {
    std::uint64_t seed = 0;
    std::uint64_t config_hash = 0;
    std::string experiment;
};

inline std::string utc_timestamp() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

using CsvCell = std::variant<double, std::int64_t, std::uint64_t, std::string>;

inline std::string format_cell(const CsvCell& c) {
    struct V {
        std::string operator()(double x) const {
            if (std::isnan(x)) return "NA";
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.17g", x);
            return buf;
        }
        std::string operator()(std::int64_t x) const { return std::to_string(x); }
        std::string operator()(std::uint64_t x) const { return std::to_string(x); }
        std::string operator()(const std::string& s) const { return s; }
    };
    return std::visit(V{}, c);
}

class CsvWriter {
  public:
    CsvWriter(const std::string& path, std::vector<std::string> columns, const CsvMeta& meta)
        : path_(path), columns_(std::move(columns)), out_(path) {
        if (!out_) throw std::runtime_error("cannot write " + path);
        char hash[17];
        std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(meta.config_hash));
        out_ << "# levymlmc " << LEVYMLMC_VERSION << " experiment=" << meta.experiment << " seed=" << meta.seed
             << " config_hash=" << hash << " timestamp=" << utc_timestamp() << '\n';
        for (std::size_t i = 0; i < columns_.size(); ++i) out_ << (i ? "," : "") << columns_[i];
        out_ << '\n';
    }

    void row(const std::vector<CsvCell>& cells) {
        if (cells.size() != columns_.size()) throw std::logic_error("csv row width does not match the header");
        for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << format_cell(cells[i]);
        out_ << '\n';
    }

    void comment(const std::string& text) { out_ << "# " << text << '\n'; }

    const std::string& path() const { return path_; }

  private:
    std::string path_;
    std::vector<std::string> columns_;
    std::ofstream out_;
};

}  // namespace levymlmc
