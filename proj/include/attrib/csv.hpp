#pragma once

#include <string>
#include <vector>

namespace attrib::csv {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const;       // -1 when absent
    int require(const std::string& name) const;      // DataError when absent
};

// Reads a comma-separated UTF-8 file with a header row. No quoting: the
// formats in this project never embed commas. Blank lines are skipped.
Table read_file(const std::string& path);

double parse_double(const std::string& s, const std::string& path, std::size_t line,
                    const std::string& col);
int parse_int(const std::string& s, const std::string& path, std::size_t line,
              const std::string& col);

// Deterministic float formatting shared by every CSV/JSON writer so that
// identical runs produce byte-identical artifacts.
std::string format_double(double v);

class Writer {
public:
    explicit Writer(const std::string& path);
    ~Writer();
    void field(const std::string& s);
    void field(double v);
    void field(int v);
    void field(long long v);
    void endrow();

private:
    void* out_;  // std::ofstream, kept opaque to keep the header light
    bool first_ = true;
    std::string path_;
};

}  // namespace attrib::csv
