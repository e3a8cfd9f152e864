#include "attrib/csv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "attrib/errors.hpp"

namespace attrib::csv {

int Table::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return static_cast<int>(i);
    }
    return -1;
}

int Table::require(const std::string& name) const {
    const int c = column(name);
    if (c < 0) throw DataError("missing required column '" + name + "'");
    return c;
}

namespace {
std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    for (auto& f : out) {
        while (!f.empty() && (f.back() == '\r' || f.back() == ' ')) f.pop_back();
        std::size_t b = 0;
        while (b < f.size() && f[b] == ' ') ++b;
        f.erase(0, b);
    }
    return out;
}
}  // namespace

Table read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    Table t;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        auto fields = split_line(line);
        if (t.header.empty()) {
            t.header = std::move(fields);
            continue;
        }
        if (fields.size() != t.header.size()) {
            throw DataError(path + ":" + std::to_string(lineno) + ": expected " +
                            std::to_string(t.header.size()) + " fields, got " +
                            std::to_string(fields.size()));
        }
        t.rows.push_back(std::move(fields));
    }
    return t;
}

double parse_double(const std::string& s, const std::string& path, std::size_t line,
                    const std::string& col) {
    double v = 0.0;
    const char* b = s.data();
    const char* e = b + s.size();
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || p != e) {
        throw DataError(path + ":" + std::to_string(line) + ": bad numeric value '" +
                        s + "' in column " + col);
    }
    return v;
}

int parse_int(const std::string& s, const std::string& path, std::size_t line,
              const std::string& col) {
    int v = 0;
    const char* b = s.data();
    const char* e = b + s.size();
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || p != e) {
        throw DataError(path + ":" + std::to_string(line) + ": bad integer '" + s +
                        "' in column " + col);
    }
    return v;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

Writer::Writer(const std::string& path) : path_(path) {
    auto* f = new std::ofstream(path, std::ios::binary);
    if (!*f) {
        delete f;
        throw DataError("cannot write '" + path + "'");
    }
    out_ = f;
}

Writer::~Writer() {
    auto* f = static_cast<std::ofstream*>(out_);
    if (!first_) *f << "\n";
    delete f;
}

void Writer::field(const std::string& s) {
    auto* f = static_cast<std::ofstream*>(out_);
    if (!first_) *f << ",";
    first_ = false;
    *f << s;
}

void Writer::field(double v) { field(format_double(v)); }
void Writer::field(int v) { field(std::to_string(v)); }
void Writer::field(long long v) { field(std::to_string(v)); }

void Writer::endrow() {
    auto* f = static_cast<std::ofstream*>(out_);
    *f << "\n";
    first_ = true;
}

}  // namespace attrib::csv
