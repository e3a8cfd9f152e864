#include "attrib/gridops.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "attrib/csv.hpp"
#include "attrib/errors.hpp"
#include "attrib/logging.hpp"

namespace attrib::gridops {

std::string tag_name(VarTag t) {
    switch (t) {
        case VarTag::tmean: return "tmean";
        case VarTag::tmin: return "tmin";
        case VarTag::tmax: return "tmax";
        case VarTag::precip: return "precip";
        case VarTag::ndvi: return "ndvi";
        case VarTag::weight: return "weight";
    }
    throw DataError("unknown variable tag");
}

VarTag tag_from_name(const std::string& s) {
    if (s == "tmean") return VarTag::tmean;
    if (s == "tmin") return VarTag::tmin;
    if (s == "tmax") return VarTag::tmax;
    if (s == "precip") return VarTag::precip;
    if (s == "ndvi") return VarTag::ndvi;
    if (s == "weight") return VarTag::weight;
    throw DataError("unknown variable tag '" + s + "'");
}

void GridSpec::validate() const {
    if (nlat < 1 || nlon < 1) throw DataError("grid must have at least one cell");
    if (!(dlat > 0.0) || !(dlon > 0.0)) throw DataError("grid steps must be positive");
    const double lat_last = lat(nlat - 1);
    if (!(lat0 > -90.0) || !(lat_last < 90.0))
        throw DataError("latitude centers must lie strictly inside (-90, 90)");
    const double lon_last = lon(nlon - 1);
    if (!(lon0 >= -180.0) || !(lon_last < 180.0))
        throw DataError("longitude centers must lie inside [-180, 180)");
}

GridField GridField::make(const GridSpec& spec, VarTag tag, int year, int sub,
                          double fill) {
    GridField f;
    f.spec = spec;
    f.tag = tag;
    f.year = year;
    f.sub = sub;
    f.values.assign(spec.size(), fill);
    return f;
}

void GridField::validate() const {
    spec.validate();
    if (values.size() != spec.size()) throw DataError("grid value count mismatch");
    for (double v : values) {
        if (missing(v)) continue;
        if (std::isinf(v)) throw DataError("grid contains non-finite values");
        if (tag == VarTag::weight && (v < 0.0 || v > 1.0))
            throw DataError("weight fractions must lie in [0, 1]");
    }
}

void CountryMask::validate() const {
    spec.validate();
    if (cell.size() != spec.size()) throw DataError("mask cell count mismatch");
    for (std::int32_t id : cell) {
        if (id < -1 || id >= static_cast<std::int32_t>(countries.size()))
            throw DataError("mask cell references unknown country index");
    }
}

GridField resample_bilinear(const GridField& src, const GridSpec& dst) {
    src.spec.validate();
    dst.validate();
    const GridSpec& s = src.spec;

    // Overlap check: the destination center box must intersect the source box.
    if (dst.lat0 > s.lat(s.nlat - 1) + 0.5 * s.dlat + 1e-9 ||
        dst.lat(dst.nlat - 1) < s.lat0 - 0.5 * s.dlat - 1e-9 ||
        dst.lon0 > s.lon(s.nlon - 1) + 0.5 * s.dlon + 1e-9 ||
        dst.lon(dst.nlon - 1) < s.lon0 - 0.5 * s.dlon - 1e-9) {
        throw DataError("resample_bilinear: no overlap between grids");
    }

    GridField out = GridField::make(dst, src.tag, src.year, src.sub);
    // On-center destination points keep a zero fraction so that identity
    // resampling (and the last row/column) stays bit-exact.
    auto locate = [](double f, int n, int* i0, int* i1, double* w) {
        *i0 = static_cast<int>(f);
        if (*i0 >= n - 1) {
            *i0 = n - 1;
            *i1 = n - 1;
            *w = 0.0;
            return;
        }
        *i1 = *i0 + 1;
        *w = f - *i0;
    };
    for (int r = 0; r < dst.nlat; ++r) {
        double fy = (dst.lat(r) - s.lat0) / s.dlat;
        fy = std::clamp(fy, 0.0, static_cast<double>(s.nlat - 1));
        int r0, r1;
        double wy;
        locate(fy, s.nlat, &r0, &r1, &wy);
        for (int c = 0; c < dst.nlon; ++c) {
            double fx = (dst.lon(c) - s.lon0) / s.dlon;
            fx = std::clamp(fx, 0.0, static_cast<double>(s.nlon - 1));
            int c0, c1;
            double wx;
            locate(fx, s.nlon, &c0, &c1, &wx);

            const double v00 = src.at(r0, c0);
            const double v01 = src.at(r0, c1);
            const double v10 = src.at(r1, c0);
            const double v11 = src.at(r1, c1);
            const bool m00 = GridField::missing(v00);
            const bool m01 = GridField::missing(v01);
            const bool m10 = GridField::missing(v10);
            const bool m11 = GridField::missing(v11);

            double v;
            if (!m00 && !m01 && !m10 && !m11) {
                // Incremental form preserves constants bit-exactly.
                const double top = v00 + wx * (v01 - v00);
                const double bot = v10 + wx * (v11 - v10);
                v = top + wy * (bot - top);
            } else {
                double num = 0.0, den = 0.0;
                const double w00 = (1.0 - wx) * (1.0 - wy);
                const double w01 = wx * (1.0 - wy);
                const double w10 = (1.0 - wx) * wy;
                const double w11 = wx * wy;
                if (!m00) { num += w00 * v00; den += w00; }
                if (!m01) { num += w01 * v01; den += w01; }
                if (!m10) { num += w10 * v10; den += w10; }
                if (!m11) { num += w11 * v11; den += w11; }
                v = (den > 0.0) ? num / den : std::nan("");
            }
            out.at(r, c) = v;
        }
    }
    return out;
}

GridField coarsen_area_weighted(const GridField& src, const GridSpec& dst) {
    src.spec.validate();
    dst.validate();
    GridField out = GridField::make(dst, src.tag, src.year, src.sub, std::nan(""));
    std::vector<double> num(dst.size(), 0.0), den(dst.size(), 0.0);
    std::vector<char> covered(dst.size(), 0);

    const double lat_edge = dst.lat0 - 0.5 * dst.dlat;
    const double lon_edge = dst.lon0 - 0.5 * dst.dlon;
    for (int r = 0; r < src.spec.nlat; ++r) {
        const double lat = src.spec.lat(r);
        const int rd = static_cast<int>(std::floor((lat - lat_edge) / dst.dlat));
        if (rd < 0 || rd >= dst.nlat) continue;
        const double w = cell_area_weight(lat);
        for (int c = 0; c < src.spec.nlon; ++c) {
            const double lon = src.spec.lon(c);
            const int cd = static_cast<int>(std::floor((lon - lon_edge) / dst.dlon));
            if (cd < 0 || cd >= dst.nlon) continue;
            const std::size_t k = static_cast<std::size_t>(rd) * dst.nlon + cd;
            covered[k] = 1;
            const double v = src.at(r, c);
            if (GridField::missing(v)) continue;
            num[k] += w * v;
            den[k] += w;
        }
    }
    int empty = 0;
    for (std::size_t k = 0; k < dst.size(); ++k) {
        if (den[k] > 0.0) {
            out.values[k] = num[k] / den[k];
        } else {
            if (!covered[k]) ++empty;
        }
    }
    if (empty > 0) {
        log::warn("coarsen_area_weighted: " + std::to_string(empty) +
                  " destination cells cover no source center; left missing");
    }
    return out;
}

int CountryMonthPanel::country_index(const std::string& id) const {
    for (std::size_t i = 0; i < countries.size(); ++i) {
        if (countries[i] == id) return static_cast<int>(i);
    }
    return -1;
}

bool CountryMonthPanel::get(int country, int year, int month, double* out) const {
    const auto& m = values[static_cast<std::size_t>(country)];
    const auto it = m.find(year * 12 + month - 1);
    if (it == m.end()) return false;
    *out = it->second;
    return true;
}

void CountryMonthPanel::set(int country, int year, int month, double v) {
    values[static_cast<std::size_t>(country)][year * 12 + month - 1] = v;
}

CountryMonthPanel zonal_aggregate(const std::vector<GridField>& fields,
                                  const GridField& weights,
                                  const CountryMask& mask,
                                  ZonalReport* report) {
    mask.validate();
    if (!(weights.spec == mask.spec))
        throw DataError("zonal_aggregate: weights grid does not match mask grid");

    const std::size_t ncell = mask.spec.size();
    const std::size_t ncountry = mask.countries.size();

    // Cells per country, fixed across months.
    std::vector<std::vector<std::uint32_t>> cells(ncountry);
    for (std::size_t k = 0; k < ncell; ++k) {
        const std::int32_t id = mask.cell[k];
        if (id >= 0) cells[static_cast<std::size_t>(id)].push_back(static_cast<std::uint32_t>(k));
    }

    // Precompute per-cell weight*area and whether each country has any weight.
    std::vector<double> warea(ncell, 0.0), area(ncell, 0.0);
    for (int r = 0; r < mask.spec.nlat; ++r) {
        const double a = cell_area_weight(mask.spec.lat(r));
        for (int c = 0; c < mask.spec.nlon; ++c) {
            const std::size_t k = static_cast<std::size_t>(r) * mask.spec.nlon + c;
            const double w = weights.values[k];
            area[k] = a;
            warea[k] = GridField::missing(w) ? 0.0 : w * a;
        }
    }

    CountryMonthPanel out;
    out.countries = mask.countries;
    out.values.resize(ncountry);

    std::vector<char> zero_weight(ncountry, 0);
    for (std::size_t i = 0; i < ncountry; ++i) {
        if (cells[i].empty()) {
            if (report) report->absent_countries.push_back(mask.countries[i]);
            continue;
        }
        double total = 0.0;
        for (auto k : cells[i]) total += warea[k];
        if (total <= 0.0) {
            zero_weight[i] = 1;
            if (report) report->zero_weight_countries.push_back(mask.countries[i]);
            log::info("zonal_aggregate: country " + mask.countries[i] +
                      " has zero total weight; using unweighted area mean");
        }
    }

    for (const auto& f : fields) {
        if (!(f.spec == mask.spec))
            throw DataError("zonal_aggregate: field grid does not match mask grid");
        for (std::size_t i = 0; i < ncountry; ++i) {
            if (cells[i].empty()) continue;
            double num = 0.0, den = 0.0;
            const bool fallback = zero_weight[i] != 0;
            for (auto k : cells[i]) {
                const double v = f.values[k];
                if (GridField::missing(v)) continue;
                const double w = fallback ? area[k] : warea[k];
                num += w * v;
                den += w;
            }
            if (den > 0.0) {
                out.set(static_cast<int>(i), f.year, f.sub, num / den);
            }
        }
    }
    return out;
}

// ---- binary formats ----

namespace {
constexpr std::uint32_t GRID_VERSION = 1;

void put_u32(std::ofstream& o, std::uint32_t v) { o.write(reinterpret_cast<const char*>(&v), 4); }
void put_i32(std::ofstream& o, std::int32_t v) { o.write(reinterpret_cast<const char*>(&v), 4); }
void put_f64(std::ofstream& o, double v) { o.write(reinterpret_cast<const char*>(&v), 8); }

std::uint32_t get_u32(std::ifstream& i, const std::string& p) {
    std::uint32_t v;
    if (!i.read(reinterpret_cast<char*>(&v), 4)) throw DataError(p + ": truncated file");
    return v;
}
std::int32_t get_i32(std::ifstream& i, const std::string& p) {
    std::int32_t v;
    if (!i.read(reinterpret_cast<char*>(&v), 4)) throw DataError(p + ": truncated file");
    return v;
}
double get_f64(std::ifstream& i, const std::string& p) {
    double v;
    if (!i.read(reinterpret_cast<char*>(&v), 8)) throw DataError(p + ": truncated file");
    return v;
}
}  // namespace

void write_grid(const GridField& f, const std::string& path) {
    f.validate();
    std::ofstream o(path, std::ios::binary);
    if (!o) throw DataError("cannot write '" + path + "'");
    o.write("AGRF", 4);
    put_u32(o, GRID_VERSION);
    put_f64(o, f.spec.lat0);
    put_f64(o, f.spec.lon0);
    put_f64(o, f.spec.dlat);
    put_f64(o, f.spec.dlon);
    put_u32(o, static_cast<std::uint32_t>(f.spec.nlat));
    put_u32(o, static_cast<std::uint32_t>(f.spec.nlon));
    put_u32(o, static_cast<std::uint32_t>(f.tag));
    put_i32(o, f.year);
    put_i32(o, f.sub);
    o.write(reinterpret_cast<const char*>(f.values.data()),
            static_cast<std::streamsize>(f.values.size() * sizeof(double)));
    if (!o) throw DataError("short write to '" + path + "'");
}

GridField read_grid(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "AGRF", 4) != 0)
        throw DataError(path + ": not a grid file (bad magic)");
    const std::uint32_t version = get_u32(in, path);
    if (version != GRID_VERSION)
        throw DataError(path + ": unsupported grid version " + std::to_string(version));
    GridField f;
    f.spec.lat0 = get_f64(in, path);
    f.spec.lon0 = get_f64(in, path);
    f.spec.dlat = get_f64(in, path);
    f.spec.dlon = get_f64(in, path);
    f.spec.nlat = static_cast<int>(get_u32(in, path));
    f.spec.nlon = static_cast<int>(get_u32(in, path));
    const std::uint32_t tag = get_u32(in, path);
    if (tag > static_cast<std::uint32_t>(VarTag::weight))
        throw DataError(path + ": unknown variable tag");
    f.tag = static_cast<VarTag>(tag);
    f.year = get_i32(in, path);
    f.sub = get_i32(in, path);
    f.spec.validate();
    f.values.resize(f.spec.size());
    if (!in.read(reinterpret_cast<char*>(f.values.data()),
                 static_cast<std::streamsize>(f.values.size() * sizeof(double))))
        throw DataError(path + ": truncated values");
    f.validate();
    return f;
}

void write_grid_csv(const GridField& f, const std::string& path) {
    csv::Writer w(path);
    w.field(std::string("lat"));
    w.field(std::string("lon"));
    w.field(std::string("value"));
    w.endrow();
    for (int r = 0; r < f.spec.nlat; ++r) {
        for (int c = 0; c < f.spec.nlon; ++c) {
            w.field(f.spec.lat(r));
            w.field(f.spec.lon(c));
            const double v = f.at(r, c);
            if (GridField::missing(v)) w.field(std::string("NA"));
            else w.field(v);
            w.endrow();
        }
    }
}

void write_mask(const CountryMask& m, const std::string& path) {
    m.validate();
    std::ofstream o(path, std::ios::binary);
    if (!o) throw DataError("cannot write '" + path + "'");
    o.write("AMSK", 4);
    put_u32(o, GRID_VERSION);
    put_f64(o, m.spec.lat0);
    put_f64(o, m.spec.lon0);
    put_f64(o, m.spec.dlat);
    put_f64(o, m.spec.dlon);
    put_u32(o, static_cast<std::uint32_t>(m.spec.nlat));
    put_u32(o, static_cast<std::uint32_t>(m.spec.nlon));
    put_u32(o, static_cast<std::uint32_t>(m.countries.size()));
    for (const auto& name : m.countries) {
        put_u32(o, static_cast<std::uint32_t>(name.size()));
        o.write(name.data(), static_cast<std::streamsize>(name.size()));
    }
    o.write(reinterpret_cast<const char*>(m.cell.data()),
            static_cast<std::streamsize>(m.cell.size() * sizeof(std::int32_t)));
    if (!o) throw DataError("short write to '" + path + "'");
}

CountryMask read_mask(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "AMSK", 4) != 0)
        throw DataError(path + ": not a mask file (bad magic)");
    const std::uint32_t version = get_u32(in, path);
    if (version != GRID_VERSION)
        throw DataError(path + ": unsupported mask version");
    CountryMask m;
    m.spec.lat0 = get_f64(in, path);
    m.spec.lon0 = get_f64(in, path);
    m.spec.dlat = get_f64(in, path);
    m.spec.dlon = get_f64(in, path);
    m.spec.nlat = static_cast<int>(get_u32(in, path));
    m.spec.nlon = static_cast<int>(get_u32(in, path));
    const std::uint32_t n = get_u32(in, path);
    m.countries.resize(n);
    for (auto& name : m.countries) {
        const std::uint32_t len = get_u32(in, path);
        if (len > 4096) throw DataError(path + ": unreasonable country name length");
        name.resize(len);
        if (!in.read(name.data(), len)) throw DataError(path + ": truncated country table");
    }
    m.spec.validate();
    m.cell.resize(m.spec.size());
    if (!in.read(reinterpret_cast<char*>(m.cell.data()),
                 static_cast<std::streamsize>(m.cell.size() * sizeof(std::int32_t))))
        throw DataError(path + ": truncated cells");
    m.validate();
    return m;
}

std::map<GridKey, GridField> load_grid_dir(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw DataError("not a directory: '" + dir + "'");
    std::vector<std::string> paths;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().extension() == ".agrf") paths.push_back(e.path().string());
    }
    std::sort(paths.begin(), paths.end());
    std::map<GridKey, GridField> out;
    for (const auto& p : paths) {
        GridField f = read_grid(p);
        const GridKey key{f.tag, f.year, f.sub};
        if (out.count(key))
            throw DataError(dir + ": duplicate grid for " + tag_name(f.tag) + " " +
                            std::to_string(f.year) + "/" + std::to_string(f.sub));
        out.emplace(key, std::move(f));
    }
    return out;
}

}  // namespace attrib::gridops
