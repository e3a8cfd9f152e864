#include "attrib/modelspec.hpp"

#include <vector>

#include "attrib/errors.hpp"

namespace attrib {

const char* tvar_token(TVar t) {
    switch (t) {
        case TVar::tmean: return "tmean";
        case TVar::tmin: return "tmin";
        case TVar::tmax: return "tmax";
    }
    return "?";
}
const char* form_token(Form f) { return f == Form::quadratic ? "quadratic" : "cubic"; }
const char* reg_weights_token(RegWeights w) { return w == RegWeights::equal ? "equal" : "revenue"; }
const char* agg_weights_token(AggWeights w) {
    return w == AggWeights::cropland ? "cropland" : "cropland_pasture";
}
const char* window_token(Window w) { return w == Window::green ? "green" : "calendar"; }
const char* hetero_token(Hetero h) { return h == Hetero::pooled ? "pooled" : "lat3"; }
const char* dependent_token(Dependent d) {
    return d == Dependent::tfp_growth ? "tfp_growth" : "output_growth";
}

namespace {
[[noreturn]] void bad_token(const std::string& what, const std::string& s) {
    throw UsageError("unknown " + what + " token '" + s + "'");
}
}  // namespace

TVar tvar_from_token(const std::string& s) {
    if (s == "tmean") return TVar::tmean;
    if (s == "tmin") return TVar::tmin;
    if (s == "tmax") return TVar::tmax;
    bad_token("temperature variable", s);
}
Form form_from_token(const std::string& s) {
    if (s == "quadratic") return Form::quadratic;
    if (s == "cubic") return Form::cubic;
    bad_token("functional form", s);
}
RegWeights reg_weights_from_token(const std::string& s) {
    if (s == "equal") return RegWeights::equal;
    if (s == "revenue") return RegWeights::revenue;
    bad_token("regression weights", s);
}
AggWeights agg_weights_from_token(const std::string& s) {
    if (s == "cropland") return AggWeights::cropland;
    if (s == "cropland_pasture") return AggWeights::cropland_pasture;
    bad_token("aggregation weights", s);
}
Window window_from_token(const std::string& s) {
    if (s == "green") return Window::green;
    if (s == "calendar") return Window::calendar;
    bad_token("window", s);
}
Hetero hetero_from_token(const std::string& s) {
    if (s == "pooled") return Hetero::pooled;
    if (s == "lat3") return Hetero::lat3;
    bad_token("heterogeneity", s);
}
Dependent dependent_from_token(const std::string& s) {
    if (s == "tfp_growth") return Dependent::tfp_growth;
    if (s == "output_growth") return Dependent::output_growth;
    bad_token("dependent variable", s);
}

std::string Restriction::token() const {
    switch (kind) {
        case Kind::none: return "none";
        case Kind::drop_country: return "drop:" + country;
        case Kind::coldest10: return "coldest10";
        case Kind::hottest10: return "hottest10";
        case Kind::years:
            return "years:" + std::to_string(year_lo) + "-" + std::to_string(year_hi);
    }
    return "?";
}

Restriction Restriction::from_token(const std::string& s) {
    if (s == "none") return none();
    if (s == "coldest10") return coldest();
    if (s == "hottest10") return hottest();
    if (s.rfind("drop:", 0) == 0) {
        const std::string c = s.substr(5);
        if (c.empty()) throw UsageError("drop restriction needs a country id");
        return drop(c);
    }
    if (s.rfind("years:", 0) == 0) {
        const std::string body = s.substr(6);
        const auto dash = body.find('-');
        if (dash == std::string::npos) throw UsageError("years restriction must be years:LO-HI");
        try {
            return years(std::stoi(body.substr(0, dash)), std::stoi(body.substr(dash + 1)));
        } catch (const std::exception&) {
            throw UsageError("years restriction must be years:LO-HI");
        }
    }
    throw UsageError("unknown restriction token '" + s + "'");
}

std::string ModelSpec::key() const {
    std::string k;
    k += tvar_token(tvar);
    k += '|';
    k += include_precip ? "precip" : "noprecip";
    k += '|';
    k += form_token(form);
    k += '|';
    k += reg_weights_token(reg_weights);
    k += '|';
    k += agg_weights_token(agg_weights);
    k += '|';
    k += window_token(window);
    k += '|';
    k += hetero_token(hetero);
    k += '|';
    k += restriction.token();
    k += '|';
    k += dependent_token(dependent);
    return k;
}

ModelSpec ModelSpec::from_key(const std::string& key) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        const auto pos = key.find('|', start);
        if (pos == std::string::npos) {
            parts.push_back(key.substr(start));
            break;
        }
        parts.push_back(key.substr(start, pos - start));
        start = pos + 1;
    }
    if (parts.size() != 9) throw UsageError("model key must have 9 '|'-separated parts");
    ModelSpec s;
    s.tvar = tvar_from_token(parts[0]);
    if (parts[1] == "precip") s.include_precip = true;
    else if (parts[1] == "noprecip") s.include_precip = false;
    else throw UsageError("unknown precip token '" + parts[1] + "'");
    s.form = form_from_token(parts[2]);
    s.reg_weights = reg_weights_from_token(parts[3]);
    s.agg_weights = agg_weights_from_token(parts[4]);
    s.window = window_from_token(parts[5]);
    s.hetero = hetero_from_token(parts[6]);
    s.restriction = Restriction::from_token(parts[7]);
    s.dependent = dependent_from_token(parts[8]);
    return s;
}

}  // namespace attrib
