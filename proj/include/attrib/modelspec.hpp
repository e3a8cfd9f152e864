#pragma once

#include <cstdint>
#include <string>

namespace attrib {

enum class TVar { tmean, tmin, tmax };
enum class Form { quadratic, cubic };
enum class RegWeights { equal, revenue };
enum class AggWeights { cropland, cropland_pasture };
enum class Window { green, calendar };
enum class Hetero { pooled, lat3 };
enum class Dependent { tfp_growth, output_growth };

struct Restriction {
    enum class Kind { none, drop_country, coldest10, hottest10, years };
    Kind kind = Kind::none;
    std::string country;   // drop_country
    int year_lo = 0;       // years
    int year_hi = 0;

    static Restriction none() { return {}; }
    static Restriction drop(std::string c) {
        Restriction r;
        r.kind = Kind::drop_country;
        r.country = std::move(c);
        return r;
    }
    static Restriction coldest() { return {Kind::coldest10, "", 0, 0}; }
    static Restriction hottest() { return {Kind::hottest10, "", 0, 0}; }
    static Restriction years(int lo, int hi) { return {Kind::years, "", lo, hi}; }

    std::string token() const;
    static Restriction from_token(const std::string& s);
    bool operator==(const Restriction&) const = default;
};

// One point in the model space: the seven swept dimensions plus the data
// restriction and the dependent variable.
struct ModelSpec {
    TVar tvar = TVar::tmean;
    bool include_precip = true;
    Form form = Form::quadratic;
    RegWeights reg_weights = RegWeights::equal;
    AggWeights agg_weights = AggWeights::cropland;
    Window window = Window::green;
    Hetero hetero = Hetero::pooled;
    Restriction restriction = Restriction::none();
    Dependent dependent = Dependent::tfp_growth;

    static ModelSpec baseline() { return ModelSpec{}; }

    // Canonical token string; stable across runs, used as the seed tag and
    // the uniqueness key in sweep reports.
    std::string key() const;
    static ModelSpec from_key(const std::string& key);

    bool operator==(const ModelSpec&) const = default;

    int n_weather_columns() const {
        const int per_var = (form == Form::cubic) ? 3 : 2;
        return per_var * (include_precip ? 2 : 1);
    }
};

const char* tvar_token(TVar t);
const char* form_token(Form f);
const char* reg_weights_token(RegWeights w);
const char* agg_weights_token(AggWeights w);
const char* window_token(Window w);
const char* hetero_token(Hetero h);
const char* dependent_token(Dependent d);

TVar tvar_from_token(const std::string& s);
Form form_from_token(const std::string& s);
RegWeights reg_weights_from_token(const std::string& s);
AggWeights agg_weights_from_token(const std::string& s);
Window window_from_token(const std::string& s);
Hetero hetero_from_token(const std::string& s);
Dependent dependent_from_token(const std::string& s);

}  // namespace attrib
