#pragma once

// Declarative run description.
//
// A config is a preset name plus a set of key overrides. The resolved fields
// are a pure function of (preset, overrides), so render() only has to echo
// those two and parse_config(render(c)) == c holds field for field.
//
// Text format: one `key = value` per line, `#` starts a comment, keys are
// dot-namespaced (bath.n, grid.dt, hybrid.g_bar). Lists are comma separated.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "qdecay/analytics.hpp"
#include "qdecay/bath.hpp"
#include "qdecay/dynamics.hpp"
#include "qdecay/error.hpp"

namespace qdecay {

enum class RunMode { qubit, hybrid };

struct ExperimentConfig {
    std::string preset;
    std::map<std::string, std::string> overrides;

    RunMode mode = RunMode::qubit;
    BathSpec bath;
    double gamma0_target = NAN;  // NaN: gamma_max is taken as given
    double r = 1.0;
    double g_bar = 0.0;
    TimeGrid grid{10.0, 0.0, 1};  // dt = 0: default step from the stability bound
    double step_fraction = 0.25;  // default dt = step_fraction / lambda_max
    std::size_t renormalize_every = 0;
    double norm_tolerance = 1e-6;
    std::uint64_t seed = 0;
    std::string output_dir = "out";
    bool emit_overlays = true;
    std::vector<double> emit_checkpoints;
    std::size_t ensemble = 1;
    FitWindow fit{0.0, 0.0};  // empty: no rate fit
    std::vector<double> kappa_sweep;  // mean internal couplings, one run each
    std::optional<RevivalKind> revival;
    double revival_parameter = 0.0;

    bool operator==(const ExperimentConfig& o) const;
};

namespace detail {

inline std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

inline ConfigError bad_value(const std::string& key, const std::string& value, const char* type) {
    return ConfigError("config: key '" + key + "' expects " + type + ", got '" + value + "'");
}

inline double parse_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto* end = v.data() + v.size();
    const auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || p != end) throw bad_value(key, v, "a number");
    return out;
}

inline std::uint64_t parse_unsigned(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto* end = v.data() + v.size();
    const auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || p != end) throw bad_value(key, v, "a non-negative integer");
    return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw bad_value(key, v, "true or false");
}

inline std::vector<double> parse_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    if (v.empty()) return out;
    std::size_t start = 0;
    while (true) {
        const auto comma = v.find(',', start);
        const std::string item = trim(std::string_view(v).substr(start, comma - start));
        out.push_back(parse_double(key, item));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

template <class Enum>
Enum parse_enum(const std::string& key, const std::string& v,
                std::initializer_list<std::pair<const char*, Enum>> names) {
    for (const auto& [name, e] : names)
        if (v == name) return e;
    std::string allowed;
    for (const auto& [name, e] : names) allowed += (allowed.empty() ? "" : "|") + std::string(name);
    throw ConfigError("config: key '" + key + "' expects one of " + allowed + ", got '" + v + "'");
}

inline RevivalKind parse_revival(const std::string& key, const std::string& v) {
    return parse_enum<RevivalKind>(key, v,
                                   {{"full_random", RevivalKind::full_random},
                                    {"degenerate_resonant", RevivalKind::degenerate_resonant},
                                    {"degenerate_detuned", RevivalKind::degenerate_detuned},
                                    {"equal_couplings", RevivalKind::equal_couplings},
                                    {"narrow", RevivalKind::narrow}});
}

using Setter = std::function<void(ExperimentConfig&, const std::string& key, const std::string& value)>;

struct KeyInfo {
    const char* key;
    const char* help;
    Setter set;
};

// Application order is this table's order, independent of line order in the text.
inline const std::vector<KeyInfo>& key_table() {
    static const std::vector<KeyInfo> table = {
        {"mode", "qubit | hybrid",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.mode = parse_enum<RunMode>(k, v, {{"qubit", RunMode::qubit}, {"hybrid", RunMode::hybrid}});
         }},
        {"revival", "full_random | degenerate_resonant | degenerate_detuned | equal_couplings | narrow",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.revival = parse_revival(k, v); }},
        {"revival.parameter", "detuned frequency or band width of the revival bath",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.revival_parameter = parse_double(k, v);
         }},
        {"seed", "base seed of all random streams",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.seed = parse_unsigned(k, v); }},
        {"output_dir", "directory for report.txt and CSV files",
         [](ExperimentConfig& c, const std::string&, const std::string& v) { c.output_dir = v; }},
        {"emit_overlays", "write the analytic overlay CSV",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.emit_overlays = parse_bool(k, v); }},
        {"emit_checkpoints", "times at which full amplitude vectors are written",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.emit_checkpoints = parse_list(k, v); }},
        {"ensemble", "number of bath realizations averaged per trajectory",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.ensemble = parse_unsigned(k, v); }},
        {"bath.n", "number of oscillators",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.bath.n_oscillators = parse_unsigned(k, v);
         }},
        {"bath.center", "band centre",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.bath.center = parse_double(k, v); }},
        {"bath.width", "full bandwidth",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.bath.width = parse_double(k, v); }},
        {"bath.frequency_dist", "uniform | degenerate | evenly_spaced",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.bath.frequency_dist = parse_enum<FrequencyDist>(k, v,
                                                               {{"uniform", FrequencyDist::uniform},
                                                                {"degenerate", FrequencyDist::degenerate},
                                                                {"evenly_spaced", FrequencyDist::evenly_spaced}});
         }},
        {"bath.omega_fix", "common frequency of a degenerate bath",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.bath.omega_fix = parse_double(k, v); }},
        {"bath.coupling_dist", "uniform | fixed",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.bath.qubit_coupling_dist =
                 parse_enum<CouplingDist>(k, v, {{"uniform", CouplingDist::uniform}, {"fixed", CouplingDist::fixed}});
         }},
        {"bath.gamma0", "target decay rate; sets gamma_max",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.gamma0_target = parse_double(k, v); }},
        {"bath.gamma_max", "maximal coupling (replaces bath.gamma0)",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.bath.gamma_max = parse_double(k, v);
             c.gamma0_target = NAN;
         }},
        {"bath.kappa_dist", "none | uniform | fixed",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.bath.internal_coupling_dist = parse_enum<InternalCouplingDist>(k, v,
                                                                              {{"none", InternalCouplingDist::none},
                                                                               {"uniform", InternalCouplingDist::uniform},
                                                                               {"fixed", InternalCouplingDist::fixed}});
         }},
        {"bath.kappa_max", "maximal internal coupling",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.bath.kappa_max = parse_double(k, v); }},
        {"bath.partition", "fractions of oscillators per bath",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.bath.partition = parse_list(k, v); }},
        {"bath.dense_guard", "largest N allowed with internal couplings",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.bath.dense_guard = parse_unsigned(k, v);
         }},
        {"hybrid.r", "qubit to cavity frequency ratio",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.r = parse_double(k, v); }},
        {"hybrid.detuning", "D = r - 1 (sets hybrid.r)",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.r = 1.0 + parse_double(k, v); }},
        {"hybrid.g_bar", "qubit-cavity coupling",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.g_bar = parse_double(k, v); }},
        {"grid.t_end", "final time",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.grid.t_end = parse_double(k, v); }},
        {"grid.dt", "RK4 step (0: default from stability bound)",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.grid.dt = parse_double(k, v); }},
        {"grid.step_fraction", "default step as a fraction of 1/lambda_max (used when grid.dt = 0)",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.step_fraction = parse_double(k, v); }},
        {"grid.sample_stride", "record every k-th step",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.grid.sample_stride = parse_unsigned(k, v);
         }},
        {"grid.renormalize_every", "renormalize every k steps (0: never)",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.renormalize_every = parse_unsigned(k, v);
         }},
        {"grid.norm_tolerance", "norm drift tolerance",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.norm_tolerance = parse_double(k, v); }},
        {"fit.lo", "start of the rate fit window",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.fit.lo = parse_double(k, v); }},
        {"fit.hi", "end of the rate fit window",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.fit.hi = parse_double(k, v); }},
        {"sweep.kappa", "mean internal couplings, one run each",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.kappa_sweep = parse_list(k, v); }},
    };
    return table;
}

inline const KeyInfo* find_key(const std::string& key) {
    for (const auto& info : key_table())
        if (key == info.key) return &info;
    return nullptr;
}

}  // namespace detail

inline bool ExperimentConfig::operator==(const ExperimentConfig& o) const {
    auto same = [](double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); };
    const BathSpec& a = bath;
    const BathSpec& b = o.bath;
    return preset == o.preset && overrides == o.overrides && mode == o.mode && a.n_oscillators == b.n_oscillators &&
           a.center == b.center && a.width == b.width && a.qubit_coupling_dist == b.qubit_coupling_dist &&
           a.gamma_max == b.gamma_max && a.frequency_dist == b.frequency_dist && a.omega_fix == b.omega_fix &&
           a.internal_coupling_dist == b.internal_coupling_dist && a.kappa_max == b.kappa_max && a.seed == b.seed &&
           a.partition == b.partition && a.dense_guard == b.dense_guard && same(gamma0_target, o.gamma0_target) &&
           r == o.r && g_bar == o.g_bar && grid.t_end == o.grid.t_end && grid.dt == o.grid.dt && step_fraction == o.step_fraction &&
           grid.sample_stride == o.grid.sample_stride && renormalize_every == o.renormalize_every &&
           norm_tolerance == o.norm_tolerance && seed == o.seed && output_dir == o.output_dir &&
           emit_overlays == o.emit_overlays && emit_checkpoints == o.emit_checkpoints && ensemble == o.ensemble &&
           fit.lo == o.fit.lo && fit.hi == o.fit.hi && kappa_sweep == o.kappa_sweep && revival == o.revival &&
           revival_parameter == o.revival_parameter;
}

/// Preset defaults; defined by the preset catalogue.
inline ExperimentConfig preset_defaults(const std::string& name);

/// Type invariants of a resolved config.
inline void validate(const ExperimentConfig& c) {
    c.bath.validate();
    if ((c.bath.has_internal_couplings() || !c.kappa_sweep.empty()) && c.bath.n_oscillators > c.bath.dense_guard)
        throw MemoryGuardError(c.bath.n_oscillators, c.bath.dense_guard);
    if (c.mode == RunMode::hybrid) {
        if (!(c.g_bar >= 0.0)) throw ConfigError("config: hybrid.g_bar must be >= 0");
        if (!(c.r > 0.0)) throw ConfigError("config: hybrid.r must be positive");
        if (c.bath.center != 1.0) throw ConfigError("config: hybrid runs need bath.center = 1");
        if (!c.kappa_sweep.empty()) throw ConfigError("config: sweep.kappa applies to qubit runs only");
    }
    if (!(c.grid.t_end >= 0.0)) throw ConfigError("config: grid.t_end must be >= 0");
    if (!(c.grid.dt >= 0.0)) throw ConfigError("config: grid.dt must be >= 0");
    if (!(c.step_fraction > 0.0 && c.step_fraction < 2.8))
        throw ConfigError("config: grid.step_fraction must lie in (0, 2.8)");
    if (c.grid.sample_stride == 0) throw ConfigError("config: grid.sample_stride must be >= 1");
    if (!(c.norm_tolerance > 0.0)) throw ConfigError("config: grid.norm_tolerance must be positive");
    if (c.ensemble == 0) throw ConfigError("config: ensemble must be >= 1");
    if (c.fit.hi < c.fit.lo) throw ConfigError("config: fit.hi must not be below fit.lo");
    if (!std::isnan(c.gamma0_target) && !(c.gamma0_target >= 0.0))
        throw ConfigError("config: bath.gamma0 must be >= 0");
    for (double k : c.kappa_sweep)
        if (!(k >= 0.0)) throw ConfigError("config: sweep.kappa entries must be >= 0");
    for (double t : c.emit_checkpoints)
        if (!(t >= 0.0 && t <= c.grid.t_end)) throw ConfigError("config: checkpoint times must lie in [0, t_end]");
}

/// Builds the resolved config from a preset and overrides.
inline ExperimentConfig resolve(const std::string& preset, const std::map<std::string, std::string>& overrides) {
    ExperimentConfig c = preset_defaults(preset);
    c.overrides = overrides;
    for (const auto& [key, value] : overrides)
        if (!detail::find_key(key)) throw ConfigError("config: unknown key '" + key + "'");

    auto apply = [&](const char* key) {
        const auto it = overrides.find(key);
        if (it == overrides.end()) return;
        detail::find_key(key)->set(c, key, it->second);
    };
    apply("mode");
    apply("revival");
    apply("revival.parameter");
    if (c.revival) {
        const auto rp = revival_preset(*c.revival, c.revival_parameter);
        c.bath = rp.spec;
        c.gamma0_target = NAN;
    }
    for (const auto& info : detail::key_table()) {
        const std::string k = info.key;
        if (k == "mode" || k == "revival" || k == "revival.parameter") continue;
        apply(info.key);
    }
    if (overrides.count("bath.gamma0") && overrides.count("bath.gamma_max"))
        throw ConfigError("config: set bath.gamma0 or bath.gamma_max, not both");
    // A target rate fixes gamma_max for whatever N and width are in force.
    if (!std::isnan(c.gamma0_target)) {
        if (c.bath.n_oscillators == 0 || c.gamma0_target == 0.0) {
            c.bath.gamma_max = 0.0;
        } else {
            if (!(c.bath.width > 0.0)) throw ConfigError("config: bath.gamma0 needs a positive bath.width");
            c.bath.gamma_max = gamma_max_for_target_rate(c.gamma0_target, c.bath.n_oscillators, c.bath.width,
                                                         c.bath.qubit_coupling_dist);
        }
    }
    c.bath.seed = c.seed;
    try {
        validate(c);
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return c;
}

/// Parses `key = value` text. Unknown keys, malformed values, duplicate keys
/// and a missing preset are errors.
inline ExperimentConfig parse_config(std::string_view text) {
    std::optional<std::string> preset;
    std::map<std::string, std::string> overrides;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        const std::string body = detail::trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: line " + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = detail::trim(std::string_view(body).substr(0, eq));
        const std::string value = detail::trim(std::string_view(body).substr(eq + 1));
        if (key.empty()) throw ConfigError("config: line " + std::to_string(lineno) + ": empty key");
        if (key == "preset") {
            if (preset) throw ConfigError("config: duplicate key 'preset'");
            preset = value;
            continue;
        }
        if (!detail::find_key(key)) throw ConfigError("config: unknown key '" + key + "'");
        if (!overrides.emplace(key, value).second) throw ConfigError("config: duplicate key '" + key + "'");
    }
    if (!preset) throw ConfigError("config: missing preset");
    return resolve(*preset, overrides);
}

/// Replaces (or adds) one override and re-resolves.
inline ExperimentConfig with_override(const ExperimentConfig& c, const std::string& key, const std::string& value) {
    auto overrides = c.overrides;
    overrides[key] = value;
    return resolve(c.preset, overrides);
}

inline std::string render(const ExperimentConfig& c) {
    std::string out = "preset = " + c.preset + "\n";
    for (const auto& [key, value] : c.overrides) out += key + " = " + value + "\n";
    return out;
}

inline std::string format_double(double v) {
    char buf[32];
    const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return ec == std::errc() ? std::string(buf, p) : std::string("nan");
}

inline const char* to_string(RunMode m) { return m == RunMode::hybrid ? "hybrid" : "qubit"; }

/// Fully expanded listing of the resolved fields, for reports.
inline std::string describe(const ExperimentConfig& c) {
    auto list = [](const std::vector<double>& v) {
        std::string s;
        for (double x : v) s += (s.empty() ? "" : ",") + format_double(x);
        return s;
    };
    const BathSpec& b = c.bath;
    std::ostringstream os;
    os << "preset = " << c.preset << "\n"
       << "mode = " << to_string(c.mode) << "\n"
       << "seed = " << c.seed << "\n"
       << "ensemble = " << c.ensemble << "\n"
       << "bath.n = " << b.n_oscillators << "\n"
       << "bath.center = " << format_double(b.center) << "\n"
       << "bath.width = " << format_double(b.width) << "\n"
       << "bath.frequency_dist = "
       << (b.frequency_dist == FrequencyDist::uniform      ? "uniform"
           : b.frequency_dist == FrequencyDist::degenerate ? "degenerate"
                                                           : "evenly_spaced")
       << "\n"
       << "bath.omega_fix = " << format_double(b.omega_fix) << "\n"
       << "bath.coupling_dist = " << (b.qubit_coupling_dist == CouplingDist::uniform ? "uniform" : "fixed") << "\n"
       << "bath.gamma0 = " << format_double(c.gamma0_target) << "\n"
       << "bath.gamma_max = " << format_double(b.gamma_max) << "\n"
       << "bath.kappa_dist = "
       << (b.internal_coupling_dist == InternalCouplingDist::none      ? "none"
           : b.internal_coupling_dist == InternalCouplingDist::uniform ? "uniform"
                                                                       : "fixed")
       << "\n"
       << "bath.kappa_max = " << format_double(b.kappa_max) << "\n"
       << "bath.partition = " << list(b.partition) << "\n";
    if (c.mode == RunMode::hybrid)
        os << "hybrid.r = " << format_double(c.r) << "\n"
           << "hybrid.g_bar = " << format_double(c.g_bar) << "\n";
    os << "grid.t_end = " << format_double(c.grid.t_end) << "\n"
       << "grid.dt = " << format_double(c.grid.dt) << "\n"
       << "grid.step_fraction = " << format_double(c.step_fraction) << "\n"
       << "grid.sample_stride = " << c.grid.sample_stride << "\n"
       << "grid.renormalize_every = " << c.renormalize_every << "\n"
       << "fit.lo = " << format_double(c.fit.lo) << "\n"
       << "fit.hi = " << format_double(c.fit.hi) << "\n";
    if (!c.kappa_sweep.empty()) os << "sweep.kappa = " << list(c.kappa_sweep) << "\n";
    if (c.revival) os << "revival.parameter = " << format_double(c.revival_parameter) << "\n";
    return os.str();
}

}  // namespace qdecay

#include "qdecay/presets.hpp"
