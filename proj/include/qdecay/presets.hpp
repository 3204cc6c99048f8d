#pragma once

// Preset catalogue: one entry per experiment, each parameter with a short
// note. Oscillator counts default to desk scale (1e5 instead of 1e6); rates,
// bandwidths and couplings are kept.

#include <string>
#include <vector>

#include "qdecay/config.hpp"

namespace qdecay {

struct PresetParameter {
    std::string key;
    std::string value;
    std::string note;
};

struct PresetInfo {
    std::string name;
    std::string summary;
    std::vector<PresetParameter> parameters;
};

/// Mean internal couplings of the fig3 sweep.
inline const std::vector<double>& fig3_kappa_means() {
    static const std::vector<double> v = {0.0, 5e-5, 7.5e-5, 1.5e-4, 2.5e-4, 5e-4, 1.5e-3};
    return v;
}

inline const std::vector<PresetInfo>& preset_catalogue() {
    static const std::vector<PresetInfo> catalogue = {
        {"fig2a",
         "exponential and short-time quadratic decay",
         {{"bath.gamma0", "0.03", "target decay rate"},
          {"bath.width", "1", "full bandwidth"},
          {"bath.kappa_dist", "none", "no internal couplings"},
          {"bath.n", "100000", "desk scale; 1e6 by override"},
          {"fit.lo, fit.hi", "10, 60", "exponential fit window"}}},
        {"fig2b",
         "long-time non-exponential tail and crossover",
         {{"bath.gamma0", "0.1", "target decay rate"},
          {"bath.width", "1", "full bandwidth"},
          {"bath.n", "100000", "desk scale"},
          {"grid.t_end", "3000", "long enough for the power-law tail"}}},
        {"fig3",
         "internal bath couplings slow the decay",
         {{"bath.gamma0", "0.03", "target decay rate"},
          {"bath.width", "2", "full bandwidth"},
          {"bath.n", "3000", "dense internal couplings"},
          {"bath.kappa_dist", "uniform", "kappa_ij uniform on [0, 2 <kappa>]"},
          {"sweep.kappa", "0,5e-5,7.5e-5,1.5e-4,2.5e-4,5e-4,1.5e-3",
           "mean internal couplings, one run each"},
          {"grid.t_end", "60", "end of the fit window"},
          {"grid.step_fraction", "0.2", "keeps RK4 norm loss on the collective kappa mode below 1e-6"},
          {"ensemble", "10", "bath realizations averaged per sweep point"}}},
        {"fig4_multibath",
         "decay into two uncoupled baths",
         {{"bath.gamma0", "0.084", "total decay rate into both baths"},
          {"bath.width", "1", "full bandwidth"},
          {"bath.kappa_dist", "none", "no internal couplings"},
          {"bath.partition", "0.3,0.7", "oscillator fractions of the two baths"},
          {"bath.n", "100000", "desk scale; 1e6 by override"}}},
        {"fig_decays_a",
         "randomness of bath frequencies; revival family via `revival`",
         {{"bath.n", "100000", "oscillator count"},
          {"bath.gamma_max", "0.001", "gives Gamma0 ~ 0.1"},
          {"bath.width", "2", "fully random frequencies"},
          {"bath.kappa_dist", "none", "no internal couplings"},
          {"revival.parameter", "0.4 (degenerate_detuned), 0.3 (narrow)",
           "degenerate frequency or narrow bandwidth"}}},
        {"fig_decays_b",
         "randomness with internal couplings",
         {{"bath.n", "1000", "oscillator count"},
          {"bath.gamma_max", "0.004", "qubit coupling maximum"},
          {"bath.kappa_max", "0.01", "internal coupling maximum"},
          {"bath.kappa_dist", "uniform", "uniform internal couplings"},
          {"bath.width", "2", "full bandwidth"}}},
        {"fig6",
         "qubit - cavity - bath: global vs local decay",
         {{"hybrid.g_bar", "0.1", "qubit-cavity coupling"},
          {"hybrid.detuning", "-0.25", "qubit detuning from the cavity"},
          {"bath.gamma0", "0.01", "global regime; 0 isolates the pair, 1 gives the local regime"},
          {"bath.n", "10000", "oscillator count"},
          {"bath.width", "2", "full bandwidth"},
          {"ensemble", "32", "bath realizations averaged per trace"}}},
        {"custom", "empty skeleton: no oscillators, set every key explicitly", {}},
    };
    return catalogue;
}

inline ExperimentConfig preset_defaults(const std::string& name) {
    ExperimentConfig c;
    c.preset = name;
    BathSpec& b = c.bath;
    b.center = 1.0;
    if (name == "fig2a") {
        b.n_oscillators = 100000;
        b.width = 1.0;
        c.gamma0_target = 0.03;
        c.grid = {100.0, 0.05, 1};
        c.fit = {10.0, 60.0};
    } else if (name == "fig2b") {
        b.n_oscillators = 100000;
        b.width = 1.0;
        c.gamma0_target = 0.1;
        c.grid = {3000.0, 0.1, 5};
        c.fit = {10.0, 60.0};
    } else if (name == "fig3") {
        b.n_oscillators = 3000;
        b.width = 2.0;
        b.internal_coupling_dist = InternalCouplingDist::uniform;
        c.gamma0_target = 0.03;
        c.kappa_sweep = fig3_kappa_means();
        c.ensemble = 10;
        c.grid = {60.0, 0.0, 8};
        c.step_fraction = 0.2;
        c.fit = {10.0, 60.0};
    } else if (name == "fig4_multibath") {
        b.n_oscillators = 100000;
        b.width = 1.0;
        b.partition = {0.3, 0.7};
        c.gamma0_target = 0.084;
        c.grid = {100.0, 0.05, 4};
        c.fit = {10.0, 40.0};
    } else if (name == "fig_decays_a") {
        b.n_oscillators = 100000;
        b.width = 2.0;
        b.gamma_max = 0.001;
        c.grid = {100.0, 0.02, 5};
    } else if (name == "fig_decays_b") {
        b.n_oscillators = 1000;
        b.width = 2.0;
        b.gamma_max = 0.004;
        b.internal_coupling_dist = InternalCouplingDist::uniform;
        b.kappa_max = 0.01;
        c.grid = {100.0, 0.0, 10};
    } else if (name == "fig6") {
        c.mode = RunMode::hybrid;
        b.n_oscillators = 10000;
        b.width = 2.0;
        c.gamma0_target = 0.01;
        c.g_bar = 0.1;
        c.r = 0.75;
        c.ensemble = 32;
        c.grid = {300.0, 0.1, 10};
    } else if (name == "custom") {
        b.n_oscillators = 0;
        b.width = 1.0;
        c.grid = {10.0, 0.01, 1};
    } else {
        throw ConfigError("config: unknown preset '" + name + "'");
    }
    c.seed = 2021;
    b.seed = c.seed;
    return c;
}

}  // namespace qdecay
