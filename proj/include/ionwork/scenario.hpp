#pragma once

// Scenario configuration, execution and output for the two experiments.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ionwork/errors.hpp"
#include "ionwork/evolve.hpp"
#include "ionwork/models.hpp"
#include "ionwork/rng.hpp"
#include "ionwork/stats.hpp"
#include "ionwork/tpm.hpp"
#include "ionwork/units.hpp"
#include "ionwork/version.hpp"

namespace ionwork {

using Json = nlohmann::ordered_json;

enum class Experiment { DraggedOscillator, DrivenTls };

inline std::string to_string(Experiment e)
{
    return e == Experiment::DraggedOscillator ? "dragged-oscillator" : "driven-tls";
}

struct ScenarioCase {
    double tau_us{};
    std::optional<double> alpha;      ///< oscillator: target |alpha|, overrides drive_hz
    std::optional<double> gamma_khz;  ///< two-level: dephasing rate in 1e3/s
    std::optional<double> sigma;      ///< two-level: noise strength in s^(1/2)

    bool operator==(const ScenarioCase&) const = default;
};

struct CheckSettings {
    double jarzynski_tol = 1e-6;
    double stochastic_tol = 1e-8;
    double bootstrap_sigmas = 3.0;
    double crooks_tol = 1e-6;
    double crooks_floor = 1e-6;
    std::size_t crooks_min_counts = 5;
    double crooks_slope_tol = 0.05;

    bool operator==(const CheckSettings&) const = default;
};

struct ScenarioConfig {
    Experiment experiment = Experiment::DraggedOscillator;
    // dragged oscillator
    double nu_hz = 20e3;
    std::optional<double> drive_hz;
    double ta_us = 50.0;
    double nbar = 0.157;
    // driven two-level system
    double omega0_hz = 50e3;
    double t_eff_uk = 5.63;
    double noise_dt_us = 0.0;  ///< 0 = largest admissible
    // shared
    std::vector<ScenarioCase> cases;
    int cutoff = 32;
    double tol = 1e-10;
    std::size_t shots = 100000;
    std::uint64_t seed = 1;
    std::size_t bootstrap_resamples = 200;
    CheckSettings checks;
    Json sweep = Json::object();  ///< key -> list of values

    bool operator==(const ScenarioConfig&) const = default;
};

namespace detail {

class JsonReader {
public:
    JsonReader(const Json& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object())
            throw ConfigError(where() + "expected an object");
    }

    template <class T>
    std::optional<T> optional(const std::string& key)
    {
        seen_.push_back(key);
        if (!j_.contains(key))
            return std::nullopt;
        return convert<T>(j_.at(key), field(key));
    }

    template <class T>
    T value(const std::string& key, T fallback)
    {
        return optional<T>(key).value_or(fallback);
    }

    template <class T>
    T required(const std::string& key)
    {
        auto v = optional<T>(key);
        if (!v)
            throw ConfigError("missing required field '" + field(key) + "'");
        return *v;
    }

    const Json* child(const std::string& key)
    {
        seen_.push_back(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

    void finish() const
    {
        for (const auto& [k, v] : j_.items())
            if (std::find(seen_.begin(), seen_.end(), k) == seen_.end())
                throw ConfigError("unknown field '" + field(k) + "'");
    }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

private:
    std::string where() const { return path_.empty() ? "" : "'" + path_ + "': "; }

    template <class T>
    static T convert(const Json& v, const std::string& name)
    {
        if constexpr (std::is_same_v<T, double>) {
            if (!v.is_number())
                throw ConfigError("field '" + name + "' must be a number");
            return v.get<double>();
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string())
                throw ConfigError("field '" + name + "' must be a string");
            return v.get<std::string>();
        } else {
            if (!v.is_number_integer() || (std::is_unsigned_v<T> && v.get<long long>() < 0 && !v.is_number_unsigned()))
                throw ConfigError("field '" + name + "' must be a non-negative integer");
            return v.get<T>();
        }
    }

    const Json& j_;
    std::string path_;
    std::vector<std::string> seen_;
};

inline void require(bool ok, const std::string& message)
{
    if (!ok)
        throw ConfigError(message);
}

}  // namespace detail

/// Default cases for each experiment.
inline std::vector<ScenarioCase> default_cases(Experiment e)
{
    if (e == Experiment::DraggedOscillator)
        return {{5.0, {}, {}, {}}, {25.0, {}, {}, {}}, {45.0, {}, {}, {}}};
    return {{50.0, {}, 0.0, {}}, {10.0, {}, 0.0, {}}, {5.0, {}, 0.0, {}}, {5.0, {}, 448.0, {}}, {5.0, {}, 1340.0, {}}};
}

inline void validate(const ScenarioConfig& c)
{
    using detail::require;
    require(!c.cases.empty(), "'cases' must not be empty");
    require(c.shots <= 100000000, "'shots' must be at most 1e8");
    require(c.bootstrap_resamples >= 100, "'bootstrap_resamples' must be at least 100");
    require(c.tol > 0.0 && c.tol < 1e-3, "'tol' must lie in (0, 1e-3)");
    for (std::size_t i = 0; i < c.cases.size(); ++i) {
        const auto& k = c.cases[i];
        const std::string at = "cases[" + std::to_string(i) + "]";
        require(k.tau_us > 0.0, "'" + at + ".tau_us' must be positive");
        if (c.experiment == Experiment::DraggedOscillator) {
            require(!k.gamma_khz && !k.sigma, "'" + at + "': dephasing is not available for dragged-oscillator");
            require(k.alpha || c.drive_hz, "'" + at + "': needs 'alpha' or a top-level 'drive_hz'");
            if (k.alpha)
                require(*k.alpha >= 0.0, "'" + at + ".alpha' must be non-negative");
        } else {
            require(!k.alpha, "'" + at + ".alpha' is not available for driven-tls");
            require(!(k.gamma_khz && k.sigma), "'" + at + "': give 'gamma_khz' or 'sigma', not both");
            if (k.gamma_khz)
                require(*k.gamma_khz >= 0.0, "'" + at + ".gamma_khz' must be non-negative");
            if (k.sigma)
                require(*k.sigma >= 0.0, "'" + at + ".sigma' must be non-negative");
        }
    }
    if (c.experiment == Experiment::DraggedOscillator) {
        require(c.nu_hz > 0.0, "'nu_hz' must be positive");
        require(c.ta_us > 0.0, "'ta_us' must be positive");
        require(c.nbar >= 0.0, "'nbar' must be non-negative");
        require(c.cutoff >= 2, "'cutoff' must be at least 2");
    } else {
        require(c.omega0_hz > 0.0, "'omega0_hz' must be positive");
        require(c.t_eff_uk > 0.0, "'t_eff_uk' must be positive");
        require(c.noise_dt_us >= 0.0, "'noise_dt_us' must be non-negative");
    }
    require(c.sweep.is_object(), "'sweep' must be an object");
    for (const auto& [key, values] : c.sweep.items()) {
        require(values.is_array() && !values.empty(), "'sweep." + key + "' must be a non-empty array");
    }
}

inline ScenarioConfig parse_config(const Json& j)
{
    detail::JsonReader r(j, "");
    ScenarioConfig c;
    const auto name = r.required<std::string>("experiment");
    if (name == "dragged-oscillator")
        c.experiment = Experiment::DraggedOscillator;
    else if (name == "driven-tls")
        c.experiment = Experiment::DrivenTls;
    else
        throw ConfigError("field 'experiment' must be 'dragged-oscillator' or 'driven-tls', got '" + name + "'");
    const bool osc = c.experiment == Experiment::DraggedOscillator;
    if (osc) {
        c.nu_hz = r.value("nu_hz", c.nu_hz);
        c.drive_hz = r.optional<double>("drive_hz");
        c.ta_us = r.value("ta_us", c.ta_us);
        c.nbar = r.value("nbar", c.nbar);
        c.cutoff = r.value("cutoff", c.cutoff);
    } else {
        c.omega0_hz = r.value("omega0_hz", c.omega0_hz);
        c.t_eff_uk = r.value("t_eff_uk", c.t_eff_uk);
        c.noise_dt_us = r.value("noise_dt_us", c.noise_dt_us);
    }
    c.tol = r.value("tol", c.tol);
    c.shots = r.value<std::size_t>("shots", c.shots);
    c.seed = r.value<std::uint64_t>("seed", c.seed);
    c.bootstrap_resamples = r.value<std::size_t>("bootstrap_resamples", c.bootstrap_resamples);
    if (const Json* cases = r.child("cases")) {
        if (!cases->is_array())
            throw ConfigError("field 'cases' must be an array");
        for (std::size_t i = 0; i < cases->size(); ++i) {
            detail::JsonReader cr((*cases)[i], "cases[" + std::to_string(i) + "]");
            ScenarioCase k;
            k.tau_us = cr.required<double>("tau_us");
            if (osc)
                k.alpha = cr.optional<double>("alpha");
            else {
                k.gamma_khz = cr.optional<double>("gamma_khz");
                k.sigma = cr.optional<double>("sigma");
            }
            cr.finish();
            c.cases.push_back(k);
        }
    } else {
        c.cases = default_cases(c.experiment);
    }
    if (const Json* checks = r.child("checks")) {
        detail::JsonReader cr(*checks, "checks");
        auto& s = c.checks;
        s.jarzynski_tol = cr.value("jarzynski_tol", s.jarzynski_tol);
        s.stochastic_tol = cr.value("stochastic_tol", s.stochastic_tol);
        s.bootstrap_sigmas = cr.value("bootstrap_sigmas", s.bootstrap_sigmas);
        s.crooks_tol = cr.value("crooks_tol", s.crooks_tol);
        s.crooks_floor = cr.value("crooks_floor", s.crooks_floor);
        s.crooks_min_counts = cr.value<std::size_t>("crooks_min_counts", s.crooks_min_counts);
        s.crooks_slope_tol = cr.value("crooks_slope_tol", s.crooks_slope_tol);
        cr.finish();
    }
    if (const Json* sweep = r.child("sweep"))
        c.sweep = *sweep;
    r.finish();
    validate(c);
    return c;
}

inline ScenarioConfig parse_config_text(const std::string& text, const std::string& origin = "config")
{
    Json j;
    try {
        j = Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(origin + ": " + e.what());
    }
    return parse_config(j);
}

inline ScenarioConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_config_text(ss.str(), path.string());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

inline Json to_json(const ScenarioConfig& c)
{
    Json j;
    j["experiment"] = to_string(c.experiment);
    const bool osc = c.experiment == Experiment::DraggedOscillator;
    if (osc) {
        j["nu_hz"] = c.nu_hz;
        if (c.drive_hz)
            j["drive_hz"] = *c.drive_hz;
        j["ta_us"] = c.ta_us;
        j["nbar"] = c.nbar;
        j["cutoff"] = c.cutoff;
    } else {
        j["omega0_hz"] = c.omega0_hz;
        j["t_eff_uk"] = c.t_eff_uk;
        j["noise_dt_us"] = c.noise_dt_us;
    }
    j["tol"] = c.tol;
    j["shots"] = c.shots;
    j["seed"] = c.seed;
    j["bootstrap_resamples"] = c.bootstrap_resamples;
    Json cases = Json::array();
    for (const auto& k : c.cases) {
        Json e;
        e["tau_us"] = k.tau_us;
        if (k.alpha)
            e["alpha"] = *k.alpha;
        if (k.gamma_khz)
            e["gamma_khz"] = *k.gamma_khz;
        if (k.sigma)
            e["sigma"] = *k.sigma;
        cases.push_back(e);
    }
    j["cases"] = cases;
    const auto& s = c.checks;
    j["checks"] = {{"jarzynski_tol", s.jarzynski_tol},       {"stochastic_tol", s.stochastic_tol},
                   {"bootstrap_sigmas", s.bootstrap_sigmas}, {"crooks_tol", s.crooks_tol},
                   {"crooks_floor", s.crooks_floor},         {"crooks_min_counts", s.crooks_min_counts},
                   {"crooks_slope_tol", s.crooks_slope_tol}};
    if (!c.sweep.empty())
        j["sweep"] = c.sweep;
    return j;
}

struct CheckResult {
    std::string name;
    double value{};
    double target{};
    double tolerance{};
    bool passed{};
};

struct CaseResult {
    std::string label;
    ScenarioCase spec;
    WorkProtocol protocol;
    double beta{};  ///< inverse quanta
    double delta_f{};
    double jarzynski_target{};  ///< exp(-beta Delta F)
    std::optional<Complex> alpha;
    double drive_amplitude{};  ///< rad/s, oscillator
    double gamma{};            ///< 1/s, two-level
    RealVector thermal;
    TransitionMatrix transitions = TransitionMatrix::identity(1);
    WorkDistribution exact;
    double jarzynski_exact{};
    std::optional<CrooksResult> crooks_exact;
    // sampled
    std::vector<WorkRecord> records;
    std::optional<WorkDistribution> sampled;
    std::optional<BootstrapResult> jarzynski_sampled;
    std::optional<CrooksResult> crooks_sampled;
    std::optional<LinearFit> crooks_slope_sampled;
    std::vector<CheckResult> checks;
    std::vector<std::string> notes;
};

struct ScenarioResult {
    ScenarioConfig config;
    std::vector<CaseResult> cases;
    std::vector<CheckResult> checks;  ///< cross-case checks

    bool all_passed() const
    {
        for (const auto& c : checks)
            if (!c.passed)
                return false;
        for (const auto& k : cases)
            for (const auto& c : k.checks)
                if (!c.passed)
                    return false;
        return true;
    }
};

namespace detail {

inline std::string format_double(double v)
{
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

inline std::string case_label(const ScenarioConfig& c, std::size_t i)
{
    const auto& k = c.cases[i];
    std::string s = "case" + std::to_string(i) + "_tau" + format_double(k.tau_us) + "us";
    if (k.alpha)
        s += "_alpha" + format_double(*k.alpha);
    if (k.gamma_khz)
        s += "_gamma" + format_double(*k.gamma_khz) + "khz";
    if (k.sigma)
        s += "_sigma" + format_double(*k.sigma);
    return s;
}

inline std::uint64_t case_seed(std::uint64_t seed, std::size_t index)
{
    std::uint64_t s = seed ^ (0xA0761D6478BD642FULL * (index + 1));
    return splitmix64(s);
}

inline CheckResult check_within(std::string name, double value, double target, double tol)
{
    return {std::move(name), value, target, tol, std::abs(value - target) <= tol};
}

}  // namespace detail

/// Runs one case: exact pipeline, then (shots > 0) Monte Carlo with bootstrap errors.
inline CaseResult run_case(const ScenarioConfig& cfg, std::size_t index, unsigned jobs)
{
    const auto& k = cfg.cases.at(index);
    CaseResult r;
    r.label = detail::case_label(cfg, index);
    r.spec = k;
    const IntegratorOptions integ{cfg.tol, IntegratorOptions{}.max_steps};
    const double tau = k.tau_us * 1e-6;
    const bool osc = cfg.experiment == Experiment::DraggedOscillator;
    if (osc) {
        const double nu = AngularFrequency::from_hz(cfg.nu_hz).value;
        const double ta = cfg.ta_us * 1e-6;
        r.drive_amplitude = k.alpha ? calibrate_drag_amplitude(*k.alpha, nu, tau, ta)
                                    : AngularFrequency::from_hz(*cfg.drive_hz).value;
        r.alpha = drag_displacement_alpha(r.drive_amplitude, nu, tau, ta);
        const DraggedOscillator model = build_dragged(nu, r.drive_amplitude, tau, ta, FockSpace(cfg.cutoff));
        r.protocol = dragged_oscillator_protocol(model);
        const auto spec = ThermalSpec::oscillator(cfg.nbar, {nu});
        r.thermal = thermal_distribution(spec, r.protocol.dim());
        r.beta = beta_in_quanta(temperature_of(spec), {nu});
    } else {
        const double omega0 = AngularFrequency::from_hz(cfg.omega0_hz).value;
        if (k.sigma)
            r.gamma = dephasing_rate(*k.sigma, omega0);
        else
            r.gamma = k.gamma_khz.value_or(0.0) * 1e3;
        r.protocol = driven_tls_protocol(DrivenTls(omega0, tau), r.gamma);
        const Temperature t{cfg.t_eff_uk * 1e-6};
        r.thermal = thermal_distribution(ThermalSpec::two_level_at(t, {omega0}), 2);
        r.beta = beta_in_quanta(t, {omega0});
    }
    r.delta_f = free_energy_difference(r.protocol.initial_energies_quanta(), r.protocol.final_energies_quanta(), r.beta);
    r.jarzynski_target = std::exp(-r.beta * r.delta_f);

    const bool dephasing = r.gamma > 0.0;
    r.transitions = transition_matrix(r.protocol, dephasing ? Evolution::Dephasing : Evolution::Closed, integ);
    r.exact = work_distribution(r.thermal, r.transitions, r.protocol);
    r.jarzynski_exact = jarzynski_average(r.exact, r.beta);

    const auto& chk = cfg.checks;
    const double defect = std::max(r.transitions.row_defects().maxCoeff(), r.transitions.col_defects().maxCoeff());
    r.checks.push_back({"doubly_stochastic", defect, 0.0, chk.stochastic_tol, defect <= chk.stochastic_tol});
    r.checks.push_back(detail::check_within("jarzynski_exact", r.jarzynski_exact, r.jarzynski_target, chk.jarzynski_tol));
    r.checks.push_back({"second_law", r.exact.mean() - r.delta_f, 0.0, 1e-12, r.exact.mean() - r.delta_f >= -1e-12});

    const CrooksOptions copts{chk.crooks_floor, chk.crooks_min_counts};
    if (osc) {
        // Forward and backward drags coincide for the oscillator.
        r.crooks_exact = crooks_check(r.exact, r.exact, r.beta, r.delta_f, copts);
        r.checks.push_back({"crooks_exact", r.crooks_exact->max_residual(), 0.0, chk.crooks_tol,
                            r.crooks_exact->max_residual() <= chk.crooks_tol});
    }

    if (cfg.shots == 0)
        return r;
    MonteCarloOptions mc;
    mc.shots = cfg.shots;
    mc.seed = detail::case_seed(cfg.seed, index);
    mc.jobs = jobs;
    mc.noise_dt = cfg.noise_dt_us * 1e-6;
    r.records = run_tpm_montecarlo(r.protocol, r.thermal, mc, integ);
    r.sampled = sampled_distribution(r.records, r.protocol.quantum);
    const double beta = r.beta;
    r.jarzynski_sampled = bootstrap_error(
        r.records, [beta](const WorkDistribution& d) { return jarzynski_average(d, beta); }, cfg.bootstrap_resamples,
        mc.seed, jobs, r.protocol.quantum);
    r.checks.push_back(detail::check_within("jarzynski_sampled", r.jarzynski_sampled->estimate, r.jarzynski_target,
                                            chk.bootstrap_sigmas * r.jarzynski_sampled->stderr_));
    if (osc) {
        try {
            r.crooks_sampled = crooks_check(*r.sampled, *r.sampled, r.beta, r.delta_f, copts);
            if (r.crooks_sampled->points.size() >= 3) {
                r.crooks_slope_sampled = crooks_slope(*r.crooks_sampled);
                const auto& f = *r.crooks_slope_sampled;
                r.checks.push_back(detail::check_within("crooks_slope_sampled", f.slope, 1.0,
                                                        chk.bootstrap_sigmas * f.slope_stderr));
            } else {
                r.notes.push_back("fewer than 3 sampled Crooks points; slope not fitted");
            }
        } catch (const EmptyOverlapError&) {
            r.notes.push_back("sampled Crooks check has no support above the count floor");
        }
    }
    return r;
}

/// Runs every case and adds the cross-case checks:
///  - fastest oscillator case: sampled Crooks slope within crooks_slope_tol of 1;
///  - two-level cases at equal tau: Var(W) strictly decreasing with gamma;
///  - two-level closed cases: Var(W) strictly increasing as tau decreases.
inline ScenarioResult run_scenario(const ScenarioConfig& cfg, unsigned jobs = 1)
{
    validate(cfg);
    ScenarioResult out;
    out.config = cfg;
    for (std::size_t i = 0; i < cfg.cases.size(); ++i)
        out.cases.push_back(run_case(cfg, i, jobs));

    if (cfg.experiment == Experiment::DraggedOscillator) {
        std::size_t fastest = 0;
        for (std::size_t i = 1; i < out.cases.size(); ++i)
            if (out.cases[i].exact.variance() > out.cases[fastest].exact.variance())
                fastest = i;
        if (const auto& f = out.cases[fastest].crooks_slope_sampled)
            out.checks.push_back(detail::check_within("crooks_slope_fast_protocol[" + out.cases[fastest].label + "]",
                                                      f->slope, 1.0, cfg.checks.crooks_slope_tol));
        return out;
    }
    auto ordered = [&](std::vector<const CaseResult*> group, auto key, bool increasing_key, const std::string& name) {
        if (group.size() < 2)
            return;
        std::sort(group.begin(), group.end(), [&](auto* a, auto* b) { return key(*a) < key(*b); });
        bool ok = true;
        double worst = std::numeric_limits<double>::infinity();
        for (std::size_t i = 1; i < group.size(); ++i) {
            if (key(*group[i]) == key(*group[i - 1]))
                continue;
            const double step = group[i]->exact.variance() - group[i - 1]->exact.variance();
            const double signed_step = increasing_key ? step : -step;
            worst = std::min(worst, signed_step);
            ok = ok && signed_step > 0.0;
        }
        out.checks.push_back({name, worst, 0.0, 0.0, ok});
    };
    std::vector<double> taus;
    for (const auto& c : out.cases)
        if (std::find(taus.begin(), taus.end(), c.spec.tau_us) == taus.end())
            taus.push_back(c.spec.tau_us);
    for (double tau : taus) {
        std::vector<const CaseResult*> group;
        for (const auto& c : out.cases)
            if (c.spec.tau_us == tau)
                group.push_back(&c);
        ordered(group, [](const CaseResult& c) { return c.gamma; }, false,
                "variance_decreases_with_dephasing[tau" + detail::format_double(tau) + "us]");
    }
    std::vector<const CaseResult*> closed;
    for (const auto& c : out.cases)
        if (c.gamma == 0.0)
            closed.push_back(&c);
    ordered(closed, [](const CaseResult& c) { return c.spec.tau_us; }, false, "variance_increases_with_speed");
    return out;
}

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f)
        throw IoError("cannot open " + path.string() + " for writing");
    f << text;
    if (!f)
        throw IoError("failed writing " + path.string());
}

inline std::string distribution_csv(const WorkDistribution& d)
{
    std::string s = "work_quanta,work_joules,probability,stderr\n";
    const double joules_per_quantum = kHbar * d.quantum.value;
    for (std::size_t k = 0; k < d.size(); ++k) {
        s += format_double(d.support[k]) + "," + format_double(d.support[k] * joules_per_quantum) + "," +
             format_double(d.probabilities[k]) + "," + format_double(d.stderr_at(k)) + "\n";
    }
    return s;
}

inline std::string transitions_csv(const TransitionMatrix& t)
{
    std::string s = "n_initial,m_final,probability\n";
    for (Eigen::Index n = 0; n < t.dim(); ++n)
        for (Eigen::Index m = 0; m < t.dim(); ++m)
            s += std::to_string(n) + "," + std::to_string(m) + "," + format_double(t(n, m)) + "\n";
    return s;
}

inline std::string records_csv(const std::vector<WorkRecord>& records)
{
    std::string s = "n_initial,m_final,work_quanta\n";
    s.reserve(records.size() * 24);
    for (const auto& r : records)
        s += std::to_string(r.n_initial) + "," + std::to_string(r.m_final) + "," + format_double(r.work) + "\n";
    return s;
}

inline Json checks_json(const std::vector<CheckResult>& checks)
{
    Json a = Json::array();
    for (const auto& c : checks)
        a.push_back({{"name", c.name}, {"value", c.value}, {"target", c.target}, {"tolerance", c.tolerance},
                     {"passed", c.passed}});
    return a;
}

inline Json crooks_json(const CrooksResult& c)
{
    Json pts = Json::array();
    for (const auto& p : c.points)
        pts.push_back({{"work_quanta", p.work}, {"lhs", p.lhs}, {"rhs", p.rhs}, {"lhs_stderr", p.lhs_stderr}});
    return {{"points", pts}, {"excluded_work_quanta", c.excluded}, {"max_residual", c.max_residual()}};
}

}  // namespace detail

inline Json manifest_json(const ScenarioResult& res)
{
    Json m;
    m["tool"] = "ionwork";
    m["version"] = kVersionString;
    m["eigen_version"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                         std::to_string(EIGEN_MINOR_VERSION);
    m["config"] = to_json(res.config);
    m["constants"] = {{"hbar_J_s", kHbar}, {"k_B_J_per_K", kBoltzmann}};
    m["sampling"] = {{"shots", res.config.shots},
                     {"seed", res.config.seed},
                     {"rng", "mt19937_64, per-block streams from splitmix64(seed, case, block)"},
                     {"rng_consumed", res.config.shots > 0}};
    Json cases = Json::array();
    for (std::size_t i = 0; i < res.cases.size(); ++i)
        cases.push_back({{"label", res.cases[i].label}, {"case_seed", detail::case_seed(res.config.seed, i)}});
    m["cases"] = cases;
    return m;
}

inline Json report_json(const ScenarioResult& res)
{
    Json rep;
    rep["experiment"] = to_string(res.config.experiment);
    Json cases = Json::array();
    for (const auto& c : res.cases) {
        Json j;
        j["label"] = c.label;
        j["tau_us"] = c.spec.tau_us;
        if (c.alpha) {
            j["alpha"] = {{"re", c.alpha->real()}, {"im", c.alpha->imag()}, {"abs", std::abs(*c.alpha)}};
            j["drive_amplitude_hz"] = c.drive_amplitude / kTwoPi;
        } else {
            j["gamma_per_s"] = c.gamma;
        }
        j["energy_quantum_hz"] = c.protocol.quantum.hz();
        j["beta_per_quantum"] = c.beta;
        j["delta_f_quanta"] = c.delta_f;
        j["jarzynski_target"] = c.jarzynski_target;
        Json ex;
        ex["file"] = c.label + "_exact.csv";
        ex["jarzynski"] = c.jarzynski_exact;
        ex["mean_work_quanta"] = c.exact.mean();
        ex["variance_quanta2"] = c.exact.variance();
        ex["off_diagonal_mass"] = c.transitions.off_diagonal_mass();
        double negative = 0.0;
        for (std::size_t k = 0; k < c.exact.size(); ++k)
            if (c.exact.support[k] - c.delta_f < -kWorkMergeTolerance)
                negative += c.exact.probabilities[k];
        ex["negative_dissipated_work_probability"] = negative;
        if (c.crooks_exact)
            ex["crooks"] = detail::crooks_json(*c.crooks_exact);
        j["exact"] = ex;
        if (c.sampled) {
            Json s;
            s["file"] = c.label + "_sampled.csv";
            s["records_file"] = c.label + "_records.csv";
            s["shots"] = c.sampled->shots;
            s["jarzynski"] = c.jarzynski_sampled->estimate;
            s["jarzynski_bootstrap_stderr"] = c.jarzynski_sampled->stderr_;
            s["mean_work_quanta"] = c.sampled->mean();
            s["variance_quanta2"] = c.sampled->variance();
            std::size_t neg = 0;
            for (const auto& r : c.records)
                if (r.work - c.delta_f < -kWorkMergeTolerance)
                    ++neg;
            s["negative_dissipated_work_records"] = neg;
            if (c.crooks_sampled)
                s["crooks"] = detail::crooks_json(*c.crooks_sampled);
            if (c.crooks_slope_sampled)
                s["crooks_slope"] = {{"slope", c.crooks_slope_sampled->slope},
                                     {"intercept", c.crooks_slope_sampled->intercept},
                                     {"slope_stderr", c.crooks_slope_sampled->slope_stderr}};
            j["sampled"] = s;
        } else {
            j["sampled"] = nullptr;
        }
        j["checks"] = detail::checks_json(c.checks);
        j["notes"] = c.notes;
        cases.push_back(j);
    }
    rep["cases"] = cases;
    rep["checks"] = detail::checks_json(res.checks);
    rep["all_passed"] = res.all_passed();
    return rep;
}

/// Writes manifest.json, report.json and per-case CSV files into `dir`.
inline void emit_outputs(const ScenarioResult& res, const std::filesystem::path& dir)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
    detail::write_file(dir / "manifest.json", manifest_json(res).dump(2) + "\n");
    detail::write_file(dir / "report.json", report_json(res).dump(2) + "\n");
    for (const auto& c : res.cases) {
        detail::write_file(dir / (c.label + "_exact.csv"), detail::distribution_csv(c.exact));
        detail::write_file(dir / (c.label + "_transitions.csv"), detail::transitions_csv(c.transitions));
        if (c.sampled) {
            detail::write_file(dir / (c.label + "_sampled.csv"), detail::distribution_csv(*c.sampled));
            detail::write_file(dir / (c.label + "_records.csv"), detail::records_csv(c.records));
        }
    }
}

/// Cartesian product of the config's sweep block, each point applied to the
/// top-level fields (or, for "tau_us", "alpha", "gamma_khz" and "sigma", to every case).
inline std::vector<ScenarioConfig> expand_sweep(const ScenarioConfig& base)
{
    std::vector<std::pair<std::string, Json>> axes;
    for (const auto& [k, v] : base.sweep.items())
        axes.emplace_back(k, v);
    if (axes.empty())
        throw ConfigError("config has no 'sweep' block");
    std::vector<ScenarioConfig> points;
    std::vector<std::size_t> idx(axes.size(), 0);
    while (true) {
        Json j = to_json(base);
        j.erase("sweep");
        for (std::size_t a = 0; a < axes.size(); ++a) {
            const auto& [key, values] = axes[a];
            const Json& v = values[idx[a]];
            if (key == "tau_us" || key == "alpha" || key == "gamma_khz" || key == "sigma") {
                for (auto& c : j["cases"])
                    c[key] = v;
            } else {
                if (key == "experiment" || key == "cases" || key == "checks")
                    throw ConfigError("'sweep." + key + "' cannot be swept");
                j[key] = v;
            }
        }
        try {
            points.push_back(parse_config(j));
        } catch (const ConfigError& e) {
            throw ConfigError(std::string("sweep point ") + std::to_string(points.size()) + ": " + e.what());
        }
        std::size_t a = 0;
        while (a < axes.size() && ++idx[a] == axes[a].second.size())
            idx[a++] = 0;
        if (a == axes.size())
            break;
    }
    return points;
}

}  // namespace ionwork
