// ionwork: run, check and sweep trapped-ion work-statistics scenarios.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "ionwork/ionwork.hpp"

namespace fs = std::filesystem;

namespace {

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> shots;
    unsigned jobs = 1;
    std::string out = "out";
};

ionwork::ScenarioConfig load(const Options& o)
{
    auto cfg = ionwork::load_config(o.config);
    if (o.seed)
        cfg.seed = *o.seed;
    if (o.shots)
        cfg.shots = *o.shots;
    return cfg;
}

void print_summary(const ionwork::ScenarioResult& res, std::ostream& os)
{
    for (const auto& c : res.cases) {
        os << c.label << ": <exp(-W/kT)> exact " << c.jarzynski_exact << " (target " << c.jarzynski_target << ")";
        if (c.jarzynski_sampled)
            os << ", sampled " << c.jarzynski_sampled->estimate << " +- " << c.jarzynski_sampled->stderr_;
        os << ", Var(W) " << c.exact.variance() << "\n";
    }
}

int report_checks(const ionwork::ScenarioResult& res, std::ostream& os)
{
    int failed = 0;
    auto show = [&](const std::string& scope, const ionwork::CheckResult& c) {
        os << (c.passed ? "PASS " : "FAIL ") << scope << c.name << " value=" << c.value << " target=" << c.target
           << " tol=" << c.tolerance << "\n";
        failed += c.passed ? 0 : 1;
    };
    for (const auto& k : res.cases)
        for (const auto& c : k.checks)
            show(k.label + ": ", c);
    for (const auto& c : res.checks)
        show("", c);
    return failed;
}

int run_one(const ionwork::ScenarioConfig& cfg, const Options& o, const fs::path& out, bool check)
{
    const auto res = ionwork::run_scenario(cfg, o.jobs);
    ionwork::emit_outputs(res, out);
    print_summary(res, std::cout);
    std::cout << "outputs written to " << out.string() << "\n";
    if (!check)
        return 0;
    return report_checks(res, std::cout);
}

void add_common(CLI::App* app, Options& o)
{
    app->add_option("--config", o.config, "Scenario config file (JSON)")->required()->check(CLI::ExistingFile);
    app->add_option("--seed", o.seed, "Override the config seed");
    app->add_option("--shots", o.shots, "Override the number of Monte-Carlo shots (0 = exact only)");
    app->add_option("--jobs", o.jobs, "Worker threads (0 = all cores)");
    app->add_option("--out", o.out, "Output directory");
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Trapped-ion quantum work statistics: exact transition matrices, two-point-measurement sampling, "
                 "Jarzynski and Crooks estimators."};
    app.set_version_flag("--version", std::string(ionwork::kVersionString));
    app.require_subcommand(1);

    Options opts;
    bool sweep_check = false;
    auto* run = app.add_subcommand("run", "Run a scenario and write outputs");
    auto* check = app.add_subcommand("check", "Run a scenario and verify its invariants");
    auto* sweep = app.add_subcommand("sweep", "Run the Cartesian grid in the config's sweep block");
    add_common(run, opts);
    add_common(check, opts);
    add_common(sweep, opts);
    sweep->add_flag("--check", sweep_check, "Verify invariants at every grid point");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed())
            return run_one(load(opts), opts, opts.out, false) == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
        if (check->parsed()) {
            const int failed = run_one(load(opts), opts, opts.out, true);
            std::cout << (failed == 0 ? "all checks passed\n" : std::to_string(failed) + " check(s) failed\n");
            return failed == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
        }
        const auto base = load(opts);
        const auto points = ionwork::expand_sweep(base);
        std::string summary = "point,case,jarzynski_exact,jarzynski_target,mean_work_quanta,variance_quanta2\n";
        int failed = 0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            auto cfg = points[i];
            const fs::path dir = fs::path(opts.out) / ("point" + std::to_string(i));
            std::cout << "sweep point " << i << ": " << ionwork::to_json(cfg).dump() << "\n";
            const auto res = ionwork::run_scenario(cfg, opts.jobs);
            ionwork::emit_outputs(res, dir);
            print_summary(res, std::cout);
            if (sweep_check)
                failed += report_checks(res, std::cout);
            for (const auto& c : res.cases)
                summary += std::to_string(i) + "," + c.label + "," + ionwork::detail::format_double(c.jarzynski_exact) +
                           "," + ionwork::detail::format_double(c.jarzynski_target) + "," +
                           ionwork::detail::format_double(c.exact.mean()) + "," +
                           ionwork::detail::format_double(c.exact.variance()) + "\n";
        }
        ionwork::detail::write_file(fs::path(opts.out) / "sweep.csv", summary);
        return failed == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
    } catch (const ionwork::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
