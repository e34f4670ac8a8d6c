// Experiment runner: run, sweep, condition and list-problems subcommands.
#include "ucstab/error.hpp"
#include "ucstab/experiment.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <iostream>
#include <limits>
#include <sstream>

namespace {

using namespace ucstab;

double parse_eta(const std::string& text)
{
    if (text == "inf" || text == "infinity" || text == "Inf") {
        return std::numeric_limits<double>::infinity();
    }
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != text.size()) {
        throw CLI::ValidationError("--eta", "expected a number or 'inf', got '" + text + "'");
    }
    return v;
}

std::vector<double> parse_list(const std::string& text, bool allow_inf)
{
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        out.push_back(allow_inf ? parse_eta(item) : std::stod(item));
    }
    return out;
}

struct Options {
    std::string problem = "smoke-harmonic";
    std::string preset;
    std::optional<double> alpha, tau, s_reg;
    std::string eta;
    int order = 1;
    std::optional<int> levels, base_n;
    std::uint64_t seed = 0;
    std::string out;
    std::string mesh_cache;
    double perturb_q = 0.0, perturb_f = 0.0;
    std::string perturb_mode = "noise";
    bool tikhonov_off = false;
    std::string inner = "h1";
    bool timing = false;
    bool no_residuals = false;
    std::string alpha_grid, eta_grid, tau_grid;
};

ExperimentConfig to_config(const Options& o)
{
    ExperimentConfig c;
    c.problem = o.problem;
    c.order = o.order;
    if (!o.preset.empty()) {
        c.params = StabilizationParams::preset(o.preset);
    }
    if (o.alpha) {
        c.params.alpha = *o.alpha;
    }
    if (!o.eta.empty()) {
        c.params.eta = parse_eta(o.eta);
    }
    if (o.tau) {
        c.params.tau = *o.tau;
    }
    c.params.tikhonov_off = o.tikhonov_off;
    c.params.inner = o.inner == "seminorm" ? TikhonovInner::Seminorm : TikhonovInner::FullH1;
    c.s_reg = o.s_reg;
    c.levels = o.levels;
    c.base_n = o.base_n;
    c.seed = o.seed;
    c.out = o.out;
    c.mesh_cache = o.mesh_cache;
    c.perturb_q = o.perturb_q;
    c.perturb_f = o.perturb_f;
    c.perturb_mode = o.perturb_mode == "constant" ? Perturbation::Mode::Constant : Perturbation::Mode::Noise;
    c.timing = o.timing;
    c.residuals = !o.no_residuals;
    return c;
}

void print_levels(const ExperimentResult& r)
{
    std::printf("%-5s %-12s %-8s %-12s %-12s %-12s %-12s %-12s %-12s\n", "level", "h", "dofs", "l2_B", "h1_B",
                "l2_omega", "prs", "dus", "cond");
    for (const auto& l : r.levels) {
        if (!l.record) {
            std::printf("%-5d %-12.4e %-8d failed: %s\n", l.level, l.h, l.dofs, l.error.c_str());
            continue;
        }
        const ErrorRecord& e = *l.record;
        std::printf("%-5d %-12.4e %-8d %-12.4e %-12.4e %-12.4e %-12.4e %-12.4e %-12s\n", l.level, e.h, e.dofs, e.l2_B,
                    e.h1_B, e.l2_omega, e.prs, e.dus,
                    l.condition ? format_number(l.condition->cond).c_str() : "NA");
    }
    if (r.rates) {
        std::printf("\n%-14s %-10s %-10s %-10s\n", "norm", "slope", "last", "kappa");
        for (const auto& e : r.rates->entries) {
            std::printf("%-14s %-10.4f %-10.4f %-10s\n", e.norm.c_str(), e.slope_global, e.slope_last,
                        std::isnan(e.kappa_est) ? "NA" : std::to_string(e.kappa_est).c_str());
        }
    } else if (!r.rates_error.empty()) {
        std::printf("\nno rate fit: %s\n", r.rates_error.c_str());
    }
    if (!std::isnan(r.condition_slope)) {
        std::printf("cond slope     %-10.4f\n", r.condition_slope);
    }
}

int failed_levels(const ExperimentResult& r)
{
    int n = 0;
    for (const auto& l : r.levels) {
        n += l.record ? 0 : 1;
    }
    return n;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Stabilized primal-dual finite elements for unique continuation"};
    app.set_config("--config", "", "flat key = value file mirroring the flags; flags override it");
    app.require_subcommand(1);

    Options o;
    app.add_option("--problem", o.problem, "built-in problem")->check(CLI::IsMember(list_problems()));
    app.add_option("--preset", o.preset, "parameter preset")->check(CLI::IsMember({"L2-optimal", "H1-optimal"}));
    app.add_option("--alpha", o.alpha, "data weight exponent");
    app.add_option("--eta", o.eta, "dual stabilizer exponent, a number or inf");
    app.add_option("--tau", o.tau, "dual Tikhonov exponent");
    app.add_option("--s-reg", o.s_reg, "regularity index s of the primal Tikhonov weight");
    app.add_option("--order", o.order, "polynomial order")->check(CLI::Range(1, 3));
    app.add_option("--levels", o.levels, "number of mesh levels");
    app.add_option("--base-n", o.base_n, "subdivisions of the coarsest mesh");
    app.add_option("--seed", o.seed, "perturbation and estimator seed");
    app.add_option("--out", o.out, "output directory");
    app.add_option("--mesh-cache", o.mesh_cache, "directory of cached mesh levels");
    app.add_option("--perturb-q", o.perturb_q, "L2 amplitude of the datum perturbation");
    app.add_option("--perturb-f", o.perturb_f, "L2 amplitude of the source perturbation");
    app.add_option("--perturb-mode", o.perturb_mode, "noise or constant")->check(CLI::IsMember({"noise", "constant"}));
    app.add_flag("--tikhonov-off", o.tikhonov_off, "drop both Tikhonov terms");
    app.add_option("--tikhonov-inner", o.inner, "h1 or seminorm")->check(CLI::IsMember({"h1", "seminorm"}));
    app.add_flag("--timing", o.timing, "write wall_ms into errors.csv");
    app.add_flag("--no-residuals", o.no_residuals, "skip the dual residual norms");

    auto* run_cmd = app.add_subcommand("run", "convergence study over mesh levels")->fallthrough();
    auto* sweep_cmd = app.add_subcommand("sweep", "one run per (alpha, eta, tau) grid point")->fallthrough();
    sweep_cmd->add_option("--alpha-grid", o.alpha_grid, "comma-separated alpha values");
    sweep_cmd->add_option("--eta-grid", o.eta_grid, "comma-separated eta values (inf allowed)");
    sweep_cmd->add_option("--tau-grid", o.tau_grid, "comma-separated tau values");
    auto* cond_cmd = app.add_subcommand("condition", "condition numbers over mesh levels")->fallthrough();
    auto* list_cmd = app.add_subcommand("list-problems", "print the built-in problems");

    CLI11_PARSE(app, argc, argv);

    try {
        if (list_cmd->parsed()) {
            for (const auto& name : list_problems()) {
                const ProblemSpec p = builtin_problem(name);
                std::printf("%-18s %s, omega '%s', target '%s'\n", name.c_str(), p.domain.describe().c_str(),
                            p.omega.label.c_str(), p.target.label.c_str());
            }
            return 0;
        }
        ExperimentConfig config = to_config(o);
        if (run_cmd->parsed() || cond_cmd->parsed()) {
            if (cond_cmd->parsed()) {
                config.condition = true;
                config.residuals = false;
            }
            const ExperimentResult r = run(config);
            print_levels(r);
            return failed_levels(r) == static_cast<int>(r.levels.size()) ? 2 : 0;
        }
        if (sweep_cmd->parsed()) {
            const auto alphas = o.alpha_grid.empty() ? std::vector<double>{config.params.alpha}
                                                     : parse_list(o.alpha_grid, false);
            const auto etas =
                o.eta_grid.empty() ? std::vector<double>{config.params.eta} : parse_list(o.eta_grid, true);
            const auto taus = o.tau_grid.empty() ? std::vector<double>{config.params.tau} : parse_list(o.tau_grid, false);
            std::vector<GridPoint> grid;
            for (double a : alphas) {
                for (double e : etas) {
                    for (double t : taus) {
                        grid.push_back({a, e, t});
                    }
                }
            }
            const SweepResult s = sweep(config, grid);
            for (std::size_t i = 0; i < s.runs.size(); ++i) {
                std::printf("== %s\n", s.grid[i].label().c_str());
                print_levels(s.runs[i]);
                std::printf("\n");
            }
            return 0;
        }
    } catch (const ucstab::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
