#include "ucstab/experiment.hpp"

#include "ucstab/error.hpp"

#include "json.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#ifndef UCSTAB_VERSION
#define UCSTAB_VERSION "unknown"
#endif

namespace ucstab {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point t0)
{
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::string format_param(double v)
{
    if (std::isinf(v)) {
        return "inf";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

void write_file(const std::filesystem::path& path, const std::string& content)
{
    // Write to a sibling temporary and rename so readers never see partial files.
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        UCSTAB_REQUIRE(os.good(), InvalidArgument, "cannot write " + tmp.string());
        os << content;
        UCSTAB_REQUIRE(os.good(), InvalidArgument, "failed writing " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::string errors_csv(const ExperimentResult& result)
{
    const StabilizationParams& p = result.params;
    std::ostringstream os;
    os << errors_csv_header() << '\n';
    for (const auto& level : result.levels) {
        if (!level.record) {
            continue;
        }
        const ErrorRecord& r = *level.record;
        os << result.config.problem << ',' << result.config.order << ',' << format_param(p.alpha) << ','
           << format_param(p.eta) << ',' << format_param(p.tau) << ',' << format_param(p.s_reg) << ',' << level.level
           << ',' << format_number(r.h) << ',' << r.dofs;
        for (const auto& norm : record_norm_names()) {
            os << ',' << format_number(record_value(r, norm));
        }
        os << ',' << (level.condition ? format_number(level.condition->cond) : "NA");
        os << ',' << (result.config.timing ? format_number(level.wall_ms) : "NA") << '\n';
    }
    return os.str();
}

std::string rates_csv(const ExperimentResult& result)
{
    std::ostringstream os;
    os << "norm,slope_global,slope_last,kappa_est\n";
    if (result.rates) {
        for (const auto& e : result.rates->entries) {
            os << e.norm << ',' << format_number(e.slope_global) << ',' << format_number(e.slope_last) << ','
               << format_number(e.kappa_est) << '\n';
        }
    }
    if (result.config.condition && !std::isnan(result.condition_slope)) {
        os << "cond," << format_number(result.condition_slope) << ",NA,NA\n";
    }
    return os.str();
}

std::string condition_csv(const ExperimentResult& result)
{
    std::ostringstream os;
    os << "level,h,dofs,sigma_max,sigma_min,iterations_max,iterations_min,cond\n";
    for (const auto& level : result.levels) {
        if (!level.condition) {
            continue;
        }
        const ConditionReport& c = *level.condition;
        os << level.level << ',' << format_number(level.h) << ',' << level.dofs << ',' << format_number(c.sigma_max)
           << ',' << format_number(c.sigma_min) << ',' << c.iterations_max << ',' << c.iterations_min << ','
           << format_number(c.cond) << '\n';
    }
    return os.str();
}

std::string perturbation_csv(const ExperimentResult& result)
{
    std::ostringstream os;
    os << "level,h,q_amplitude,f_amplitude,delta_l2_Omega,delta_l2_B,delta_h1_B\n";
    for (const auto& level : result.levels) {
        if (!level.perturbation) {
            continue;
        }
        const PerturbationRecord& d = *level.perturbation;
        os << level.level << ',' << format_number(level.h) << ',' << format_number(result.config.perturb_q) << ','
           << format_number(result.config.perturb_f) << ',' << format_number(d.delta_l2_Omega) << ','
           << format_number(d.delta_l2_B) << ',' << format_number(d.delta_h1_B) << '\n';
    }
    return os.str();
}

nlohmann::ordered_json params_json(const StabilizationParams& p)
{
    nlohmann::ordered_json j;
    j["alpha"] = p.alpha;
    j["eta"] = p.eta_infinite() ? nlohmann::ordered_json("inf") : nlohmann::ordered_json(p.eta);
    j["tau"] = p.tau;
    j["s_reg"] = p.s_reg;
    j["tikhonov_off"] = p.tikhonov_off;
    j["tikhonov_inner"] = p.inner == TikhonovInner::FullH1 ? "h1" : "h1_seminorm";
    return j;
}

std::string manifest_json(const ExperimentResult& result)
{
    const ExperimentConfig& c = result.config;
    nlohmann::ordered_json j;
    j["code_version"] = UCSTAB_VERSION;
    j["problem"] = c.problem;
    j["order"] = c.order;
    j["params"] = params_json(result.params);
    j["levels"] = c.resolved_levels();
    j["base_n"] = c.base_n ? nlohmann::ordered_json(*c.base_n) : nlohmann::ordered_json("problem default");
    j["seed"] = c.seed;
    j["perturbation"] = {{"q_amplitude", c.perturb_q},
                         {"f_amplitude", c.perturb_f},
                         {"mode", c.perturb_mode == Perturbation::Mode::Noise ? "noise" : "constant"}};
    j["outputs"] = {{"residuals", c.residuals}, {"condition", c.condition}, {"timing_in_csv", c.timing}};
    j["residual_norms"] = {
        {"reference_mesh", "one uniform refinement beyond the solution mesh"},
        {"res_hm1", "sqrt(r^T K^-1 r), K the H1 Gram matrix of the constrained reference space"},
        {"res_hm2_proxy", "H^-2 proxy: L2 norm of the H1 Riesz representative of r (iterated Riesz)"}};
    auto levels = nlohmann::ordered_json::array();
    double total = 0.0;
    for (const auto& l : result.levels) {
        nlohmann::ordered_json e;
        e["level"] = l.level;
        e["h"] = l.h;
        e["dofs"] = l.dofs;
        e["status"] = l.error.empty() ? "ok" : "failed";
        if (!l.error.empty()) {
            e["error"] = l.error;
        }
        if (!l.condition_error.empty()) {
            e["condition_error"] = l.condition_error;
        }
        e["wall_ms"] = l.wall_ms;
        total += l.wall_ms;
        levels.push_back(e);
    }
    j["level_status"] = levels;
    j["rates"] = result.rates ? nlohmann::ordered_json("rates.csv") : nlohmann::ordered_json(result.rates_error);
    j["total_wall_ms"] = total;
    return j.dump(2) + "\n";
}

const char* errors_plot_script = R"(# Log-log error and stabilizer curves from errors.csv.
import csv
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

with open("errors.csv") as f:
    rows = list(csv.DictReader(f))


def column(name):
    return [float(r[name]) if r[name] != "NA" else float("nan") for r in rows]


h = column("h")
fig, axes = plt.subplots(1, 2, figsize=(10, 4))
for name in ["l2_B", "h1_B", "l2_omega", "l2_Omega", "h1_Omega", "res_hm1", "res_hm2_proxy"]:
    axes[0].loglog(h, column(name), marker="o", label=name)
for name in ["prs", "dus"]:
    axes[1].loglog(h, column(name), marker="s", label=name)
for ax in axes:
    ax.set_xlabel("h")
    ax.invert_xaxis()
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
fig.tight_layout()
fig.savefig("errors.png", dpi=150)
)";

const char* sweep_plot_script = R"(# Error-vs-h and prs/dus curves for every grid point in sweep.csv.
import csv
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

with open("sweep.csv") as f:
    reader = csv.DictReader(f)
    rows = list(reader)
    fields = reader.fieldnames

labels = sorted({c.split("@", 1)[1] for c in fields if "@" in c})


def column(name):
    return [float(r[name]) if r[name] != "NA" else float("nan") for r in rows]


fig, axes = plt.subplots(1, 3, figsize=(15, 4))
for label in labels:
    h = column("h@" + label)
    axes[0].loglog(h, column("l2_B@" + label), marker="o", label=label)
    axes[1].loglog(h, column("h1_B@" + label), marker="o", label=label)
    axes[2].loglog(h, column("prs@" + label), marker="s", label="prs " + label)
    axes[2].loglog(h, column("dus@" + label), marker="^", linestyle="--", label="dus " + label)
for ax, title in zip(axes, ["L2(B) error", "H1(B) error", "prs and dus"]):
    ax.set_title(title)
    ax.set_xlabel("h")
    ax.invert_xaxis()
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize="small")
fig.tight_layout()
fig.savefig("sweep.png", dpi=150)
)";

} // namespace

std::string format_number(double value)
{
    if (std::isnan(value)) {
        return "NA";
    }
    if (std::isinf(value)) {
        return value > 0 ? "inf" : "-inf";
    }
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10e", value);
    return buf;
}

std::string errors_csv_header()
{
    std::string header = "problem,p,alpha,eta,tau,s_reg,level,h,dofs";
    for (const auto& norm : record_norm_names()) {
        header += "," + norm;
    }
    return header + ",cond,wall_ms";
}

void ExperimentConfig::validate() const
{
    UCSTAB_REQUIRE(order >= 1 && order <= 3, InvalidArgument, "order must be 1, 2 or 3");
    UCSTAB_REQUIRE(!levels || *levels >= 1, InvalidArgument, "need at least one mesh level");
    UCSTAB_REQUIRE(!base_n || *base_n >= 1, InvalidArgument, "base mesh subdivision must be positive");
    UCSTAB_REQUIRE(std::isfinite(perturb_q) && perturb_q >= 0.0 && std::isfinite(perturb_f) && perturb_f >= 0.0,
                   InvalidArgument, "perturbation amplitudes must be finite and non-negative");
    UCSTAB_REQUIRE(!s_reg || (*s_reg >= 1.0 && std::isfinite(*s_reg)), InvalidArgument, "s_reg must be at least 1");
    StabilizationParams probe = params;
    probe.s_reg = s_reg.value_or(2.0);
    probe.validate();
}

int ExperimentConfig::resolved_levels() const { return levels.value_or(order == 3 ? 3 : 4); }

StabilizationParams ExperimentConfig::resolved_params(const ProblemSpec& problem) const
{
    StabilizationParams p = params;
    p.s_reg = s_reg.value_or(problem.regularity(order));
    return p;
}

std::vector<ErrorRecord> ExperimentResult::records() const
{
    std::vector<ErrorRecord> out;
    for (const auto& l : levels) {
        if (l.record) {
            out.push_back(*l.record);
        }
    }
    return out;
}

std::vector<std::shared_ptr<const Mesh>> mesh_levels(const ProblemSpec& problem, int base_n, int levels,
                                                     const std::filesystem::path& cache)
{
    std::vector<std::shared_ptr<const Mesh>> meshes;
    for (int l = 0; l < levels; ++l) {
        std::filesystem::path file;
        if (!cache.empty()) {
            file = cache / (problem.name + "_n" + std::to_string(base_n) + "_l" + std::to_string(l) + ".mesh");
            if (std::filesystem::exists(file)) {
                std::ifstream is(file);
                meshes.push_back(std::make_shared<const Mesh>(read_mesh(is)));
                continue;
            }
        }
        meshes.push_back(std::make_shared<const Mesh>(l == 0 ? generate(problem.domain, base_n)
                                                             : refine(*meshes.back())));
        if (!file.empty()) {
            std::filesystem::create_directories(cache);
            std::ostringstream os;
            write_mesh(os, *meshes.back());
            write_file(file, os.str());
        }
    }
    return meshes;
}

ExperimentResult run(const ExperimentConfig& config)
{
    config.validate();
    const ProblemSpec problem = builtin_problem(config.problem);
    const auto meshes =
        mesh_levels(problem, config.base_n.value_or(problem.base_n), config.resolved_levels(), config.mesh_cache);
    return run(config, problem, meshes);
}

ExperimentResult run(const ExperimentConfig& config, const ProblemSpec& problem,
                     std::span<const std::shared_ptr<const Mesh>> meshes)
{
    config.validate();
    UCSTAB_REQUIRE(datum_mismatch(problem) <= 1e-10, InvalidArgument,
                   "datum of '" + problem.name + "' disagrees with its exact solution on omega");
    ExperimentResult result;
    result.config = config;
    result.params = config.resolved_params(problem);
    result.params.validate();

    const Perturbation perturbation{config.perturb_q, config.perturb_f, config.perturb_mode, config.seed};
    for (std::size_t l = 0; l < meshes.size(); ++l) {
        LevelResult level;
        level.level = static_cast<int>(l);
        level.h = meshes[l]->h();
        const auto t0 = Clock::now();
        try {
            const SaddleSystem system = build(problem, result.params, meshes[l], config.order, perturbation);
            level.dofs = system.size();
            const Factorization lu(system.matrix);
            const SolveResult solution = solve(system, lu);
            level.record = evaluate(problem, system, solution, config.residuals);
            if (perturbation.active()) {
                const SolveResult delta = solve(system, lu, system.rhs_perturbation);
                const NormPair all = subdomain_norms(delta.u_h, {}, {});
                const NormPair b = subdomain_norms(delta.u_h, {}, problem.target);
                level.perturbation = PerturbationRecord{all.l2, b.l2, b.h1};
            }
            if (config.condition) {
                try {
                    level.condition = condition_number(lu, {.seed = config.seed + 1});
                } catch (const SolverError& e) {
                    level.condition_error = e.what();
                }
            }
        } catch (const std::exception& e) {
            level.record.reset();
            level.perturbation.reset();
            level.error = e.what();
        }
        level.wall_ms = elapsed_ms(t0);
        result.levels.push_back(std::move(level));
    }

    try {
        result.rates = fit_rates(result.records(), result.params.s_reg);
    } catch (const InvalidArgument& e) {
        result.rates_error = e.what();
    }
    if (config.condition) {
        std::vector<double> h, cond;
        for (const auto& l : result.levels) {
            if (l.condition) {
                h.push_back(l.h);
                cond.push_back(l.condition->cond);
            }
        }
        if (h.size() >= 2) {
            result.condition_slope = loglog_slope(h, cond);
        }
    }
    if (!config.out.empty()) {
        emit(result, config.out);
    }
    return result;
}

void emit(const ExperimentResult& result, const std::filesystem::path& dir)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    UCSTAB_REQUIRE(!ec && std::filesystem::is_directory(dir), InvalidArgument,
                   "cannot create output directory " + dir.string());
    write_file(dir / "errors.csv", errors_csv(result));
    write_file(dir / "rates.csv", rates_csv(result));
    write_file(dir / "manifest.json", manifest_json(result));
    write_file(dir / "plot_errors.py", errors_plot_script);
    if (result.config.condition) {
        write_file(dir / "condition.csv", condition_csv(result));
    }
    if (result.config.perturb_q != 0.0 || result.config.perturb_f != 0.0) {
        write_file(dir / "perturbation.csv", perturbation_csv(result));
    }
}

std::string GridPoint::label() const
{
    return "a" + format_param(alpha) + "_e" + format_param(eta) + "_t" + format_param(tau);
}

SweepResult sweep(const ExperimentConfig& config, std::span<const GridPoint> grid)
{
    UCSTAB_REQUIRE(!grid.empty(), InvalidArgument, "parameter grid is empty");
    config.validate();
    const ProblemSpec problem = builtin_problem(config.problem);
    const auto meshes =
        mesh_levels(problem, config.base_n.value_or(problem.base_n), config.resolved_levels(), config.mesh_cache);

    SweepResult out;
    out.grid.assign(grid.begin(), grid.end());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        ExperimentConfig c = config;
        c.params.alpha = grid[i].alpha;
        c.params.eta = grid[i].eta;
        c.params.tau = grid[i].tau;
        if (!config.out.empty()) {
            char prefix[32];
            std::snprintf(prefix, sizeof prefix, "run_%02zu_", i);
            c.out = config.out / (prefix + grid[i].label());
        }
        try {
            out.runs.push_back(run(c, problem, meshes));
        } catch (const InvalidArgument& e) {
            // A grid point with invalid parameters yields an empty run.
            ExperimentResult empty;
            empty.config = c;
            empty.params = c.params;
            empty.rates_error = e.what();
            out.runs.push_back(std::move(empty));
        }
    }
    if (config.out.empty()) {
        return out;
    }

    static const std::vector<std::string> columns = {"h", "l2_B", "h1_B", "l2_omega", "res_hm1", "prs", "dus"};
    std::ostringstream os;
    os << "level";
    for (const auto& g : out.grid) {
        for (const auto& c : columns) {
            os << ',' << c << '@' << g.label();
        }
    }
    os << '\n';
    for (std::size_t l = 0; l < meshes.size(); ++l) {
        os << l;
        for (const auto& r : out.runs) {
            const ErrorRecord* rec = l < r.levels.size() && r.levels[l].record ? &*r.levels[l].record : nullptr;
            for (const auto& c : columns) {
                if (rec == nullptr) {
                    os << ",NA";
                } else {
                    os << ',' << format_number(c == "h" ? rec->h : record_value(*rec, c));
                }
            }
        }
        os << '\n';
    }
    std::filesystem::create_directories(config.out);
    write_file(config.out / "sweep.csv", os.str());
    write_file(config.out / "plot_sweep.py", sweep_plot_script);
    return out;
}

} // namespace ucstab
