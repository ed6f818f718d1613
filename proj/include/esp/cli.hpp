#pragma once

// Command layer: everything the command-line tool does, exposed as library
// functions so tests and the acceptance harness drive the same code paths.
// File layout per run directory:
//   particles.txt (generate), potentials.txt, forces.txt, summary.txt,
//   timings.txt (kept separate so summary.txt is bit-identical across runs),
//   ref_potentials.txt / ref_forces.txt (check).

#include "ewald.hpp"
#include "io.hpp"
#include "kernels.hpp"
#include "reference.hpp"

#include <algorithm>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

namespace esp {

struct RunConfig {
    // system source: explicit particle file, or a generator spec
    std::string input;                       // empty -> use generator
    SystemKind kind = SystemKind::random;
    std::size_t N = 512;
    Vec3 box{10.0, 10.0, 10.0};
    std::uint64_t seed = 1;
    // solver
    SplitFamily family = SplitFamily::pswf;
    SplitFamily baseline_family = SplitFamily::gaussian;  // bench comparison
    double eps = 1e-4;
    double r_c = 1.0;
    Overrides overrides;
    // run control
    std::string out_dir = "out";
    int threads = 1;
    bool deterministic = false;
    int reps = 5;        // bench repetitions
    double tol = 1e-9;   // oracle tolerance (check / bench delta)
};

namespace detail {

// Oracle cost is O(N^2)-scale; bench only certifies small systems.
constexpr std::size_t kBenchOracleMaxN = 1024;

inline void apply_run_control(const RunConfig& cfg) {
    thread_count() = cfg.deterministic ? 1 : std::max(1, cfg.threads);
    std::error_code ec;
    std::filesystem::create_directories(cfg.out_dir, ec);
    if (ec) throw IoError("cannot create output directory: " + cfg.out_dir);
}

inline std::string out_path(const RunConfig& cfg, const char* name) {
    return (std::filesystem::path(cfg.out_dir) / name).string();
}

inline void echo_system(const RunConfig& cfg, std::size_t N, const Vec3& box,
                        KeyValues& kv) {
    if (!cfg.input.empty()) {
        kv.emplace_back("input", cfg.input);
    } else {
        kv.emplace_back("generator", to_string(cfg.kind));
        kv.emplace_back("seed", std::to_string(cfg.seed));
    }
    kv.emplace_back("N", std::to_string(N));
    kv.emplace_back("box",
                    fmt_g(box[0]) + " " + fmt_g(box[1]) + " " + fmt_g(box[2]));
}

inline void echo_plan(const EwaldPlan& plan, const std::string& prefix, KeyValues& kv) {
    auto key = [&prefix](const char* k) { return prefix + k; };
    auto triple_i = [](const std::array<int, 3>& a) {
        return std::to_string(a[0]) + " " + std::to_string(a[1]) + " "
               + std::to_string(a[2]);
    };
    auto triple_d = [](const std::array<double, 3>& a) {
        return fmt_g(a[0]) + " " + fmt_g(a[1]) + " " + fmt_g(a[2]);
    };
    kv.emplace_back(key("family"), to_string(plan.family));
    kv.emplace_back(key("window"), to_string(plan.window_family));
    kv.emplace_back(key("force_method"), to_string(plan.force_method));
    kv.emplace_back(key("eps"), fmt_g(plan.eps));
    kv.emplace_back(key("rc"), fmt_g(plan.r_c));
    kv.emplace_back(key("P"), std::to_string(plan.P));
    kv.emplace_back(key("shape"), fmt_g(plan.shape));
    kv.emplace_back(key("c1"), fmt_g(plan.c1));
    kv.emplace_back(key("demand"), triple_d(plan.demand));
    kv.emplace_back(key("base_nf"), triple_i(plan.base_nf));
    kv.emplace_back(key("nf"), triple_i(plan.nf));
    kv.emplace_back(key("h"), triple_d(plan.h));
    kv.emplace_back(key("modes_total"), std::to_string(plan.total_modes()));
    kv.emplace_back(key("E_A"), fmt_g(plan.stats.E_A));
    kv.emplace_back(key("E_T"), fmt_g(plan.stats.E_T));
    kv.emplace_back(key("E_SI"), fmt_g(plan.stats.E_SI));
}

}  // namespace detail

inline ParticleSystem load_system(const RunConfig& cfg) {
    if (!cfg.input.empty()) return read_particles(cfg.input);
    GeneratorSpec spec;
    spec.kind = cfg.kind;
    spec.N = cfg.N;
    spec.box = cfg.box;
    spec.seed = cfg.seed;
    return generate_system(spec);
}

// generate: write the particle file and nothing else.
inline ParticleSystem cmd_generate(const RunConfig& cfg) {
    detail::apply_run_control(cfg);
    ParticleSystem s = load_system(cfg);
    write_particles(detail::out_path(cfg, "particles.txt"), s);
    return s;
}

// eval: build a plan, evaluate, write result files.
inline EnergyForces cmd_eval(const RunConfig& cfg) {
    detail::apply_run_control(cfg);
    ParticleSystem s = load_system(cfg);
    EwaldPlan plan = build_plan(s.box, cfg.family, cfg.eps, cfg.r_c, cfg.overrides);
    EnergyForces ef = evaluate(plan, s);

    write_potentials(detail::out_path(cfg, "potentials.txt"), ef.u);
    write_forces(detail::out_path(cfg, "forces.txt"), ef.F);

    KeyValues kv;
    kv.emplace_back("command", "eval");
    detail::echo_system(cfg, s.size(), s.box, kv);
    detail::echo_plan(plan, "", kv);
    kv.emplace_back("avg_neighbors", fmt_g(plan.avg_neighbors(s.size())));
    kv.emplace_back("energy", fmt_g(ef.energy));
    write_keyvalues(detail::out_path(cfg, "summary.txt"), kv);

    KeyValues tv;
    double total = 0.0;
    for (const auto& [k, v] : ef.timings) total += v;
    for (const auto& [k, v] : ef.timings) tv.emplace_back(k, fmt_g(v));
    tv.emplace_back("total", fmt_g(total));
    write_keyvalues(detail::out_path(cfg, "timings.txt"), tv);
    return ef;
}

// check: evaluate + oracle, report the relative RMS force error vs eps.
struct CheckOutcome {
    bool pass = false;
    double delta = 0.0;
    EnergyForces ef;
    ReferenceResult ref;
};

inline CheckOutcome cmd_check(const RunConfig& cfg) {
    detail::apply_run_control(cfg);
    ParticleSystem s = load_system(cfg);
    Overrides ov = cfg.overrides;
    ov.allow_degraded = true;  // certification measures the honest error instead
    EwaldPlan plan = build_plan(s.box, cfg.family, cfg.eps, cfg.r_c, ov);
    CheckOutcome out;
    out.ef = evaluate(plan, s);
    out.ref = direct_ewald(s, cfg.tol);
    out.delta = relative_force_error(out.ef.F, out.ref.F);
    out.pass = out.delta <= cfg.eps;

    write_potentials(detail::out_path(cfg, "potentials.txt"), out.ef.u);
    write_forces(detail::out_path(cfg, "forces.txt"), out.ef.F);
    write_potentials(detail::out_path(cfg, "ref_potentials.txt"), out.ref.u);
    write_forces(detail::out_path(cfg, "ref_forces.txt"), out.ref.F);

    KeyValues kv;
    kv.emplace_back("command", "check");
    detail::echo_system(cfg, s.size(), s.box, kv);
    detail::echo_plan(plan, "", kv);
    kv.emplace_back("energy", fmt_g(out.ef.energy));
    kv.emplace_back("oracle_tol", fmt_g(cfg.tol));
    kv.emplace_back("oracle_energy", fmt_g(out.ref.energy));
    kv.emplace_back("oracle_lambda", fmt_g(out.ref.lambda));
    kv.emplace_back("oracle_real_shells", std::to_string(out.ref.real_shells));
    kv.emplace_back("oracle_recip_kmax", std::to_string(out.ref.recip_kmax));
    kv.emplace_back("oracle_residual", fmt_g(out.ref.residual));
    kv.emplace_back("delta", fmt_g(out.delta));
    kv.emplace_back("status", out.pass ? "PASS" : "FAIL");
    write_keyvalues(detail::out_path(cfg, "summary.txt"), kv);

    KeyValues tv;
    double total = 0.0;
    for (const auto& [k, v] : out.ef.timings) total += v;
    for (const auto& [k, v] : out.ef.timings) tv.emplace_back(k, fmt_g(v));
    tv.emplace_back("total", fmt_g(total));
    write_keyvalues(detail::out_path(cfg, "timings.txt"), tv);
    return out;
}

// bench: two plans (family under test vs baseline family) at equal eps and
// r_c; grid-demand and built-grid ratios plus repeated-run stage timings.
struct StageStats {
    double mean = 0.0;
    double min = 0.0;
};

struct FamilyBench {
    SplitFamily family = SplitFamily::pswf;
    int P = 0;
    double shape = 0.0;
    double c1 = std::numeric_limits<double>::quiet_NaN();
    std::array<double, 3> demand{};
    std::array<int, 3> base_nf{}, nf{};
    std::size_t modes = 0;
    PlanStats stats;
    double delta = std::numeric_limits<double>::quiet_NaN();
    std::map<std::string, StageStats> stages;
    StageStats total;
    double energy = 0.0;
};

struct BenchReport {
    std::size_t N = 0;
    Vec3 box{};
    double eps = 0.0, r_c = 0.0;
    int reps = 0;
    FamilyBench primary, baseline;
    double R_demand = 0.0;  // continuous grid-demand ratio (baseline/primary)
    double R_built = 0.0;   // built-grid ratio after rounding and inflation
    bool delta_computed = false;
};

namespace detail {

inline FamilyBench bench_family(const EwaldPlan& plan, const ParticleSystem& s,
                                int reps, const std::vector<Vec3>* refF) {
    FamilyBench fb;
    fb.family = plan.family;
    fb.P = plan.P;
    fb.shape = plan.shape;
    fb.c1 = plan.c1;
    fb.demand = plan.demand;
    fb.base_nf = plan.base_nf;
    fb.nf = plan.nf;
    fb.modes = plan.total_modes();
    fb.stats = plan.stats;
    for (int r = 0; r < reps; ++r) {
        EnergyForces ef = evaluate(plan, s);
        double total = 0.0;
        for (const auto& [k, v] : ef.timings) {
            auto& st = fb.stages[k];
            st.mean += v;
            st.min = r == 0 ? v : std::min(st.min, v);
            total += v;
        }
        fb.total.mean += total;
        fb.total.min = r == 0 ? total : std::min(fb.total.min, total);
        if (r == 0) {
            fb.energy = ef.energy;
            if (refF) fb.delta = relative_force_error(ef.F, *refF);
        }
    }
    for (auto& [k, st] : fb.stages) st.mean /= reps;
    fb.total.mean /= reps;
    return fb;
}

inline void echo_bench_family(const FamilyBench& fb, const std::string& prefix,
                              KeyValues& kv, bool with_delta) {
    auto key = [&prefix](const char* k) { return prefix + k; };
    kv.emplace_back(key("family"), to_string(fb.family));
    kv.emplace_back(key("P"), std::to_string(fb.P));
    kv.emplace_back(key("shape"), fmt_g(fb.shape));
    kv.emplace_back(key("c1"), fmt_g(fb.c1));
    kv.emplace_back(key("demand"), fmt_g(fb.demand[0]) + " " + fmt_g(fb.demand[1]) + " "
                                       + fmt_g(fb.demand[2]));
    kv.emplace_back(key("base_nf"), std::to_string(fb.base_nf[0]) + " "
                                        + std::to_string(fb.base_nf[1]) + " "
                                        + std::to_string(fb.base_nf[2]));
    kv.emplace_back(key("nf"), std::to_string(fb.nf[0]) + " " + std::to_string(fb.nf[1])
                                   + " " + std::to_string(fb.nf[2]));
    kv.emplace_back(key("modes_total"), std::to_string(fb.modes));
    kv.emplace_back(key("E_A"), fmt_g(fb.stats.E_A));
    kv.emplace_back(key("E_T"), fmt_g(fb.stats.E_T));
    kv.emplace_back(key("E_SI"), fmt_g(fb.stats.E_SI));
    kv.emplace_back(key("energy"), fmt_g(fb.energy));
    if (with_delta) kv.emplace_back(key("delta"), fmt_g(fb.delta));
}

}  // namespace detail

inline BenchReport cmd_bench(const RunConfig& cfg) {
    detail::apply_run_control(cfg);
    ParticleSystem s = load_system(cfg);
    if (cfg.reps < 1) throw std::invalid_argument("cmd_bench: reps must be >= 1");

    BenchReport rep;
    rep.N = s.size();
    rep.box = s.box;
    rep.eps = cfg.eps;
    rep.r_c = cfg.r_c;
    rep.reps = cfg.reps;

    EwaldPlan prim = build_plan(s.box, cfg.family, cfg.eps, cfg.r_c, cfg.overrides);
    Overrides base_ov;  // baseline always runs family defaults
    base_ov.force_method = cfg.overrides.force_method;
    EwaldPlan base = build_plan(s.box, cfg.baseline_family, cfg.eps, cfg.r_c, base_ov);

    std::vector<Vec3> refF;
    rep.delta_computed = s.size() <= detail::kBenchOracleMaxN;
    if (rep.delta_computed) refF = direct_ewald(s, cfg.tol).F;
    const std::vector<Vec3>* refp = rep.delta_computed ? &refF : nullptr;

    rep.primary = detail::bench_family(prim, s, cfg.reps, refp);
    rep.baseline = detail::bench_family(base, s, cfg.reps, refp);

    rep.R_demand = 1.0;
    rep.R_built = 1.0;
    for (int d = 0; d < 3; ++d) {
        rep.R_demand *= base.demand[d] / prim.demand[d];
        rep.R_built *= static_cast<double>(base.nf[d]) / prim.nf[d];
    }

    KeyValues kv;
    kv.emplace_back("command", "bench");
    detail::echo_system(cfg, s.size(), s.box, kv);
    kv.emplace_back("eps", fmt_g(cfg.eps));
    kv.emplace_back("rc", fmt_g(cfg.r_c));
    kv.emplace_back("reps", std::to_string(cfg.reps));
    kv.emplace_back("force_method", to_string(cfg.overrides.force_method));
    detail::echo_bench_family(rep.primary, "primary_", kv, rep.delta_computed);
    detail::echo_bench_family(rep.baseline, "baseline_", kv, rep.delta_computed);
    kv.emplace_back("R_demand", fmt_g(rep.R_demand));
    kv.emplace_back("R_built", fmt_g(rep.R_built));
    write_keyvalues(detail::out_path(cfg, "summary.txt"), kv);

    KeyValues tv;
    auto emit = [&tv](const FamilyBench& fb, const std::string& prefix) {
        for (const auto& [k, st] : fb.stages) {
            tv.emplace_back(prefix + k + "_mean", fmt_g(st.mean));
            tv.emplace_back(prefix + k + "_min", fmt_g(st.min));
        }
        tv.emplace_back(prefix + "total_mean", fmt_g(fb.total.mean));
        tv.emplace_back(prefix + "total_min", fmt_g(fb.total.min));
    };
    emit(rep.primary, "primary_");
    emit(rep.baseline, "baseline_");
    write_keyvalues(detail::out_path(cfg, "timings.txt"), tv);
    return rep;
}

// kernels: dump the split and window tables of the plan the config implies
// (sampled profiles plus the compiled piecewise coefficient tables).
inline void cmd_kernels(const RunConfig& cfg) {
    detail::apply_run_control(cfg);
    EwaldPlan plan = build_plan(cfg.box, cfg.family, cfg.eps, cfg.r_c, cfg.overrides);

    auto sample = [&](const char* name, double lo, double hi, auto&& fn) {
        std::ofstream f(detail::out_path(cfg, name));
        if (!f) throw IoError(std::string("cannot open for writing: ") + name);
        const int n = 512;
        for (int i = 0; i <= n; ++i) {
            double x = lo + (hi - lo) * i / n;
            f << fmt_g(x) << ' ' << fmt_g(fn(x)) << '\n';
        }
    };
    sample("split_chi.txt", 0.0, 1.0, [&](double x) { return plan.split.chi(x); });
    sample("split_Psi.txt", 0.0, 1.0, [&](double y) { return plan.split.Psi(y); });
    double numax = plan.family == SplitFamily::pswf ? 3.0 * plan.shape : 6.0 * plan.shape;
    sample("split_chihat.txt", 0.0, numax,
           [&](double nu) { return plan.split.chihat_n(nu); });
    const WindowKernel& w = plan.win[0];
    sample("window_phihat.txt", 0.0, 2.0 * M_PI / w.h,
           [&](double xi) { return w.phi_hat(xi); });
    {
        std::ofstream f(detail::out_path(cfg, "window_phi.txt"));
        if (!f) throw IoError("cannot open for writing: window_phi.txt");
        dump_piecewise(f, w.phi_pc);
    }
    {
        std::ofstream f(detail::out_path(cfg, "window_dphi.txt"));
        if (!f) throw IoError("cannot open for writing: window_dphi.txt");
        dump_piecewise(f, w.dphi_pc);
    }
}

}  // namespace esp
