// Command-line driver for the periodic electrostatics library.
//
// Exit codes: 0 success, 1 usage error, 2 numerical failure (including a
// failed `check` certification), 3 file I/O error.

#include "esp/esp.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <iostream>
#include <map>
#include <string>
#include <vector>

namespace {

struct CliArgs {
    esp::RunConfig cfg;
    std::string family = "pswf";
    std::string baseline_family = "gaussian";
    std::string kind = "random";
    std::string force_method = "ik";
    std::vector<double> box;
    long long N = 512;
    int nf = 0;
    int order = 0;
    double c1 = 0.0;
};

void add_solver_options(CLI::App* sub, CliArgs& a) {
    sub->add_option("--family", a.family, "screen family: pswf | gaussian")
        ->check(CLI::IsMember({"pswf", "gaussian"}));
    sub->add_option("--eps", a.cfg.eps, "force accuracy target (1e-5..1e-3)");
    sub->add_option("--rc", a.cfg.r_c, "real-space cutoff radius");
    sub->add_option("--nf", a.nf, "override: grid size per dimension (even)");
    sub->add_option("--order", a.order, "override: spreading support width P");
    sub->add_option("--c1", a.c1, "override: window shape parameter (pswf family)");
    sub->add_option("--force-method", a.force_method,
                    "spectral force path: ik | ad")
        ->check(CLI::IsMember({"ik", "ad"}));
    sub->add_option("--threads", a.cfg.threads, "worker thread count");
    sub->add_flag("--deterministic", a.cfg.deterministic,
                  "force single-threaded execution");
    sub->add_option("--out", a.cfg.out_dir, "output directory");
}

void add_system_options(CLI::App* sub, CliArgs& a) {
    sub->add_option("--in", a.cfg.input, "particle file (overrides generator)");
    sub->add_option("--kind", a.kind, "generator: random | rocksalt | water-like-lattice")
        ->check(CLI::IsMember(
            {"random", "rocksalt", "water-like-lattice", "water-like", "water"}));
    sub->add_option("--N", a.N, "particle count for the generator");
    sub->add_option("--box", a.box, "box lengths: one value (cube) or three")
        ->expected(1, 3);
    sub->add_option("--seed", a.cfg.seed, "generator seed");
}

void finish_config(CliArgs& a) {
    a.cfg.family = esp::split_family_from_string(a.family);
    a.cfg.baseline_family = esp::split_family_from_string(a.baseline_family);
    a.cfg.kind = esp::system_kind_from_string(a.kind);
    a.cfg.overrides.force_method = esp::force_method_from_string(a.force_method);
    if (a.N < 0) throw std::invalid_argument("--N must be nonnegative");
    a.cfg.N = static_cast<std::size_t>(a.N);
    a.cfg.overrides.nf = a.nf;
    a.cfg.overrides.P = a.order;
    a.cfg.overrides.c1 = a.c1;
    if (!a.box.empty()) {
        if (a.box.size() == 1)
            a.cfg.box = {a.box[0], a.box[0], a.box[0]};
        else if (a.box.size() == 3)
            a.cfg.box = {a.box[0], a.box[1], a.box[2]};
        else
            throw std::invalid_argument("--box takes one or three lengths");
    }
}

void print_kv(const char* k, const std::string& v) {
    std::printf("%-14s %s\n", k, v.c_str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Periodic Coulomb electrostatics: Ewald splitting with "
                 "prolate-spheroidal or Gaussian screens"};
    app.require_subcommand(1);
    CliArgs a;

    CLI::App* gen = app.add_subcommand("generate", "write a generated particle file");
    add_system_options(gen, a);
    gen->add_option("--out", a.cfg.out_dir, "output directory");

    CLI::App* eval = app.add_subcommand("eval", "evaluate potentials, forces, energy");
    add_system_options(eval, a);
    add_solver_options(eval, a);

    CLI::App* check =
        app.add_subcommand("check", "evaluate and certify against the direct solver");
    add_system_options(check, a);
    add_solver_options(check, a);
    check->add_option("--tol", a.cfg.tol, "direct-solver tolerance");

    CLI::App* bench = app.add_subcommand("bench", "compare two screen families");
    add_system_options(bench, a);
    add_solver_options(bench, a);
    bench->add_option("--reps", a.cfg.reps, "timing repetitions");
    bench->add_option("--baseline-family", a.baseline_family,
                      "comparison family: pswf | gaussian")
        ->check(CLI::IsMember({"pswf", "gaussian"}));
    bench->add_option("--tol", a.cfg.tol, "direct-solver tolerance for delta");

    CLI::App* kern = app.add_subcommand("kernels", "dump screen and window tables");
    add_solver_options(kern, a);
    kern->add_option("--box", a.box, "box lengths: one value (cube) or three")
        ->expected(1, 3);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        finish_config(a);
        if (gen->parsed()) {
            esp::ParticleSystem s = esp::cmd_generate(a.cfg);
            print_kv("particles", std::to_string(s.size()));
            print_kv("wrote", a.cfg.out_dir + "/particles.txt");
        } else if (eval->parsed()) {
            esp::EnergyForces ef = esp::cmd_eval(a.cfg);
            print_kv("energy", esp::fmt_g(ef.energy));
            print_kv("wrote", a.cfg.out_dir + "/{potentials,forces,summary,timings}.txt");
        } else if (check->parsed()) {
            esp::CheckOutcome out = esp::cmd_check(a.cfg);
            print_kv("energy", esp::fmt_g(out.ef.energy));
            print_kv("delta", esp::fmt_g(out.delta));
            print_kv("eps", esp::fmt_g(a.cfg.eps));
            print_kv("status", out.pass ? "PASS" : "FAIL");
            print_kv("wrote", a.cfg.out_dir + "/summary.txt");
            return out.pass ? 0 : 2;
        } else if (bench->parsed()) {
            esp::BenchReport rep = esp::cmd_bench(a.cfg);
            print_kv("primary", std::string(esp::to_string(rep.primary.family)) + " nf="
                                    + std::to_string(rep.primary.nf[0]) + " "
                                    + std::to_string(rep.primary.nf[1]) + " "
                                    + std::to_string(rep.primary.nf[2]));
            print_kv("baseline", std::string(esp::to_string(rep.baseline.family)) + " nf="
                                     + std::to_string(rep.baseline.nf[0]) + " "
                                     + std::to_string(rep.baseline.nf[1]) + " "
                                     + std::to_string(rep.baseline.nf[2]));
            print_kv("R_demand", esp::fmt_g(rep.R_demand));
            print_kv("R_built", esp::fmt_g(rep.R_built));
            if (rep.delta_computed) {
                print_kv("primary_delta", esp::fmt_g(rep.primary.delta));
                print_kv("baseline_delta", esp::fmt_g(rep.baseline.delta));
            }
            print_kv("total_mean", esp::fmt_g(rep.primary.total.mean) + " vs "
                                       + esp::fmt_g(rep.baseline.total.mean));
            print_kv("wrote", a.cfg.out_dir + "/{summary,timings}.txt");
        } else if (kern->parsed()) {
            esp::cmd_kernels(a.cfg);
            print_kv("wrote", a.cfg.out_dir + "/split_*.txt, window_*.txt");
        }
    } catch (const esp::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 3;
    } catch (const esp::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
