// vbbq: run the distinguishers, the invariant suites and the stage timings.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include <vbbq/cli.hpp>
#include <vbbq/verify.hpp>

using namespace vbbq;

namespace {

void write_file(const std::filesystem::path& p, const std::string& s) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw cli::ConfigError("cannot write " + p.string());
    f << s;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"vbbq: black-box obfuscation distinguishers at toy scale"};
    app.set_version_flag("--version", std::string(VBBQ_VERSION));
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand

    std::optional<std::string> config_path;
    std::map<std::string, std::string> flag_vals;
    app.add_option_function<std::string>("--config", [&](const std::string& p) { config_path = p; },
                                         "flat key = value config file");
    for (const char* key : {"trials", "seed", "lambda", "candidate", "jobs", "out", "format", "d"}) {
        std::string k = key;
        app.add_option_function<std::string>("--" + k, [&flag_vals, k](const std::string& v) { flag_vals[k] = v; })
            ->group("Config overrides");
    }

    auto* demo = app.add_subcommand("demo-attack", "run aux and noaux attacks per candidate; write report.json/csv");
    auto* ver = app.add_subcommand("verify", "run an invariant suite");
    std::string suite = "all";
    bool inject = false;
    ver->add_option("suite", suite, "recovery, decompose, qfhe, garble, oracle or all")
        ->check(CLI::IsMember([] {
            auto v = verify::suite_names();
            v.push_back("all");
            return v;
        }()));
    ver->add_flag("--inject-fault", inject, "corrupt one key block before the decompose checks");
    auto* bench = app.add_subcommand("bench", "time interpret_rec, assembly, qeval and the full noaux attack");
    std::string lambdas = "4,5,6";
    bench->add_option("--lambdas", lambdas, "comma-separated lambda sweep");

    CLI11_PARSE(app, argc, argv);

    try {
        // flag order must not matter; apply in key order
        std::vector<std::pair<std::string, std::string>> flags(flag_vals.begin(), flag_vals.end());
        const cli::Config cfg = cli::resolve(config_path, cli::process_env, flags);

        if (*demo) {
            auto rows = cli::run_demo(cfg);
            std::filesystem::create_directories(cfg.out);
            write_file(std::filesystem::path(cfg.out) / "report.json", cli::render_json(cfg, rows));
            write_file(std::filesystem::path(cfg.out) / "report.csv", cli::render_csv(cfg, rows));
            std::cout << cli::render(cfg, rows);
            for (const auto& r : rows)
                if (!r.order_ok) {
                    std::cerr << "error: qeval ran before a J_rec call in some trial\n";
                    return 2;
                }
            return 0;
        }
        if (*ver) {
            std::vector<std::string> names = suite == "all" ? verify::suite_names() : std::vector<std::string>{suite};
            bool ok = true;
            for (const auto& n : names) {
                auto checks = n == "decompose" ? verify::decompose({6, 8, cfg.seed, inject})
                                               : verify::run_suite(n, cfg.seed);
                for (const auto& c : checks) std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << " (" << c.detail << ")\n";
                ok = ok && verify::all_pass(checks);
            }
            return ok ? 0 : 1;
        }
        if (*bench) {
            std::vector<cli::BenchRow> rows;
            for (const auto& l : cli::detail::split(lambdas, ',')) {
                cli::Config probe;
                cli::apply(probe, "lambda", l, "--lambdas");
                rows.push_back(cli::bench_one(probe.lambda, cfg.seed));
            }
            std::cout << cli::render_bench(rows, cfg.format);
            bool ok = true;
            for (const auto& b : rows) ok = ok && !b.over_budget && b.bit == 1;
            return ok ? 0 : 1;
        }
    } catch (const cli::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
