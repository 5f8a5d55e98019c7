#pragma once

// Driver logic behind the vbbq tool: layered config, experiment rows and the
// report writers. Kept out of tools/ so tests can drive it directly.

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "attack.hpp"
#include "candidates.hpp"

#ifndef VBBQ_VERSION
#define VBBQ_VERSION "0.1.0+unknown"
#endif

namespace vbbq::cli {

inline constexpr const char* kReportSchema = "vbbq.report/1";
inline constexpr const char* kBenchSchema = "vbbq.bench/1";

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Config {
    unsigned lambda = 6;
    std::optional<std::size_t> d;  // key depth; unset means the measured q of each mode
    std::size_t trials = 100;
    std::uint64_t seed = 1;
    std::vector<std::string> candidates{"basis"};
    unsigned jobs = 1;
    std::string out = ".";
    std::string format = "table";
    std::string backend = "reference";
};

inline const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> k{"lambda", "d", "trials", "seed", "candidate",
                                            "jobs", "out", "format", "backend"};
    return k;
}

namespace detail {

inline std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

inline std::uint64_t to_u64(const std::string& key, const std::string& v) {
    if (v.empty() || !std::all_of(v.begin(), v.end(), [](unsigned char c) { return std::isdigit(c); }))
        throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
    try {
        return std::stoull(v);
    } catch (const std::exception&) {
        throw ConfigError(key + ": out of range '" + v + "'");
    }
}

inline std::vector<std::string> split(const std::string& v, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    for (std::string part; std::getline(ss, part, sep);)
        if (!trim(part).empty()) out.push_back(trim(part));
    return out;
}

}  // namespace detail

// `source` names the layer for error messages
inline void apply(Config& c, const std::string& key, const std::string& raw, const std::string& source) {
    const std::string v = detail::trim(raw);
    const std::string k = source + ": " + key;
    if (key == "lambda") {
        auto x = detail::to_u64(k, v);
        if (x < 4 || x > 16) throw ConfigError(k + ": must be in 4..16");
        c.lambda = unsigned(x);
    } else if (key == "d") {
        if (v == "auto")
            c.d.reset();
        else
            c.d = std::size_t(detail::to_u64(k, v));
    } else if (key == "trials") {
        auto x = detail::to_u64(k, v);
        if (x == 0) throw ConfigError(k + ": must be >= 1");
        c.trials = x;
    } else if (key == "seed") {
        c.seed = detail::to_u64(k, v);
    } else if (key == "candidate") {
        auto names = detail::split(v, ',');
        if (names.empty()) throw ConfigError(k + ": empty");
        const auto known = cand::names();
        for (const auto& n : names)
            if (std::find(known.begin(), known.end(), n) == known.end())
                throw ConfigError(k + ": unknown candidate '" + n + "'");
        c.candidates = names;
    } else if (key == "jobs") {
        auto x = detail::to_u64(k, v);
        if (x == 0 || x > 256) throw ConfigError(k + ": must be in 1..256");
        c.jobs = unsigned(x);
    } else if (key == "out") {
        if (v.empty()) throw ConfigError(k + ": empty");
        c.out = v;
    } else if (key == "format") {
        if (v != "json" && v != "csv" && v != "table") throw ConfigError(k + ": expected json, csv or table");
        c.format = v;
    } else if (key == "backend") {
        if (v != "reference") throw ConfigError(k + ": only 'reference' is available");
        c.backend = v;
    } else {
        throw ConfigError(source + ": unknown key '" + key + "'");
    }
}

// key = value per line; '#' starts a comment
inline std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text,
                                                                          const std::string& source) {
    std::vector<std::pair<std::string, std::string>> kv;
    std::istringstream in(text);
    std::size_t ln = 0;
    for (std::string line; std::getline(in, line);) {
        ++ln;
        if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
        if (detail::trim(line).empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(source + ":" + std::to_string(ln) + ": expected key = value");
        kv.emplace_back(detail::trim(line.substr(0, eq)), line.substr(eq + 1));
    }
    return kv;
}

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

inline std::optional<std::string> process_env(const std::string& name) {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
}

// defaults < file < VBBQ_* environment < flags
inline Config resolve(const std::optional<std::string>& config_path, const EnvLookup& env,
                      const std::vector<std::pair<std::string, std::string>>& flags) {
    Config c;
    if (config_path) {
        std::ifstream f(*config_path);
        if (!f) throw ConfigError("cannot read config file '" + *config_path + "'");
        std::stringstream ss;
        ss << f.rdbuf();
        for (const auto& [k, v] : parse_config_text(ss.str(), *config_path)) apply(c, k, v, *config_path);
    }
    for (const auto& key : config_keys()) {
        std::string name = "VBBQ_" + key;
        std::transform(name.begin(), name.end(), name.begin(), [](unsigned char ch) { return std::toupper(ch); });
        if (auto v = env(name)) apply(c, key, *v, name);
    }
    for (const auto& [k, v] : flags) apply(c, k, v, "flag");
    return c;
}

// ---------------------------------------------------------------------------
// demo-attack

// one row per (candidate, mode), aux first
inline std::vector<atk::Report> run_demo(const Config& c) {
    std::vector<atk::Report> rows;
    for (const auto& name : c.candidates)
        for (auto mode : {atk::Mode::Aux, atk::Mode::NoAux}) {
            atk::ExperimentConfig e;
            e.mode = mode;
            e.candidate = name;
            e.trials = c.trials;
            e.lambda = c.lambda;
            e.seed = c.seed;
            e.jobs = c.jobs;
            if (c.d) e.d_offset = int(long(*c.d) - long(atk::depth_for(mode, c.lambda)));
            rows.push_back(atk::run_experiment(e));
        }
    return rows;
}

inline nlohmann::ordered_json config_json(const Config& c) {
    nlohmann::ordered_json j;
    j["lambda"] = c.lambda;
    j["d"] = c.d ? nlohmann::ordered_json(*c.d) : nlohmann::ordered_json("auto");
    j["trials"] = c.trials;
    j["seed"] = c.seed;
    j["candidate"] = c.candidates;
    j["jobs"] = c.jobs;
    j["backend"] = c.backend;
    return j;
}

// `out` and `format` only steer where the report goes, so they stay out of it;
// jobs is recorded although it cannot change the numbers.
inline std::string render_json(const Config& c, const std::vector<atk::Report>& rows) {
    nlohmann::ordered_json j;
    j["schema"] = kReportSchema;
    j["version"] = VBBQ_VERSION;
    j["config"] = config_json(c);
    j["rows"] = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
        nlohmann::ordered_json x;
        x["mode"] = atk::mode_name(r.cfg.mode);
        x["candidate"] = r.cfg.candidate;
        x["lambda"] = r.cfg.lambda;
        x["q"] = r.q;
        x["d"] = r.d;
        x["trials"] = r.cfg.trials;
        x["point_hits"] = r.point_hits;
        x["zero_hits"] = r.zero_hits;
        x["p_point"] = r.p_point;
        x["p_zero"] = r.p_zero;
        x["advantage"] = r.advantage;
        x["ci_point"] = {r.ci_point.lo, r.ci_point.hi};
        x["ci_zero"] = {r.ci_zero.lo, r.ci_zero.hi};
        x["order_ok"] = r.order_ok;
        j["rows"].push_back(x);
    }
    return j.dump(2) + "\n";
}

inline std::string fixed(double v, int prec = 4) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(prec) << v;
    return os.str();
}

inline std::string render_csv(const Config&, const std::vector<atk::Report>& rows) {
    std::ostringstream os;
    os << "# schema=" << kReportSchema << " version=" << VBBQ_VERSION << "\n";
    os << "mode,candidate,lambda,q,d,trials,seed,point_hits,zero_hits,p_point,p_zero,advantage,"
          "ci_point_lo,ci_point_hi,ci_zero_lo,ci_zero_hi,order_ok\n";
    for (const auto& r : rows)
        os << atk::mode_name(r.cfg.mode) << ',' << r.cfg.candidate << ',' << r.cfg.lambda << ',' << r.q << ','
           << r.d << ',' << r.cfg.trials << ',' << r.cfg.seed << ',' << r.point_hits << ',' << r.zero_hits << ','
           << fixed(r.p_point) << ',' << fixed(r.p_zero) << ',' << fixed(r.advantage) << ','
           << fixed(r.ci_point.lo) << ',' << fixed(r.ci_point.hi) << ',' << fixed(r.ci_zero.lo) << ','
           << fixed(r.ci_zero.hi) << ',' << (r.order_ok ? 1 : 0) << "\n";
    return os.str();
}

inline std::string render_table(const Config&, const std::vector<atk::Report>& rows) {
    std::ostringstream os;
    os << std::left << std::setw(7) << "mode" << std::setw(8) << "cand" << std::right << std::setw(4) << "lam"
       << std::setw(4) << "q" << std::setw(4) << "d" << std::setw(7) << "trials" << std::setw(9) << "p_point"
       << std::setw(9) << "p_zero" << std::setw(7) << "adv" << "  " << std::left << std::setw(18) << "95% CI point"
       << "95% CI zero\n";
    for (const auto& r : rows) {
        os << std::left << std::setw(7) << atk::mode_name(r.cfg.mode) << std::setw(8) << r.cfg.candidate << std::right
           << std::setw(4) << r.cfg.lambda << std::setw(4) << r.q << std::setw(4) << r.d << std::setw(7)
           << r.cfg.trials << std::setw(9) << fixed(r.p_point, 3) << std::setw(9) << fixed(r.p_zero, 3)
           << std::setw(7) << fixed(r.advantage, 3) << "  " << std::left << std::setw(18)
           << ("[" + fixed(r.ci_point.lo, 3) + ", " + fixed(r.ci_point.hi, 3) + "]") << "["
           << fixed(r.ci_zero.lo, 3) << ", " << fixed(r.ci_zero.hi, 3) << "]"
           << (r.order_ok ? "" : "  ORDER VIOLATION") << "\n";
    }
    return os.str();
}

inline std::string render(const Config& c, const std::vector<atk::Report>& rows) {
    if (c.format == "json") return render_json(c, rows);
    if (c.format == "csv") return render_csv(c, rows);
    return render_table(c, rows);
}

// ---------------------------------------------------------------------------
// bench

struct BenchRow {
    unsigned lambda = 0;
    std::size_t q = 0;
    double interpret_rec_s = 0, assemble_s = 0, qeval_s = 0, attack_s = 0;
    int bit = 0;
    bool over_budget = false;
};

inline constexpr double kAttackBudgetSeconds = 60;

inline BenchRow bench_one(unsigned lambda, std::uint64_t seed) {
    using clock = std::chrono::steady_clock;
    auto secs = [](clock::time_point a) { return std::chrono::duration<double>(clock::now() - a).count(); };
    BenchRow b;
    b.lambda = lambda;
    b.q = atk::depth_for(atk::Mode::NoAux, lambda);
    Rng rng = trial_rng(seed, "bench", lambda);
    const Bits alpha = fam::sample_nonzero(rng, lambda);
    const auto r = fhe::RandomTape::sample(rng, lambda), r2 = fhe::RandomTape::sample(rng, lambda);
    const auto s = fam::sample_D_r(alpha, unsigned(b.q), r, rng.derive("d"));
    const auto m = fam::build_member(fam::Kind::POINT, alpha, s.beta, unsigned(b.q), r, r2, s.aux);
    const auto o = cand::get("basis")->obf(fam::member_circuit(m), rng);

    auto t = clock::now();
    auto rec = cand::interpret_rec(o, fam::member_input(Bits(lambda, 0), 1), rng);
    b.interpret_rec_s = secs(t);
    (void)rec;

    auto blocks = pk::sim_blocks(lambda, s.aux.pk, pk::Strategy::Bootstrapped);
    t = clock::now();
    auto pk = pk::assemble(blocks, lambda);
    b.assemble_s = secs(t);

    auto I = cand::interpreter(o.n_in, o.n_out);
    auto x_ct = s.aux.alpha_ct;
    auto b_ct = fhe::enc(pk, Bits{0, 1}, rng);
    x_ct.insert(x_ct.end(), b_ct.begin(), b_ct.end());
    auto in = qfhe::tensor(qfhe::qenc(pk, o.state, rng), qfhe::promote(pk, x_ct, rng));
    t = clock::now();
    qfhe::qeval(pk, I->J, std::move(in), rng);
    b.qeval_s = secs(t);

    t = clock::now();
    b.bit = atk::attack_noaux(o, lambda, rng).bit;
    b.attack_s = secs(t);
    b.over_budget = b.attack_s > kAttackBudgetSeconds;
    return b;
}

inline std::string render_bench(const std::vector<BenchRow>& rows, const std::string& format) {
    if (format == "json") {
        nlohmann::ordered_json j;
        j["schema"] = kBenchSchema;
        j["version"] = VBBQ_VERSION;
        j["budget_s"] = kAttackBudgetSeconds;
        j["rows"] = nlohmann::ordered_json::array();
        for (const auto& b : rows)
            j["rows"].push_back({{"lambda", b.lambda},
                                 {"q", b.q},
                                 {"interpret_rec_s", b.interpret_rec_s},
                                 {"assemble_s", b.assemble_s},
                                 {"qeval_s", b.qeval_s},
                                 {"attack_s", b.attack_s},
                                 {"bit", b.bit},
                                 {"over_budget", b.over_budget}});
        return j.dump(2) + "\n";
    }
    std::ostringstream os;
    if (format == "csv") {
        os << "lambda,q,interpret_rec_s,assemble_s,qeval_s,attack_s,bit,over_budget\n";
        for (const auto& b : rows)
            os << b.lambda << ',' << b.q << ',' << fixed(b.interpret_rec_s) << ',' << fixed(b.assemble_s) << ','
               << fixed(b.qeval_s) << ',' << fixed(b.attack_s) << ',' << b.bit << ',' << b.over_budget << "\n";
        return os.str();
    }
    os << std::right << std::setw(4) << "lam" << std::setw(4) << "q" << std::setw(12) << "rec_s" << std::setw(12)
       << "assemble_s" << std::setw(12) << "qeval_s" << std::setw(12) << "attack_s" << std::setw(5) << "bit\n";
    for (const auto& b : rows)
        os << std::setw(4) << b.lambda << std::setw(4) << b.q << std::setw(12) << fixed(b.interpret_rec_s)
           << std::setw(12) << fixed(b.assemble_s) << std::setw(12) << fixed(b.qeval_s) << std::setw(12)
           << fixed(b.attack_s) << std::setw(4) << b.bit << (b.over_budget ? "  OVER BUDGET" : "") << "\n";
    return os.str();
}

}  // namespace vbbq::cli
