#include "sch/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "sch/errors.hpp"

namespace sch {

namespace {

std::string trim(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

[[noreturn]] void fail(int line, const std::string& what) {
    throw ConfigError("config line " + std::to_string(line) + ": " + what);
}

// std::from_chars keeps the parse locale-independent.
double parse_double(const std::string& key, const std::string& v, int line) {
    double out = 0.0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
        fail(line, "key '" + key + "': expected a number, got '" + v + "'");
    return out;
}

long long parse_int(const std::string& key, const std::string& v, int line) {
    long long out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
        fail(line, "key '" + key + "': expected an integer, got '" + v + "'");
    return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v, int line) {
    std::uint64_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
        fail(line, "key '" + key + "': expected an unsigned integer, got '" + v + "'");
    return out;
}

bool parse_bool(const std::string& key, const std::string& v, int line) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    fail(line, "key '" + key + "': expected true/false, got '" + v + "'");
}

std::vector<double> parse_list(const std::string& key, const std::string& v, int line) {
    std::vector<double> out;
    size_t pos = 0;
    while (pos <= v.size()) {
        size_t comma = v.find(',', pos);
        if (comma == std::string::npos) comma = v.size();
        std::string item = trim(v.substr(pos, comma - pos));
        if (item.empty()) fail(line, "key '" + key + "': empty list entry");
        out.push_back(parse_double(key, item, line));
        pos = comma + 1;
    }
    return out;
}

std::string format_double_c(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void require(bool ok, const std::string& what) {
    if (!ok) throw ConfigError("config: " + what);
}

} // namespace

void RunConfig::resolve() {
    if (!std::isfinite(stepper.tau_max)) stepper.tau_max = t_final / 50.0;
    if (snapshot_times.empty() && !no_snapshots) {
        double s = t_final / 0.012;
        snapshot_times = {0.0, 0.003 * s, 0.009 * s, 0.012 * s};
    }
}

void RunConfig::validate() const {
    require(eps > 0.0, "epsilon must be positive");
    require(t_final > 0.0, "t_final must be positive");
    require(gamma >= 0.0, "gamma must be nonnegative");
    require(sigma >= 0.0, "sigma must be nonnegative");
    require(r1 > 0.0 && r1 < r2 && r2 < 1.0, "radii must satisfy 0 < r1 < r2 < 1");
    require(noise_lmax >= 0, "noise_lmax must be nonnegative");
    require(noise_truncation >= -1 && noise_truncation <= noise_lmax * noise_lmax,
            "noise_truncation must be -1 or at most lmax^2");
    require(resolution >= 1, "resolution must be at least 1");
    require(tilde_resolution >= 0, "tilde_resolution must be nonnegative");
    require(stepper.tau_min > 0.0, "tau_min must be positive");
    require(stepper.tau_max >= stepper.tau_min, "tau_max must be at least tau_min");
    require(tau_init >= stepper.tau_min && tau_init <= stepper.tau_max,
            "tau_init must lie in [tau_min, tau_max]");
    require(stepper.grow_below >= 1, "step_grow_below must be at least 1");
    require(stepper.shrink_above >= stepper.grow_below,
            "step_shrink_above must be at least step_grow_below");
    require(newton.tol > 0.0, "newton_tol must be positive");
    require(newton.max_iter >= 1, "newton_max_iter must be at least 1");
    require(paths >= 1, "paths must be at least 1");
    require(workers >= 1, "workers must be at least 1");
    require(eig.tol > 0.0, "eig_tol must be positive");
    require(eig.max_iter >= 1, "eig_max_iter must be at least 1");
    require(eig.block >= 1 && eig.block <= 4, "eig_block must be in 1..4");
    require(!out_dir.empty(), "out_dir must not be empty");
    for (size_t i = 0; i < snapshot_times.size(); ++i) {
        double t = snapshot_times[i];
        require(t >= 0.0 && t <= t_final * (1.0 + 1e-12), "snapshot times must lie in [0, t_final]");
        if (i > 0) require(t >= snapshot_times[i - 1], "snapshot times must be nondecreasing");
    }
    adapt.validate();
    estimators.validate();
}

RunConfig default_config() { return parse_config(""); }

RunConfig parse_config(const std::string& text) {
    RunConfig cfg;

    using Handler = std::function<void(const std::string&, int)>;
    std::map<std::string, Handler> keys;
    auto dbl = [&](const char* name, double& field) {
        keys[name] = [name, &field](const std::string& v, int line) {
            field = parse_double(name, v, line);
        };
    };
    auto num = [&](const char* name, int& field) {
        keys[name] = [name, &field](const std::string& v, int line) {
            field = static_cast<int>(parse_int(name, v, line));
        };
    };
    auto flag = [&](const char* name, bool& field) {
        keys[name] = [name, &field](const std::string& v, int line) {
            field = parse_bool(name, v, line);
        };
    };

    dbl("epsilon", cfg.eps);
    dbl("t_final", cfg.t_final);
    dbl("gamma", cfg.gamma);
    dbl("sigma", cfg.sigma);
    dbl("r1", cfg.r1);
    dbl("r2", cfg.r2);
    num("noise_lmax", cfg.noise_lmax);
    num("noise_truncation", cfg.noise_truncation);
    num("resolution", cfg.resolution);
    num("tilde_resolution", cfg.tilde_resolution);
    dbl("tau_init", cfg.tau_init);
    dbl("tau_min", cfg.stepper.tau_min);
    dbl("tau_max", cfg.stepper.tau_max);
    num("step_grow_below", cfg.stepper.grow_below);
    num("step_shrink_above", cfg.stepper.shrink_above);
    dbl("newton_tol", cfg.newton.tol);
    num("newton_max_iter", cfg.newton.max_iter);
    num("paths", cfg.paths);
    keys["seed"] = [&cfg](const std::string& v, int line) { cfg.seed = parse_u64("seed", v, line); };
    num("workers", cfg.workers);
    flag("adapt_enabled", cfg.adapt_enabled);
    dbl("adapt_tol", cfg.adapt.tol);
    dbl("adapt_theta", cfg.adapt.doerfler_theta);
    dbl("adapt_coarsen_fraction", cfg.adapt.coarsen_fraction);
    num("adapt_max_rounds", cfg.adapt.max_rounds);
    dbl("adapt_h_min", cfg.adapt.h_min);
    dbl("adapt_h_max", cfg.adapt.h_max);
    dbl("eig_tol", cfg.eig.tol);
    num("eig_max_iter", cfg.eig.max_iter);
    num("eig_block", cfg.eig.block);
    dbl("est_clement", cfg.estimators.clement_constant);
    dbl("est_interp", cfg.estimators.interp_constant);
    dbl("est_c_infty", cfg.estimators.c_infty);
    dbl("est_c_h_infty", cfg.estimators.c_h_infty);
    dbl("est_delta", cfg.estimators.delta);
    dbl("est_eps_tilde", cfg.estimators.eps_tilde);
    dbl("est_dimension_a", cfg.estimators.dimension_a);
    dbl("est_generic", cfg.estimators.generic_constant);
    dbl("est_c_p", cfg.estimators.c_p);
    dbl("est_hoelder_a", cfg.estimators.hoelder_a);
    dbl("est_hoelder_p", cfg.estimators.hoelder_p);
    dbl("est_hoelder_q", cfg.estimators.hoelder_q);
    dbl("est_c0", cfg.estimators.c0_moment);
    dbl("est_c0_hat", cfg.estimators.c0_hat_moment);
    keys["snapshots"] = [&cfg](const std::string& v, int line) {
        if (v == "none") {
            cfg.no_snapshots = true;
            cfg.snapshot_times.clear();
        } else {
            cfg.no_snapshots = false;
            cfg.snapshot_times = parse_list("snapshots", v, line);
        }
    };
    flag("write_vtk", cfg.write_vtk);
    keys["out_dir"] = [&cfg](const std::string& v, int line) {
        if (v.empty()) fail(line, "key 'out_dir': empty value");
        cfg.out_dir = v;
    };

    std::istringstream in(text);
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        size_t hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        std::string s = trim(raw);
        if (s.empty()) continue;
        size_t eq = s.find('=');
        if (eq == std::string::npos) fail(line, "expected 'key = value', got '" + s + "'");
        std::string key = trim(s.substr(0, eq));
        std::string value = trim(s.substr(eq + 1));
        if (key.empty()) fail(line, "missing key before '='");
        auto it = keys.find(key);
        if (it == keys.end()) fail(line, "unknown key '" + key + "'");
        it->second(value, line);
    }

    cfg.resolve();
    cfg.validate();
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::string serialize_config(const RunConfig& cfg) {
    std::string out;
    auto put = [&out](const char* key, const std::string& v) {
        out += key;
        out += " = ";
        out += v;
        out += '\n';
    };
    auto putd = [&](const char* key, double v) { put(key, format_double_c(v)); };
    auto puti = [&](const char* key, long long v) { put(key, std::to_string(v)); };
    auto putb = [&](const char* key, bool v) { put(key, v ? "true" : "false"); };

    out += "# equation\n";
    putd("epsilon", cfg.eps);
    putd("t_final", cfg.t_final);
    putd("gamma", cfg.gamma);
    putd("sigma", cfg.sigma);
    putd("r1", cfg.r1);
    putd("r2", cfg.r2);
    out += "# noise\n";
    puti("noise_lmax", cfg.noise_lmax);
    puti("noise_truncation", cfg.noise_truncation);
    out += "# discretization\n";
    puti("resolution", cfg.resolution);
    puti("tilde_resolution", cfg.tilde_resolution);
    putd("tau_init", cfg.tau_init);
    putd("tau_min", cfg.stepper.tau_min);
    putd("tau_max", cfg.stepper.tau_max);
    puti("step_grow_below", cfg.stepper.grow_below);
    puti("step_shrink_above", cfg.stepper.shrink_above);
    putd("newton_tol", cfg.newton.tol);
    puti("newton_max_iter", cfg.newton.max_iter);
    out += "# ensemble\n";
    puti("paths", cfg.paths);
    put("seed", std::to_string(cfg.seed));
    puti("workers", cfg.workers);
    out += "# adaptivity\n";
    putb("adapt_enabled", cfg.adapt_enabled);
    putd("adapt_tol", cfg.adapt.tol);
    putd("adapt_theta", cfg.adapt.doerfler_theta);
    putd("adapt_coarsen_fraction", cfg.adapt.coarsen_fraction);
    puti("adapt_max_rounds", cfg.adapt.max_rounds);
    putd("adapt_h_min", cfg.adapt.h_min);
    putd("adapt_h_max", cfg.adapt.h_max);
    out += "# eigenvalue solve\n";
    putd("eig_tol", cfg.eig.tol);
    puti("eig_max_iter", cfg.eig.max_iter);
    puti("eig_block", cfg.eig.block);
    out += "# estimator constants\n";
    putd("est_clement", cfg.estimators.clement_constant);
    putd("est_interp", cfg.estimators.interp_constant);
    putd("est_c_infty", cfg.estimators.c_infty);
    putd("est_c_h_infty", cfg.estimators.c_h_infty);
    putd("est_delta", cfg.estimators.delta);
    putd("est_eps_tilde", cfg.estimators.eps_tilde);
    putd("est_dimension_a", cfg.estimators.dimension_a);
    putd("est_generic", cfg.estimators.generic_constant);
    putd("est_c_p", cfg.estimators.c_p);
    putd("est_hoelder_a", cfg.estimators.hoelder_a);
    putd("est_hoelder_p", cfg.estimators.hoelder_p);
    putd("est_hoelder_q", cfg.estimators.hoelder_q);
    putd("est_c0", cfg.estimators.c0_moment);
    putd("est_c0_hat", cfg.estimators.c0_hat_moment);
    out += "# outputs\n";
    if (cfg.snapshot_times.empty()) {
        put("snapshots", "none");
    } else {
        std::string list;
        for (size_t i = 0; i < cfg.snapshot_times.size(); ++i) {
            if (i) list += ", ";
            list += format_double_c(cfg.snapshot_times[i]);
        }
        put("snapshots", list);
    }
    putb("write_vtk", cfg.write_vtk);
    put("out_dir", cfg.out_dir);
    return out;
}

} // namespace sch
