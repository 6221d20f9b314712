#include "robust_lt/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "robust_lt/errors.hpp"

namespace robust_lt {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
    throw Error(ErrorKind::Config, where + ": " + what);
}

void require_object(const json& j, const std::string& where) {
    if (!j.is_object()) fail(where, "expected an object");
}

void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
    require_object(j, where);
    for (const auto& [key, value] : j.items()) {
        if (!allowed.count(key)) fail(where, "unknown key '" + key + "'");
    }
}

const json& need(const json& j, const std::string& where, const std::string& key) {
    if (!j.contains(key)) fail(where, "missing key '" + key + "'");
    return j.at(key);
}

double number(const json& j, const std::string& where) {
    if (!j.is_number()) fail(where, "expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) fail(where, "expected a finite number");
    return v;
}

double positive(const json& j, const std::string& where) {
    const double v = number(j, where);
    if (!(v > 0.0)) fail(where, "must be positive");
    return v;
}

long integer(const json& j, const std::string& where) {
    if (!j.is_number_integer()) fail(where, "expected an integer");
    return j.get<long>();
}

Vec3 vec3(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 3) fail(where, "expected three numbers");
    return {number(j[0], where), number(j[1], where), number(j[2], where)};
}

// Optional numeric override of a default.
template <typename T>
void maybe(const json& j, const std::string& where, const std::string& key, T& out) {
    if (!j.contains(key)) return;
    if constexpr (std::is_integral_v<T>) {
        out = static_cast<T>(integer(j.at(key), where + "." + key));
    } else {
        out = number(j.at(key), where + "." + key);
    }
}

DynamicsParams parse_dynamics(const json& j) {
    const std::string w = "dynamics";
    check_keys(j, w, {"mu", "length_unit_km", "time_unit_s", "mass_unit_kg", "max_thrust_n", "isp_s"});
    try {
        return DynamicsParams::from_physical(
            number(need(j, w, "mu"), w + ".mu"), positive(need(j, w, "length_unit_km"), w + ".length_unit_km"),
            positive(need(j, w, "time_unit_s"), w + ".time_unit_s"),
            positive(need(j, w, "mass_unit_kg"), w + ".mass_unit_kg"),
            positive(need(j, w, "max_thrust_n"), w + ".max_thrust_n"), positive(need(j, w, "isp_s"), w + ".isp_s"));
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Config) throw;
        fail(w, e.what());
    }
}

SpacecraftState parse_departure(const json& j, const DynamicsParams& p) {
    const std::string w = "departure";
    check_keys(j, w, {"state", "circular_orbit"});
    if (j.contains("state") == j.contains("circular_orbit")) {
        fail(w, "give exactly one of 'state' and 'circular_orbit'");
    }
    SpacecraftState s;
    if (j.contains("state")) {
        const json& st = j.at("state");
        const std::string ws = w + ".state";
        check_keys(st, ws, {"position_km", "velocity_km_s", "mass_kg"});
        s.r = vec3(need(st, ws, "position_km"), ws + ".position_km") / p.length_unit;
        s.v = vec3(need(st, ws, "velocity_km_s"), ws + ".velocity_km_s") / p.velocity_unit();
        s.m = positive(need(st, ws, "mass_kg"), ws + ".mass_kg") / p.mass_unit;
        return s;
    }
    const json& c = j.at("circular_orbit");
    const std::string wc = w + ".circular_orbit";
    check_keys(c, wc, {"primary", "radius_km", "mass_kg"});
    const json& primary = need(c, wc, "primary");
    if (!primary.is_string()) fail(wc + ".primary", "expected \"earth\" or \"moon\"");
    const std::string name = primary.get<std::string>();
    double centre = 0.0, gm = 0.0;
    if (name == "earth") {
        centre = -p.mu;
        gm = 1.0 - p.mu;
    } else if (name == "moon") {
        centre = 1.0 - p.mu;
        gm = p.mu;
    } else {
        fail(wc + ".primary", "expected \"earth\" or \"moon\"");
    }
    const double radius = positive(need(c, wc, "radius_km"), wc + ".radius_km") / p.length_unit;
    // Prograde circular orbit seen from the rotating frame.
    s.r = Vec3(centre + radius, 0.0, 0.0);
    s.v = Vec3(0.0, std::sqrt(gm / radius) - radius, 0.0);
    s.m = positive(need(c, wc, "mass_kg"), wc + ".mass_kg") / p.mass_unit;
    return s;
}

SolverConfig parse_solver(const json& j) {
    const std::string w = "solver";
    check_keys(j, w,
               {"max_iterations", "max_wall_time_s", "optimality_tolerance", "initial_penalty",
                "penalty_growth", "max_penalty", "multiplier_update_ratio", "max_inner_iterations",
                "stall_iterations", "feasible_stall_iterations", "stall_reduction",
                "feasible_stall_reduction", "feasibility_target"});
    SolverConfig s;
    maybe(j, w, "max_iterations", s.max_iterations);
    maybe(j, w, "max_wall_time_s", s.max_wall_time);
    maybe(j, w, "optimality_tolerance", s.optimality_tolerance);
    maybe(j, w, "initial_penalty", s.initial_penalty);
    maybe(j, w, "penalty_growth", s.penalty_growth);
    maybe(j, w, "max_penalty", s.max_penalty);
    maybe(j, w, "multiplier_update_ratio", s.multiplier_update_ratio);
    maybe(j, w, "max_inner_iterations", s.max_inner_iterations);
    maybe(j, w, "stall_iterations", s.stall_iterations);
    maybe(j, w, "feasible_stall_iterations", s.feasible_stall_iterations);
    maybe(j, w, "stall_reduction", s.stall_reduction);
    maybe(j, w, "feasible_stall_reduction", s.feasible_stall_reduction);
    maybe(j, w, "feasibility_target", s.feasibility_target);
    try {
        s.validate();
    } catch (const Error& e) {
        fail(w, e.what());
    }
    return s;
}

std::filesystem::path resolve(const std::filesystem::path& p, const std::filesystem::path& base) {
    return p.is_absolute() ? p : base / p;
}

std::string path_string(const json& j, const std::string& where) {
    if (!j.is_string() || j.get<std::string>().empty()) fail(where, "expected a non-empty path");
    return j.get<std::string>();
}

}  // namespace

RobustTranscription RunConfig::problem(const MteScenario& scenario) const {
    return RobustTranscription(dynamics, boundary, reference, scenario, tolerances, integration_tolerance);
}

std::vector<MteScenario> RunConfig::scenarios_at_depth(int k) const {
    if (k == 0) return {MteScenario{}};
    std::vector<MteScenario> out;
    for (const MteScenario& s : scenarios) {
        if (s.depth() == k) out.push_back(s);
    }
    return out;
}

RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Config, std::string("malformed JSON: ") + e.what());
    }
    check_keys(root, "config",
               {"dynamics", "departure", "target_orbit_file", "transcription", "tolerances", "scenarios",
                "solver", "search", "output"});

    RunConfig c;
    c.dynamics = parse_dynamics(need(root, "config", "dynamics"));
    const DynamicsParams& p = c.dynamics;
    c.boundary.departure = parse_departure(need(root, "config", "departure"), p);

    c.target_orbit_file =
        resolve(path_string(need(root, "config", "target_orbit_file"), "target_orbit_file"), base_dir);
    try {
        c.boundary.target = std::make_shared<const PeriodicOrbit>(PeriodicOrbit::load(c.target_orbit_file));
    } catch (const std::exception& e) {
        fail("target_orbit_file", e.what());
    }

    {
        const json& t = need(root, "config", "transcription");
        const std::string w = "transcription";
        check_keys(t, w,
                   {"segments", "shooting_time_max_days", "initial_coast_max_days", "final_coast_max_days",
                    "final_mass_max_kg", "integration_tolerance"});
        const long n = integer(need(t, w, "segments"), w + ".segments");
        if (n < 2 || n > 10000) fail(w + ".segments", "must lie in [2, 10000]");
        c.reference.n_segments = static_cast<int>(n);
        c.reference.t_s_max = p.days_to_tu(positive(need(t, w, "shooting_time_max_days"), w + ".shooting_time_max_days"));
        c.reference.t_i_max = p.days_to_tu(positive(need(t, w, "initial_coast_max_days"), w + ".initial_coast_max_days"));
        c.reference.t_f_max = p.days_to_tu(positive(need(t, w, "final_coast_max_days"), w + ".final_coast_max_days"));
        c.reference.m_f_max = positive(need(t, w, "final_mass_max_kg"), w + ".final_mass_max_kg") / p.mass_unit;
        if (t.contains("integration_tolerance")) {
            c.integration_tolerance = positive(t.at("integration_tolerance"), w + ".integration_tolerance");
        }
    }

    {
        const json& t = need(root, "config", "tolerances");
        const std::string w = "tolerances";
        check_keys(t, w, {"position_km", "velocity_km_s", "mass_kg"});
        c.tolerances = FeasibilityTolerances::from_physical(
            positive(need(t, w, "position_km"), w + ".position_km"),
            positive(need(t, w, "velocity_km_s"), w + ".velocity_km_s"),
            positive(need(t, w, "mass_kg"), w + ".mass_kg"), p);
    }

    if (root.contains("scenarios")) {
        const json& list = root.at("scenarios");
        if (!list.is_array()) fail("scenarios", "expected an array");
        for (std::size_t i = 0; i < list.size(); ++i) {
            const std::string w = "scenarios[" + std::to_string(i) + "]";
            const json& s = list[i];
            check_keys(s, w, {"start_indices", "outage_days", "outage_tu"});
            if (s.contains("outage_days") == s.contains("outage_tu")) {
                fail(w, "give exactly one of 'outage_days' and 'outage_tu'");
            }
            MteScenario sc;
            const json& starts = need(s, w, "start_indices");
            if (!starts.is_array() || starts.empty()) fail(w + ".start_indices", "expected a non-empty array");
            for (const json& n : starts) sc.start_indices.push_back(static_cast<int>(integer(n, w + ".start_indices")));
            sc.delta_tau = s.contains("outage_tu") ? positive(s.at("outage_tu"), w + ".outage_tu")
                                                   : p.days_to_tu(positive(s.at("outage_days"), w + ".outage_days"));
            try {
                require_valid(sc, c.reference.n_segments);
            } catch (const Error& e) {
                fail(w, e.what());
            }
            c.scenarios.push_back(std::move(sc));
        }
    }

    c.search.solver = root.contains("solver") ? parse_solver(root.at("solver")) : SolverConfig{};

    if (root.contains("search")) {
        const json& s = root.at("search");
        const std::string w = "search";
        check_keys(s, w, {"seeds", "master_seed", "workers", "mbh_hops", "mbh_hop_fraction"});
        maybe(s, w, "seeds", c.search.n_seeds);
        if (s.contains("master_seed")) {
            if (!s.at("master_seed").is_number_unsigned() && !(s.at("master_seed").is_number_integer() &&
                                                              s.at("master_seed").get<long long>() >= 0)) {
                fail(w + ".master_seed", "expected a non-negative integer");
            }
            c.search.master_seed = s.at("master_seed").get<std::uint64_t>();
        }
        maybe(s, w, "workers", c.search.workers);
        maybe(s, w, "mbh_hops", c.search.mbh.hops);
        maybe(s, w, "mbh_hop_fraction", c.search.mbh.hop_fraction);
        if (c.search.n_seeds < 0) fail(w + ".seeds", "must be non-negative");
        if (c.search.workers < 1) fail(w + ".workers", "must be at least 1");
        if (c.search.mbh.hops < 0) fail(w + ".mbh_hops", "must be non-negative");
        if (!(c.search.mbh.hop_fraction > 0.0 && c.search.mbh.hop_fraction <= 1.0)) {
            fail(w + ".mbh_hop_fraction", "must lie in (0, 1]");
        }
    }

    c.output_directory = base_dir;
    c.archive = base_dir / "archive.jsonl";
    if (root.contains("output")) {
        const json& o = root.at("output");
        check_keys(o, "output", {"archive", "directory"});
        if (o.contains("directory")) c.output_directory = resolve(path_string(o.at("directory"), "output.directory"), base_dir);
        if (o.contains("archive")) c.archive = resolve(path_string(o.at("archive"), "output.archive"), base_dir);
    }
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Config, "cannot read config " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    RunConfig c = parse_config(text.str(), path.has_parent_path() ? path.parent_path() : std::filesystem::path("."));
    c.file = path;
    return c;
}

}  // namespace robust_lt
