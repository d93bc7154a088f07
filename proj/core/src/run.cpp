#include "greenwave/run.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "json.hpp"

#include "greenwave/bundle_io.hpp"

namespace greenwave {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr const char* k_version = "1.0.0";  // keep in sync with the project version

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw std::invalid_argument("config" + (path.empty() ? "" : "." + path) + " " + what);
}

std::string child(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

void check_keys(const ordered_json& j, const std::string& path,
                std::initializer_list<const char*> allowed) {
    if (!j.is_object()) fail(path, "must be an object");
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* k : allowed) known = known || item.key() == k;
        if (!known) fail(child(path, item.key()), "is not a recognized field");
    }
}

double as_number(const ordered_json& j, const std::string& path) {
    if (!j.is_number()) fail(path, "must be a number");
    return j.get<double>();
}

double number_or(const ordered_json& j, const std::string& path, const char* key, double dflt) {
    if (!j.contains(key) || j.at(key).is_null()) return dflt;
    return as_number(j.at(key), child(path, key));
}

long long integer_or(const ordered_json& j, const std::string& path, const char* key,
                     long long dflt) {
    if (!j.contains(key) || j.at(key).is_null()) return dflt;
    const auto& v = j.at(key);
    if (!v.is_number_integer()) fail(child(path, key), "must be an integer");
    return v.get<long long>();
}

std::vector<double> as_number_array(const ordered_json& j, const std::string& path) {
    if (!j.is_array()) fail(path, "must be an array of numbers");
    std::vector<double> out;
    out.reserve(j.size());
    for (std::size_t k = 0; k < j.size(); ++k)
        out.push_back(as_number(j[k], path + "[" + std::to_string(k) + "]"));
    return out;
}

GreenDurationDistribution parse_distribution(const ordered_json& j, const std::string& path) {
    check_keys(j, path, {"times", "probs", "durations", "elapsed_green"});
    bool has_times = j.contains("times") && !j.at("times").is_null();
    bool has_durations = j.contains("durations") && !j.at("durations").is_null();
    if (has_times == has_durations)
        fail(path, "needs exactly one of `times` (from the decision instant) or "
                   "`durations` (total green, with elapsed_green)");
    if (!j.contains("probs")) fail(child(path, "probs"), "is required");

    GreenDurationDistribution dist;
    dist.probs = as_number_array(j.at("probs"), child(path, "probs"));
    if (has_times) {
        if (j.contains("elapsed_green") && !j.at("elapsed_green").is_null())
            fail(child(path, "elapsed_green"), "only applies to the `durations` form");
        dist.times = as_number_array(j.at("times"), child(path, "times"));
    } else {
        dist.times = as_number_array(j.at("durations"), child(path, "durations"));
        dist.elapsed_green = number_or(j, path, "elapsed_green", 0.0);
    }
    return dist;
}

std::string hex_hash(std::uint64_t h) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string format_g(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open output file: " + path);
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    os.flush();
    if (!os) throw std::runtime_error("write failed: " + path);
}

void append_trajectory_rows(std::ostringstream& os, const Trajectory& traj) {
    std::size_t next_mark = 0;
    char buf[256];
    for (std::size_t s = 0; s < traj.samples.size(); ++s) {
        const TraceSample& y = traj.samples[s];
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d,", y.t, y.d, y.v,
                      y.a, std::max(y.a, 0.0), y.a * y.a, traj.branch_id);
        os << buf;
        bool first = true;
        while (next_mark < traj.events.size() && traj.events[next_mark].sample == s) {
            os << (first ? "" : ";") << trace_event_name(traj.events[next_mark].event);
            first = false;
            ++next_mark;
        }
        os << "\n";
    }
}

std::string trace_csv(const std::vector<const Trajectory*>& trajs, std::uint64_t hash) {
    std::ostringstream os;
    os << "# config_hash=" << hex_hash(hash) << "\n";
    os << "t,d,v,a,k1_rate,k2_rate,branch_id,event\n";
    for (const Trajectory* traj : trajs) append_trajectory_rows(os, *traj);
    return os.str();
}

ordered_json costs_to_json(const CostBreakdown& c) {
    return {{"j1", c.j1}, {"j2", c.j2}, {"j3", c.j3}, {"j", c.j}};
}

ordered_json events_to_json(const Trajectory& traj) {
    ordered_json out = ordered_json::array();
    for (const TraceMark& m : traj.events) {
        out.push_back({{"event", trace_event_name(m.event)},
                       {"t", traj.samples[m.sample].t},
                       {"d", traj.samples[m.sample].d}});
    }
    return out;
}

std::string tree_json(const VehicleState& start, const BranchingTrajectory& tree,
                      std::uint64_t hash) {
    ordered_json j;
    j["config_hash"] = hex_hash(hash);
    j["start"] = {{"d", start.d}, {"v", start.v}};
    j["expected_cost"] = tree.expected_cost;
    j["trunks"] = ordered_json::array();
    for (const Trajectory& tr : tree.trunks) {
        j["trunks"].push_back({{"branch_id", tr.branch_id},
                               {"t_first", tr.samples.front().t},
                               {"t_last", tr.samples.back().t},
                               {"events", events_to_json(tr)}});
    }
    j["leaves"] = ordered_json::array();
    for (std::size_t i = 0; i < tree.leaves.size(); ++i) {
        const Trajectory& lf = tree.leaves[i];
        j["leaves"].push_back({{"branch_id", lf.branch_id},
                               {"probability", tree.probabilities[i]},
                               {"reveal_time", lf.samples.front().t},
                               {"costs", costs_to_json(tree.leaf_costs[i])},
                               {"events", events_to_json(lf)}});
    }
    return j.dump(2) + "\n";
}

ordered_json run_config_echo(const RunConfig& cfg) {
    ordered_json j;
    j["solve"] = ordered_json::parse(solve_config_to_canonical_json(cfg.solve));
    j["threads"] = cfg.solve.n_threads;
    j["starts"] = ordered_json::array();
    for (const TraceStart& s : cfg.starts) {
        ordered_json e = {{"d", s.state.d}, {"v", s.state.v}};
        if (s.t0)
            e["t0"] = *s.t0;
        else
            e["t0"] = nullptr;
        j["starts"].push_back(e);
    }
    j["trace_dt"] = cfg.trace_dt;
    j["trace_horizon"] = cfg.trace_horizon;
    if (cfg.pareto) {
        j["pareto"] = {{"ratios", cfg.pareto->ratios},
                       {"budget", cfg.pareto->budget},
                       {"use_pipeline", cfg.pareto->use_pipeline},
                       {"tolerance", cfg.pareto->tol_rel}};
    } else {
        j["pareto"] = nullptr;
    }
    j["out_dir"] = cfg.out_dir;
    j["seed"] = cfg.seed;
    return j;
}

std::string sanitize_note(std::string s) {
    for (char& c : s)
        if (c == ',' || c == '\n') c = ';';
    return s;
}

std::string pareto_csv(const ParetoFront& front, std::uint64_t hash) {
    std::ostringstream os;
    os << "# config_hash=" << hex_hash(hash) << "\n";
    os << "ratio,c1,c2,c3,j1,j2,j3,j,note\n";
    char buf[320];
    for (const ParetoPoint& p : front.points) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,", p.ratio,
                      p.weights.c1, p.weights.c2, p.weights.c3, p.costs.j1, p.costs.j2, p.costs.j3,
                      p.costs.j);
        os << buf << sanitize_note(p.note) << "\n";
    }
    for (const std::string& e : front.errors) os << "# error: " << sanitize_note(e) << "\n";
    return os.str();
}

std::string artifact_path(const std::string& out_dir, const std::string& name) {
    return (std::filesystem::path(out_dir) / name).string();
}

ordered_json do_traces(const RunConfig& cfg, const SolutionBundle& bundle, std::uint64_t hash,
                       RunArtifacts& arts) {
    TraceLimits limits;
    limits.dt_trace = cfg.trace_dt;
    limits.horizon = cfg.trace_horizon;

    ordered_json traces_meta = ordered_json::array();
    for (std::size_t k = 0; k < cfg.starts.size(); ++k) {
        const TraceStart& st = cfg.starts[k];
        std::string csv_name = "trace_" + std::to_string(k) + ".csv";
        ordered_json entry = {{"start", {{"d", st.state.d}, {"v", st.state.v}}}};
        try {
            if (bundle.config.distribution && !st.t0) {
                BranchingTrajectory tree = trace_scenario_tree(st.state, bundle, limits);
                std::vector<const Trajectory*> all;
                for (const Trajectory& tr : tree.trunks) all.push_back(&tr);
                for (const Trajectory& tr : tree.leaves) all.push_back(&tr);
                write_text_file(artifact_path(arts.out_dir, csv_name),
                                trace_csv(all, hash));
                std::string tree_name = "tree_" + std::to_string(k) + ".json";
                write_text_file(artifact_path(arts.out_dir, tree_name),
                                tree_json(st.state, tree, hash));
                arts.files.push_back(csv_name);
                arts.files.push_back(tree_name);
                entry["kind"] = "tree";
                entry["expected_cost"] = tree.expected_cost;
            } else {
                double t0 = st.t0 ? *st.t0 : bundle.snapped.t_yellow;
                Trajectory tr = trace_deterministic(st.state, t0, bundle, limits);
                write_text_file(artifact_path(arts.out_dir, csv_name),
                                trace_csv({&tr}, hash));
                arts.files.push_back(csv_name);
                entry["kind"] = "deterministic";
                entry["t0"] = t0;
                entry["costs"] = costs_to_json(tr.costs);
            }
        } catch (const std::exception& e) {
            throw std::runtime_error("trace of starts[" + std::to_string(k) +
                                     "] failed: " + e.what());
        }
        traces_meta.push_back(std::move(entry));
    }
    return traces_meta;
}

ordered_json do_pareto(const RunConfig& cfg, const SolveConfig& base, std::uint64_t hash,
                       RunArtifacts& arts) {
    try {
        ParetoOptions opt;
        opt.tol_rel = cfg.pareto->tol_rel;
        opt.use_pipeline = cfg.pareto->use_pipeline;
        ParetoFront front =
            pareto_front(cfg.pareto->ratios, cfg.pareto->budget, cfg.starts.at(0).state, base, opt);
        write_text_file(artifact_path(arts.out_dir, "pareto.csv"), pareto_csv(front, hash));
        arts.files.push_back("pareto.csv");
        return ordered_json{{"points", front.points.size()}, {"errors", front.errors.size()}};
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("pareto stage failed: ") + e.what());
    }
}

/// Traces, slices, pareto front, bundle and metadata for a solved bundle.
/// Shared by fresh runs and stage-3 resumes so both produce identical
/// artifact shapes.
RunArtifacts write_run_artifacts(const RunConfig& cfg, SolutionBundle& bundle,
                                 const ordered_json* resume_info, const RunTimings& timings) {
    std::filesystem::create_directories(cfg.out_dir);
    auto path_of = [&](const std::string& name) { return artifact_path(cfg.out_dir, name); };

    bundle.config_hash = config_hash(bundle.config);
    bundle.timings = timings;

    RunArtifacts arts;
    arts.out_dir = cfg.out_dir;

    save_bundle(bundle, path_of("bundle.gwb"));
    arts.files.push_back("bundle.gwb");

    ordered_json traces_meta = do_traces(cfg, bundle, bundle.config_hash, arts);

    if (!bundle.timed.value.empty()) {
        export_value_slice(bundle, bundle.snapped.t_yellow, path_of("slice_yellow.csv"));
        arts.files.push_back("slice_yellow.csv");
        export_value_slice(bundle, bundle.snapped.t_green(), path_of("slice_green.csv"));
        arts.files.push_back("slice_green.csv");
    }
    if (!bundle.segments.empty()) {
        export_value_slice(bundle, 0.0, path_of("slice_decision.csv"));
        arts.files.push_back("slice_decision.csv");
    }

    ordered_json pareto_meta = nullptr;
    if (cfg.pareto) pareto_meta = do_pareto(cfg, bundle.config, bundle.config_hash, arts);

    ordered_json meta;
    meta["version"] = software_version();
    meta["config_hash"] = hex_hash(bundle.config_hash);
    meta["stage12_hash"] = hex_hash(stage12_hash(bundle.config));
    meta["config"] = run_config_echo(cfg);
    {
        ordered_json sn;
        sn["t_yellow"] = bundle.snapped.t_yellow;
        sn["t_red"] = bundle.snapped.t_red();
        sn["t_green"] = bundle.snapped.t_green();
        sn["d_yellow"] = bundle.snapped.d_yellow;
        sn["d_red"] = bundle.snapped.d_red;
        if (bundle.snapped_distribution) {
            sn["distribution"] = {{"times", bundle.snapped_distribution->times},
                                  {"probs", bundle.snapped_distribution->probs}};
        } else {
            sn["distribution"] = nullptr;
        }
        meta["snapped"] = std::move(sn);
    }
    {
        const GridSpec& g = bundle.stationary.grid;
        meta["grid"] = {{"n_d", g.n_d},
                        {"n_v", g.n_v},
                        {"n_t_slab", bundle.timed.value.empty() ? 0 : bundle.timed.grid.n_t},
                        {"delta_d", g.delta_d},
                        {"delta_v", g.delta_v},
                        {"delta_t", g.delta_t}};
    }
    if (resume_info) meta["resumed_from"] = *resume_info;
    meta["traces"] = std::move(traces_meta);
    meta["pareto"] = std::move(pareto_meta);
    arts.files.push_back("metadata.json");
    meta["artifacts"] = arts.files;
    meta["timings_s"] = {{"stationary", timings.stationary_s},
                         {"slab", timings.timed_s},
                         {"chain", timings.chain_s}};
    write_text_file(path_of("metadata.json"), meta.dump(2) + "\n");
    return arts;
}

}  // namespace

void RunConfig::validate() const {
    solve.validate();
    if (trace_dt < 0.0) fail("trace_dt", "must be nonnegative (0 selects delta_t / 4)");
    if (trace_horizon <= 0.0) fail("trace_horizon", "must be positive");
    for (std::size_t k = 0; k < starts.size(); ++k) {
        std::string path = "starts[" + std::to_string(k) + "]";
        const TraceStart& s = starts[k];
        if (s.state.d < solve.params.d_star || s.state.d > solve.params.d_bar)
            fail(path + ".d", "must lie in [d_star, d_bar]");
        if (s.state.v < 0.0 || s.state.v > solve.params.v_bar)
            fail(path + ".v", "must lie in [0, v_bar]");
        if (s.t0 && *s.t0 < 0.0) fail(path + ".t0", "must be nonnegative");
    }
    if (pareto) {
        if (pareto->ratios.empty()) fail("pareto.ratios", "must be a nonempty array");
        if (pareto->budget <= 0.0) fail("pareto.budget", "must be positive");
        if (pareto->tol_rel <= 0.0) fail("pareto.tolerance", "must be positive");
        if (starts.empty()) fail("starts", "must name the start state the pareto front uses");
    }
    if (out_dir.empty()) fail("out_dir", "must be a nonempty path");
}

RunConfig parse_run_config(const std::string& json_text) {
    ordered_json j;
    try {
        j = ordered_json::parse(json_text);
    } catch (const std::exception& e) {
        throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
    }
    check_keys(j, "", {"params", "schedule", "weights", "n_v", "gss_tol", "threads",
                       "distribution", "starts", "trace_dt", "trace_horizon", "pareto", "out_dir",
                       "seed"});

    RunConfig cfg;
    if (j.contains("params")) {
        const auto& p = j.at("params");
        check_keys(p, "params", {"d_star", "d_bar", "d_ell", "v_bar", "alpha", "beta"});
        cfg.solve.params.d_star = number_or(p, "params", "d_star", cfg.solve.params.d_star);
        cfg.solve.params.d_bar = number_or(p, "params", "d_bar", cfg.solve.params.d_bar);
        cfg.solve.params.d_ell = number_or(p, "params", "d_ell", cfg.solve.params.d_ell);
        cfg.solve.params.v_bar = number_or(p, "params", "v_bar", cfg.solve.params.v_bar);
        cfg.solve.params.alpha = number_or(p, "params", "alpha", cfg.solve.params.alpha);
        cfg.solve.params.beta = number_or(p, "params", "beta", cfg.solve.params.beta);
    }
    if (j.contains("schedule")) {
        const auto& s = j.at("schedule");
        check_keys(s, "schedule", {"t_yellow", "d_yellow", "d_red"});
        cfg.solve.schedule.t_yellow =
            number_or(s, "schedule", "t_yellow", cfg.solve.schedule.t_yellow);
        cfg.solve.schedule.d_yellow =
            number_or(s, "schedule", "d_yellow", cfg.solve.schedule.d_yellow);
        cfg.solve.schedule.d_red = number_or(s, "schedule", "d_red", cfg.solve.schedule.d_red);
    }
    if (j.contains("weights")) {
        const auto& w = j.at("weights");
        check_keys(w, "weights", {"c1", "c2", "c3"});
        cfg.solve.weights.c1 = number_or(w, "weights", "c1", cfg.solve.weights.c1);
        cfg.solve.weights.c2 = number_or(w, "weights", "c2", cfg.solve.weights.c2);
        cfg.solve.weights.c3 = number_or(w, "weights", "c3", cfg.solve.weights.c3);
    }
    cfg.solve.n_v = static_cast<int>(integer_or(j, "", "n_v", cfg.solve.n_v));
    cfg.solve.gss_tol = number_or(j, "", "gss_tol", cfg.solve.gss_tol);
    cfg.solve.n_threads = static_cast<int>(integer_or(j, "", "threads", cfg.solve.n_threads));
    if (j.contains("distribution") && !j.at("distribution").is_null())
        cfg.solve.distribution = parse_distribution(j.at("distribution"), "distribution");

    if (j.contains("starts")) {
        if (!j.at("starts").is_array()) fail("starts", "must be an array");
        for (std::size_t k = 0; k < j.at("starts").size(); ++k) {
            const auto& e = j.at("starts")[k];
            std::string path = "starts[" + std::to_string(k) + "]";
            check_keys(e, path, {"d", "v", "t0"});
            if (!e.contains("d") || !e.contains("v")) fail(path, "needs both d and v");
            TraceStart st;
            st.state.d = as_number(e.at("d"), path + ".d");
            st.state.v = as_number(e.at("v"), path + ".v");
            if (e.contains("t0") && !e.at("t0").is_null())
                st.t0 = as_number(e.at("t0"), path + ".t0");
            cfg.starts.push_back(st);
        }
    }
    cfg.trace_dt = number_or(j, "", "trace_dt", cfg.trace_dt);
    cfg.trace_horizon = number_or(j, "", "trace_horizon", cfg.trace_horizon);

    if (j.contains("pareto") && !j.at("pareto").is_null()) {
        const auto& p = j.at("pareto");
        check_keys(p, "pareto", {"ratios", "budget", "use_pipeline", "tolerance"});
        ParetoSettings ps;
        if (!p.contains("ratios")) fail("pareto.ratios", "is required");
        ps.ratios = as_number_array(p.at("ratios"), "pareto.ratios");
        if (!p.contains("budget")) fail("pareto.budget", "is required");
        ps.budget = as_number(p.at("budget"), "pareto.budget");
        if (p.contains("use_pipeline") && !p.at("use_pipeline").is_null()) {
            if (!p.at("use_pipeline").is_boolean()) fail("pareto.use_pipeline", "must be a boolean");
            ps.use_pipeline = p.at("use_pipeline").get<bool>();
        }
        ps.tol_rel = number_or(p, "pareto", "tolerance", ps.tol_rel);
        cfg.pareto = std::move(ps);
    }

    if (j.contains("out_dir")) {
        if (!j.at("out_dir").is_string()) fail("out_dir", "must be a string");
        cfg.out_dir = j.at("out_dir").get<std::string>();
    }
    long long seed = integer_or(j, "", "seed", 0);
    if (seed < 0) fail("seed", "must be nonnegative");
    cfg.seed = static_cast<std::uint64_t>(seed);

    cfg.validate();
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open config file: " + path);
    std::ostringstream buf;
    buf << is.rdbuf();
    return parse_run_config(buf.str());
}

std::string software_version() { return k_version; }

RunArtifacts run_pipeline(const RunConfig& cfg) {
    cfg.validate();
    using clock = std::chrono::steady_clock;
    SolutionBundle b;
    b.config = cfg.solve;
    RunTimings timings;

    auto t0 = clock::now();
    try {
        b.stationary = solve_stationary_green(cfg.solve);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("stage 1 (stationary green) failed: ") + e.what());
    }
    auto t1 = clock::now();
    timings.stationary_s = std::chrono::duration<double>(t1 - t0).count();

    double dt = b.stationary.grid.delta_t;
    if (cfg.solve.distribution)
        b.snapped_distribution = snap_distribution(cfg.solve.distribution->conditioned(), dt);
    b.snapped = anchored_schedule(cfg.solve, dt, b.snapped_distribution);

    // The slab can be skipped only when nothing downstream can touch it:
    // no distribution and every trace pinned at or after the green time.
    bool slab_needed = cfg.solve.distribution.has_value();
    for (const TraceStart& s : cfg.starts)
        slab_needed = slab_needed || !s.t0 || *s.t0 < b.snapped.t_green();
    if (slab_needed) {
        try {
            b.timed = solve_timed_slab(cfg.solve, b.snapped, b.stationary);
        } catch (const std::exception& e) {
            throw std::runtime_error(std::string("stage 2 (signal slab) failed: ") + e.what());
        }
    }
    auto t2 = clock::now();
    timings.timed_s = std::chrono::duration<double>(t2 - t1).count();

    if (cfg.solve.distribution) {
        try {
            b.segments = solve_uncertain_chain(cfg.solve, b.timed);
        } catch (const std::exception& e) {
            throw std::runtime_error(std::string("stage 3 (reveal chain) failed: ") + e.what());
        }
        timings.chain_s = std::chrono::duration<double>(clock::now() - t2).count();
    }

    return write_run_artifacts(cfg, b, nullptr, timings);
}

void export_value_slice(const SolutionBundle& bundle, double t, const std::string& path) {
    const GridSpec* grid = nullptr;
    const double* values = nullptr;
    const float* feedback = nullptr;
    double slice_t = 0.0;

    auto try_field = [&](const TimeDepField& f) {
        if (f.value.empty()) return false;
        double t_end = f.grid.t(f.grid.n_t);
        if (t < f.grid.t_start - 1e-9 || t > t_end + 1e-9) return false;
        long long k = std::llround((t - f.grid.t_start) / f.grid.delta_t);
        k = std::max(0LL, std::min(static_cast<long long>(f.grid.n_t), k));
        grid = &f.grid;
        values = f.slice_value(static_cast<int>(k));
        feedback = f.slice_feedback(static_cast<int>(k));
        slice_t = f.grid.t(static_cast<int>(k));
        return true;
    };

    // Preference at shared instants: the slab wins at its own start (the
    // yellow onset) and end; reveal segments cover everything earlier; the
    // stationary field covers everything at or after the green time.
    if (!try_field(bundle.timed)) {
        bool found = false;
        for (const TimeDepField& seg : bundle.segments) found = found || try_field(seg);
        if (!found) {
            if (t >= bundle.snapped.t_green() - 1e-9 && !bundle.stationary.value.empty()) {
                grid = &bundle.stationary.grid;
                values = bundle.stationary.value.data();
                feedback = bundle.stationary.feedback.data();
                slice_t = t;
            } else {
                throw std::invalid_argument("t=" + format_g(t) +
                                            " lies outside every field in the bundle");
            }
        }
    }

    std::ostringstream os;
    os << "# config_hash=" << hex_hash(bundle.config_hash) << " slice_t=" << format_g(slice_t)
       << "\n";
    write_slice_csv(os, *grid, values, feedback);
    write_text_file(path, os.str());
}

RunArtifacts resume_stage3(const std::string& bundle_path, const RunConfig& cfg) {
    cfg.validate();
    if (!cfg.solve.distribution)
        throw std::invalid_argument("resume needs config.distribution: only the reveal chain "
                                    "is recomputed");

    SolutionBundle base = load_bundle(bundle_path);
    if (stage12_hash(cfg.solve) != stage12_hash(base.config)) {
        std::ostringstream diff;
        auto cmp = [&](const char* name, double a, double b) {
            if (a != b) diff << "  " << name << ": bundle=" << format_g(a)
                             << " config=" << format_g(b) << "\n";
        };
        const SolveConfig& bc = base.config;
        const SolveConfig& nc = cfg.solve;
        cmp("params.d_star", bc.params.d_star, nc.params.d_star);
        cmp("params.d_bar", bc.params.d_bar, nc.params.d_bar);
        cmp("params.d_ell", bc.params.d_ell, nc.params.d_ell);
        cmp("params.v_bar", bc.params.v_bar, nc.params.v_bar);
        cmp("params.alpha", bc.params.alpha, nc.params.alpha);
        cmp("params.beta", bc.params.beta, nc.params.beta);
        cmp("schedule.d_yellow", bc.schedule.d_yellow, nc.schedule.d_yellow);
        cmp("schedule.d_red", bc.schedule.d_red, nc.schedule.d_red);
        cmp("weights.c1", bc.weights.c1, nc.weights.c1);
        cmp("weights.c2", bc.weights.c2, nc.weights.c2);
        cmp("weights.c3", bc.weights.c3, nc.weights.c3);
        cmp("n_v", bc.n_v, nc.n_v);
        cmp("gss_tol", bc.gss_tol, nc.gss_tol);
        throw std::runtime_error("resume refused: the bundle was produced under different "
                                 "stage-1/2 inputs\n" + diff.str());
    }
    if (base.timed.value.empty())
        throw std::runtime_error("resume refused: the bundle lacks the stage-2 slab");

    using clock = std::chrono::steady_clock;
    SolutionBundle b;
    b.config = cfg.solve;
    b.stationary = std::move(base.stationary);
    double dt = b.stationary.grid.delta_t;
    b.snapped_distribution = snap_distribution(cfg.solve.distribution->conditioned(), dt);
    b.snapped = anchored_schedule(cfg.solve, dt, b.snapped_distribution);
    b.timed = std::move(base.timed);
    // Slab values depend only on time-to-red/green, so re-anchoring the
    // saved slab to the new last reveal tick transfers them exactly.
    b.timed.grid.t_start = b.snapped.t_yellow;

    RunTimings timings;
    auto t0 = clock::now();
    try {
        b.segments = solve_uncertain_chain(cfg.solve, b.timed);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("stage 3 (reveal chain) failed: ") + e.what());
    }
    timings.chain_s = std::chrono::duration<double>(clock::now() - t0).count();

    ordered_json resume_info = {{"path", bundle_path},
                                {"config_hash", hex_hash(base.config_hash)}};
    return write_run_artifacts(cfg, b, &resume_info, timings);
}

RunArtifacts write_trace_artifacts(const RunConfig& cfg, const SolutionBundle& bundle) {
    cfg.validate();
    if (cfg.starts.empty()) fail("starts", "must list at least one state to trace");
    std::filesystem::create_directories(cfg.out_dir);
    RunArtifacts arts;
    arts.out_dir = cfg.out_dir;
    std::uint64_t hash = bundle.config_hash ? bundle.config_hash : config_hash(bundle.config);
    do_traces(cfg, bundle, hash, arts);
    return arts;
}

RunArtifacts write_pareto_artifact(const RunConfig& cfg) {
    cfg.validate();
    if (!cfg.pareto) fail("pareto", "settings are required for the pareto command");
    std::filesystem::create_directories(cfg.out_dir);
    RunArtifacts arts;
    arts.out_dir = cfg.out_dir;
    do_pareto(cfg, cfg.solve, config_hash(cfg.solve), arts);
    return arts;
}

}  // namespace greenwave
