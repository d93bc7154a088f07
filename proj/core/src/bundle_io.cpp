#include "greenwave/bundle_io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace greenwave {

static_assert(std::endian::native == std::endian::little,
              "bundle files are little-endian; big-endian hosts are unsupported");
static_assert(sizeof(double) == 8 && sizeof(float) == 4);

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr char k_magic[8] = {'G', 'W', 'B', 'N', 'D', 'L', '1', '\n'};

void put_bytes(std::ostream& os, const void* p, std::size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void get_bytes(std::istream& is, void* p, std::size_t n) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is.gcount()) != n)
        throw std::runtime_error("bundle file is truncated");
}

void put_u64(std::ostream& os, std::uint64_t x) { put_bytes(os, &x, 8); }
void put_i64(std::ostream& os, long long x) { put_bytes(os, &x, 8); }
void put_f64(std::ostream& os, double x) { put_bytes(os, &x, 8); }
void put_u8(std::ostream& os, unsigned char x) { put_bytes(os, &x, 1); }

std::uint64_t get_u64(std::istream& is) {
    std::uint64_t x;
    get_bytes(is, &x, 8);
    return x;
}

long long get_i64(std::istream& is) {
    long long x;
    get_bytes(is, &x, 8);
    return x;
}

double get_f64(std::istream& is) {
    double x;
    get_bytes(is, &x, 8);
    return x;
}

unsigned char get_u8(std::istream& is) {
    unsigned char x;
    get_bytes(is, &x, 1);
    return x;
}

void put_grid(std::ostream& os, const GridSpec& g) {
    put_f64(os, g.params.d_star);
    put_f64(os, g.params.d_bar);
    put_f64(os, g.params.d_ell);
    put_f64(os, g.params.v_bar);
    put_f64(os, g.params.alpha);
    put_f64(os, g.params.beta);
    put_i64(os, g.n_d);
    put_i64(os, g.n_v);
    put_i64(os, g.n_t);
    put_f64(os, g.delta_d);
    put_f64(os, g.delta_v);
    put_f64(os, g.delta_t);
    put_f64(os, g.t_start);
}

GridSpec get_grid(std::istream& is) {
    GridSpec g;
    g.params.d_star = get_f64(is);
    g.params.d_bar = get_f64(is);
    g.params.d_ell = get_f64(is);
    g.params.v_bar = get_f64(is);
    g.params.alpha = get_f64(is);
    g.params.beta = get_f64(is);
    g.n_d = static_cast<int>(get_i64(is));
    g.n_v = static_cast<int>(get_i64(is));
    g.n_t = static_cast<int>(get_i64(is));
    if (g.n_d < 0 || g.n_v < 1 || g.n_t < 0 || g.n_d > (1 << 24) || g.n_v > (1 << 24) ||
        g.n_t > (1 << 24))
        throw std::runtime_error("bundle grid header is corrupt");
    g.delta_d = get_f64(is);
    g.delta_v = get_f64(is);
    g.delta_t = get_f64(is);
    g.t_start = get_f64(is);
    return g;
}

void put_arrays(std::ostream& os, const std::vector<double>& value,
                const std::vector<float>& feedback, std::size_t expected) {
    if (value.size() != expected || feedback.size() != expected)
        throw std::runtime_error("field arrays do not match their grid");
    put_u64(os, expected);
    put_bytes(os, value.data(), expected * sizeof(double));
    put_bytes(os, feedback.data(), expected * sizeof(float));
}

void get_arrays(std::istream& is, std::vector<double>& value, std::vector<float>& feedback,
                std::size_t expected) {
    if (get_u64(is) != expected) throw std::runtime_error("bundle field size mismatch");
    value.resize(expected);
    feedback.resize(expected);
    get_bytes(is, value.data(), expected * sizeof(double));
    get_bytes(is, feedback.data(), expected * sizeof(float));
}

void put_timedep(std::ostream& os, const TimeDepField& f) {
    put_i64(os, static_cast<long long>(f.kind));
    put_i64(os, f.segment);
    put_grid(os, f.grid);
    std::size_t n = static_cast<std::size_t>(f.n_slices()) * f.grid.n_nodes();
    put_arrays(os, f.value, f.feedback, n);
}

TimeDepField get_timedep(std::istream& is) {
    TimeDepField f;
    long long kind = get_i64(is);
    if (kind < 0 || kind > static_cast<long long>(FieldKind::uncertain))
        throw std::runtime_error("bundle field kind is corrupt");
    f.kind = static_cast<FieldKind>(kind);
    f.segment = static_cast<int>(get_i64(is));
    f.grid = get_grid(is);
    std::size_t n = static_cast<std::size_t>(f.n_slices()) * f.grid.n_nodes();
    get_arrays(is, f.value, f.feedback, n);
    return f;
}

ordered_json distribution_to_json(const GreenDurationDistribution& dist) {
    ordered_json j;
    j["times"] = dist.times;
    j["probs"] = dist.probs;
    if (dist.elapsed_green)
        j["elapsed_green"] = *dist.elapsed_green;
    else
        j["elapsed_green"] = nullptr;
    return j;
}

GreenDurationDistribution distribution_from_json(const ordered_json& j) {
    GreenDurationDistribution dist;
    dist.times = j.at("times").get<std::vector<double>>();
    dist.probs = j.at("probs").get<std::vector<double>>();
    if (j.contains("elapsed_green") && !j.at("elapsed_green").is_null())
        dist.elapsed_green = j.at("elapsed_green").get<double>();
    return dist;
}

ordered_json stage12_to_json(const SolveConfig& cfg) {
    ordered_json j;
    j["params"] = {{"d_star", cfg.params.d_star}, {"d_bar", cfg.params.d_bar},
                   {"d_ell", cfg.params.d_ell},   {"v_bar", cfg.params.v_bar},
                   {"alpha", cfg.params.alpha},   {"beta", cfg.params.beta}};
    j["durations"] = {{"d_yellow", cfg.schedule.d_yellow}, {"d_red", cfg.schedule.d_red}};
    j["weights"] = {{"c1", cfg.weights.c1}, {"c2", cfg.weights.c2}, {"c3", cfg.weights.c3}};
    j["n_v"] = cfg.n_v;
    j["gss_tol"] = cfg.gss_tol;
    return j;
}

}  // namespace

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string solve_config_to_canonical_json(const SolveConfig& cfg) {
    ordered_json j = stage12_to_json(cfg);
    j["t_yellow"] = cfg.schedule.t_yellow;
    if (cfg.distribution)
        j["distribution"] = distribution_to_json(*cfg.distribution);
    else
        j["distribution"] = nullptr;
    return j.dump();
}

SolveConfig solve_config_from_json_text(const std::string& text) {
    ordered_json j = ordered_json::parse(text);
    SolveConfig cfg;
    const auto& p = j.at("params");
    cfg.params.d_star = p.at("d_star").get<double>();
    cfg.params.d_bar = p.at("d_bar").get<double>();
    cfg.params.d_ell = p.at("d_ell").get<double>();
    cfg.params.v_bar = p.at("v_bar").get<double>();
    cfg.params.alpha = p.at("alpha").get<double>();
    cfg.params.beta = p.at("beta").get<double>();
    cfg.schedule.d_yellow = j.at("durations").at("d_yellow").get<double>();
    cfg.schedule.d_red = j.at("durations").at("d_red").get<double>();
    cfg.schedule.t_yellow = j.at("t_yellow").get<double>();
    cfg.weights.c1 = j.at("weights").at("c1").get<double>();
    cfg.weights.c2 = j.at("weights").at("c2").get<double>();
    cfg.weights.c3 = j.at("weights").at("c3").get<double>();
    cfg.n_v = j.at("n_v").get<int>();
    cfg.gss_tol = j.at("gss_tol").get<double>();
    if (j.contains("distribution") && !j.at("distribution").is_null())
        cfg.distribution = distribution_from_json(j.at("distribution"));
    return cfg;
}

std::uint64_t config_hash(const SolveConfig& cfg) {
    return fnv1a64(solve_config_to_canonical_json(cfg));
}

std::uint64_t stage12_hash(const SolveConfig& cfg) { return fnv1a64(stage12_to_json(cfg).dump()); }

void save_bundle(const SolutionBundle& bundle, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open bundle file for writing: " + path);

    std::string json_text = solve_config_to_canonical_json(bundle.config);
    put_bytes(os, k_magic, sizeof(k_magic));
    put_u64(os, fnv1a64(json_text));
    put_u64(os, stage12_hash(bundle.config));
    put_u64(os, json_text.size());
    put_bytes(os, json_text.data(), json_text.size());

    put_f64(os, bundle.snapped.t_yellow);
    put_f64(os, bundle.snapped.d_yellow);
    put_f64(os, bundle.snapped.d_red);

    put_u8(os, bundle.snapped_distribution ? 1 : 0);
    if (bundle.snapped_distribution) {
        const auto& dist = *bundle.snapped_distribution;
        put_u64(os, dist.times.size());
        put_bytes(os, dist.times.data(), dist.times.size() * sizeof(double));
        put_bytes(os, dist.probs.data(), dist.probs.size() * sizeof(double));
    }

    put_grid(os, bundle.stationary.grid);
    put_arrays(os, bundle.stationary.value, bundle.stationary.feedback,
               static_cast<std::size_t>(bundle.stationary.grid.n_nodes()));

    put_u8(os, bundle.timed.value.empty() ? 0 : 1);
    if (!bundle.timed.value.empty()) put_timedep(os, bundle.timed);

    put_u64(os, bundle.segments.size());
    for (const TimeDepField& seg : bundle.segments) put_timedep(os, seg);

    os.flush();
    if (!os) throw std::runtime_error("write to bundle file failed: " + path);
}

SolutionBundle load_bundle(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open bundle file: " + path);

    char magic[8];
    get_bytes(is, magic, sizeof(magic));
    if (std::memcmp(magic, k_magic, sizeof(magic)) != 0)
        throw std::runtime_error("not a solution bundle: " + path);

    SolutionBundle bundle;
    std::uint64_t stored_hash = get_u64(is);
    std::uint64_t stored_stage12 = get_u64(is);
    std::uint64_t json_len = get_u64(is);
    if (json_len > (1ULL << 20)) throw std::runtime_error("bundle config block is corrupt");
    std::string json_text(json_len, '\0');
    get_bytes(is, json_text.data(), json_len);
    if (fnv1a64(json_text) != stored_hash)
        throw std::runtime_error("bundle config hash mismatch; file is corrupt");
    bundle.config = solve_config_from_json_text(json_text);
    if (stage12_hash(bundle.config) != stored_stage12)
        throw std::runtime_error("bundle stage hash mismatch; file is corrupt");
    bundle.config_hash = stored_hash;

    bundle.snapped.t_yellow = get_f64(is);
    bundle.snapped.d_yellow = get_f64(is);
    bundle.snapped.d_red = get_f64(is);

    if (get_u8(is)) {
        GreenDurationDistribution dist;
        std::uint64_t n = get_u64(is);
        if (n == 0 || n > (1ULL << 20)) throw std::runtime_error("bundle distribution is corrupt");
        dist.times.resize(n);
        dist.probs.resize(n);
        get_bytes(is, dist.times.data(), n * sizeof(double));
        get_bytes(is, dist.probs.data(), n * sizeof(double));
        bundle.snapped_distribution = std::move(dist);
    }

    bundle.stationary.grid = get_grid(is);
    get_arrays(is, bundle.stationary.value, bundle.stationary.feedback,
               static_cast<std::size_t>(bundle.stationary.grid.n_nodes()));

    if (get_u8(is)) bundle.timed = get_timedep(is);

    std::uint64_t n_seg = get_u64(is);
    if (n_seg > (1ULL << 16)) throw std::runtime_error("bundle segment count is corrupt");
    bundle.segments.reserve(n_seg);
    for (std::uint64_t k = 0; k < n_seg; ++k) bundle.segments.push_back(get_timedep(is));

    return bundle;
}

void write_slice_csv(std::ostream& os, const GridSpec& g, const double* values,
                     const float* feedback) {
    os << "d,v,value,feedback\n";
    char line[128];
    for (int j = 0; j <= g.n_v; ++j) {
        for (int i = 0; i <= g.n_d; ++i) {
            int idx = g.index(i, j);
            int n;
            if (is_infeasible(values[idx])) {
                n = std::snprintf(line, sizeof(line), "%.17g,%.17g,INF,%.9g\n", g.d(i), g.v(j),
                                  static_cast<double>(feedback[idx]));
            } else {
                n = std::snprintf(line, sizeof(line), "%.17g,%.17g,%.17g,%.9g\n", g.d(i), g.v(j),
                                  values[idx], static_cast<double>(feedback[idx]));
            }
            os.write(line, n);
        }
    }
}

}  // namespace greenwave
