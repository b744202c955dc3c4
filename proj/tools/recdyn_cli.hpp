#ifndef RECDYN_TOOLS_CLI_HPP
#define RECDYN_TOOLS_CLI_HPP

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "recdyn/error.hpp"
#include "recdyn/expanding.hpp"
#include "recdyn/funcgraph.hpp"
#include "recdyn/grid.hpp"
#include "recdyn/lindisc.hpp"
#include "recdyn/localglobal.hpp"
#include "recdyn/modelset.hpp"
#include "recdyn/parallel.hpp"
#include "recdyn/rng.hpp"
#include "recdyn/smooth_map.hpp"

namespace recdyn::cli {

inline constexpr const char* kVersion = "0.1.0";

// Calibrated decay gates for tau-decay; see README.
inline constexpr double kDecayGateK10 = 0.55;
inline constexpr double kDecayGateK25 = 0.35;

namespace fs = std::filesystem;
using json = nlohmann::json;

inline std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline std::string fmt(std::uint64_t v) { return std::to_string(v); }

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline double parse_double(const std::string& s, const std::string& what) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw ValidationError("bad number '" + s + "' in " + what);
    }
    if (used != s.size()) throw ValidationError("bad number '" + s + "' in " + what);
    return v;
}

inline std::uint64_t parse_uint(const std::string& s, const std::string& what) {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
        throw ValidationError("bad integer '" + s + "' in " + what);
    try {
        return std::stoull(s);
    } catch (const std::exception&) {
        throw ValidationError("integer out of range '" + s + "' in " + what);
    }
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) out.push_back(cur);
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

/// Inclusive range start:step:stop, or a single order.
inline std::vector<std::uint64_t> parse_orders(const std::string& spec) {
    auto parts = split(spec, ':');
    std::vector<std::uint64_t> out;
    if (parts.size() == 1) {
        out.push_back(parse_uint(parts[0], "--orders"));
    } else if (parts.size() == 3) {
        auto start = parse_uint(parts[0], "--orders"), step = parse_uint(parts[1], "--orders"),
             stop = parse_uint(parts[2], "--orders");
        if (step == 0) throw ValidationError("--orders: step must be positive");
        if (stop < start) throw ValidationError("--orders: stop must be >= start");
        for (std::uint64_t n = start; n <= stop; n += step) out.push_back(n);
    } else {
        throw ValidationError("--orders: expected start:step:stop");
    }
    for (auto n : out)
        if (n == 0) throw ValidationError("--orders: orders must be positive");
    return out;
}

inline std::string strip_builtin(const std::string& spec) {
    const std::string prefix = "builtin:";
    if (spec.rfind(prefix, 0) != 0) throw ValidationError("map '" + spec + "': only builtin:<name> maps are supported");
    return spec.substr(prefix.size());
}

inline std::vector<double> parse_list(const std::string& s, const std::string& what) {
    std::vector<double> out;
    for (const auto& p : split(s, ',')) out.push_back(parse_double(p, what));
    return out;
}

inline bool is_expanding_name(const std::string& name) {
    return name == "paper-expanding" || name == "doubling" || name.rfind("times:", 0) == 0;
}

inline ExpandingCircleMap expanding_map(const std::string& spec) {
    auto name = strip_builtin(spec);
    if (name == "paper-expanding") return maps::paper_expanding();
    if (name == "doubling") return maps::doubling();
    if (name.rfind("times:", 0) == 0) {
        auto d = parse_uint(name.substr(6), spec);
        if (d < 2 || d > 64) throw ValidationError("times:d needs 2 <= d <= 64");
        return maps::times(static_cast<int>(d));
    }
    throw ValidationError("unknown expanding map '" + spec +
                          "' (builtin:paper-expanding, builtin:doubling, builtin:times:<d>)");
}

/// Builtin torus maps. dim applies to maps without an intrinsic dimension.
inline SmoothMap smooth_map(const std::string& spec, int dim) {
    auto name = strip_builtin(spec);
    auto parts = split(name, ':');
    const auto& head = parts[0];
    auto need = [&](std::size_t n) {
        if (parts.size() != n + 1) throw ValidationError("map '" + spec + "': wrong number of parameters");
    };
    if (head == "paper-diffeo") return need(0), maps::paper_diffeo();
    if (head == "cat") return need(0), maps::cat();
    if (head == "identity") return need(0), maps::identity(dim);
    if (head == "shear") {
        need(2);
        return maps::sine_shears(parse_double(parts[1], spec), parse_double(parts[2], spec));
    }
    if (head == "dissipative-diffeo") {
        need(1);
        return maps::dissipative_diffeo(parse_double(parts[1], spec));
    }
    if (head == "translation") {
        need(1);
        return maps::translation(parse_list(parts[1], spec));
    }
    if (head == "linear") {
        need(1);
        auto v = parse_list(parts[1], spec);
        int n = 1;
        while (n * n < static_cast<int>(v.size())) ++n;
        if (n * n != static_cast<int>(v.size())) throw ValidationError("linear map needs n*n entries");
        Eigen::MatrixXd a(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) a(i, j) = v[static_cast<std::size_t>(i * n + j)];
        return maps::linear(a);
    }
    if (is_expanding_name(name)) return expanding_map(spec).as_smooth_map();
    throw ValidationError("unknown map '" + spec + "'");
}

/// CSV table with the manifest hash and a units line ahead of the column names.
struct Table {
    std::string units;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    std::string render(const std::string& hash, const std::string& subcommand) const {
        std::ostringstream os;
        os << "# manifest " << hash << " recdyn " << kVersion << ' ' << subcommand << '\n';
        os << "# units: " << units << '\n';
        for (std::size_t i = 0; i < columns.size(); ++i) os << (i ? "," : "") << columns[i];
        os << '\n';
        for (const auto& r : rows) {
            for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
            os << '\n';
        }
        return os.str();
    }
};

/// Run record: flags and derived settings are hashed; wall time and output
/// paths are not, so identical runs yield byte-identical CSVs.
class Run {
public:
    Run(std::string subcommand, const CLI::App& sub) : subcommand_(std::move(subcommand)) {
        for (const CLI::Option* opt : sub.get_options()) {
            if (opt == sub.get_help_ptr()) continue;
            std::string name = opt->get_name(false, true);
            std::string value;
            if (opt->count() > 0) {
                for (const auto& r : opt->results()) value += (value.empty() ? "" : " ") + r;
            } else {
                value = opt->get_default_str();
            }
            (volatile_flags().count(name) ? io_flags_ : flags_)[name] = value;
        }
    }

    json& settings() { return settings_; }
    void add_output(const std::string& path) { outputs_.push_back(path); }

    std::string hash() const {
        json h = {{"tool", "recdyn"}, {"version", kVersion}, {"subcommand", subcommand_}, {"flags", flags_},
                  {"settings", settings_}};
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(h.dump())));
        return buf;
    }

    /// Writes the CSV (stdout for "-") and, for files, a sibling manifest.
    void emit(const Table& table, const std::string& out, std::ostream& stdout_stream) {
        std::string text = table.render(hash(), subcommand_);
        if (out.empty() || out == "-") {
            stdout_stream << text;
            return;
        }
        write_file(out, text);
        add_output(out);
        json m = {{"tool", "recdyn"},
                  {"version", kVersion},
                  {"subcommand", subcommand_},
                  {"hash", hash()},
                  {"flags", flags_},
                  {"io_flags", io_flags_},
                  {"settings", settings_},
                  {"rng", Rng::kName},
                  {"threads", max_threads()},
                  {"wall_time_s", elapsed()},
                  {"outputs", outputs_}};
        write_file(out + ".manifest.json", m.dump(2) + "\n");
    }

    static void write_file(const std::string& path, const std::string& text) {
        fs::path p(path);
        if (p.has_parent_path()) fs::create_directories(p.parent_path());
        std::ofstream os(path, std::ios::binary);
        if (!os) throw ValidationError("cannot open " + path + " for writing");
        os << text;
        if (!os) throw ValidationError("write failed: " + path);
    }

private:
    static const std::map<std::string, int>& volatile_flags() {
        static const std::map<std::string, int> v{{"--out", 0}, {"--threads", 0}, {"--dump", 0}};
        return v;
    }
    double elapsed() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

    std::string subcommand_;
    json flags_ = json::object(), io_flags_ = json::object(), settings_ = json::object();
    std::vector<std::string> outputs_;
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

struct Options {
    // shared
    std::string out = "-";
    std::string map;
    int dim = 0;
    std::uint64_t seed = 0;
    std::size_t k = 0;
    // grid-dor / expanding-dor
    std::string orders;
    unsigned t_max = 8;
    std::string dump;
    // linear-image / mean-rate / tau-decay
    std::string sampler = "svd";
    std::uint64_t index = 0;
    double radius = 200.0;
    std::string matrices;
    bool identity = false;
    bool alt = false;
    std::uint64_t seq_seed = 0;
    std::uint64_t samples = 0;
    std::size_t k_max = 30;
    std::uint64_t seqs = 20;
    // local-global
    std::uint64_t mc = 200000;
    std::uint64_t grid = 0;
    // local-global-expanding / transfer-check
    std::uint64_t n = 32768;
    std::size_t quad = 256;
    std::vector<std::size_t> m_list{2, 4, 6};
    std::vector<double> y_list{0.1, 0.25, 0.7};
    std::uint64_t trials = 100000;
};

inline Table recurrence_table(const SmoothMap& f, const std::vector<std::uint64_t>& orders, unsigned t_max,
                              const std::string& dump) {
    if (t_max < 1 || t_max > 64) throw ValidationError("--t-max must be in 1..64");
    Table t;
    t.units = "N grid points per axis; points and recurrent are counts; D and tau_t are fractions of the grid; "
              "stabilization_t in iterations";
    t.columns = {"N", "points", "recurrent", "D", "stabilization_t", "cycles"};
    for (unsigned s = 1; s <= t_max; ++s) t.columns.push_back("tau_" + std::to_string(s));
    for (auto n : orders) {
        GridSpec spec(f.dim(), n);
        spec.validate();
        FiniteMap fm = discretize(f, spec);
        if (!dump.empty()) {
            fs::create_directories(dump);
            write_dump(fm, (fs::path(dump) / (f.name() + "_N" + std::to_string(n) + ".rdfm")).string());
        }
        auto r = analyze(fm, t_max);
        std::vector<std::string> row{fmt(n), fmt(r.card_E), fmt(r.card_recurrent), fmt(r.degree),
                                     fmt(static_cast<std::uint64_t>(r.stabilization_time)), fmt(r.cycle_count)};
        for (double v : r.tau_by_t) row.push_back(fmt(v));
        t.rows.push_back(std::move(row));
    }
    return t;
}

inline MatrixSeq matrix_source(const Options& o, Run& run, std::size_t fallback_k) {
    int sources = (!o.matrices.empty()) + (o.identity ? 1 : 0);
    if (sources > 1) throw ValidationError("use only one of --matrices and --identity");
    if (!o.matrices.empty()) {
        run.settings()["matrix_source"] = "file";
        auto seq = MatrixSeq::from_csv(o.matrices);
        if (o.k > 0) {
            if (o.k > seq.length()) throw ValidationError("--k exceeds the number of matrices in the file");
            return seq.prefix(o.k);
        }
        return seq;
    }
    std::size_t k = o.k > 0 ? o.k : fallback_k;
    if (k == 0) throw ValidationError("--k is required");
    if (o.identity) {
        run.settings()["matrix_source"] = "identity";
        return MatrixSeq::identity(o.dim > 0 ? o.dim : 2, k);
    }
    if (o.sampler != "svd") throw ValidationError("unknown sampler '" + o.sampler + "' (only svd)");
    if (o.dim != 0 && o.dim != 2) throw ValidationError("the svd sampler draws SL_2 matrices; use --dim 2");
    run.settings()["matrix_source"] = "sampler";
    run.settings()["sampler"] = kSvdSamplerName;
    return random_sl2_sequence(k, o.seq_seed, o.index);
}

inline int dispatch(const std::string& name, const CLI::App& sub, const Options& o, std::ostream& out) {
    Run run(name, sub);
    if (name == "grid-dor" || name == "expanding-dor") {
        std::string spec = o.map.empty() ? (name == "grid-dor" ? "builtin:paper-diffeo" : "builtin:paper-expanding")
                                         : o.map;
        SmoothMap f = name == "grid-dor" ? smooth_map(spec, o.dim > 0 ? o.dim : 2) : [&] {
            ExpandingCircleMap::require_circle(o.dim > 0 ? o.dim : 1);
            return expanding_map(spec).as_smooth_map();
        }();
        if (name == "grid-dor" && o.dim > 0 && o.dim != f.dim())
            throw ValidationError("--dim does not match the map dimension");
        run.settings()["map_dim"] = f.dim();
        run.settings()["projection"] = "k-1/2 < Nx <= k+1/2, row-major indices 0..N-1";
        auto table = recurrence_table(f, parse_orders(o.orders), o.t_max, o.dump);
        if (!o.dump.empty()) run.add_output(o.dump);
        run.emit(table, o.out, out);
        return 0;
    }
    if (name == "linear-image") {
        if (o.out.empty() || o.out == "-") throw ValidationError("linear-image needs --out <directory>");
        MatrixSeq seq = matrix_source(o, run, 0);
        if (seq.dim() > 2) throw ValidationError("linear-image renders only dimensions 1 and 2");
        auto rates = prefix_rates_ball(seq, o.radius);
        Table t;
        t.units = "R input radius and R_prime output radius in lattice units (sup norm); hits and total are counts; "
                  "rate is a fraction";
        t.columns = {"seed", "index", "k", "R", "R_prime", "hits", "total", "rate", "image"};
        fs::create_directories(o.out);
        for (const auto& r : rates) {
            char file[32];
            std::snprintf(file, sizeof file, "image_k%02zu.pgm", r.k);
            std::string path = (fs::path(o.out) / file).string();
            render_image(image_set(seq.prefix(r.k), o.radius), path, r.output_radius);
            run.add_output(path);
            t.rows.push_back({fmt(o.seq_seed), fmt(o.index), fmt(static_cast<std::uint64_t>(r.k)), fmt(r.radius),
                              fmt(r.output_radius), fmt(r.hits), fmt(r.total), fmt(r.rate), file});
        }
        run.emit(t, (fs::path(o.out) / "linear_image.csv").string(), out);
        return 0;
    }
    if (name == "mean-rate") {
        MatrixSeq seq = matrix_source(o, run, 0);
        run.settings()["lattice"] = o.alt ? "Lambda_k (k+1 blocks)" : "Lambda~_k (k blocks)";
        Table t;
        t.units = "estimate is the covered fraction of a fundamental domain; std_error is binomial; covolume is |det|";
        t.columns = {"k", "estimate", "std_error", "hits", "samples", "covolume"};
        for (std::size_t k = 1; k <= seq.length(); ++k) {
            auto s = seq.prefix(k);
            auto e = o.alt ? mean_rate_alt(s, o.samples, o.seed + k) : mean_rate(s, o.samples, o.seed + k);
            t.rows.push_back({fmt(static_cast<std::uint64_t>(k)), fmt(e.estimate), fmt(e.std_error), fmt(e.hits),
                              fmt(e.samples), fmt(e.covolume)});
        }
        run.emit(t, o.out, out);
        return 0;
    }
    if (name == "tau-decay") {
        if (o.dim != 2) throw ValidationError("tau-decay samples SL_2 sequences; use --dim 2");
        if (o.seqs < 2) throw ValidationError("--seqs must be >= 2");
        if (o.k_max < 1) throw ValidationError("--k-max must be >= 1");
        run.settings()["sampler"] = kSvdSamplerName;
        run.settings()["gates"] = {{"tau_bar_10_max", kDecayGateK10}, {"tau_bar_25_max", kDecayGateK25}};
        const std::size_t ks = o.k_max, ns = o.seqs;
        std::vector<MatrixSeq> seqs;
        for (std::size_t j = 0; j < ns; ++j) seqs.push_back(random_sl2_sequence(ks, o.seed, j));
        std::vector<MonteCarloEstimate> est(ks * ns);
        if (o.samples < kMinMeanRateSamples) throw ValidationError("mean_rate: need at least 10^4 samples");
        parallel_chunks(ks * ns, [&](std::size_t c) {
            std::size_t j = c / ks, k = c % ks + 1;
            est[c] = mean_rate(seqs[j].prefix(k), o.samples, splitmix64(splitmix64(o.seed) + j) + k);
        });
        Table t;
        t.units = "tau_mean is the mean over sequences of the covered fraction; tau_stderr is its Monte Carlo "
                  "standard error; tau_spread is the standard deviation across sequences";
        t.columns = {"k", "tau_mean", "tau_stderr", "tau_spread", "seqs", "samples"};
        json gate_results = json::object();
        for (std::size_t k = 1; k <= ks; ++k) {
            double s = 0, s2 = 0, var = 0;
            for (std::size_t j = 0; j < ns; ++j) {
                const auto& e = est[j * ks + k - 1];
                s += e.estimate, s2 += e.estimate * e.estimate, var += e.std_error * e.std_error;
            }
            const double n = static_cast<double>(ns), mean = s / n;
            const double spread = std::sqrt(std::max(0.0, (s2 - n * mean * mean) / (n - 1.0)));
            t.rows.push_back({fmt(static_cast<std::uint64_t>(k)), fmt(mean), fmt(std::sqrt(var) / n), fmt(spread),
                              fmt(o.seqs), fmt(o.samples)});
            if (k == 10) gate_results["tau_bar_10"] = mean;
            if (k == 25) gate_results["tau_bar_25"] = mean;
        }
        run.settings()["gate_values"] = gate_results;
        run.emit(t, o.out, out);
        return 0;
    }
    if (name == "local-global") {
        SmoothMap f = smooth_map(o.map.empty() ? "builtin:paper-diffeo" : o.map, o.dim > 0 ? o.dim : 2);
        if (o.k < 1) throw ValidationError("--k must be >= 1");
        std::vector<double> grid_tau;
        if (o.grid > 0) {
            GridSpec spec(f.dim(), o.grid);
            spec.validate();
            grid_tau = analyze(discretize(f, spec), static_cast<unsigned>(std::min<std::size_t>(o.k, 64))).tau_by_t;
        }
        Table t;
        t.units = "estimate is the integral of the mean rate of the derivative cocycle; grid_tau is the fraction of "
                  "E_N in the k-th image; abs_diff is their distance";
        t.columns = {"k", "estimate", "std_error", "samples", "mc_per_point", "grid_N", "grid_tau", "abs_diff"};
        for (std::size_t k = 1; k <= o.k; ++k) {
            auto e = tau_k_integral(f, k, o.samples, o.mc, o.seed + 7919 * k);
            std::vector<std::string> row{fmt(static_cast<std::uint64_t>(k)), fmt(e.estimate), fmt(e.std_error),
                                         fmt(e.samples), fmt(e.mc_per_point)};
            if (o.grid > 0 && k <= grid_tau.size()) {
                row.insert(row.end(), {fmt(o.grid), fmt(grid_tau[k - 1]), fmt(std::abs(e.estimate - grid_tau[k - 1]))});
            } else {
                row.insert(row.end(), {"", "", ""});
            }
            t.rows.push_back(std::move(row));
        }
        run.emit(t, o.out, out);
        return 0;
    }
    if (name == "local-global-expanding") {
        ExpandingCircleMap::require_circle(o.dim > 0 ? o.dim : 1);
        auto g = expanding_map(o.map.empty() ? "builtin:paper-expanding" : o.map);
        if (o.k < 1) throw ValidationError("--k must be >= 1");
        std::vector<double> grid_tau;
        if (o.n > 0) {
            GridSpec spec(1, o.n);
            spec.validate();
            grid_tau = analyze(discretize(g.as_smooth_map(), spec), static_cast<unsigned>(std::min<std::size_t>(o.k, 64)))
                           .tau_by_t;
        }
        Table t;
        t.units = "integral is the midpoint-rule integral of the tree density; grid_tau is the fraction of E_N in "
                  "the k-th image; abs_diff is their distance";
        t.columns = {"k", "integral", "quad", "grid_N", "grid_tau", "abs_diff"};
        for (std::size_t k = 1; k <= o.k; ++k) {
            double v = local_global_tau_expanding(g, k, o.quad);
            std::vector<std::string> row{fmt(static_cast<std::uint64_t>(k)), fmt(v), fmt(static_cast<std::uint64_t>(o.quad))};
            if (o.n > 0) row.insert(row.end(), {fmt(o.n), fmt(grid_tau[k - 1]), fmt(std::abs(v - grid_tau[k - 1]))});
            else row.insert(row.end(), {"", "", ""});
            t.rows.push_back(std::move(row));
        }
        run.emit(t, o.out, out);
        return 0;
    }
    if (name == "transfer-check") {
        ExpandingCircleMap::require_circle(o.dim > 0 ? o.dim : 1);
        auto g = expanding_map(o.map.empty() ? "builtin:paper-expanding" : o.map);
        TransferOperator op(g, o.grid > 0 ? o.grid : 4096);
        Table t;
        t.units = "transfer is (L^m 1)(y) on the interpolated grid; mc_mean is the mean survivor count at depth m; "
                  "z is their difference in standard errors";
        t.columns = {"m", "y", "transfer", "mc_mean", "mc_std_error", "z"};
        std::size_t m_max = 0;
        for (auto m : o.m_list) m_max = std::max(m_max, m);
        std::vector<std::vector<double>> powers{std::vector<double>(op.grid(), 1.0)};
        for (std::size_t m = 1; m <= m_max; ++m) powers.push_back(op.apply(powers.back()));
        std::uint64_t stream = 0;
        for (auto m : o.m_list)
            for (double y : o.y_list) {
                double lv = op.interpolate(powers[m], y);
                auto e = expected_children(g, y, m, o.trials, splitmix64(o.seed) + stream++);
                double z = e.std_error > 0 ? (e.estimate - lv) / e.std_error : 0.0;
                t.rows.push_back({fmt(static_cast<std::uint64_t>(m)), fmt(y), fmt(lv), fmt(e.estimate),
                                  fmt(e.std_error), fmt(z)});
            }
        run.emit(t, o.out, out);
        return 0;
    }
    throw ValidationError("unknown subcommand " + name);
}

/// Entry point; returns the process exit code (0 ok, 2 validation, 3 numerical guard).
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Discretizations of torus and circle maps: recurrence, rates of injectivity, model sets"};
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", kVersion);
    unsigned threads = 0;
    app.add_option("--threads", threads, "worker threads (0: RECDYN_THREADS or all cores)");

    std::map<std::string, Options> opts;
    auto add_out = [&](CLI::App* s, const char* help) { return s->add_option("--out", opts[s->get_name()].out, help); };

    auto* grid = app.add_subcommand("grid-dor", "degree of recurrence of f_N over a range of orders");
    {
        Options& o = opts["grid-dor"];
        grid->add_option("--map", o.map, "builtin:paper-diffeo | identity | cat | shear:a:b | dissipative-diffeo:c | "
                                          "translation:s1,.. | linear:a11,.. | paper-expanding | doubling");
        grid->add_option("--orders", o.orders, "start:step:stop (inclusive)")->required();
        grid->add_option("--dim", o.dim, "dimension for builtin:identity");
        grid->add_option("--t-max", o.t_max, "number of tau_t columns");
        grid->add_option("--dump", o.dump, "directory for RDFM successor dumps");
        add_out(grid, "CSV path or - for stdout");
    }

    auto* expd = app.add_subcommand("expanding-dor", "degree of recurrence of an expanding circle map");
    {
        Options& o = opts["expanding-dor"];
        expd->add_option("--map", o.map, "builtin:paper-expanding | doubling | times:d");
        expd->add_option("--orders", o.orders, "start:step:stop (inclusive)")->required();
        expd->add_option("--dim", o.dim, "must be 1");
        expd->add_option("--t-max", o.t_max, "number of tau_t columns");
        expd->add_option("--dump", o.dump, "directory for RDFM successor dumps");
        add_out(expd, "CSV path or - for stdout");
    }

    auto add_matrix_opts = [&](CLI::App* s) {
        Options& o = opts[s->get_name()];
        s->add_option("--matrices", o.matrices, "CSV with one matrix per row (row-major, optional shift)");
        s->add_flag("--identity", o.identity, "use identity matrices");
        s->add_option("--dim", o.dim, "dimension");
        s->add_option("--k", o.k, "sequence length");
        s->add_option("--sampler", o.sampler, "random matrix sampler (svd)");
        s->add_option("--index", o.index, "sequence index within the seed");
    };

    auto* img = app.add_subcommand("linear-image", "image sets of discretized linear maps as PGM");
    {
        Options& o = opts["linear-image"];
        add_matrix_opts(img);
        img->add_option("--seed", o.seq_seed, "sampler seed");
        img->add_option("--radius", o.radius, "input ball radius R");
        add_out(img, "output directory")->default_val("");
    }

    auto* mr = app.add_subcommand("mean-rate", "Monte Carlo mean rate of injectivity for each prefix");
    {
        Options& o = opts["mean-rate"];
        add_matrix_opts(mr);
        mr->add_option("--seq-seed", o.seq_seed, "sampler seed");
        mr->add_option("--samples", o.samples, "Monte Carlo samples")->default_val(1000000);
        mr->add_option("--seed", o.seed, "Monte Carlo seed");
        mr->add_flag("--alt", o.alt, "use the (k+1)-block lattice");
        add_out(mr, "CSV path or - for stdout");
    }

    auto* td = app.add_subcommand("tau-decay", "mean rate versus k over random SL_2 sequences");
    {
        Options& o = opts["tau-decay"];
        td->add_option("--dim", o.dim, "dimension (2)")->default_val(2);
        td->add_option("--k-max", o.k_max, "largest k");
        td->add_option("--seqs", o.seqs, "number of sequences");
        td->add_option("--seed", o.seed, "seed for sequences and sampling");
        td->add_option("--samples", o.samples, "Monte Carlo samples per estimate")->default_val(100000);
        add_out(td, "CSV path or - for stdout");
    }

    auto* lg = app.add_subcommand("local-global", "integral of the cocycle mean rate versus the grid rate");
    {
        Options& o = opts["local-global"];
        lg->add_option("--map", o.map, "builtin torus map");
        lg->add_option("--dim", o.dim, "dimension for builtin:identity");
        lg->add_option("--k", o.k, "largest k")->default_val(2);
        lg->add_option("--samples", o.samples, "base points")->default_val(200);
        lg->add_option("--mc", o.mc, "Monte Carlo samples per base point");
        lg->add_option("--seed", o.seed, "seed");
        lg->add_option("--grid", o.grid, "grid order for the comparison (0: skip)");
        add_out(lg, "CSV path or - for stdout");
    }

    auto* lge = app.add_subcommand("local-global-expanding", "integral of the tree density versus the grid rate");
    {
        Options& o = opts["local-global-expanding"];
        lge->add_option("--map", o.map, "builtin expanding map");
        lge->add_option("--dim", o.dim, "must be 1");
        lge->add_option("--k", o.k, "largest k")->default_val(2);
        lge->add_option("--n", o.n, "grid order for the comparison (0: skip)");
        lge->add_option("--quad", o.quad, "midpoint quadrature points");
        add_out(lge, "CSV path or - for stdout");
    }

    auto* tc = app.add_subcommand("transfer-check", "mean survivor counts versus the transfer operator");
    {
        Options& o = opts["transfer-check"];
        tc->add_option("--map", o.map, "builtin expanding map");
        tc->add_option("--dim", o.dim, "must be 1");
        tc->add_option("--m", o.m_list, "depths");
        tc->add_option("--y", o.y_list, "base points in [0,1)");
        tc->add_option("--trials", o.trials, "random subgraphs per (m, y)");
        tc->add_option("--seed", o.seed, "seed");
        tc->add_option("--grid", o.grid, "transfer operator grid size")->default_val(4096);
        add_out(tc, "CSV path or - for stdout");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e, out, err);
        err << "recdyn: " << e.what() << '\n';
        return 2;
    }
    try {
        set_max_threads(threads);
        const CLI::App* sub = app.get_subcommands().front();
        return dispatch(sub->get_name(), *sub, opts[sub->get_name()], out);
    } catch (const ValidationError& e) {
        err << "recdyn: " << e.what() << '\n';
        return 2;
    } catch (const NumericalError& e) {
        err << "recdyn: numerical guard: " << e.what() << '\n';
        return 3;
    } catch (const fs::filesystem_error& e) {
        err << "recdyn: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "recdyn: internal error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace recdyn::cli

#endif  // RECDYN_TOOLS_CLI_HPP
