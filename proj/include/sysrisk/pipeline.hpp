#pragma once

// End-to-end orchestration behind the command-line tool: run configuration,
// measure and test tables, and run manifests.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sysrisk/csv.hpp"
#include "sysrisk/date.hpp"
#include "sysrisk/econometrics.hpp"
#include "sysrisk/error.hpp"
#include "sysrisk/market_data.hpp"
#include "sysrisk/risk_engine.hpp"
#include "sysrisk/synth.hpp"

namespace sysrisk {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

inline long parse_month(const std::string& s) {
    int y = 0;
    unsigned m = 0;
    char dash = 0;
    if (s.size() != 7 || std::sscanf(s.c_str(), "%4d%c%2u", &y, &dash, &m) != 3 || dash != '-' || m < 1 || m > 12)
        throw ConfigError("invalid month '" + s + "' (expected YYYY-MM)");
    return static_cast<long>(y) * 12 + static_cast<long>(m) - 1;
}

inline std::string pooling_name(DdPooling p) { return p == DdPooling::all ? "all" : "terminal"; }

inline DdPooling parse_pooling(const std::string& s) {
    if (s == "all") return DdPooling::all;
    if (s == "terminal") return DdPooling::terminal;
    throw ConfigError("dd_pooling must be 'all' or 'terminal', got '" + s + "'");
}

struct InputPaths {
    fs::path equity, fundamentals, rates, sectors, factor, stress;  // factor and stress may be empty
};

struct TestOptions {
    int max_lag = 6;
    std::size_t min_overlap = 24;
};

struct PipelineConfig {
    std::optional<std::uint64_t> seed;
    fs::path out = "out";
    InputPaths inputs;
    RunConfig run;
    std::string first_month, last_month;  // YYYY-MM bounds on window ends, empty for open
    TestOptions tests;
    SynthConfig synth;

    std::uint64_t require_seed() const {
        if (!seed) throw UsageError("a seed is required (--seed or \"seed\" in the config file)");
        return *seed;
    }
};

namespace detail {

inline void check_keys(const ojson& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [k, v] : j.items())
        if (!allowed.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
}

template <class T>
void read_key(const ojson& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(where + "." + key + ": wrong type");
    }
}

inline fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path q(p);
    return q.is_absolute() || base.empty() ? q : base / q;
}

}  // namespace detail

// Default file names inside a data directory; factor.csv and stress.csv are optional.
inline void set_data_dir(InputPaths& in, const fs::path& dir) {
    in.equity = dir / "equity.csv";
    in.fundamentals = dir / "fundamentals.csv";
    in.rates = dir / "rates.csv";
    in.sectors = dir / "sectors.csv";
    in.factor = fs::exists(dir / "factor.csv") ? dir / "factor.csv" : fs::path();
    in.stress = fs::exists(dir / "stress.csv") ? dir / "stress.csv" : fs::path();
}

// Reads the declarative run file. Relative paths are taken from the file's directory.
inline PipelineConfig parse_config(const ojson& j, const fs::path& base = {}) {
    using detail::read_key;
    detail::check_keys(j,
                       {"seed", "out", "inputs", "sectors", "first_month", "last_month", "threads", "benchmark_only",
                        "simulation", "estimation", "tests", "synth"},
                       "config");
    PipelineConfig c;
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned()) throw ConfigError("config.seed: expected a non-negative integer");
        c.seed = j["seed"].get<std::uint64_t>();
    }
    if (j.contains("out")) c.out = detail::resolve(base, j["out"].get<std::string>());
    if (j.contains("inputs")) {
        const auto& in = j["inputs"];
        detail::check_keys(in, {"dir", "equity", "fundamentals", "rates", "sectors", "factor", "stress"}, "inputs");
        if (in.contains("dir")) set_data_dir(c.inputs, detail::resolve(base, in["dir"].get<std::string>()));
        auto path = [&](const char* k, fs::path& dst) {
            if (in.contains(k)) dst = detail::resolve(base, in[k].get<std::string>());
        };
        path("equity", c.inputs.equity);
        path("fundamentals", c.inputs.fundamentals);
        path("rates", c.inputs.rates);
        path("sectors", c.inputs.sectors);
        path("factor", c.inputs.factor);
        path("stress", c.inputs.stress);
    }
    read_key(j, "sectors", c.run.sectors, "config");
    read_key(j, "first_month", c.first_month, "config");
    read_key(j, "last_month", c.last_month, "config");
    read_key(j, "threads", c.run.threads, "config");
    read_key(j, "benchmark_only", c.run.benchmark_only, "config");
    if (j.contains("simulation")) {
        const auto& s = j["simulation"];
        detail::check_keys(s, {"paths", "horizon_days", "tau", "dd_pooling", "quadrature"}, "simulation");
        read_key(s, "paths", c.run.sim.n_paths, "simulation");
        read_key(s, "horizon_days", c.run.sim.horizon, "simulation");
        read_key(s, "tau", c.run.sim.tau, "simulation");
        if (s.contains("dd_pooling")) c.run.sim.dd_pooling = parse_pooling(s["dd_pooling"].get<std::string>());
        if (s.contains("quadrature")) {
            const auto& q = s["quadrature"];
            detail::check_keys(q, {"phi_max", "phi_max_cap", "step", "y_span", "tail_tol"}, "quadrature");
            read_key(q, "phi_max", c.run.sim.quad.phi_max, "quadrature");
            read_key(q, "phi_max_cap", c.run.sim.quad.phi_max_cap, "quadrature");
            read_key(q, "step", c.run.sim.quad.step, "quadrature");
            read_key(q, "y_span", c.run.sim.quad.y_span, "quadrature");
            read_key(q, "tail_tol", c.run.sim.quad.tail_tol, "quadrature");
        }
    }
    if (j.contains("estimation")) {
        const auto& e = j["estimation"];
        detail::check_keys(e, {"hn_restarts", "firm_max_evals", "firms_per_window"}, "estimation");
        read_key(e, "hn_restarts", c.run.hn_restarts, "estimation");
        read_key(e, "firm_max_evals", c.run.firm_max_evals, "estimation");
        read_key(e, "firms_per_window", c.run.firms_per_window, "estimation");
    }
    if (j.contains("tests")) {
        const auto& t = j["tests"];
        detail::check_keys(t, {"max_lag", "min_overlap"}, "tests");
        read_key(t, "max_lag", c.tests.max_lag, "tests");
        read_key(t, "min_overlap", c.tests.min_overlap, "tests");
    }
    if (j.contains("synth")) {
        const auto& s = j["synth"];
        auto& y = c.synth;
        detail::check_keys(s,
                           {"firms_per_sector", "sectors", "n_days", "start", "factor", "annual_rate", "firm", "lambda",
                            "jump_a", "jump_b", "idio_corr", "debt_ratio", "short_share", "heterogeneity", "regimes",
                            "tau"},
                           "synth");
        read_key(s, "firms_per_sector", y.firms_per_sector, "synth");
        read_key(s, "sectors", y.sectors, "synth");
        read_key(s, "n_days", y.n_days, "synth");
        if (s.contains("start")) y.start = Date::parse(s["start"].get<std::string>());
        if (s.contains("factor")) {
            const auto& f = s["factor"];
            detail::check_keys(f, {"omega", "alpha", "eta", "gamma", "lambda_p"}, "synth.factor");
            read_key(f, "omega", y.factor.omega, "synth.factor");
            read_key(f, "alpha", y.factor.alpha, "synth.factor");
            read_key(f, "eta", y.factor.eta, "synth.factor");
            read_key(f, "gamma", y.factor.gamma, "synth.factor");
            read_key(f, "lambda_p", y.factor.lambda_p, "synth.factor");
        }
        if (s.contains("firm")) {
            const auto& f = s["firm"];
            detail::check_keys(f, {"mu", "delta", "xi"}, "synth.firm");
            read_key(f, "mu", y.firm.mu, "synth.firm");
            read_key(f, "delta", y.firm.delta, "synth.firm");
            read_key(f, "xi", y.firm.xi, "synth.firm");
        }
        read_key(s, "annual_rate", y.annual_rate, "synth");
        read_key(s, "lambda", y.lambda, "synth");
        read_key(s, "jump_a", y.jump_a, "synth");
        read_key(s, "jump_b", y.jump_b, "synth");
        read_key(s, "idio_corr", y.idio_corr, "synth");
        read_key(s, "debt_ratio", y.debt_ratio, "synth");
        read_key(s, "short_share", y.short_share, "synth");
        read_key(s, "heterogeneity", y.heterogeneity, "synth");
        read_key(s, "tau", y.tau, "synth");
        if (s.contains("regimes")) {
            y.regimes.clear();
            for (const auto& r : s["regimes"]) {
                detail::check_keys(r, {"begin", "end", "lambda_mult", "a_scale"}, "synth.regimes");
                RegimeSegment g;
                read_key(r, "begin", g.begin, "synth.regimes");
                read_key(r, "end", g.end, "synth.regimes");
                read_key(r, "lambda_mult", g.lambda_mult, "synth.regimes");
                read_key(r, "a_scale", g.a_scale, "synth.regimes");
                y.regimes.push_back(g);
            }
        }
    }
    return c;
}

inline PipelineConfig load_config(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw UsageError("cannot open config file '" + file.string() + "'");
    ojson j;
    try {
        j = ojson::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(file.string() + ": " + e.what());
    }
    return parse_config(j, file.parent_path());
}

inline ojson config_json(const PipelineConfig& c) {
    ojson j;
    if (c.seed) j["seed"] = *c.seed;
    j["out"] = c.out.string();
    ojson in = ojson::object();
    auto put = [&](const char* k, const fs::path& p) {
        if (!p.empty()) in[k] = p.string();
    };
    put("equity", c.inputs.equity);
    put("fundamentals", c.inputs.fundamentals);
    put("rates", c.inputs.rates);
    put("sectors", c.inputs.sectors);
    put("factor", c.inputs.factor);
    put("stress", c.inputs.stress);
    j["inputs"] = in;
    j["sectors"] = c.run.sectors;
    if (!c.first_month.empty()) j["first_month"] = c.first_month;
    if (!c.last_month.empty()) j["last_month"] = c.last_month;
    j["threads"] = c.run.threads;
    j["benchmark_only"] = c.run.benchmark_only;
    const auto& s = c.run.sim;
    j["simulation"] = {{"paths", s.n_paths},
                       {"horizon_days", s.horizon},
                       {"tau", s.tau},
                       {"dd_pooling", pooling_name(s.dd_pooling)},
                       {"quadrature",
                        {{"phi_max", s.quad.phi_max},
                         {"phi_max_cap", s.quad.phi_max_cap},
                         {"step", s.quad.step},
                         {"y_span", s.quad.y_span},
                         {"tail_tol", s.quad.tail_tol}}}};
    j["estimation"] = {{"hn_restarts", c.run.hn_restarts},
                       {"firm_max_evals", c.run.firm_max_evals},
                       {"firms_per_window", c.run.firms_per_window}};
    j["tests"] = {{"max_lag", c.tests.max_lag}, {"min_overlap", c.tests.min_overlap}};
    return j;
}

// ---------------------------------------------------------------------------
// Measures

inline Panels load_inputs(const InputPaths& in) {
    for (auto [name, p] : {std::pair{"equity", &in.equity}, std::pair{"fundamentals", &in.fundamentals},
                           std::pair{"rates", &in.rates}, std::pair{"sectors", &in.sectors}}) {
        if (p->empty()) throw UsageError(std::string("no ") + name + " file given");
        if (!fs::is_regular_file(*p)) throw UsageError(std::string(name) + " file not found: " + p->string());
    }
    if (!in.factor.empty() && !fs::is_regular_file(in.factor))
        throw UsageError("factor file not found: " + in.factor.string());
    Panels p = load_panels(in.equity.string(), in.fundamentals.string(), in.rates.string());
    parse_sectors(csv::read_file(in.sectors.string()), p);
    if (!in.factor.empty()) parse_factor(csv::read_file(in.factor.string()), p);
    return p;
}

inline RunConfig effective_run(const PipelineConfig& c) {
    RunConfig r = c.run;
    r.sim.seed = c.require_seed();
    if (!c.first_month.empty()) r.first_month = parse_month(c.first_month);
    if (!c.last_month.empty()) r.last_month = parse_month(c.last_month);
    return r;
}

namespace detail {

inline std::string cell(double v) { return std::isnan(v) ? std::string() : csv::format_double(v); }

}  // namespace detail

inline void write_measures_csv(std::ostream& os, const std::vector<MeasureRow>& rows, bool benchmark_only) {
    csv::Writer w(os);
    using detail::cell;
    if (benchmark_only) {
        w.row("month_end", "sector", "dd_ben", "nod_ben", "pir_ben", "flag");
        for (const auto& r : rows)
            w.row(std::vector<std::string>{r.month_end.str(), r.sector, cell(r.dd_ben), cell(r.nod_ben),
                                           cell(r.pir_ben), r.flag});
        return;
    }
    w.row("month_end", "sector", "dd", "nod", "pir", "dd_ben", "nod_ben", "pir_ben", "flag");
    for (const auto& r : rows)
        w.row(std::vector<std::string>{r.month_end.str(), r.sector, cell(r.dd), cell(r.nod), cell(r.pir),
                                       cell(r.dd_ben), cell(r.nod_ben), cell(r.pir_ben), r.flag});
}

inline ojson model_json(const WindowEstimates& we, const ModelEstimates& me) {
    ojson firms = ojson::array();
    for (std::size_t j = 0; j < me.fits.size(); ++j) {
        const auto& f = me.fits[j];
        firms.push_back({{"firm_id", we.firms[j]},
                         {"mu", f.params.mu},
                         {"delta", f.params.delta},
                         {"xi", f.params.xi},
                         {"V0", f.assets.back()},
                         {"loglik", f.loglik},
                         {"converged", f.converged}});
    }
    ojson omega = ojson::array();
    for (Eigen::Index i = 0; i < me.dcc.omega_last.rows(); ++i) {
        ojson row = ojson::array();
        for (Eigen::Index k = 0; k < me.dcc.omega_last.cols(); ++k) row.push_back(me.dcc.omega_last(i, k));
        omega.push_back(row);
    }
    ojson j;
    j["jumps"] = {{"lambda", me.jumps.lambda}, {"a", me.jumps.a}, {"b", me.jumps.b}};
    j["firms"] = firms;
    j["dcc"] = {{"a", me.dcc.params.a},
                {"b", me.dcc.params.b},
                {"constant_fallback", me.dcc.constant_fallback},
                {"omega_last", omega}};
    j["measures"] = {{"dd", me.measures.dd}, {"nod", me.measures.nod}, {"pir", me.measures.pir}};
    return j;
}

inline ojson window_json(const WindowResult& w) {
    const auto& we = w.estimates;
    ojson j;
    j["sector"] = we.sector;
    j["month_end"] = w.row.month_end.str();
    j["window_start"] = we.window.start.str();
    j["window_end"] = we.window.end.str();
    j["flag"] = w.row.flag;
    if (w.row.failure != 0) return j;
    j["firms"] = we.firms;
    const auto& h = we.factor.params;
    j["factor"] = {{"omega", h.omega}, {"alpha", h.alpha}, {"eta", h.eta}, {"gamma", h.gamma}, {"lambda_p", h.lambda_p}};
    j["h_next"] = we.h_next;
    j["r"] = we.r;
    j["debt_end"] = we.debt_end;
    j["book_assets"] = we.book_assets;
    j["benchmark"] = model_json(we, we.benchmark);
    if (we.has_full) j["full"] = model_json(we, we.full);
    return j;
}

inline ojson measure_manifest(const PipelineConfig& c, const RollingResult& res, double seconds) {
    ojson m;
    m["command"] = "measure";
    m["config"] = config_json(c);
    m["streams"] = "simulation draws use Stream(seed).child(sector).child(month_index).child(\"simulate\")";
    ojson wins = ojson::array();
    ojson warnings = ojson::array();
    for (const auto& w : res.windows) {
        wins.push_back(window_json(w));
        if (!w.row.flag.empty()) warnings.push_back(w.row.sector + " " + w.row.month_end.str() + ": " + w.row.flag);
    }
    m["windows"] = wins;
    m["warnings"] = warnings;
    m["timing"] = {{"seconds", seconds}};
    return m;
}

// Rebuilds the simulation inputs of one model from a manifest window entry.
inline SimInputs sim_inputs_from_manifest(const ojson& w, const std::string& model) {
    SimInputs in;
    const auto& f = w.at("factor");
    in.factor = {f.at("omega").get<double>(), f.at("alpha").get<double>(), f.at("eta").get<double>(),
                 f.at("gamma").get<double>(), f.at("lambda_p").get<double>()};
    in.r = w.at("r").get<double>();
    in.h_next = w.at("h_next").get<double>();
    const auto& m = w.at(model);
    in.jumps.lambda = m.at("jumps").at("lambda").get<double>();
    in.jumps.a = m.at("jumps").at("a").get<std::vector<double>>();
    in.jumps.b = m.at("jumps").at("b").get<std::vector<double>>();
    const auto debt = w.at("debt_end").get<std::vector<double>>();
    const auto book = w.at("book_assets").get<std::vector<double>>();
    const auto& firms = m.at("firms");
    for (std::size_t j = 0; j < firms.size(); ++j)
        in.firms.push_back({firms[j].at("mu").get<double>(), firms[j].at("delta").get<double>(),
                            firms[j].at("V0").get<double>(), debt[j], book[j]});
    const auto& om = m.at("dcc").at("omega_last");
    const auto n = static_cast<Eigen::Index>(om.size());
    in.omega.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index k = 0; k < n; ++k) in.omega(i, k) = om[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)].get<double>();
    return in;
}

// ---------------------------------------------------------------------------
// Reading measures and stress back

struct MeasureRecord {
    long month = 0;
    std::string sector;
    std::map<std::string, double> values;  // dd, nod, pir and the _ben columns present in the file
};

struct MeasureFile {
    std::vector<MeasureRecord> rows;
    bool has_full = false;
};

inline MeasureFile read_measures_csv(const fs::path& path) {
    if (!fs::is_regular_file(path)) throw UsageError("measures file not found: " + path.string());
    const csv::Table t = csv::read_file(path.string());
    MeasureFile f;
    const std::size_t cm = t.column("month_end"), cs = t.column("sector");
    std::vector<std::string> cols{"dd_ben", "nod_ben", "pir_ben"};
    f.has_full = std::find(t.header.begin(), t.header.end(), "dd") != t.header.end();
    if (f.has_full) cols.insert(cols.end(), {"dd", "nod", "pir"});
    std::vector<std::size_t> idx;
    for (const auto& c : cols) idx.push_back(t.column(c));
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        MeasureRecord rec;
        rec.month = Date::parse(t.rows[r][cm]).month_index();
        rec.sector = t.rows[r][cs];
        for (std::size_t k = 0; k < cols.size(); ++k) rec.values[cols[k]] = csv::parse_double(t, r, idx[k], true);
        f.rows.push_back(std::move(rec));
    }
    return f;
}

inline std::vector<MonthlyPoint> read_stress_csv(const fs::path& path) {
    if (!fs::is_regular_file(path)) throw UsageError("stress file not found: " + path.string());
    const csv::Table t = csv::read_file(path.string());
    const std::size_t cm = t.column("month_end"), cv = t.column("stress_value");
    std::vector<MonthlyPoint> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r)
        out.push_back({Date::parse(t.rows[r][cm]).month_index(), csv::parse_double(t, r, cv)});
    return out;
}

namespace detail {

inline std::vector<MonthlyPoint> series_of(const MeasureFile& f, const std::string& sector, const std::string& col) {
    std::vector<MonthlyPoint> out;
    for (const auto& r : f.rows)
        if (r.sector == sector) out.push_back({r.month, r.values.at(col)});
    return out;
}

inline std::vector<std::string> sectors_of(const MeasureFile& f) {
    std::vector<std::string> out;
    for (const auto& r : f.rows)
        if (std::find(out.begin(), out.end(), r.sector) == out.end()) out.push_back(r.sector);
    return out;
}

// Months where every series is observed, as contiguous aligned vectors.
inline std::vector<std::vector<double>> align_all(const std::vector<std::vector<MonthlyPoint>>& series,
                                                  std::size_t min_overlap) {
    std::map<long, std::vector<double>> byMonth;
    for (std::size_t s = 0; s < series.size(); ++s) {
        std::set<long> seen;
        for (const auto& p : series[s]) {
            if (!seen.insert(p.month).second) throw AlignmentError("duplicate month " + month_label(p.month));
            if (std::isnan(p.value)) continue;
            auto& v = byMonth[p.month];
            if (v.size() == s) v.push_back(p.value);
        }
    }
    std::vector<long> months;
    std::vector<std::vector<double>> out(series.size());
    for (const auto& [m, v] : byMonth) {
        if (v.size() != series.size()) continue;
        months.push_back(m);
        for (std::size_t s = 0; s < v.size(); ++s) out[s].push_back(v[s]);
    }
    if (months.size() < min_overlap)
        throw AlignmentError("series overlap in " + std::to_string(months.size()) + " months; at least " +
                             std::to_string(min_overlap) + " required");
    for (std::size_t i = 1; i < months.size(); ++i)
        if (months[i] != months[i - 1] + 1)
            throw AlignmentError("aligned months are not contiguous (gap after " + month_label(months[i - 1]) + ")");
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Granger and predictive tables

struct TestRow {
    std::string measure, sector, transform, direction;
    int lag = 0;
    double stat = std::nan(""), pvalue = std::nan("");
};

struct PredictiveRow {
    std::string measure, sector, transform;
    PredictiveResult result;
    bool ok = false;
};

struct TableOutput {
    std::vector<TestRow> tests;
    std::vector<PredictiveRow> predictive;
    std::vector<std::string> warnings;
};

inline const std::vector<std::string>& measure_names() {
    static const std::vector<std::string> names{"dd", "nod", "pir"};
    return names;
}

// Full vs benchmark and full vs stress in both directions, in levels and first differences.
// With a benchmark-only file the benchmark measure stands in for the full one against stress.
inline TableOutput granger_table(const MeasureFile& mf, const std::vector<MonthlyPoint>& stress, bool stress_is_self,
                                 const TestOptions& opt) {
    TableOutput out;
    if (stress_is_self) out.warnings.push_back("stress file is the measures file: self-causality tests skipped");
    const std::string lead = mf.has_full ? "full" : "ben";
    for (const auto& sector : detail::sectors_of(mf))
        for (const auto& meas : measure_names()) {
            const auto ben = detail::series_of(mf, sector, meas + "_ben");
            const auto full = mf.has_full ? detail::series_of(mf, sector, meas) : ben;
            struct Pair {
                std::string y, x;
                const std::vector<MonthlyPoint>*ys, *xs;
            };
            std::vector<Pair> pairs;
            if (mf.has_full) pairs.push_back({"ben", "full", &ben, &full}), pairs.push_back({"full", "ben", &full, &ben});
            if (!stress_is_self)
                pairs.push_back({"stress", lead, &stress, &full}), pairs.push_back({lead, "stress", &full, &stress});
            for (const auto& pr : pairs) {
                auto al = detail::align_all({*pr.ys, *pr.xs}, opt.min_overlap);
                for (const std::string transform : {"levels", "diff"}) {
                    TestRow row;
                    row.measure = meas, row.sector = sector, row.transform = transform;
                    row.direction = pr.x + "->" + pr.y;
                    std::vector<double> y = al[0], x = al[1];
                    if (transform == "diff") y = first_difference(y), x = first_difference(x);
                    if (y == x) {
                        out.warnings.push_back(sector + " " + meas + " " + transform + " " + row.direction +
                                               ": identical series, self-causality test skipped");
                        continue;
                    }
                    try {
                        const GCResult g = granger_test(y, x, select_lag_bic(y, {x}, opt.max_lag));
                        row.lag = g.lag, row.stat = g.stat, row.pvalue = g.pvalue;
                    } catch (const NumericalError& e) {
                        out.warnings.push_back(sector + " " + meas + " " + transform + " " + row.direction + ": " +
                                               e.what());
                    }
                    out.tests.push_back(row);
                }
            }
        }
    return out;
}

inline TableOutput predictive_table(const MeasureFile& mf, const std::vector<MonthlyPoint>& stress,
                                    bool stress_is_self, const TestOptions& opt) {
    TableOutput out;
    if (!mf.has_full) throw UsageError("predictive regressions need the full-model columns (dd, nod, pir)");
    if (stress_is_self) {
        out.warnings.push_back("stress file is the measures file: predictive regressions skipped");
        return out;
    }
    for (const auto& sector : detail::sectors_of(mf))
        for (const auto& meas : measure_names()) {
            auto al = detail::align_all(
                {stress, detail::series_of(mf, sector, meas + "_ben"), detail::series_of(mf, sector, meas)},
                opt.min_overlap);
            for (const std::string transform : {"levels", "diff"}) {
                PredictiveRow row;
                row.measure = meas, row.sector = sector, row.transform = transform;
                auto s = al[0], b = al[1], f = al[2];
                if (transform == "diff") s = first_difference(s), b = first_difference(b), f = first_difference(f);
                try {
                    row.result = predictive_regressions(s, b, f, opt.max_lag);
                    row.ok = true;
                } catch (const NumericalError& e) {
                    out.warnings.push_back(sector + " " + meas + " " + transform + ": " + e.what());
                }
                out.predictive.push_back(row);
            }
        }
    return out;
}

inline void write_tests_csv(std::ostream& os, const std::vector<TestRow>& rows) {
    csv::Writer w(os);
    w.row("measure", "sector", "transform", "direction", "lag", "stat", "pvalue");
    for (const auto& r : rows)
        w.row(std::vector<std::string>{r.measure, r.sector, r.transform, r.direction, std::to_string(r.lag),
                                       detail::cell(r.stat), detail::cell(r.pvalue)});
}

inline void write_predictive_csv(std::ostream& os, const std::vector<PredictiveRow>& rows) {
    csv::Writer w(os);
    w.row("measure", "sector", "transform", "r2_restricted", "r2_unrestricted", "f", "pvalue", "k1", "k2", "k3");
    for (const auto& r : rows) {
        const double nan = std::nan("");
        const auto& p = r.result;
        w.row(std::vector<std::string>{r.measure, r.sector, r.transform, detail::cell(r.ok ? p.r2_restricted : nan),
                                       detail::cell(r.ok ? p.r2_unrestricted : nan), detail::cell(r.ok ? p.F : nan),
                                       detail::cell(r.ok ? p.pvalue : nan), std::to_string(p.k1),
                                       std::to_string(p.k2), std::to_string(p.k3)});
    }
}

// ---------------------------------------------------------------------------
// Commands

inline std::ofstream open_output(const fs::path& p) {
    fs::create_directories(p.parent_path().empty() ? fs::path(".") : p.parent_path());
    std::ofstream f(p, std::ios::binary);
    if (!f) throw UsageError("cannot write " + p.string());
    return f;
}

inline void write_json(const fs::path& p, const ojson& j) {
    auto f = open_output(p);
    f << j.dump(2) << '\n';
}

inline SynthMarket cmd_synth(const PipelineConfig& c) {
    SynthConfig s = c.synth;
    s.seed = c.require_seed();
    s.validate();
    SynthMarket m = synth_market(s);
    write_synth(m, c.out);
    return m;
}

struct MeasureOutcome {
    RollingResult result;
    int exit_code = 0;
};

inline MeasureOutcome cmd_measure(const PipelineConfig& c) {
    const RunConfig run = effective_run(c);
    const Panels p = load_inputs(c.inputs);
    const auto t0 = std::chrono::steady_clock::now();
    MeasureOutcome out;
    out.result = rolling_run(p, run);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const auto rows = out.result.rows();
    {
        auto f = open_output(c.out / "measures.csv");
        write_measures_csv(f, rows, run.benchmark_only);
    }
    write_json(c.out / "manifest.json", measure_manifest(c, out.result, secs));
    const bool all_failed =
        std::all_of(rows.begin(), rows.end(), [](const MeasureRow& r) { return r.failure != 0; });
    if (all_failed && !rows.empty()) out.exit_code = rows.front().failure;
    return out;
}

inline bool same_file(const fs::path& a, const fs::path& b) {
    std::error_code ec;
    return fs::equivalent(a, b, ec);
}

inline TableOutput cmd_tests(const fs::path& measures, const fs::path& stress, const PipelineConfig& c,
                             bool predictive) {
    const MeasureFile mf = read_measures_csv(measures);
    if (!fs::is_regular_file(stress)) throw UsageError("stress file not found: " + stress.string());
    const bool self = same_file(measures, stress);
    const auto st = self ? std::vector<MonthlyPoint>{} : read_stress_csv(stress);
    TableOutput t = predictive ? predictive_table(mf, st, self, c.tests) : granger_table(mf, st, self, c.tests);
    {
        auto f = open_output(c.out / (predictive ? "predictive.csv" : "tests.csv"));
        if (predictive)
            write_predictive_csv(f, t.predictive);
        else
            write_tests_csv(f, t.tests);
    }
    ojson m;
    m["command"] = predictive ? "predict" : "granger";
    m["measures"] = measures.string();
    m["stress"] = stress.string();
    m["tests"] = {{"max_lag", c.tests.max_lag}, {"min_overlap", c.tests.min_overlap}};
    m["warnings"] = t.warnings;
    write_json(c.out / (predictive ? "predictive_manifest.json" : "tests_manifest.json"), m);
    return t;
}

}  // namespace sysrisk
