#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "sysrisk/correlation.hpp"
#include "sysrisk/econometrics.hpp"
#include "sysrisk/firm_mle.hpp"
#include "sysrisk/jumps.hpp"
#include "sysrisk/pipeline.hpp"
#include "sysrisk/pricing.hpp"
#include "sysrisk/risk_engine.hpp"
#include "sysrisk/synth.hpp"

using namespace sysrisk;
namespace fs = std::filesystem;
using clk = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double bs_call(double S, double K, double sigma, double T, double r) {
    const double d1 = (std::log(S / K) + (r + 0.5 * sigma * sigma) * T) / (sigma * std::sqrt(T));
    return S * norm_cdf(d1) - K * std::exp(-r * T) * norm_cdf(d1 - sigma * std::sqrt(T));
}

HNParams hn_truth() { return {2e-7, 2e-6, 0.88, 150.0, 2.0}; }

PricingContext collapsed(double sigma, double r_day, double debt_T) {
    PricingContext c;
    c.model = AssetModel{hn_truth(), 0.0, sigma * sigma / 252, 0.0, 0.0, 0.0, 252};
    c.r = r_day;
    c.h_next = 1e-4;
    c.debt_T = debt_T;
    return c;
}

PricingContext full_model(double debt_T) {
    PricingContext c;
    c.model = AssetModel{hn_truth(), 0.8, 1e-4, 0.05, -0.03, 0.04, 252};
    c.r = 1e-4;
    c.h_next = 1.3e-4;
    c.X_t = 1234.5;
    c.debt_T = debt_T;
    return c;
}

Outcome pricing_oracle() {
    double worst = 0;
    for (double mny : {0.5, 0.8, 1.0, 1.25, 3.0})
        for (double vol : {0.05, 0.1, 0.2, 0.4, 0.8}) {
            const double D = 100 / mny;
            worst = std::max(worst, std::abs(equity_price(collapsed(vol, 0.03 / 252, D), 100) - bs_call(100, D, vol, 1, 0.03)));
        }
    const double fixture = equity_price(collapsed(0.2, 0.0, 80), 100);
    const double fixture_err = std::abs(fixture - bs_call(100, 80, 0.2, 1, 0));
    return {worst <= 1e-3 && fixture_err <= 1e-3 && std::abs(fixture - 21.18) < 0.01,
            fmt("max |err| %.2e on 5x5 grid, V=100 D=80 sigma=0.2 gives %.4f", worst, fixture)};
}

struct Moment {
    double s = 0, s2 = 0;
    void add(double v) { s += v, s2 += v * v; }
    double mean(double n) const { return s / n; }
    double se(double n) const { return std::sqrt((s2 / n - mean(n) * mean(n)) / n); }
};

Outcome gf_oracle() {
    const PricingContext c = full_model(80);
    const AssetModel& m = c.model;
    const auto d = dynamics(m.factor);
    const int n = 1000000;
    Moment fx[2], gv[2];
    Stream root(2024);
    for (int p = 0; p < n; ++p) {
        Stream s = root.child(static_cast<std::uint64_t>(p));
        std::normal_distribution<double> z;
        double h = c.h_next, lx = 0, jumps = 0;
        for (int t = 0; t < m.tau; ++t) {
            const auto st = factor_step(d, c.r, h, z(s));
            lx += st.x;
            h = st.h_next;
        }
        std::poisson_distribution<int> pois(m.lambda * m.tau);
        const int k = pois(s);
        for (int i = 0; i < k; ++i) jumps += m.a + m.b * z(s);
        const double lv = (c.r - c.r * m.delta - m.a * m.lambda) * m.tau + m.delta * lx + std::sqrt(m.xi * m.tau) * z(s) + jumps;
        for (int i = 0; i < 2; ++i) {
            fx[i].add(std::exp((i + 1) * lx));
            gv[i].add(std::exp((i + 1) * lv));
        }
    }
    bool ok = true;
    double worst = 0;
    for (int i = 0; i < 2; ++i) {
        const double phi = i + 1;
        const double f = common_factor_gf(d, c.r, 1.0, c.h_next, m.tau, phi).real();
        const double g = asset_gf(c, 1.0, phi, GfMeasure::physical).real();
        const double zf = std::abs(fx[i].mean(n) - f) / fx[i].se(n), zg = std::abs(gv[i].mean(n) - g) / gv[i].se(n);
        worst = std::max({worst, zf, zg});
        ok = ok && zf < 3 && zg < 3;
    }
    return {ok, fmt("largest deviation %.2f SE over f and g at phi 1, 2 (1e6 paths)", worst)};
}

Outcome jump_series() {
    auto series = [](double phi, double lambda, double a, double b, double tau) {
        const double lt = lambda * tau;
        double acc = 0, logfact = 0;
        for (int i = 0; i <= 200; ++i) {
            if (i > 0) logfact += std::log(i);
            acc += std::exp(-lt + i * std::log(lt) - logfact + i * (a * phi + 0.5 * b * b * phi * phi));
        }
        return acc;
    };
    double worst = 0;
    for (double phi : {0.5, 1.0, 2.0})
        for (double lt : {0.01, 0.1, 1.0, 2.5, 5.0})
            for (double tau : {1.0, 21.0, 252.0}) {
                const double lambda = lt / tau;
                const double err = std::abs(jump_mgf(phi, lambda, -0.07, 0.12, tau).real() - series(phi, lambda, -0.07, 0.12, tau));
                worst = std::max(worst, err);
            }
    return {worst <= 1e-10, fmt("max |err| %.2e", worst)};
}

Outcome variance_identity() {
    const double h = 1e-4, delta = 0.8, xi = 1e-4, lambda = 0.05, a = -0.03, b = 0.04;
    SimInputs in;
    in.factor = {h, 0.0, 0.0, 0.0, 1.5};
    in.h_next = h;
    in.r = 1e-4;
    in.firms = {{3e-4, delta, 100, 50, 1}};
    in.omega = Eigen::MatrixXd::Constant(1, 1, xi);
    in.jumps = JumpParams{lambda, {a}, {b}};
    const int horizon = 100, paths = 10000;
    double s1 = 0, s2 = 0;
    long n = 0;
    simulate_asset_paths(in, horizon, paths, Stream(7), [&](int, std::span<const double> V) {
        for (int t = 1; t <= horizon; ++t) {
            const double v = std::log(V[t] / V[t - 1]);
            s1 += v, s2 += v * v, ++n;
        }
    });
    const double var = s2 / n - (s1 / n) * (s1 / n);
    const double expected = delta * delta * h + xi + lambda * (a * a + b * b);
    return {std::abs(var / expected - 1) <= 0.02, fmt("ratio %.4f at %ld cells", var / expected, n)};
}

Outcome jacobian() {
    double worst = 0, worst_inv = 0;
    for (double V : {80.0, 100.0, 130.0, 180.0, 260.0})
        for (double D : {50.0, 70.0, 90.0, 110.0, 140.0}) {
            const auto c = full_model(D);
            const double step = 1e-4 * V;
            const double fd = (equity_price(c, V + step) - equity_price(c, V - step)) / (2 * step);
            worst = std::max(worst, std::abs(equity_delta(c, V) / fd - 1));
            worst_inv = std::max(worst_inv, std::abs(invert_asset_value(c, equity_price(c, V)) / V - 1));
        }
    return {worst <= 1e-5 && worst_inv <= 1e-8, fmt("delta rel err %.2e, inversion rel err %.2e", worst, worst_inv)};
}

// Factor path, asset path from the daily asset equation, equity priced by the model.
FirmWindow simulated_firm(const FirmParams& fp, const FirmJumps& j, int n, double debt, std::uint64_t seed) {
    const HNParams f = hn_truth();
    const double r = 1e-4;
    auto fx = simulate_factor(dynamics(f), r, f.unconditional_variance(), n + 1, 1, Stream(seed).child("factor"));
    Stream s = Stream(seed).child("firm");
    std::normal_distribution<double> z;
    JumpParams jp{j.lambda, {j.a}, {j.b}};
    std::vector<double> cell(1);
    FirmWindow w;
    w.x.assign(fx.x.begin(), fx.x.begin() + n);
    w.h.assign(fx.h.begin(), fx.h.begin() + n + 1);
    w.r.assign(n, r);
    w.debt.assign(n, debt);
    PricingKernel k(AssetModel{f, fp.delta, fp.xi, j.lambda, j.a, j.b, 252}, {}, f.unconditional_variance());
    double lv = std::log(100.0);
    for (int t = 0; t < n; ++t) {
        if (t > 0) {
            draw_jump_cell(jp, s, cell);
            lv += fp.mu + fp.delta * (w.x[t] - r) + std::sqrt(fp.xi) * z(s) + cell[0];
        }
        w.equity.push_back(k.day(r, w.h[t + 1], debt * std::exp(r * 252)).price(std::exp(lv)));
    }
    return w;
}

Eigen::MatrixXd simulate_dcc(const Eigen::MatrixXd& rbar, double a, double b, int T, std::uint64_t seed) {
    const Eigen::Index m = rbar.rows();
    Stream s(seed);
    std::normal_distribution<double> nd;
    Eigen::MatrixXd z(T, m), Q = rbar;
    Eigen::VectorXd prev = Eigen::VectorXd::Zero(m), e(m);
    for (int t = 0; t < T; ++t) {
        if (t > 0) Q = (1 - a - b) * rbar + a * prev * prev.transpose() + b * Q;
        const Eigen::VectorXd d = Q.diagonal().cwiseSqrt().cwiseInverse();
        const Eigen::MatrixXd R = d.asDiagonal() * Q * d.asDiagonal();
        for (Eigen::Index i = 0; i < m; ++i) e(i) = nd(s);
        prev = Eigen::LLT<Eigen::MatrixXd>(R).matrixL() * e;
        z.row(t) = prev.transpose();
    }
    return z;
}

Outcome recovery() {
    std::string detail;
    bool ok = true;

    const HNParams p = hn_truth();
    auto sim = simulate_factor(dynamics(p), 1e-4, p.unconditional_variance(), 20000, 1, Stream(21));
    HNFitOptions ho;
    ho.standard_errors = true;
    const HNFit hn = fit_hn_garch(sim.x, 1e-4, ho);
    const double nat[5] = {p.omega, p.alpha, p.eta, p.gamma, p.lambda_p};
    const double est[5] = {hn.params.omega, hn.params.alpha, hn.params.eta, hn.params.gamma, hn.params.lambda_p};
    double zmax = 0;
    for (int i = 0; i < 5; ++i) zmax = std::max(zmax, std::isfinite(hn.se[i]) ? std::abs(est[i] - nat[i]) / hn.se[i] : 1e9);
    ok = ok && zmax < 3;
    detail += fmt("HN max %.2f SE", zmax);

    const FirmParams ft{4e-4, 0.6, 2e-4};
    const FirmJumps fj{0.05, -0.02, 0.02};
    FirmFitOptions fo;
    fo.standard_errors = true;
    const FirmFit fit = fit_firm(simulated_firm(ft, fj, 1000, 60, 101), p, fj, fo);
    const double t3[3] = {ft.mu, ft.delta, ft.xi}, e3[3] = {fit.params.mu, fit.params.delta, fit.params.xi};
    zmax = 0;
    for (int i = 0; i < 3; ++i) zmax = std::max(zmax, std::isfinite(fit.se[i]) ? std::abs(e3[i] - t3[i]) / fit.se[i] : 1e9);
    ok = ok && zmax < 3;
    detail += fmt("; firm max %.2f SE", zmax);

    const std::size_t m = 10;
    const JumpParams jp{0.1, std::vector<double>(m, -0.05), std::vector<double>(m, 0.05)};
    Eigen::MatrixXd r(5000, static_cast<Eigen::Index>(m));
    Stream s(12);
    std::normal_distribution<double> z;
    std::vector<double> cell(m);
    for (int t = 0; t < 5000; ++t) {
        draw_jump_cell(jp, s, cell);
        for (std::size_t j = 0; j < m; ++j) r(t, static_cast<Eigen::Index>(j)) = std::sqrt(2e-4) * z(s) + cell[j];
    }
    const JumpCalibration cal = calibrate_jumps(r);
    int signs = 0;
    for (double a : cal.params.a) signs += a < 0;
    ok = ok && std::abs(cal.params.lambda - 0.1) <= 0.05 && signs >= 9;
    detail += fmt("; lambda %.4f (truth 0.1), %d/10 signs", cal.params.lambda, signs);

    Eigen::MatrixXd rbar(5, 5);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) rbar(i, j) = i == j ? 1.0 : 0.3 + 0.05 * ((i + j) % 3);
    const DCCFit dcc = fit_dcc(simulate_dcc(rbar, 0.05, 0.90, 5000, 2));
    ok = ok && std::abs(dcc.params.a - 0.05) <= 0.05 && std::abs(dcc.params.b - 0.90) <= 0.05;
    detail += fmt("; DCC a %.3f b %.3f", dcc.params.a, dcc.params.b);
    return {ok, detail};
}

Outcome nesting() {
    SimInputs full;
    full.factor = hn_truth();
    full.r = 1e-4;
    full.h_next = 3e-5;
    full.firms = {{2e-4, 0.7, 120, 90, 500}, {1e-4, 0.5, 80, 70, 300}, {3e-4, 0.9, 60, 58, 200}};
    full.omega = Eigen::MatrixXd{{1e-4, 3e-5, 1e-5}, {3e-5, 2e-4, 2e-5}, {1e-5, 2e-5, 3e-4}};
    full.jumps = JumpParams{0.0, {-0.05, -0.02, -0.04}, {0.03, 0.01, 0.02}};
    SimInputs ben = full;
    ben.jumps = JumpParams{};
    bool ok = true;
    for (auto pool : {DdPooling::all, DdPooling::terminal})
        for (std::uint64_t seed : {1u, 42u}) {
            SimConfig cfg;
            cfg.n_paths = 1000;
            cfg.dd_pooling = pool;
            const Stream st = Stream(seed).child("depositories").child(std::uint64_t{200}).child("simulate");
            const Measures a = simulate_measures(full, cfg, st), b = simulate_measures(ben, cfg, st);
            ok = ok && a.dd == b.dd && a.nod == b.nod && a.pir == b.pir;
        }
    return {ok, "DD, NoD, PIR compared with == over 2 seeds x 2 poolings"};
}

Panels load_dir(const fs::path& dir) {
    Panels p = load_panels((dir / "equity.csv").string(), (dir / "fundamentals.csv").string(), (dir / "rates.csv").string());
    parse_sectors(csv::read_file((dir / "sectors.csv").string()), p);
    parse_factor(csv::read_file((dir / "factor.csv").string()), p);
    return p;
}

Outcome regime_panel() {
    SynthConfig c;
    c.firms_per_sector = 10;
    c.sectors = {"depositories"};
    c.n_days = 783;
    c.seed = 3;
    c.lambda = 0.01;
    c.jump_a = 0.01;
    c.jump_b = 0.02;
    const int crisis_day = 392;
    c.regimes = {{0, crisis_day, 1, 1}, {crisis_day, 783, 3, -4}};
    const SynthMarket m = synth_market(c);
    const fs::path dir = fs::temp_directory_path() / "sysrisk_acceptance_regime";
    fs::remove_all(dir);
    write_synth(m, dir);
    const Panels p = load_dir(dir);
    const Date crisis = m.calendar[crisis_day];

    RunConfig rc;
    rc.sim.n_paths = 2000;
    rc.sim.seed = 5;
    rc.sectors = {"depositories"};
    auto wins = enumerate_windows(p.calendar);
    if (wins.size() < 24) return {false, fmt("panel gives only %zu windows", wins.size())};
    wins.resize(24);

    struct Acc {
        double dd = 0, dd_ben = 0, nod = 0, nod_ben = 0, pir = 0, pir_ben = 0, lambda = 0;
        int n = 0;
    } pre, cri;
    double xi = 0, xi_ben = 0, delta = 0, delta_ben = 0;
    int nf = 0, failed = 0;
    for (const Window& w : wins) {
        const WindowResult r = run_window(p, "depositories", w, rc);
        if (!r.row.flag.empty()) {
            ++failed;
            continue;
        }
        const auto& e = r.estimates;
        for (std::size_t j = 0; j < e.full.fits.size(); ++j) {
            xi += e.full.fits[j].params.xi, xi_ben += e.benchmark.fits[j].params.xi;
            delta += e.full.fits[j].params.delta, delta_ben += e.benchmark.fits[j].params.delta;
            ++nf;
        }
        Acc* a = w.end < crisis ? &pre : (w.start >= crisis ? &cri : nullptr);
        if (!a) continue;
        a->dd += r.row.dd, a->dd_ben += r.row.dd_ben, a->nod += r.row.nod, a->nod_ben += r.row.nod_ben;
        a->pir += r.row.pir, a->pir_ben += r.row.pir_ben, a->lambda += e.jump_fit.params.lambda, ++a->n;
    }
    if (failed > 0 || pre.n == 0 || cri.n == 0 || nf == 0)
        return {false, fmt("%d windows failed, %d pre-crisis, %d crisis", failed, pre.n, cri.n)};
    const double n = cri.n;
    const bool dd = cri.dd < cri.dd_ben, nod = cri.nod > cri.nod_ben, pir = cri.pir > cri.pir_ben;
    const bool lam = cri.lambda / cri.n > pre.lambda / pre.n;
    const bool xis = xi_ben > xi, dls = delta_ben > delta;
    return {dd && nod && pir && lam && xis && dls,
            fmt("crisis (%d windows): DD %.3f vs %.3f, NoD %.3f vs %.3f, PIR %.3g vs %.3g; "
                "lambda %.4f crisis vs %.4f pre (%d windows); xi %.3g vs ben %.3g; delta %.4f vs ben %.4f",
                cri.n, cri.dd / n, cri.dd_ben / n, cri.nod / n, cri.nod_ben / n, cri.pir / n, cri.pir_ben / n,
                cri.lambda / cri.n, pre.lambda / pre.n, pre.n, xi / nf, xi_ben / nf, delta / nf, delta_ben / nf)};
}

std::vector<double> noise(Stream& s, std::size_t n) {
    std::normal_distribution<double> z;
    std::vector<double> v(n);
    for (auto& x : v) x = z(s);
    return v;
}

GCResult bic_granger(std::span<const double> y, std::span<const double> x) {
    return granger_test(y, x, select_lag_bic(y, {x}, 6));
}

double ks_uniform(std::vector<double> p) {
    std::sort(p.begin(), p.end());
    const double n = static_cast<double>(p.size());
    double d = 0;
    for (std::size_t i = 0; i < p.size(); ++i) d = std::max({d, (i + 1) / n - p[i], p[i] - i / n});
    return d;
}

Outcome econometrics() {
    const int reps = 5000;
    int size_rej = 0, power = 0;
    std::vector<double> pf;
    Stream root(909);
    for (int r = 0; r < reps; ++r) {
        Stream s = root.child(static_cast<std::uint64_t>(r));
        Stream a = s.child("null"), b = s.child("causal"), c = s.child("predictive");
        auto y = noise(a, 181), x = noise(a, 181);
        size_rej += bic_granger(y, x).pvalue < 0.05;
        // x AR(1) with coefficient 0.5; y_t = 0.5 y_{t-1} + 0.4 x_{t-1} + e_t
        std::normal_distribution<double> z;
        std::vector<double> cx(231, 0.0), cy(231, 0.0);
        for (std::size_t t = 1; t < cx.size(); ++t) {
            cx[t] = 0.5 * cx[t - 1] + z(b);
            cy[t] = 0.5 * cy[t - 1] + 0.4 * cx[t - 1] + z(b);
        }
        power += bic_granger(std::span(cy).subspan(50), std::span(cx).subspan(50)).pvalue < 0.05;
        auto st = noise(c, 181), ben = noise(c, 181), fu = noise(c, 181);
        pf.push_back(predictive_regressions(st, ben, fu, 4).pvalue);
    }
    const double size = double(size_rej) / reps, pw = double(power) / reps, ks = ks_uniform(pf);
    const FTest t = incremental_f(0.917, 0.921, 1, 153);
    const bool ok = size >= 0.035 && size <= 0.065 && pw >= 0.90 && ks < 0.05 && std::abs(t.F - 7.75) < 0.01;
    return {ok, fmt("size %.4f, power %.4f, KS %.4f, F %.3f (p %.4f)", size, pw, ks, t.F, t.pvalue)};
}

int run_cli(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string(SYSRISK_CLI) + " " + args + " >> " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string manifest_windows(const fs::path& p) {
    std::ifstream in(p);
    const ojson j = ojson::parse(in);
    return j.at("windows").dump() + j.at("streams").dump();
}

Outcome pipeline_determinism() {
    const fs::path root = fs::temp_directory_path() / "sysrisk_acceptance_pipeline";
    fs::remove_all(root);
    fs::create_directories(root);
    const fs::path log = root / "log.txt";
    std::ofstream(root / "run.json") << R"({"seed": 31, "inputs": {"dir": "data"}, "sectors": ["depositories"],
        "simulation": {"paths": 100, "horizon_days": 60},
        "estimation": {"hn_restarts": 2, "firm_max_evals": 60, "firms_per_window": 3},
        "tests": {"max_lag": 2, "min_overlap": 12}})";
    if (run_cli("synth --seed 17 --days 600 --sectors depositories --firms-per-sector 4 --out " + (root / "data").string(), log) != 0)
        return {false, "synth failed, see " + log.string()};
    const char* threads[] = {"1", "3", "1"};
    const std::vector<std::string> files = {"measures.csv", "tests.csv", "predictive.csv"};
    std::vector<std::vector<std::string>> outputs;
    for (int i = 0; i < 3; ++i) {
        const fs::path out = root / ("run" + std::to_string(i));
        const std::string base = " --config " + (root / "run.json").string() + " --out " + out.string();
        const fs::path meas = out / "measures.csv", stress = root / "data" / "stress.csv";
        if (run_cli("measure" + base + " --threads " + threads[i], log) != 0 ||
            run_cli("granger" + base + " --measures " + meas.string() + " --stress " + stress.string(), log) != 0 ||
            run_cli("predict" + base + " --measures " + meas.string() + " --stress " + stress.string(), log) != 0)
            return {false, "pipeline step failed, see " + log.string()};
        std::vector<std::string> o;
        for (const auto& f : files) o.push_back(slurp(out / f));
        o.push_back(manifest_windows(out / "manifest.json"));
        outputs.push_back(std::move(o));
    }
    const bool ok = outputs[0] == outputs[1] && outputs[0] == outputs[2];
    const auto rows = std::count(outputs[0][0].begin(), outputs[0][0].end(), '\n') - 1;
    return {ok && rows > 0, fmt("%ld measure rows; measures, tests, predictive and manifest windows %s across threads 1, 3, 1",
                                static_cast<long>(rows), ok ? "identical" : "differ")};
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        double limit;  // seconds
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> all = {
        {1, 10, pricing_oracle},  {2, 120, gf_oracle},     {3, 1, jump_series},
        {4, 60, variance_identity}, {5, 30, jacobian},     {6, 900, recovery},
        {7, 60, nesting},         {8, 1800, regime_panel}, {9, 300, econometrics},
        {10, 600, pipeline_determinism},
    };
    int failed = 0;
    for (const auto& c : all) {
        const auto t0 = clk::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(clk::now() - t0).count();
        const bool pass = o.pass && secs < c.limit;
        failed += !pass;
        std::cout << "criterion " << c.id << ": " << (pass ? "PASS" : "FAIL") << " (" << o.detail
                  << fmt("; %.1f s, limit %.0f s)", secs, c.limit) << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
