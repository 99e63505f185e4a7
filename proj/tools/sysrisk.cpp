#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sysrisk/pipeline.hpp"

using namespace sysrisk;

namespace {

struct Flags {
    std::string config, out, data, rates, dd_pooling, first_month, last_month, measures, stress;
    std::optional<std::uint64_t> seed;
    std::optional<int> paths, horizon, threads, max_lag, min_overlap, firms_per_sector, days;
    std::vector<std::string> sectors;
    bool benchmark_only = false;
};

std::vector<std::string> split_sectors(const std::vector<std::string>& in) {
    std::vector<std::string> out;
    for (const auto& s : in) {
        std::stringstream ss(s);
        for (std::string item; std::getline(ss, item, ',');)
            if (!item.empty()) out.push_back(item);
    }
    return out;
}

PipelineConfig build_config(const Flags& f, bool synth) {
    PipelineConfig c = f.config.empty() ? PipelineConfig{} : load_config(f.config);
    if (f.seed) c.seed = f.seed;
    if (!f.out.empty()) c.out = f.out;
    if (!f.data.empty()) set_data_dir(c.inputs, f.data);
    if (!f.rates.empty()) c.inputs.rates = f.rates;
    if (!f.stress.empty()) c.inputs.stress = f.stress;
    if (f.paths) c.run.sim.n_paths = *f.paths;
    if (f.horizon) c.run.sim.horizon = *f.horizon;
    if (f.threads) c.run.threads = *f.threads;
    if (!f.dd_pooling.empty()) c.run.sim.dd_pooling = parse_pooling(f.dd_pooling);
    if (f.benchmark_only) c.run.benchmark_only = true;
    if (!f.first_month.empty()) c.first_month = f.first_month;
    if (!f.last_month.empty()) c.last_month = f.last_month;
    if (f.max_lag) c.tests.max_lag = *f.max_lag;
    if (f.min_overlap) {
        if (*f.min_overlap < 1) throw ConfigError("--min-overlap must be at least 1");
        c.tests.min_overlap = static_cast<std::size_t>(*f.min_overlap);
    }
    if (f.firms_per_sector) c.synth.firms_per_sector = *f.firms_per_sector;
    if (f.days) c.synth.n_days = *f.days;
    const auto sectors = split_sectors(f.sectors);
    if (!sectors.empty()) (synth ? c.synth.sectors : c.run.sectors) = sectors;
    return c;
}

void add_common(CLI::App* cmd, Flags& f) {
    cmd->add_option("--config", f.config, "JSON run file");
    cmd->add_option("--out", f.out, "output directory");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Structural systemic-risk measures with correlated jumps"};
    app.require_subcommand(1);
    Flags f;

    auto* synth = app.add_subcommand("synth", "write a synthetic market panel with its ground truth");
    add_common(synth, f);
    synth->add_option("--seed", f.seed, "master seed");
    synth->add_option("--sectors", f.sectors, "sectors to populate (comma separated)");
    synth->add_option("--firms-per-sector", f.firms_per_sector, "firms per sector");
    synth->add_option("--days", f.days, "trading days");

    auto* measure = app.add_subcommand("measure", "rolling-window DD, NoD and PIR for full and benchmark models");
    add_common(measure, f);
    measure->add_option("--seed", f.seed, "master seed");
    measure->add_option("--data", f.data, "directory with equity, fundamentals, rates, sectors (and factor) CSVs");
    measure->add_option("--rates", f.rates, "rates CSV, overriding the data directory");
    measure->add_option("--paths", f.paths, "simulated paths per window");
    measure->add_option("--horizon-days", f.horizon, "simulation horizon in trading days");
    measure->add_option("--sectors", f.sectors, "sectors to run (comma separated)");
    measure->add_flag("--benchmark-only", f.benchmark_only, "skip the jump model");
    measure->add_option("--dd-pooling", f.dd_pooling, "distance-to-default pooling: all or terminal");
    measure->add_option("--threads", f.threads, "worker threads");
    measure->add_option("--first-month", f.first_month, "first window end (YYYY-MM)");
    measure->add_option("--last-month", f.last_month, "last window end (YYYY-MM)");

    auto* granger = app.add_subcommand("granger", "Granger causality tests between measures and stress");
    auto* predict = app.add_subcommand("predict", "predictive regressions of stress on benchmark and full measures");
    for (auto* cmd : {granger, predict}) {
        add_common(cmd, f);
        cmd->add_option("--measures", f.measures, "measures.csv from the measure command")->required();
        cmd->add_option("--stress", f.stress, "stress CSV (month_end,stress_value)");
        cmd->add_option("--max-lag", f.max_lag, "largest lag considered by BIC");
        cmd->add_option("--min-overlap", f.min_overlap, "fewest aligned months accepted");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (synth->parsed()) {
            const SynthMarket m = cmd_synth(build_config(f, true));
            std::cerr << "wrote " << m.firms.size() << " firms x " << m.calendar.size() << " days\n";
            return 0;
        }
        if (measure->parsed()) {
            const PipelineConfig c = build_config(f, false);
            const MeasureOutcome o = cmd_measure(c);
            std::size_t flagged = 0;
            for (const auto& w : o.result.windows) flagged += !w.row.flag.empty();
            std::cerr << "wrote " << o.result.windows.size() << " rows (" << flagged << " flagged) to "
                      << (c.out / "measures.csv").string() << '\n';
            if (o.exit_code != 0) std::cerr << "error: every window failed\n";
            return o.exit_code;
        }
        const bool is_predict = predict->parsed();
        const PipelineConfig c = build_config(f, false);
        if (c.inputs.stress.empty()) throw UsageError("--stress is required");
        const TableOutput t = cmd_tests(f.measures, c.inputs.stress, c, is_predict);
        for (const auto& w : t.warnings) std::cerr << "warning: " << w << '\n';
        return 0;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}
