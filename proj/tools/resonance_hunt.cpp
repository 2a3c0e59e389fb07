// resonance-hunt: end-to-end resonant anomaly detection pipelines.
// Subcommands: gen, blackbox, cwola, anode, supervised, bump, eval, report.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "resonance/bumphunt.hpp"
#include "resonance/core.hpp"
#include "resonance/cwola.hpp"
#include "resonance/datagen.hpp"
#include "resonance/density.hpp"
#include "resonance/digest.hpp"
#include "resonance/eval.hpp"
#include "resonance/ingest.hpp"
#include "resonance/pipelines.hpp"
#include "resonance/svg.hpp"
#include "resonance/windows.hpp"

namespace {

constexpr const char* kVersion = "0.1.0";

using namespace resonance;
using nlohmann::json;

struct GlobalOpts {
    std::uint64_t seed = 1;
    int threads = 0;  // 0: hardware concurrency
    std::string schema_path;
};

int effective_threads(const GlobalOpts& g) {
    if (g.threads > 0) return g.threads;
    const unsigned hc = std::thread::hardware_concurrency();
    return hc ? static_cast<int>(hc) : 1;
}

// manifest.json lives next to the primary output and pins everything needed
// to reproduce the run byte for byte
struct Manifest {
    std::string subcommand;
    json options = json::object();
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;

    void write(const std::string& primary_output, const GlobalOpts& g) const {
        json j;
        j["tool"] = "resonance-hunt";
        j["version"] = kVersion;
        j["subcommand"] = subcommand;
        j["seed"] = g.seed;
        j["threads"] = g.threads;
        j["options"] = options;
        json in = json::object();
        for (const auto& p : inputs) in[p] = Sha256::of_file(p);
        j["inputs"] = in;
        j["outputs"] = outputs;
        const auto dir = std::filesystem::path(primary_output).parent_path();
        const auto path = (dir.empty() ? std::filesystem::path(".") : dir) / "manifest.json";
        std::ofstream out(path);
        if (!out) throw data_error("cannot write manifest: " + path.string());
        out << j.dump(2) << "\n";
    }
};

void require_file(const std::string& path) {
    if (!std::filesystem::exists(path))
        throw data_error("input file does not exist: " + path);
}

ColumnSchema load_schema(const GlobalOpts& g, int d_fallback, bool labeled_fallback) {
    if (!g.schema_path.empty()) {
        require_file(g.schema_path);
        return ColumnSchema::from_json_file(g.schema_path);
    }
    return ColumnSchema::canonical(d_fallback, labeled_fallback);
}

// ---- toy config flags shared by gen and blackbox ----

struct ToyFlags {
    std::string preset = "default";
    long long n_background = -1;
    long long n_signal = -1;
    double signal_m0 = -1;
    double signal_width = -1;
    std::vector<double> shift, scale, drift;

    ToyConfig resolve(std::uint64_t seed) const {
        ToyConfig cfg;
        if (preset == "default")
            cfg = default_toy_preset();
        else if (preset == "detectable")
            cfg = detectable_toy_preset(seed);
        else if (preset == "null")
            cfg = null_toy_preset(seed);
        else
            throw config_error("unknown preset: " + preset);
        cfg.seed = seed;
        if (n_background >= 0) cfg.n_background = n_background;
        if (n_signal >= 0) cfg.n_signal = n_signal;
        if (signal_m0 > 0) cfg.signal_m0 = signal_m0;
        if (signal_width > 0) cfg.signal_width = signal_width;
        if (!shift.empty()) cfg.signal_feature_shift = shift;
        if (!scale.empty()) cfg.signal_feature_scale = scale;
        if (!drift.empty()) cfg.background_feature_drift = drift;
        return cfg;
    }

    void attach(CLI::App* cmd) {
        cmd->add_option("--preset", preset, "Toy preset: default, detectable, null");
        cmd->add_option("--n-background", n_background, "Background event count");
        cmd->add_option("--n-signal", n_signal, "Signal event count");
        cmd->add_option("--signal-m0", signal_m0, "Signal resonance location");
        cmd->add_option("--signal-width", signal_width, "Signal resonance width");
        cmd->add_option("--shift", shift, "Per-feature signal mean shifts")->delimiter(',')->expected(-1);
        cmd->add_option("--scale", scale, "Per-feature signal width factors")->delimiter(',')->expected(-1);
        cmd->add_option("--drift", drift, "Per-feature background mean drift in m")
            ->delimiter(',')->expected(-1);
    }

    json to_json() const {
        return {{"preset", preset},        {"n_background", n_background},
                {"n_signal", n_signal},    {"signal_m0", signal_m0},
                {"signal_width", signal_width}};
    }
};

struct WindowFlags {
    double m0 = 0, delta = 0, epsilon = 0;
    void attach(CLI::App* cmd, bool required = true) {
        auto* a = cmd->add_option("--m0", m0, "Window center in m");
        auto* b = cmd->add_option("--delta", delta, "SR half-width");
        auto* c = cmd->add_option("--epsilon", epsilon, "SS outer half-width");
        if (required) {
            a->required();
            b->required();
            c->required();
        }
    }
};

struct ClassifierFlags {
    int folds = 5, epochs = 40, batch = 256, patience = 4;
    double lr = 0.02;
    std::vector<int> hidden{64, 64};
    void attach(CLI::App* cmd) {
        cmd->add_option("--folds", folds, "Cross-validation folds");
        cmd->add_option("--epochs", epochs, "Max training epochs");
        cmd->add_option("--batch", batch, "Mini-batch size");
        cmd->add_option("--patience", patience, "Early-stopping patience");
        cmd->add_option("--lr", lr, "Learning rate");
        cmd->add_option("--hidden", hidden, "Hidden layer widths")->delimiter(',')->expected(-1);
    }
    ClassifierConfig resolve(const GlobalOpts& g) const {
        ClassifierConfig cfg;
        cfg.hidden = hidden;
        cfg.k_folds = folds;
        cfg.max_epochs = epochs;
        cfg.batch_size = batch;
        cfg.patience = patience;
        cfg.learning_rate = lr;
        cfg.seed = g.seed;
        cfg.n_threads = effective_threads(g);
        return cfg;
    }
};

struct EstimatorFlags {
    std::string estimator = "hist";
    int bins = 8, K = 4, m_bins = 4;
    std::string cov = "diag";
    void attach(CLI::App* cmd) {
        cmd->add_option("--estimator", estimator, "Density estimator: hist or gmm");
        cmd->add_option("--bins", bins, "Histogram bins per feature axis");
        cmd->add_option("--K", K, "Mixture component count");
        cmd->add_option("--m-bins", m_bins, "m-bins per sideband side");
        cmd->add_option("--cov", cov, "Mixture covariance: diag or full");
    }
    DensityConfig resolve(const GlobalOpts& g) const {
        DensityConfig cfg;
        if (estimator == "hist")
            cfg.kind = EstimatorKind::Histogram;
        else if (estimator == "gmm")
            cfg.kind = EstimatorKind::GaussianMixture;
        else
            throw config_error("unknown estimator: " + estimator);
        cfg.bins_per_axis = bins;
        cfg.gmm.K = K;
        cfg.n_m_bins = m_bins;
        if (cov == "diag")
            cfg.gmm.cov = MixtureConfig::Cov::Diagonal;
        else if (cov == "full")
            cfg.gmm.cov = MixtureConfig::Cov::Full;
        else
            throw config_error("unknown covariance kind: " + cov);
        cfg.seed = g.seed;
        return cfg;
    }
};

// ---- subcommand implementations ----

int cmd_gen(const GlobalOpts& g, const ToyFlags& toy, const std::string& out) {
    const ToyConfig cfg = toy.resolve(g.seed);
    const Dataset bkg = generate_background(cfg);
    Dataset ds(cfg.d, true);
    if (cfg.n_signal > 0) {
        const Dataset sig = generate_signal(cfg);
        ds = mix_and_shuffle(bkg, sig, cfg.seed);
    } else {
        ds = bkg;
    }
    const ColumnSchema schema = ColumnSchema::canonical(cfg.d, true);
    write_csv(ds, out, schema);
    const std::string schema_out = out + ".schema.json";
    schema.to_json_file(schema_out);

    Manifest man;
    man.subcommand = "gen";
    man.options = toy.to_json();
    man.outputs = {out, schema_out};
    man.write(out, g);
    std::fprintf(stderr, "gen: wrote %zu events (%lld signal) to %s\n", ds.size(),
                 cfg.n_signal, out.c_str());
    return 0;
}

int cmd_blackbox(const GlobalOpts& g, const ToyFlags& toy, const std::string& out,
                 const std::string& key_out) {
    const ToyConfig cfg = toy.resolve(g.seed);
    const SealedKey key = emit_blackbox(cfg, out, key_out);
    ColumnSchema::canonical(cfg.d, false).to_json_file(out + ".schema.json");
    Manifest man;
    man.subcommand = "blackbox";
    man.options = toy.to_json();
    man.outputs = {out, key_out, out + ".schema.json"};
    man.write(out, g);
    std::fprintf(stderr, "blackbox: wrote %zu unlabeled events to %s, key to %s\n",
                 key.labels.size(), out.c_str(), key_out.c_str());
    return 0;
}

int score_command(const std::string& name, const GlobalOpts& g, const std::string& input,
                  const WindowFlags& wf, const std::string& out,
                  const ClassifierFlags* clf, const EstimatorFlags* est) {
    require_file(input);
    const ColumnSchema schema = load_schema(g, 4, name != "anode");
    const Dataset ds = read_csv(input, schema);
    double lo = 1e300, hi = -1e300;
    for (double m : ds.m_column()) {
        lo = std::min(lo, m);
        hi = std::max(hi, m);
    }
    const WindowSpec w = make_window(wf.m0, wf.delta, wf.epsilon, lo, hi);

    ScoreTable st(ds.labeled());
    if (name == "cwola" || name == "supervised") {
        if (name == "supervised" && !ds.labeled())
            throw data_error("supervised scoring needs a label column in the schema");
        const Scorer scorer = (name == "cwola") ? train_cwola(ds, w, clf->resolve(g))
                                                : train_supervised(ds, clf->resolve(g));
        int stalled = 0;
        for (const auto& diag : scorer.diagnostics())
            if (!diag.converged) ++stalled;
        if (stalled > 0)
            std::fprintf(stderr,
                         "%s: warning: %d of %zu folds hit max epochs while still improving\n",
                         name.c_str(), stalled, scorer.diagnostics().size());
        st = scorer.score(ds, w);
    } else if (name == "anode-raw") {
        // spec-level ratio: single in-sample fit, log-ratio scores
        const Dataset blind = ds.without_labels();
        Dataset sr(blind.dim(), false), sb(blind.dim(), false);
        for (std::size_t i = 0; i < blind.size(); ++i) {
            if (assign_region(blind.m(i), w) == Region::SR)
                sr.append(blind.m(i), blind.x(i));
            else
                sb.append(blind.m(i), blind.x(i));
        }
        const DensityConfig dcfg = est->resolve(g);
        const CondDensity p_sb = fit_sideband_density(sb, w, dcfg);
        const CondDensity p_sr = fit_sr_density(sr, dcfg, &p_sb);
        st = anode_score(p_sr, p_sb, ds);
    } else {
        st = make_anode_pipeline(est->resolve(g))(ds, w);
    }
    write_scores_csv(st, out);

    Manifest man;
    man.subcommand = name;
    man.options = {{"m0", wf.m0}, {"delta", wf.delta}, {"epsilon", wf.epsilon}};
    man.inputs = {input};
    if (!g.schema_path.empty()) man.inputs.push_back(g.schema_path);
    man.outputs = {out};
    man.write(out, g);
    std::fprintf(stderr, "%s: scored %zu events to %s\n", name.c_str(), st.size(),
                 out.c_str());
    return 0;
}

struct BumpFlags {
    std::string scores_path, input, method = "anode";
    WindowFlags window;
    double scan_step = 0, scan_lo = 0, scan_hi = 0;
    std::vector<double> quantiles{0.1, 0.01, 0.001};
    int mc_replicas = 0;
    std::string out = "hunt.json";
};

int cmd_bump(const GlobalOpts& g, const BumpFlags& f, const ClassifierFlags& clf,
             const EstimatorFlags& est) {
    BumpHuntOptions opts;
    opts.quantiles = f.quantiles;
    opts.mc_replicas = f.mc_replicas;
    opts.n_threads = effective_threads(g);
    opts.seed = g.seed;

    BumpHuntResult result;
    Manifest man;
    man.subcommand = "bump";
    if (!f.scores_path.empty()) {
        require_file(f.scores_path);
        const ScoreTable st = read_scores_csv(f.scores_path);
        double lo = 1e300, hi = -1e300;
        for (double m : st.m_column()) {
            lo = std::min(lo, m);
            hi = std::max(hi, m);
        }
        WindowSpec w;
        if (f.window.delta > 0.0) {
            w = make_window(f.window.m0, f.window.delta, f.window.epsilon, lo, hi);
        } else {
            // recover the window geometry from the region tags
            double sr_lo = 1e300, sr_hi = -1e300, ss_span = 0.0;
            for (std::size_t i = 0; i < st.size(); ++i) {
                if (st.region(i) == Region::SR) {
                    sr_lo = std::min(sr_lo, st.m(i));
                    sr_hi = std::max(sr_hi, st.m(i));
                }
            }
            if (!(sr_lo < sr_hi))
                throw data_error("score table has no SR rows; pass --m0/--delta/--epsilon");
            const double m0 = 0.5 * (sr_lo + sr_hi);
            const double delta = 0.5 * (sr_hi - sr_lo);
            for (std::size_t i = 0; i < st.size(); ++i)
                if (st.region(i) == Region::SS)
                    ss_span = std::max(ss_span, std::fabs(st.m(i) - m0));
            const double epsilon = ss_span > delta ? ss_span * 1.0000001 : 3.0 * delta;
            w = make_window(m0, delta, epsilon, std::min(lo, m0 - epsilon),
                            std::max(hi, m0 + epsilon));
        }
        result = bump_from_scores(st, w, opts);
        man.inputs = {f.scores_path};
    } else {
        if (f.input.empty())
            throw config_error("bump needs either --scores or --input");
        require_file(f.input);
        const ColumnSchema schema = load_schema(g, 4, false);
        const Dataset ds = read_csv(f.input, schema);
        double lo = 1e300, hi = -1e300;
        for (double m : ds.m_column()) {
            lo = std::min(lo, m);
            hi = std::max(hi, m);
        }
        ScorePipeline pipeline;
        if (f.method == "anode")
            pipeline = make_anode_pipeline(est.resolve(g));
        else if (f.method == "cwola")
            pipeline = make_cwola_pipeline(clf.resolve(g));
        else if (f.method == "supervised")
            throw config_error("scan mode is label-blind; supervised scans are not supported");
        else
            throw config_error("unknown method: " + f.method);
        if (f.scan_step > 0) {
            const ScanPlan plan = plan_scan(lo, hi, f.window.delta, f.window.epsilon,
                                            f.scan_step, f.scan_lo, f.scan_hi);
            result = run_bumphunt(ds, plan, pipeline, opts);
        } else {
            ScanPlan plan;
            plan.windows = {
                make_window(f.window.m0, f.window.delta, f.window.epsilon, lo, hi)};
            plan.step = 0;
            plan.n_independent = 1;
            result = run_bumphunt(ds, plan, pipeline, opts);
        }
        man.inputs = {f.input};
        if (!g.schema_path.empty()) man.inputs.push_back(g.schema_path);
    }
    write_hunt_json(result, f.out);
    man.options = {{"method", f.method},
                   {"quantiles", f.quantiles},
                   {"delta", f.window.delta},
                   {"epsilon", f.window.epsilon},
                   {"scan_step", f.scan_step},
                   {"mc_replicas", f.mc_replicas}};
    man.outputs = {f.out};
    man.write(f.out, g);

    std::fprintf(stderr, "bump: %d/%zu valid cells, min local p = %.3g, global p = %.3g\n",
                 static_cast<int>(std::count_if(result.cells.begin(), result.cells.end(),
                                                [](const BumpCell& c) { return c.valid; })),
                 result.cells.size(), result.min_local_p, result.global_p);
    return 0;
}

int cmd_eval(const GlobalOpts& g, const std::string& scores_path, const std::string& out,
             const std::string& plots_dir, double fpr_floor, const std::string& region) {
    require_file(scores_path);
    const ScoreTable all = read_scores_csv(scores_path);
    if (!all.labeled())
        throw data_error("eval needs truth labels in the score table");
    ScoreTable st(true);
    if (region == "sr") {
        for (std::size_t i = 0; i < all.size(); ++i)
            if (all.region(i) == Region::SR)
                st.append(all.m(i), all.score(i), all.region(i), all.label(i));
    } else if (region == "all") {
        st = all;
    } else {
        throw config_error("region must be 'sr' or 'all'");
    }
    const RocCurve curve = roc(st);
    const double area = auc(curve);
    const SicCurve sic = sic_curve(curve, fpr_floor);

    json j = {{"auc", area},
              {"max_sic", sic.max_sic},
              {"tpr_at_max_sic", sic.tpr_at_max},
              {"fpr_floor", sic.fpr_floor},
              {"n_signal", curve.n_signal},
              {"n_background", curve.n_background},
              {"region", region}};
    std::ofstream jo(out);
    if (!jo) throw data_error("cannot write " + out);
    jo << j.dump(2) << "\n";
    jo.close();

    Manifest man;
    man.subcommand = "eval";
    man.inputs = {scores_path};
    man.outputs = {out};
    man.options = {{"region", region}, {"fpr_floor", sic.fpr_floor}};

    if (!plots_dir.empty()) {
        std::filesystem::create_directories(plots_dir);
        const auto dir = std::filesystem::path(plots_dir);
        write_roc_csv(curve, (dir / "roc.csv").string());
        write_sic_csv(sic, (dir / "sic.csv").string());

        PlotSpec roc_plot;
        roc_plot.title = "ROC";
        roc_plot.x_label = "false positive rate";
        roc_plot.y_label = "true positive rate";
        PlotSeries rs;
        rs.label = "scores";
        for (const auto& p : curve.points) {
            rs.x.push_back(p.fpr);
            rs.y.push_back(p.tpr);
        }
        PlotSeries diag;
        diag.label = "random";
        diag.x = {0.0, 1.0};
        diag.y = {0.0, 1.0};
        roc_plot.series = {rs, diag};
        write_svg_plot(roc_plot, (dir / "roc.svg").string());

        PlotSpec sic_plot;
        sic_plot.title = "Significance improvement";
        sic_plot.x_label = "true positive rate";
        sic_plot.y_label = "TPR / sqrt(FPR)";
        PlotSeries ss;
        ss.label = "scores";
        for (const auto& p : sic.points) {
            ss.x.push_back(p.tpr);
            ss.y.push_back(p.sic);
        }
        PlotSeries unit;
        unit.label = "no gain";
        unit.x = {0.0, 1.0};
        unit.y = {1.0, 1.0};
        sic_plot.series = {ss, unit};
        write_svg_plot(sic_plot, (dir / "sic.svg").string());
        for (const char* name : {"roc.csv", "sic.csv", "roc.svg", "sic.svg"})
            man.outputs.push_back((dir / name).string());
    }
    man.write(out, g);
    std::fprintf(stderr, "eval: auc=%.4f max_sic=%.2f (tpr %.2f) over %lld sig / %lld bkg\n",
                 area, sic.max_sic, sic.tpr_at_max, curve.n_signal, curve.n_background);
    return 0;
}

int cmd_report(const GlobalOpts& g, const std::string& hunt_path,
               const std::string& key_path, const std::string& data_path,
               const std::string& out) {
    require_file(hunt_path);
    require_file(key_path);
    require_file(data_path);
    const BumpHuntResult hunt = read_hunt_json(hunt_path);
    const SealedKey key = read_key(key_path);
    const SignalEstimate est = estimate_signal_count(hunt);
    if (!est.valid) throw data_error("bump hunt result carries no valid window");
    const KeyReport rep = compare_to_key(hunt, est.count, est.sigma, key, data_path);

    json j = {{"estimate", rep.estimate},
              {"sigma", rep.sigma},
              {"truth_count", rep.truth_count},
              {"pull", rep.pull},
              {"localized", rep.localized},
              {"best_m0", rep.best_m0},
              {"best_delta", rep.best_delta},
              {"global_p", rep.global_p},
              {"digest_ok", true}};
    if (rep.global_p_mc >= 0) j["global_p_mc"] = rep.global_p_mc;
    std::ofstream jo(out);
    if (!jo) throw data_error("cannot write " + out);
    jo << j.dump(2) << "\n";
    jo.close();

    Manifest man;
    man.subcommand = "report";
    man.inputs = {hunt_path, key_path, data_path};
    man.outputs = {out};
    man.write(out, g);
    std::fprintf(stderr,
                 "report: estimate %.0f +- %.0f vs truth %lld (pull %.2f), localized=%s, "
                 "global p=%.3g\n",
                 rep.estimate, rep.sigma, rep.truth_count, rep.pull,
                 rep.localized ? "yes" : "no", rep.global_p);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"resonance-hunt: group anomaly detection via CWoLa / ANODE scoring and "
                 "sideband-calibrated bump hunting"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOpts g;
    app.add_option("--seed", g.seed, "Global random seed");
    app.add_option("--threads", g.threads, "Worker cap (0 = hardware concurrency)");
    app.add_option("--schema", g.schema_path, "Column schema JSON file");

    // gen
    auto* gen = app.add_subcommand("gen", "Generate a labeled toy dataset");
    ToyFlags gen_toy;
    gen_toy.attach(gen);
    std::string gen_out = "data.csv";
    gen->add_option("--out", gen_out, "Output CSV path")->required();

    // blackbox
    auto* bb = app.add_subcommand("blackbox", "Emit an unlabeled dataset plus a sealed key");
    ToyFlags bb_toy;
    bb_toy.attach(bb);
    std::string bb_out = "blackbox.csv", bb_key = "blackbox.key.json";
    bb->add_option("--out", bb_out, "Output CSV path")->required();
    bb->add_option("--key", bb_key, "Sealed key path")->required();

    // scoring commands
    std::string cw_in, cw_out = "scores.csv";
    WindowFlags cw_w;
    ClassifierFlags cw_clf;
    auto* cw = app.add_subcommand("cwola", "Train SR-vs-SS classifier, emit scores");
    cw->add_option("--input", cw_in, "Dataset CSV")->required();
    cw->add_option("--out", cw_out, "Score table CSV");
    cw_w.attach(cw);
    cw_clf.attach(cw);

    std::string an_in, an_out = "scores.csv";
    WindowFlags an_w;
    EstimatorFlags an_est;
    bool an_raw = false;
    auto* an = app.add_subcommand("anode", "Density-ratio scoring, emit scores");
    an->add_option("--input", an_in, "Dataset CSV")->required();
    an->add_option("--out", an_out, "Score table CSV");
    an->add_flag("--raw", an_raw,
                 "Emit in-sample log ratios instead of cross-fitted calibrated ranks");
    an_w.attach(an);
    an_est.attach(an);

    std::string sup_in, sup_out = "scores.csv";
    WindowFlags sup_w;
    ClassifierFlags sup_clf;
    auto* sup = app.add_subcommand("supervised", "Truth-label training, emit scores");
    sup->add_option("--input", sup_in, "Labeled dataset CSV")->required();
    sup->add_option("--out", sup_out, "Score table CSV");
    sup_w.attach(sup);
    sup_clf.attach(sup);

    // bump
    BumpFlags bump;
    ClassifierFlags bump_clf;
    EstimatorFlags bump_est;
    auto* bp = app.add_subcommand("bump", "Sideband-calibrated bump hunt");
    bp->add_option("--scores", bump.scores_path, "Precomputed score table (single window)");
    bp->add_option("--input", bump.input, "Dataset CSV (scan mode, retrains per window)");
    bp->add_option("--method", bump.method, "Scan scorer: anode or cwola");
    bump.window.attach(bp, false);
    bp->add_option("--scan-step", bump.scan_step, "Window center spacing (enables scan)");
    bp->add_option("--scan-lo", bump.scan_lo, "Scan range low edge");
    bp->add_option("--scan-hi", bump.scan_hi, "Scan range high edge");
    bp->add_option("--quantiles", bump.quantiles, "Score cut quantiles")->delimiter(',')->expected(-1);
    bp->add_option("--mc-calibrate", bump.mc_replicas, "Monte Carlo calibration replicas");
    bp->add_option("--out", bump.out, "Hunt result JSON");
    bump_clf.attach(bp);
    bump_est.attach(bp);

    // eval
    std::string ev_scores, ev_out = "metrics.json", ev_plots, ev_region = "all";
    double ev_floor = 0.0;
    auto* ev = app.add_subcommand("eval", "Truth-label ROC / AUC / SIC metrics");
    ev->add_option("--scores", ev_scores, "Score table CSV with labels")->required();
    ev->add_option("--out", ev_out, "Metrics JSON");
    ev->add_option("--plots", ev_plots, "Directory for ROC/SIC CSV and SVG plots");
    ev->add_option("--fpr-floor", ev_floor, "FPR floor (0 = 10/n_background)");
    ev->add_option("--region", ev_region, "Evaluate on 'sr' or 'all' events");

    // report
    std::string rp_hunt, rp_key, rp_data, rp_out = "report.json";
    auto* rp = app.add_subcommand("report", "Compare a hunt result against a sealed key");
    rp->add_option("--hunt", rp_hunt, "Hunt result JSON")->required();
    rp->add_option("--key", rp_key, "Sealed key file")->required();
    rp->add_option("--data", rp_data, "Unlabeled dataset the key seals")->required();
    rp->add_option("--out", rp_out, "Report JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_name() == "CallForHelp" || e.get_name() == "CallForVersion")
            return app.exit(e);
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    }

    try {
        if (gen->parsed()) return cmd_gen(g, gen_toy, gen_out);
        if (bb->parsed()) return cmd_blackbox(g, bb_toy, bb_out, bb_key);
        if (cw->parsed()) return score_command("cwola", g, cw_in, cw_w, cw_out, &cw_clf, nullptr);
        if (an->parsed())
            return score_command(an_raw ? "anode-raw" : "anode", g, an_in, an_w, an_out,
                                 nullptr, &an_est);
        if (sup->parsed())
            return score_command("supervised", g, sup_in, sup_w, sup_out, &sup_clf, nullptr);
        if (bp->parsed()) return cmd_bump(g, bump, bump_clf, bump_est);
        if (ev->parsed()) return cmd_eval(g, ev_scores, ev_out, ev_plots, ev_floor, ev_region);
        if (rp->parsed()) return cmd_report(g, rp_hunt, rp_key, rp_data, rp_out);
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const data_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const numerical_error& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
