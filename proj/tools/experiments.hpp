#pragma once

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "levymlmc/levymlmc.hpp"

namespace levymlmc::cli {

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::optional<std::string> out;
};

class Context {
  public:
    Context(ConfigFile cfg, const Overrides& o) : cfg_(std::move(cfg)) {
        seed_ = o.seed ? *o.seed : cfg_.get<std::uint64_t>("experiment.seed", 1);
        threads_ = o.threads ? *o.threads : cfg_.get<unsigned>("experiment.threads", default_threads());
        if (threads_ == 0) threads_ = default_threads();
        out_ = o.out ? *o.out : cfg_.str("experiment.out", "levymlmc");
        hash_ = fnv1a(cfg_.serialize());
    }

    const ConfigFile& cfg() const { return cfg_; }
    std::uint64_t seed() const { return seed_; }
    unsigned threads() const { return threads_; }

    CsvWriter csv(const std::string& suffix, std::vector<std::string> columns, const std::string& kind) const {
        const std::filesystem::path p(out_ + "_" + suffix + ".csv");
        if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
        std::cout << "  writing " << p.string() << '\n';
        return CsvWriter(p.string(), std::move(columns), CsvMeta{seed_, hash_, kind});
    }

  private:
    ConfigFile cfg_;
    std::uint64_t seed_ = 1;
    unsigned threads_ = 1;
    std::string out_;
    std::uint64_t hash_ = 0;
};

inline DriftMode drift_mode(const ConfigFile& c, const std::string& key, const std::string& def) {
    const std::string v = c.str(key, def);
    if (v == "given") return DriftMode::given;
    if (v == "martingale") return DriftMode::martingale;
    if (v == "exponential") return DriftMode::exponential;
    c.fail(key, "drift must be given, martingale or exponential");
}

inline SamplerKind sampler_kind(const ConfigFile& c) {
    const std::string v = c.str("grid.sampler", "alias");
    if (v == "alias") return SamplerKind::alias;
    if (v == "tree") return SamplerKind::tree;
    c.fail("grid.sampler", "sampler must be alias or tree");
}

/// Grid block at step h. R = auto picks the mass-based truncation at h_fine, then
/// rounds it up to a multiple of `align`.
inline GridSpec grid_spec(const ConfigFile& c, const JumpMeasure& m, double h, double h_fine, double align) {
    GridSpec g;
    g.h = h;
    g.d = m.dim();
    g.V = 1.0;
    g.sampler = sampler_kind(c);
    g.state_cap = c.get<std::uint64_t>("grid.state_cap", g.state_cap);
    g.subcells_K = c.get<int>("grid.panels", 0);
    double R;
    if (c.str("grid.R", "auto") == "auto") {
        R = choose_truncation_by_mass(m, h_fine, c.get<double>("grid.mass_ratio", 0.99999));
    } else {
        R = c.get<double>("grid.R");
        if (!(R > 0.0)) c.fail("grid.R", "R must be positive");
    }
    g.R = std::ceil(R / align - 1e-9) * align;
    return g;
}

inline Payoff payoff_from_config(const ConfigFile& c, const JumpMeasure& m) {
    const std::string type = c.str("payoff.type");
    const Market mk{c.get<double>("payoff.spot", 100.0), c.get<double>("payoff.rate", 0.0),
                    c.get<double>("payoff.maturity", 1.0)};
    const double K = c.get<double>("payoff.strike", mk.S0);
    if (type == "put") {
        if (m.dim() != 1) c.fail("payoff.type", "put needs a single margin");
        return put_payoff(K, mk);
    }
    if (type == "best_of_put") return best_of_put_payoff(K / mk.S0, m.dim(), mk);
    if (type == "asian_call") {
        if (m.dim() != 1) c.fail("payoff.type", "asian_call needs a single margin");
        return asian_call_payoff(K, c.get<std::size_t>("payoff.n_obs", 12), mk);
    }
    if (type == "geometric_sde") {
        if (m.dim() != 1) c.fail("payoff.type", "geometric_sde needs a single margin");
        return sde_endpoint_payoff(geometric_sde(c.get<double>("payoff.z0", 1.0)), m.bg_index(), mk.T,
                                   c.get<double>("payoff.eps_scale", 1.0));
    }
    c.fail("payoff.type", "unknown payoff type '" + type + "' (put, best_of_put, asian_call, geometric_sde)");
}

inline std::string default_drift(const ConfigFile& c) {
    const std::string t = c.str("payoff.type", "");
    return t == "geometric_sde" ? "martingale" : "exponential";
}

inline MLMCConfig mlmc_config(const ConfigFile& c) {
    MLMCConfig m;
    m.eps = c.get<double>("mlmc.eps", m.eps);
    m.pilot_paths = c.get<std::uint64_t>("mlmc.pilot", m.pilot_paths);
    m.min_levels = c.get<int>("mlmc.min_levels", m.min_levels);
    m.max_levels = c.get<int>("mlmc.max_levels", m.max_levels);
    m.theta_stat = c.get<double>("mlmc.theta_stat", m.theta_stat);
    if (c.has("mlmc.D_B")) m.D_B = c.get<double>("mlmc.D_B");
    return m;
}

inline LevelEngine make_engine(const Context& ctx, const JumpMeasure& m, Payoff payoff, double T, DriftMode drift,
                               int finest_level) {
    const ConfigFile& c = ctx.cfg();
    const double h0 = c.get<double>("grid.h");
    if (!(h0 > 0.0)) c.fail("grid.h", "h must be positive");
    LevelProblem p{make_triplet(m)};
    p.drift = drift;
    p.T = T;
    p.h0 = h0;
    p.grid = grid_spec(c, m, h0, std::ldexp(h0, -finest_level), h0);
    p.payoff = std::move(payoff);
    return LevelEngine(std::move(p), ctx.seed(), ctx.threads(), c.flag("mlmc.verify_coupling", true));
}

inline std::shared_ptr<const JumpTable> single_table(const ConfigFile& c, const JumpMeasure& m, double h) {
    const GridSpec g = grid_spec(c, m, h, h, h);
    return std::make_shared<const JumpTable>(build_jump_table(m, g));
}

// ----------------------------------------------------------------------------

inline int run_price(const Context& ctx) {
    const ConfigFile& c = ctx.cfg();
    const JumpMeasure m = measure_from_config(c);
    const Payoff pay = payoff_from_config(c, m);
    const double h = c.get<double>("grid.h");
    const auto table = single_table(c, m, h);
    const auto proc = make_process(make_triplet(m), table, c.get<double>("payoff.maturity", 1.0),
                                   drift_mode(c, "payoff.drift", default_drift(c)));
    const auto n = c.get<std::uint64_t>("mc.paths", 100000);
    const MCResult r = mc_estimate(pay, proc, n, ctx.seed(), ctx.threads());
    auto w = ctx.csv("price", {"payoff", "h", "R", "states", "total_rate", "paths", "nonfinite", "estimate", "stderr",
                               "variance", "cost_per_path"},
                     "price");
    w.row({pay.name, h, table->R, std::uint64_t(table->size()), table->total_rate, r.n, r.nonfinite, r.estimate,
           r.stderr_, r.variance, static_cast<double>(r.ops.total()) / static_cast<double>(n)});
    std::printf("price %s: %.8g +- %.3g (%llu paths, %.2fs)\n", pay.name.c_str(), r.estimate, r.stderr_,
                static_cast<unsigned long long>(r.n), r.wall_seconds);
    return 0;
}

inline int run_mlmc_run(const Context& ctx) {
    const ConfigFile& c = ctx.cfg();
    const JumpMeasure m = measure_from_config(c);
    const MLMCConfig mc = mlmc_config(c);
    LevelEngine eng = make_engine(ctx, m, payoff_from_config(c, m), c.get<double>("payoff.maturity", 1.0),
                                  drift_mode(c, "payoff.drift", default_drift(c)), mc.max_levels);
    const MLMCReport r = run_mlmc(eng, mc);
    auto lv = ctx.csv("mlmc_levels", {"level", "h", "n", "mean", "var", "cost", "mean_fine", "var_fine", "fine_cost"},
                      "mlmc-run");
    for (const auto& l : r.levels)
        lv.row({std::int64_t(l.level), l.h, l.n, l.mean, l.var, l.cost, l.mean_fine, l.var_fine, l.fine_cost});
    auto s = ctx.csv("mlmc", {"eps", "estimate", "bias", "stat_error", "mse", "total_cost", "mc_proxy_cost", "levels",
                              "level_cap", "converged"},
                     "mlmc-run");
    s.row({r.eps, r.estimate, r.bias, r.stat_error, r.mse, r.total_cost, r.mc_proxy_cost, std::int64_t(r.L),
           std::int64_t(r.level_cap), std::int64_t(r.converged)});
    std::printf("mlmc: %.8g (bias %.3g, stat %.3g, L=%d, %s, %.2fs)\n", r.estimate, r.bias, r.stat_error, r.L,
                r.converged ? "converged" : "NOT converged", r.wall_seconds);
    return 0;
}

inline int run_diagnostics(const Context& ctx) {
    const ConfigFile& c = ctx.cfg();
    const JumpMeasure m = measure_from_config(c);
    const int L = c.get<int>("mlmc.levels", 5);
    LevelEngine eng = make_engine(ctx, m, payoff_from_config(c, m), c.get<double>("payoff.maturity", 1.0),
                                  drift_mode(c, "payoff.drift", default_drift(c)), L);
    const DiagnosticsTable t = level_diagnostics(eng, L, c.get<std::uint64_t>("mlmc.paths", 100000));
    auto w = ctx.csv("diagnostics",
                     {"level", "log2_var_Pl", "log2_var_diff", "log2_mean_Pl", "log2_mean_diff", "cost"},
                     "mlmc-diagnostics");
    for (const auto& r : t.rows)
        w.row({std::int64_t(r.level), r.log2_var_Pl, r.log2_var_diff, r.log2_mean_Pl, r.log2_mean_diff, r.cost});
    const double beta = eng.beta();
    char buf[256];
    std::snprintf(buf, sizeof buf, "var_slope=%.6g var_slope_se=%.3g reference=%.6g", t.var_slope.slope,
                  t.var_slope.stderr_, -(2.0 - beta));
    w.comment(buf);
    std::printf("  %s\n", buf);
    std::snprintf(buf, sizeof buf, "mean_slope=%.6g mean_slope_se=%.3g reference=%.6g", t.mean_slope.slope,
                  t.mean_slope.stderr_, -(1.0 - beta / 2.0));
    w.comment(buf);
    std::printf("  %s\n", buf);
    return 0;
}

inline int run_cost_curve(const Context& ctx) {
    const ConfigFile& c = ctx.cfg();
    const JumpMeasure m = measure_from_config(c);
    const MLMCConfig mc = mlmc_config(c);
    const auto eps = c.list<double>("mlmc.eps_list");
    if (eps.empty()) c.fail("mlmc.eps_list", "cost curve needs mlmc.eps_list");
    LevelEngine eng = make_engine(ctx, m, payoff_from_config(c, m), c.get<double>("payoff.maturity", 1.0),
                                  drift_mode(c, "payoff.drift", default_drift(c)), mc.max_levels);
    const auto pts = cost_curve(eng, eps, mc);
    auto w = ctx.csv("cost", {"eps", "levels", "total_cost", "mc_proxy_cost", "eps2_cost"}, "mlmc-cost-curve");
    for (const auto& p : pts) w.row({p.eps, std::int64_t(p.levels), p.total_cost, p.mc_proxy_cost, p.eps2_cost});
    char buf[128];
    std::snprintf(buf, sizeof buf, "reference_exponent=%.6g", cost_reference_exponent(eng.beta()));
    w.comment(buf);
    auto n = ctx.csv("cost_levels", {"eps", "level", "N"}, "mlmc-cost-curve");
    for (const auto& p : pts)
        for (std::size_t l = 0; l < p.N.size(); ++l) n.row({p.eps, std::int64_t(l), p.N[l]});
    for (const auto& p : pts)
        std::printf("  eps=%g L=%d cost=%.4g proxy=%.4g\n", p.eps, p.levels, p.total_cost, p.mc_proxy_cost);
    return 0;
}

// ----------------------------------------------------------------------------
// Credit: single-name CDS and two-name first-to-default.

namespace detail {

struct SpreadRow {
    SpreadEstimate mc;
    double survival_closed = 0.0;
};

// FtD spread with the single-name residuals dl_j − s_j·A_j (mean zero) as controls.
inline SpreadEstimate ftd_with_controls(const Vector& dl, const Vector& ann, const Vector& surv, const Matrix& X,
                                        std::size_t pilot) {
    SpreadEstimate e = spread_from_legs(dl, ann, surv);
    const auto n = dl.size();
    const Eigen::Index m = n - static_cast<Eigen::Index>(pilot);
    const double s = dl.tail(m).mean() / ann.tail(m).mean();
    const Vector y = dl - s * ann;
    const auto fit = control_variate(y, X, Vector::Zero(X.cols()), pilot);
    const double ma = ann.tail(m).mean();
    e.spread = s + fit.estimate / ma;
    e.stderr_ = fit.stderr_ / ma;
    e.lo99 = e.spread - kZ99 * e.stderr_;
    e.hi99 = e.spread + kZ99 * e.stderr_;
    return e;
}

}  // namespace detail

inline int run_credit(const Context& ctx) {
    const ConfigFile& c = ctx.cfg();
    const JumpMeasure m = measure_from_config(c);
    const std::string product = c.str("credit.product", "cds");
    const double rec = c.get<double>("credit.recovery", 0.4);
    const double r = c.get<double>("credit.rate", 0.0);
    const double T = c.get<double>("credit.maturity", 0.5);
    const auto spreads = c.list<double>("credit.spreads_bps");
    if (spreads.empty()) c.fail("credit.spreads_bps", "no spreads given");
    const auto n = c.get<std::uint64_t>("credit.paths", 100000);
    const double h = c.get<double>("grid.h");
    const auto table = single_table(c, m, h);
    const auto proc = make_process(make_triplet(m), table, T, DriftMode::given);
    PathRequest req;
    req.mode = PathMode::times;
    const std::size_t names = m.dim();
    if (product == "cds" && names != 1) c.fail("credit.product", "cds needs a single margin");
    if (product == "ftd" && names != 2) c.fail("credit.product", "ftd needs exactly two margins");
    if (product != "cds" && product != "ftd") c.fail("credit.product", "product must be cds or ftd");

    // Thresholds per spread and name: each name's own CDS spread implies its level.
    std::vector<std::vector<DefaultThreshold>> th(spreads.size());
    std::vector<std::vector<double>> levels(spreads.size());
    for (std::size_t k = 0; k < spreads.size(); ++k) {
        const double lam = spreads[k] * 1e-4 / (1.0 - rec);
        for (std::size_t j = 0; j < names; ++j) {
            const double a = threshold_for_intensity(m.margin(j), lam);
            levels[k].push_back(a);
            th[k].push_back(snap_threshold(a, table->h));
        }
    }
    // Name j alone: the other names get an unreachable edge.
    const auto only = [&](const std::vector<DefaultThreshold>& tk, std::size_t j) {
        std::vector<DefaultThreshold> masked(names, DefaultThreshold{0, table->h, std::numeric_limits<std::int64_t>::min()});
        masked[j] = tk[j];
        return masked;
    };
    std::vector<std::function<double(const PathSkeleton&)>> fns;
    for (std::size_t k = 0; k < spreads.size(); ++k) {
        auto tk = th[k];
        fns.push_back([tk](const PathSkeleton& s) { return first_default_time(s, tk); });
        if (product == "ftd")
            for (std::size_t j = 0; j < names; ++j)
                fns.push_back([masked = only(tk, j)](const PathSkeleton& s) { return first_default_time(s, masked); });
    }
    const Matrix tau = sample_matrix(req, fns, proc, n, ctx.seed(), ctx.threads());
    const bool cv = product == "ftd" && c.flag("credit.control_variates", true);
    const std::size_t pilot = c.get<std::size_t>("credit.pilot", n / 10);

    std::vector<std::string> cols = {"input_spread_bps"};
    for (std::size_t j = 0; j < names; ++j) cols.push_back(names == 1 ? "level_a" : "level_a" + std::to_string(j + 1));
    for (const char* s : {"lattice_level", "survival_probability", "theoretical_spread_bps", "mc_spread_bps",
                          "stderr_bps", "ci99_lo_bps", "ci99_hi_bps", "in_ci99", "mc_survival", "mc_survival_stderr",
                          "paths"})
        cols.emplace_back(s);
    auto w = ctx.csv(product, cols, "credit");
    const std::size_t stride = product == "ftd" ? 1 + names : 1;
    int misses = 0;
    for (std::size_t k = 0; k < spreads.size(); ++k) {
        const auto col = static_cast<Eigen::Index>(k * stride);
        Vector dl(n), ann(n), surv(n);
        Matrix X(n, static_cast<Eigen::Index>(names));
        const double lam_lat = lattice_default_intensity(*table, th[k]);
        std::vector<double> single_lat(names);
        for (std::size_t j = 0; j < names; ++j)
            single_lat[j] = lattice_default_intensity(*table, only(th[k], j));
        for (std::uint64_t i = 0; i < n; ++i) {
            const auto [d, a] = cds_path_legs(tau(i, col), T, r, rec);
            dl(i) = d;
            ann(i) = a;
            surv(i) = tau(i, col) > T ? 1.0 : 0.0;
            if (product == "ftd")
                for (std::size_t j = 0; j < names; ++j) {
                    const auto [dj, aj] = cds_path_legs(tau(i, col + 1 + j), T, r, rec);
                    X(i, j) = dj - fair_spread(single_lat[j], rec) * aj;
                }
        }
        const SpreadEstimate e = cv ? detail::ftd_with_controls(dl, ann, surv, X, pilot) : spread_from_legs(dl, ann, surv);
        const double theo = fair_spread(lam_lat, rec);
        const bool in = e.lo99 <= theo && theo <= e.hi99;
        misses += in ? 0 : 1;
        std::vector<CsvCell> row = {spreads[k]};
        for (double a : levels[k]) row.emplace_back(a);
        row.insert(row.end(), {th[k][0].snapped(), std::exp(-lam_lat * T), theo * 1e4, e.spread * 1e4,
                               e.stderr_ * 1e4, e.lo99 * 1e4, e.hi99 * 1e4, std::int64_t(in), e.survival,
                               e.survival_stderr, n});
        w.row(row);
        std::printf("  %s %g bps: theoretical %.4f, MC %.4f [%.4f, %.4f]%s\n", product.c_str(), spreads[k], theo * 1e4,
                    e.spread * 1e4, e.lo99 * 1e4, e.hi99 * 1e4, in ? "" : "  (outside the 99% interval)");
    }
    if (misses) std::printf("  %d of %zu theoretical spreads fall outside the 99%% interval\n", misses, spreads.size());
    return 0;
}

// ----------------------------------------------------------------------------

inline Matrix parse_rows(const ConfigFile& c, const std::string& key) {
    std::vector<std::string> rows;
    const std::string s = c.str(key);
    boost::split(rows, s, boost::is_any_of(";"));
    std::vector<std::vector<double>> v;
    for (const auto& r : rows) {
        std::vector<std::string> parts;
        const std::string t = boost::trim_copy(r);
        if (t.empty()) continue;
        boost::split(parts, t, boost::is_any_of(","));
        v.emplace_back();
        for (const auto& p : parts) {
            try {
                v.back().push_back(std::stod(boost::trim_copy(p)));
            } catch (const std::exception&) {
                c.fail(key, "cannot read '" + p + "'");
            }
        }
        if (v.back().size() != v.front().size()) c.fail(key, "rows have different lengths");
    }
    if (v.empty()) c.fail(key, "empty matrix");
    Matrix M(v.size(), v.front().size());
    for (std::size_t i = 0; i < v.size(); ++i)
        for (std::size_t j = 0; j < v[i].size(); ++j) M(i, j) = v[i][j];
    return M;
}

inline SwaptionSpec swaption_from_config(const ConfigFile& c, const JumpMeasure& m) {
    SwaptionSpec sw;
    sw.fmm.tenor = c.list<double>("fmm.tenor");
    if (sw.fmm.tenor.size() < 2) c.fail("fmm.tenor", "need at least two tenor dates");
    const auto r0 = c.list<double>("fmm.R0");
    const std::size_t n = sw.fmm.tenor.size() - 1;
    if (r0.size() == 1) sw.fmm.R0 = Vector::Constant(n, r0[0]);
    else if (r0.size() == n) sw.fmm.R0 = Eigen::Map<const Vector>(r0.data(), n);
    else c.fail("fmm.R0", "give one flat rate or one rate per period");
    sw.fmm.sigma = parse_rows(c, "fmm.sigma");
    if (static_cast<std::size_t>(sw.fmm.sigma.cols()) != m.dim())
        c.fail("fmm.sigma", "sigma needs one column per driver margin");
    try {
        sw.fmm.validate();
    } catch (const ConfigError& e) {
        c.fail("fmm.tenor", e.what());
    }
    sw.strike = c.get<double>("fmm.strike", sw.fmm.R0(0));
    sw.discount = c.get<double>("fmm.discount", 1.0);
    sw.beta = m.bg_index();
    sw.eps_scale = c.get<double>("fmm.eps_scale", 1.0);
    return sw;
}

inline int run_fmm(const Context& ctx) {
    const ConfigFile& c = ctx.cfg();
    const JumpMeasure m = measure_from_config(c);
    const SwaptionSpec sw = swaption_from_config(c, m);
    const double expiry = sw.fmm.tenor.front();
    const std::string method = c.str("fmm.method", "mc");
    auto w = ctx.csv("fmm", {"method", "estimate", "stderr", "bias", "paths", "levels", "total_cost"}, "fmm");
    if (method == "mc") {
        const double h = c.get<double>("grid.h");
        const auto table = single_table(c, m, h);
        const auto proc = make_process(make_triplet(m), table, expiry, DriftMode::martingale);
        const auto n = c.get<std::uint64_t>("fmm.paths", 100000);
        const MCResult r = mc_estimate(swaption_payoff(sw), proc, n, ctx.seed(), ctx.threads());
        w.row({method, r.estimate, r.stderr_, std::numeric_limits<double>::quiet_NaN(), r.n, std::int64_t(0),
               static_cast<double>(r.ops.total())});
        std::printf("swaption (mc, h=%g): %.8g +- %.3g\n", h, r.estimate, r.stderr_);
    } else if (method == "mlmc") {
        const MLMCConfig mc = mlmc_config(c);
        LevelEngine eng = make_engine(ctx, m, swaption_payoff(sw), expiry, DriftMode::martingale, mc.max_levels);
        const MLMCReport r = run_mlmc(eng, mc);
        std::uint64_t paths = 0;
        for (const auto& l : r.levels) paths += l.n;
        w.row({method, r.estimate, r.stat_error, r.bias, paths, std::int64_t(r.L), r.total_cost});
        std::printf("swaption (mlmc, eps=%g): %.8g +- %.3g, L=%d\n", r.eps, r.estimate, r.stat_error, r.L);
    } else {
        c.fail("fmm.method", "method must be mc or mlmc");
    }
    return 0;
}

// ----------------------------------------------------------------------------

inline int run_verify_coupling(const Context& ctx) {
    const ConfigFile& c = ctx.cfg();
    const JumpMeasure m = measure_from_config(c);
    const double h = c.get<double>("grid.h");
    const GridSpec gf = grid_spec(c, m, h, h, 2.0 * h);
    GridSpec gc = gf;
    gc.h = 2.0 * h;
    const JumpTable fine = build_jump_table(m, gf), coarse = build_jump_table(m, gc);
    const MarkTable mt = build_mark_table(fine, m);
    const auto rep = verify_rate_identity(fine, coarse, m, mt, c.get<double>("coupling.tol", 1e-10));
    auto w = ctx.csv("coupling", {"cell", "pieces", "coarse", "induced", "rel_error", "ok"}, "verify-coupling");
    for (const auto& cell : rep.cells) {
        std::string z;
        for (std::size_t j = 0; j < cell.z.size(); ++j) z += (j ? ":" : "") + std::to_string(cell.z[j]);
        w.row({z, cell.pieces, cell.coarse, cell.induced, cell.rel_error, std::int64_t(cell.ok)});
    }
    std::printf("%s: %zu coarse cells, max relative error %.3g, %zu failed\n", rep.passed ? "PASS" : "FAIL",
                rep.cells.size(), rep.max_rel_error, rep.failed_cells);
    return rep.passed ? 0 : 1;
}

inline int run_kind(const std::string& kind, const Context& ctx) {
    std::cout << "[" << kind << "]\n";
    if (kind == "price") return run_price(ctx);
    if (kind == "mlmc-run") return run_mlmc_run(ctx);
    if (kind == "mlmc-diagnostics") return run_diagnostics(ctx);
    if (kind == "mlmc-cost-curve") return run_cost_curve(ctx);
    if (kind == "credit") return run_credit(ctx);
    if (kind == "fmm") return run_fmm(ctx);
    if (kind == "verify-coupling") return run_verify_coupling(ctx);
    ctx.cfg().fail("experiment.experiments", "unknown experiment '" + kind + "'");
}

/// Experiments listed in [experiment]; an empty list runs nothing.
inline int run_all(const Context& ctx) {
    const ConfigFile& c = ctx.cfg();
    std::vector<std::string> kinds = c.list<std::string>("experiment.experiments");
    if (kinds.empty() && c.has("experiment.kind")) kinds.push_back(c.str("experiment.kind"));
    int rc = 0;
    for (const auto& k : kinds) rc = std::max(rc, run_kind(k, ctx));
    return rc;
}

}  // namespace levymlmc::cli
