#include "eflux/experiment.hpp"

#include <Eigen/Core>
#include <boost/version.hpp>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "eflux/csv.hpp"
#include "eflux/errors.hpp"
#include "eflux/hopf_lax_core.hpp"
#include "eflux/rng.hpp"
#include "json.hpp"

#ifndef EFLUX_VERSION
#define EFLUX_VERSION "unknown"
#endif

namespace eflux {

using json = nlohmann::ordered_json;

namespace {

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Strict reader over one JSON object: every key must be consumed.
class Reader {
public:
    Reader(const json& node, std::string path) : node_(node), path_(std::move(path))
    {
        if (!node_.is_object())
            fail("", "expected an object");
    }

    bool has(const std::string& key) const { return node_.contains(key); }

    const json& raw(const std::string& key)
    {
        used_.insert(key);
        return node_.at(key);
    }

    void number(const std::string& key, double& out)
    {
        if (!has(key))
            return;
        const json& v = raw(key);
        if (!v.is_number())
            fail(key, "expected a number");
        out = v.get<double>();
        if (!std::isfinite(out))
            fail(key, "expected a finite number");
    }

    template <class Int>
    void integer(const std::string& key, Int& out)
    {
        if (!has(key))
            return;
        const json& v = raw(key);
        if (!v.is_number_integer())
            fail(key, "expected an integer");
        if constexpr (std::is_unsigned_v<Int>) {
            if (!v.is_number_unsigned())
                fail(key, "expected a nonnegative integer");
            out = static_cast<Int>(v.get<std::uint64_t>());
        } else {
            out = static_cast<Int>(v.get<std::int64_t>());
        }
    }

    void boolean(const std::string& key, bool& out)
    {
        if (!has(key))
            return;
        const json& v = raw(key);
        if (!v.is_boolean())
            fail(key, "expected true or false");
        out = v.get<bool>();
    }

    void string(const std::string& key, std::string& out)
    {
        if (!has(key))
            return;
        const json& v = raw(key);
        if (!v.is_string())
            fail(key, "expected a string");
        out = v.get<std::string>();
    }

    void numbers(const std::string& key, std::vector<double>& out)
    {
        if (!has(key))
            return;
        const json& v = raw(key);
        if (!v.is_array())
            fail(key, "expected an array of numbers");
        out.clear();
        for (const auto& e : v) {
            if (!e.is_number())
                fail(key, "expected an array of numbers");
            out.push_back(e.get<double>());
        }
    }

    void integers(const std::string& key, std::vector<int>& out)
    {
        if (!has(key))
            return;
        const json& v = raw(key);
        if (!v.is_array())
            fail(key, "expected an array of integers");
        out.clear();
        for (const auto& e : v) {
            if (!e.is_number_integer())
                fail(key, "expected an array of integers");
            out.push_back(static_cast<int>(e.get<std::int64_t>()));
        }
    }

    template <class F>
    void section(const std::string& key, F&& read)
    {
        if (!has(key))
            return;
        Reader sub(raw(key), path_ + key + ".");
        read(sub);
        sub.finish();
    }

    void finish() const
    {
        for (auto it = node_.begin(); it != node_.end(); ++it)
            if (!used_.count(it.key()))
                throw ConfigError("unknown key '" + path_ + it.key() + "'");
    }

    [[noreturn]] void fail(const std::string& key, const std::string& what) const
    {
        throw ConfigError("'" + path_ + key + "': " + what);
    }

private:
    const json& node_;
    std::string path_;
    std::set<std::string> used_;
};

template <class E>
E pick(Reader& r, const std::string& key, E current,
       const std::vector<std::pair<const char*, E>>& names)
{
    if (!r.has(key))
        return current;
    std::string s;
    r.string(key, s);
    for (const auto& [n, e] : names)
        if (s == n)
            return e;
    std::string allowed;
    for (const auto& [n, e] : names)
        allowed += std::string(allowed.empty() ? "" : ", ") + n;
    r.fail(key, "expected one of " + allowed);
}

template <class E>
const char* name_of(E e, const std::vector<std::pair<const char*, E>>& names)
{
    for (const auto& [n, v] : names)
        if (v == e)
            return n;
    return "?";
}

const std::vector<std::pair<const char*, ProcessKind>> kKinds{
    {"brownian_motion", ProcessKind::BrownianMotion},
    {"brownian_bridge", ProcessKind::BrownianBridge},
    {"ornstein_uhlenbeck", ProcessKind::OrnsteinUhlenbeck}};
const std::vector<std::pair<const char*, BridgeOutside>> kOutside{
    {"hold_constant", BridgeOutside::HoldConstant}, {"zero", BridgeOutside::Zero}};
const std::vector<std::pair<const char*, Method>> kMethods{
    {"quadrature", Method::Quadrature}, {"monte_carlo", Method::MonteCarlo}};
const std::vector<std::pair<const char*, FdScheme>> kSchemes{
    {"lax_friedrichs", FdScheme::LaxFriedrichs}, {"engquist_osher", FdScheme::EngquistOsher}};
const std::vector<std::pair<const char*, FdBoundary>> kBoundaries{
    {"outflow", FdBoundary::Outflow}, {"periodic", FdBoundary::Periodic}};

FluxSpec read_flux(Reader& r)
{
    std::string variant;
    r.string("variant", variant);
    if (variant == "polygonal") {
        PolygonalFlux f;
        r.numbers("slopes", f.slopes);
        r.numbers("breakpoints", f.breakpoints);
        r.number("offset", f.offset);
        if (r.has("pivot") && !r.raw("pivot").is_null()) {
            double p = 0.0;
            r.number("pivot", p);
            f.pivot = p;
        }
        return f;
    }
    if (variant == "power_law") {
        PowerLawFlux f;
        r.number("j", f.j);
        return f;
    }
    if (variant == "absolute_value")
        return AbsoluteValueFlux{};
    r.fail("variant", "expected polygonal, power_law or absolute_value");
}

json write_flux(const FluxSpec& flux)
{
    json j;
    if (const auto* p = std::get_if<PolygonalFlux>(&flux)) {
        j["variant"] = "polygonal";
        j["slopes"] = p->slopes;
        j["breakpoints"] = p->breakpoints;
        j["offset"] = p->offset;
        j["pivot"] = p->pivot ? json(*p->pivot) : json(nullptr);
    } else if (const auto* p = std::get_if<PowerLawFlux>(&flux)) {
        j["variant"] = "power_law";
        j["j"] = p->j;
    } else {
        j["variant"] = "absolute_value";
    }
    return j;
}

void read_process(Reader& r, ProcessSpec& p)
{
    p.kind = pick(r, "kind", p.kind, kKinds);
    r.boolean("integrated", p.integrated);
    r.number("anchor", p.anchor);
    std::vector<double> domain{p.domain_lo, p.domain_hi};
    r.numbers("domain", domain);
    if (domain.size() != 2)
        r.fail("domain", "expected [lo, hi]");
    p.domain_lo = domain[0];
    p.domain_hi = domain[1];
    r.number("T", p.T);
    r.number("alpha", p.alpha);
    r.number("sigma", p.sigma);
    r.numbers("drift", p.drift);
    p.outside = pick(r, "outside", p.outside, kOutside);
}

json write_process(const ProcessSpec& p)
{
    json j;
    j["kind"] = name_of(p.kind, kKinds);
    j["integrated"] = p.integrated;
    j["anchor"] = p.anchor;
    j["domain"] = {p.domain_lo, p.domain_hi};
    j["T"] = p.T;
    j["alpha"] = p.alpha;
    j["sigma"] = p.sigma;
    j["drift"] = p.drift;
    j["outside"] = name_of(p.outside, kOutside);
    return j;
}

std::string csv_header(const std::string& csv)
{
    return csv.substr(0, csv.find('\n'));
}

std::vector<std::string> split_columns(const std::string& header)
{
    std::vector<std::string> cols;
    std::stringstream ss(header);
    std::string c;
    while (std::getline(ss, c, ','))
        cols.push_back(c);
    return cols;
}

QuadratureOptions quad_options(const RunConfig& c)
{
    QuadratureOptions o;
    o.tolerance = c.run.tolerance;
    return o;
}

std::string plot_preamble(const std::string& name)
{
    return "set datafile separator ','\nset key autotitle columnhead\nset terminal pngcairo size "
           "900,600\nset output '" +
           name + ".png'\nset grid\n";
}

// ---- runners ----

RunOutput run_sample_path(const RunConfig& c)
{
    const auto& s = c.sample_path;
    if (!(s.dy > 0.0) || !(s.hi > s.lo))
        throw DomainError("sample_path needs lo < hi and dy > 0");
    const auto n = static_cast<std::size_t>(std::llround((s.hi - s.lo) / s.dy)) + 1;
    std::vector<double> pts(n);
    for (std::size_t k = 0; k < n; ++k)
        pts[k] = s.lo + static_cast<double>(k) * s.dy;
    RngStream rng = RngStream::derive(c.run.seed, 0);
    const auto path = sample_path(c.process, pts, rng);
    std::ostringstream out;
    out << "y,g,gprime\n";
    for (std::size_t k = 0; k < path.points.size(); ++k)
        out << num(path.points[k]) << ',' << num(path.g[k]) << ',' << num(path.gprime[k]) << '\n';
    return {out.str(), "{}",
            plot_preamble("sample-path") +
                "plot 'sample-path.csv' using 1:2 with lines, '' using 1:3 with lines\n"};
}

RunOutput run_solve(const RunConfig& c)
{
    const double x = c.grid.x, t = c.grid.t;
    RngStream rng = RngStream::derive(c.run.seed, 0);
    std::ostringstream out;
    out << "x,t,y_star,w,location_class,location_index,truncated\n";
    json summary;
    if (const auto* pl = std::get_if<PowerLawFlux>(&c.flux)) {
        const auto& s = c.sample_path;
        const auto n = static_cast<std::size_t>(std::llround((s.hi - s.lo) / s.dy)) + 1;
        std::vector<double> pts(n);
        for (std::size_t k = 0; k < n; ++k)
            pts[k] = s.lo + static_cast<double>(k) * s.dy;
        const auto sol = solve_power_law(*pl, dense_path(sample_path(c.process, pts, rng)), x, t);
        out << num(x) << ',' << num(t) << ',' << num(sol.result.y_star) << ','
            << num(sol.result.w) << ",dense,0," << (sol.truncated ? 1 : 0) << '\n';
    } else {
        const auto grid = build_grid(c.flux, x, t, c.grid.counts);
        const auto path = restrict_path(grid, sample_path(c.process, grid.points, rng));
        const auto r = solve_path(grid, path);
        out << num(x) << ',' << num(t) << ',' << num(r.y_star) << ',' << num(r.w) << ','
            << location_name(r.location) << ',' << location_index(r.location) << ",0\n";
        summary["candidates"] = grid.size();
    }
    return {out.str(), summary.dump(),
            plot_preamble("solve") + "plot 'solve.csv' using 3:4 with points pt 7\n"};
}

RunOutput run_scan(const RunConfig& c)
{
    RngStream rng = RngStream::derive(c.run.seed, 0);
    const auto profile =
        scan_x(c.flux, c.process, c.grid.t, c.grid.x_lo, c.grid.x_hi, c.grid.dx, rng, c.grid.counts);
    json summary;
    summary["shock_count"] = profile.shock_count();
    summary["points"] = profile.points.size();
    return {profile_csv(profile), summary.dump(),
            plot_preamble("scan") + "plot 'scan.csv' using 1:2 with steps\n"};
}

RunOutput run_segment_probs(const RunConfig& c)
{
    const auto probs =
        c.run.method == Method::MonteCarlo
            ? segment_probabilities_mc(c.flux, c.process, c.grid.x, c.grid.t, c.grid.counts,
                                       c.run.trials, c.run.seed)
            : segment_probabilities_quadrature(c.flux, c.process, c.grid.x, c.grid.t,
                                               c.grid.counts, quad_options(c));
    const int n = probs.segments();
    std::ostringstream out;
    out << "kind,index,probability,probability_se,contribution,contribution_se\n";
    double total = 0.0;
    for (int i = 0; i < 2 * n + 1; ++i) {
        const auto k = static_cast<std::size_t>(i);
        total += probs.p[k];
        if (i < n) {
            const double w = probs.segment_values[k];
            out << "segment," << i + 1 << ',' << num(probs.p[k]) << ',' << num(probs.se[k]) << ','
                << num(probs.p[k] * w) << ',' << num(probs.se[k] * std::abs(w)) << '\n';
        } else {
            const auto v = static_cast<std::size_t>(i - n);
            out << "vertex," << i - n + 1 << ',' << num(probs.p[k]) << ',' << num(probs.se[k])
                << ',' << num(probs.vertex_terms[v]) << ',' << num(probs.vertex_terms_se[v])
                << '\n';
        }
    }
    out << "expected_w,0," << num(total) << ",0," << num(probs.expected_w) << ','
        << num(probs.expected_w_se) << '\n';
    json summary;
    summary["expected_w"] = probs.expected_w;
    summary["expected_w_se"] = probs.expected_w_se;
    summary["slope_average"] = expected_slope_average(probs);
    summary["method"] = name_of(probs.method, kMethods);
    summary["trials"] = probs.trials;
    return {out.str(), summary.dump(),
            plot_preamble("segment-probs") +
                "set style fill solid 0.5\nplot 'segment-probs.csv' using "
                "0:3:xtic(stringcolumn(1).stringcolumn(2)) with boxes\n"};
}

RunOutput run_cdf(const RunConfig& c)
{
    const CdfTarget target{c.cdf.vertex, c.cdf.index - 1};
    const auto curve = minimum_cdf(c.flux, c.process, c.grid.x, c.grid.t, c.grid.counts, target,
                                   c.cdf.s, c.run.method, c.run.trials, c.run.seed, quad_options(c));
    std::ostringstream out;
    out << "s,F,se\n";
    for (std::size_t k = 0; k < curve.s.size(); ++k)
        out << num(curve.s[k]) << ',' << num(curve.values[k]) << ',' << num(curve.se[k]) << '\n';
    return {out.str(), "{}", plot_preamble("cdf") + "plot 'cdf.csv' using 1:2:3 with yerrorlines\n"};
}

RunOutput run_shock_density(const RunConfig& c)
{
    const auto r = c.run.method == Method::MonteCarlo
                       ? shock_density_mc(c.flux, c.process, c.grid.x, c.grid.t, c.grid.counts,
                                          c.shock_density.dx, c.run.trials, c.run.seed)
                       : shock_density_quadrature(c.flux, c.process, c.grid.x, c.grid.t,
                                                  c.grid.counts, quad_options(c));
    std::ostringstream out;
    out << "from_kind,from_index,to_kind,to_index,density,se\n";
    auto dump = [&](const char* a, const char* b, const Eigen::MatrixXd& m,
                    const Eigen::MatrixXd& se) {
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j)
                out << a << ',' << i + 1 << ',' << b << ',' << j + 1 << ',' << num(m(i, j)) << ','
                    << num(se.size() ? se(i, j) : 0.0) << '\n';
    };
    dump("segment", "segment", r.segment_to_segment, r.segment_to_segment_se);
    dump("segment", "vertex", r.segment_to_vertex, r.segment_to_vertex_se);
    dump("vertex", "segment", r.vertex_to_segment, r.vertex_to_segment_se);
    out << "total,0,total,0," << num(r.total_density) << ',' << num(r.total_density_se) << '\n';
    json summary;
    summary["total_density"] = r.total_density;
    summary["total_density_se"] = r.total_density_se;
    summary["segment_y_slopes"] = r.d;
    summary["method"] = name_of(r.method, kMethods);
    return {out.str(), summary.dump(),
            plot_preamble("shock-density") +
                "set style fill solid 0.5\nplot 'shock-density.csv' using 0:5 with boxes\n"};
}

RunOutput run_spectrum(const RunConfig& c)
{
    std::ostringstream out;
    out << "n,median_unit,median_literal,reference,fraction_within_1pct,top_to_middle_ratio,"
           "unit_matches,literal_matches\n";
    for (int n : c.spectrum.n) {
        const auto r = spectrum_report(n);
        out << n << ',' << num(r.median) << ',' << num(r.median_literal) << ','
            << num(r.reference) << ',' << num(r.fraction_within_1pct) << ','
            << num(r.top_to_middle_ratio) << ',' << (r.unit_matches ? 1 : 0) << ','
            << (r.literal_matches ? 1 : 0) << '\n';
    }
    return {out.str(), "{}",
            plot_preamble("spectrum") + "plot 'spectrum.csv' using 1:2 with linespoints\n"};
}

RunOutput run_variance_law(const RunConfig& c)
{
    const auto* pl = std::get_if<PowerLawFlux>(&c.flux);
    if (!pl)
        throw DomainError("variance-law needs a power_law flux");
    const auto& v = c.variance_law;
    const auto r = variance_law(*pl, c.process, c.grid.x, c.grid.t, c.run.trials, c.run.seed,
                                v.t_grid, v.lo, v.hi, v.dy);
    std::ostringstream out;
    out << "quantity,t,value,se\n";
    const std::string t = num(c.grid.t);
    out << "var_w," << t << ',' << num(r.var_w) << ',' << num(r.var_w_se) << '\n';
    out << "var_transformed," << t << ',' << num(r.var_transformed) << ",0\n";
    out << "relative_residual," << t << ',' << num(r.residual) << ",0\n";
    out << "truncated," << t << ',' << r.truncated << ",0\n";
    for (std::size_t k = 0; k < r.t_grid.size(); ++k) {
        const std::string tk = num(r.t_grid[k]);
        out << "var_w0," << tk << ',' << num(r.var_w0[k]) << ",0\n";
        out << "mean_abs_y0," << tk << ',' << num(r.mean_abs_y0[k]) << ",0\n";
        out << "var_y0," << tk << ',' << num(r.var_y0[k]) << ",0\n";
    }
    out << "fit_p,0," << num(r.fit_p) << ",0\n";
    out << "fit_w_exponent,0," << num(r.fit_w_exponent) << ",0\n";
    return {out.str(), "{}",
            plot_preamble("variance-law") +
                "set logscale xy\nplot 'variance-law.csv' using 2:(strcol(1) eq 'var_w0' ? $3 : "
                "NaN) with linespoints title 'Var w(0,t)'\n"};
}

RunOutput run_converge(const RunConfig& c)
{
    const auto& v = c.converge;
    const auto r = convergence_study(v.x, v.t, v.levels, c.run.trials, c.run.seed, v.alpha);
    std::ostringstream out;
    out << "level,p_left,p_interior,p_right,total,left_diff_to_next\n";
    for (std::size_t k = 0; k < r.rows.size(); ++k) {
        const auto& row = r.rows[k];
        out << row.level << ',' << num(row.p_left) << ',' << num(row.p_interior) << ','
            << num(row.p_right) << ',' << num(row.p_left + row.p_interior + row.p_right) << ','
            << (k < r.successive_diff.size() ? num(r.successive_diff[k]) : std::string()) << '\n';
    }
    json summary;
    summary["tail_level"] = r.tail_level;
    summary["tail_alpha"] = r.tail_alpha;
    summary["tail_frequency"] = r.tail_frequency;
    summary["tail_bound"] = r.tail_bound;
    return {out.str(), summary.dump(),
            plot_preamble("converge") +
                "plot 'converge.csv' using 1:2 with linespoints, '' using 1:3 with linespoints, "
                "'' using 1:4 with linespoints\n"};
}

RunOutput run_fd_compare(const RunConfig& c)
{
    const auto* pl = std::get_if<PowerLawFlux>(&c.flux);
    if (!pl)
        throw DomainError("fd-compare needs a power_law flux");
    FdEnsembleOptions opt = c.fd_compare.ensemble;
    opt.seeds = static_cast<int>(c.run.trials);
    opt.seed = c.run.seed;
    const auto r = compare_with_hopf_lax(*pl, c.process, opt);
    std::ostringstream out;
    out << "t,tv_fd,tv_fd_se,tv_hl,tv_hl_se,var_fd,var_fd_se,var_hl,var_hl_se,l1,l1_se,truncated\n";
    for (const auto& row : r.rows)
        out << num(row.t) << ',' << num(row.tv_fd) << ',' << num(row.tv_fd_se) << ','
            << num(row.tv_hl) << ',' << num(row.tv_hl_se) << ',' << num(row.var_fd) << ','
            << num(row.var_fd_se) << ',' << num(row.var_hl) << ',' << num(row.var_hl_se) << ','
            << num(row.l1) << ',' << num(row.l1_se) << ',' << row.truncated << '\n';

    json summary;
    summary["x0"] = r.x0;
    if (!c.fd_compare.convergence_dx.empty()) {
        const double two_pi = 2.0 * std::numbers::pi;
        auto g = [two_pi](double y) { return 0.5 * y - 0.25 / two_pi * std::cos(two_pi * y); };
        auto w = [two_pi](double y) { return 0.5 + 0.25 * std::sin(two_pi * y); };
        FdConfig base = opt.fd;
        base.boundary = FdBoundary::Periodic;
        const auto conv = fd_hopf_lax_convergence(*pl, g, w, 0.0, 1.0, c.fd_compare.convergence_t,
                                                  c.fd_compare.convergence_dx, base, -1.0, 2.0,
                                                  1e-5);
        json rows = json::array();
        for (const auto& row : conv.rows)
            rows.push_back({{"dx", row.dx}, {"l1", row.l1}, {"steps", row.steps}});
        summary["smooth_convergence"] = rows;
        summary["smooth_convergence_slope"] = conv.slope;
    }
    return {out.str(), summary.dump(),
            plot_preamble("fd-compare") +
                "plot 'fd-compare.csv' using 1:2:3 with yerrorlines, '' using 1:4:5 with "
                "yerrorlines, '' using 1:6:7 with yerrorlines, '' using 1:8:9 with yerrorlines\n"};
}

}  // namespace

RunConfig parse_config(const std::string& text)
{
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("malformed JSON: ") + e.what());
    }
    RunConfig c;
    Reader r(root, "");
    r.section("flux", [&](Reader& s) { c.flux = read_flux(s); });
    r.section("process", [&](Reader& s) { read_process(s, c.process); });
    r.section("grid", [&](Reader& s) {
        s.number("x", c.grid.x);
        s.number("t", c.grid.t);
        std::vector<double> range{c.grid.x_lo, c.grid.x_hi};
        s.numbers("x_range", range);
        if (range.size() != 2)
            s.fail("x_range", "expected [lo, hi]");
        c.grid.x_lo = range[0];
        c.grid.x_hi = range[1];
        s.number("dx", c.grid.dx);
        s.integers("counts", c.grid.counts);
    });
    r.section("run", [&](Reader& s) {
        s.integer("trials", c.run.trials);
        s.integer("seed", c.run.seed);
        c.run.method = pick(s, "method", c.run.method, kMethods);
        s.integer("threads", c.run.threads);
        s.string("outdir", c.run.outdir);
        s.number("tolerance", c.run.tolerance);
    });
    r.section("sample_path", [&](Reader& s) {
        s.number("lo", c.sample_path.lo);
        s.number("hi", c.sample_path.hi);
        s.number("dy", c.sample_path.dy);
    });
    r.section("cdf", [&](Reader& s) {
        std::string target = c.cdf.vertex ? "vertex" : "segment";
        s.string("target", target);
        if (target != "vertex" && target != "segment")
            s.fail("target", "expected segment or vertex");
        c.cdf.vertex = target == "vertex";
        s.integer("index", c.cdf.index);
        s.numbers("s", c.cdf.s);
    });
    r.section("shock_density", [&](Reader& s) { s.numbers("dx", c.shock_density.dx); });
    r.section("spectrum", [&](Reader& s) { s.integers("n", c.spectrum.n); });
    r.section("variance_law", [&](Reader& s) {
        s.numbers("t_grid", c.variance_law.t_grid);
        s.number("lo", c.variance_law.lo);
        s.number("hi", c.variance_law.hi);
        s.number("dy", c.variance_law.dy);
    });
    r.section("converge", [&](Reader& s) {
        s.number("x", c.converge.x);
        s.number("t", c.converge.t);
        s.integers("levels", c.converge.levels);
        s.number("alpha", c.converge.alpha);
    });
    r.section("fd_compare", [&](Reader& s) {
        auto& e = c.fd_compare.ensemble;
        std::vector<double> domain{e.lo, e.hi}, window{e.window_lo, e.window_hi};
        s.numbers("domain", domain);
        s.numbers("window", window);
        if (domain.size() != 2)
            s.fail("domain", "expected [lo, hi]");
        if (window.size() != 2)
            s.fail("window", "expected [lo, hi]");
        e.lo = domain[0];
        e.hi = domain[1];
        e.window_lo = window[0];
        e.window_hi = window[1];
        s.numbers("t_grid", e.t_grid);
        s.number("dx", e.fd.dx);
        s.number("cfl", e.fd.cfl);
        e.fd.scheme = pick(s, "scheme", e.fd.scheme, kSchemes);
        e.fd.boundary = pick(s, "boundary", e.fd.boundary, kBoundaries);
        s.numbers("convergence_dx", c.fd_compare.convergence_dx);
        s.number("convergence_t", c.fd_compare.convergence_t);
    });
    r.finish();

    try {
        validate(c.flux);
        validate(c.process);
    } catch (const DomainError& e) {
        throw ConfigError(e.what());
    }
    if (c.run.trials == 0)
        throw ConfigError("'run.trials' must be positive");
    if (c.cdf.index < 1)
        throw ConfigError("'cdf.index' is 1-based");
    return c;
}

RunConfig load_config(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot read config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string serialize_config(const RunConfig& c)
{
    json root;
    root["flux"] = write_flux(c.flux);
    root["process"] = write_process(c.process);
    root["grid"] = {{"x", c.grid.x},
                    {"t", c.grid.t},
                    {"x_range", {c.grid.x_lo, c.grid.x_hi}},
                    {"dx", c.grid.dx},
                    {"counts", c.grid.counts}};
    root["run"] = {{"trials", c.run.trials},       {"seed", c.run.seed},
                   {"method", name_of(c.run.method, kMethods)},
                   {"threads", c.run.threads},     {"outdir", c.run.outdir},
                   {"tolerance", c.run.tolerance}};
    root["sample_path"] = {{"lo", c.sample_path.lo}, {"hi", c.sample_path.hi},
                           {"dy", c.sample_path.dy}};
    root["cdf"] = {{"target", c.cdf.vertex ? "vertex" : "segment"},
                   {"index", c.cdf.index},
                   {"s", c.cdf.s}};
    root["shock_density"] = {{"dx", c.shock_density.dx}};
    root["spectrum"] = {{"n", c.spectrum.n}};
    root["variance_law"] = {{"t_grid", c.variance_law.t_grid},
                            {"lo", c.variance_law.lo},
                            {"hi", c.variance_law.hi},
                            {"dy", c.variance_law.dy}};
    root["converge"] = {{"x", c.converge.x},
                        {"t", c.converge.t},
                        {"levels", c.converge.levels},
                        {"alpha", c.converge.alpha}};
    const auto& e = c.fd_compare.ensemble;
    root["fd_compare"] = {{"domain", {e.lo, e.hi}},
                          {"window", {e.window_lo, e.window_hi}},
                          {"t_grid", e.t_grid},
                          {"dx", e.fd.dx},
                          {"cfl", e.fd.cfl},
                          {"scheme", name_of(e.fd.scheme, kSchemes)},
                          {"boundary", name_of(e.fd.boundary, kBoundaries)},
                          {"convergence_dx", c.fd_compare.convergence_dx},
                          {"convergence_t", c.fd_compare.convergence_t}};
    return root.dump(2) + "\n";
}

const std::vector<std::string>& subcommands()
{
    static const std::vector<std::string> names{
        "sample-path", "solve",    "scan",         "segment-probs", "cdf",
        "shock-density", "spectrum", "variance-law", "converge",    "fd-compare"};
    return names;
}

RunOutput run_subcommand(const std::string& name, const RunConfig& c)
{
    if (name == "sample-path")
        return run_sample_path(c);
    if (name == "solve")
        return run_solve(c);
    if (name == "scan")
        return run_scan(c);
    if (name == "segment-probs")
        return run_segment_probs(c);
    if (name == "cdf")
        return run_cdf(c);
    if (name == "shock-density")
        return run_shock_density(c);
    if (name == "spectrum")
        return run_spectrum(c);
    if (name == "variance-law")
        return run_variance_law(c);
    if (name == "converge")
        return run_converge(c);
    if (name == "fd-compare")
        return run_fd_compare(c);
    throw ConfigError("unknown subcommand '" + name + "'");
}

void execute(const std::string& name, const RunConfig& c)
{
    namespace fs = std::filesystem;
    set_thread_count(c.run.threads);
    const auto start = std::chrono::steady_clock::now();
    const RunOutput result = run_subcommand(name, c);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    const fs::path dir(c.run.outdir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw IoError("cannot create output directory '" + c.run.outdir + "': " + ec.message());
    auto write = [&](const std::string& file, const std::string& text) {
        std::ofstream out(dir / file, std::ios::binary | std::ios::trunc);
        out << text;
        if (!out)
            throw IoError("cannot write '" + (dir / file).string() + "'");
    };
    write(name + ".csv", result.csv);
    write(name + ".gp", result.plot_script);

    json manifest;
    manifest["schema_version"] = kManifestSchemaVersion;
    manifest["subcommand"] = name;
    manifest["csv"] = name + ".csv";
    manifest["csv_columns"] = split_columns(csv_header(result.csv));
    manifest["plot_script"] = name + ".gp";
    manifest["seed"] = c.run.seed;
    manifest["trials"] = c.run.trials;
    manifest["threads"] = thread_count();
    manifest["wall_time_seconds"] = wall;
    manifest["versions"] = {
        {"eflux", EFLUX_VERSION},
        {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                      "." + std::to_string(EIGEN_MINOR_VERSION)},
        {"boost", BOOST_LIB_VERSION},
        {"compiler", __VERSION__}};
    manifest["config"] = json::parse(serialize_config(c));
    manifest["summary"] = json::parse(result.summary_json);
    write("manifest.json", manifest.dump(2) + "\n");
}

ErrorCode classify_error(const std::exception& e)
{
    if (dynamic_cast<const ConfigError*>(&e))
        return {2, "CONFIG"};
    if (dynamic_cast<const DimensionCapError*>(&e))
        return {2, "DIMENSION_CAP"};
    if (dynamic_cast<const DomainError*>(&e))
        return {2, "DOMAIN"};
    if (dynamic_cast<const NumericalError*>(&e))
        return {3, "NUMERICAL"};
    if (dynamic_cast<const IoError*>(&e))
        return {3, "IO"};
    return {3, "INTERNAL"};
}

}  // namespace eflux
