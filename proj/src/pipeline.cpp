#include "scurve/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace scurve {

namespace {

using json = nlohmann::json;

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double now_seconds() {
    using clock = std::chrono::steady_clock;
    static const auto t0 = clock::now();
    return std::chrono::duration<double>(clock::now() - t0).count();
}

}  // namespace

RunConfig RunConfig::parse_text(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            bool blank = line.find_first_not_of(" \t\r") == std::string::npos;
            if (!blank)
                throw std::runtime_error("config line " + std::to_string(lineno) +
                                         ": expected key = value");
            continue;
        }
        auto trim = [](std::string s) {
            std::size_t a = s.find_first_not_of(" \t\r");
            std::size_t b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (key == "density.kind") cfg.density_kind = val;
        else if (key == "density.A") cfg.slit_height = std::stod(val);
        else if (key == "density.file") cfg.density_file = val;
        else if (key == "field.x") cfg.x = std::stod(val);
        else if (key == "field.t") cfg.t = std::stod(val);
        else if (key == "contour.init") cfg.contour_init = val;
        else if (key == "contour.file") cfg.contour_file = val;
        else if (key == "contour.nodes") cfg.nodes = std::stoi(val);
        else if (key == "contour.perturb") cfg.perturb = std::stod(val);
        else if (key == "solver.kkt_tol") cfg.kkt_tol = std::stod(val);
        else if (key == "solver.mass_tol") cfg.mass_tol = std::stod(val);
        else if (key == "optimizer.basis") cfg.basis_size = std::stoi(val);
        else if (key == "optimizer.stat_tol") cfg.stat_tol = std::stod(val);
        else if (key == "optimizer.max_outer") cfg.max_outer = std::stoi(val);
        else if (key == "reconstruct.enabled") cfg.reconstruct_enabled = (val == "true" || val == "1");
        else if (key == "reconstruct.hbar") cfg.hbar = std::stod(val);
        else if (key == "reconstruct.grid") cfg.psi_grid = std::stoi(val);
        else if (key == "reconstruct.span") cfg.psi_span = std::stod(val);
        else if (key == "run.out") cfg.out_dir = val;
        else if (key == "run.seed") cfg.seed = std::stoull(val);
        else if (key == "run.verbose") cfg.verbose = (val == "true" || val == "1");
        else throw std::runtime_error("config: unknown key '" + key + "'");
    }
    return cfg;
}

RunConfig RunConfig::parse_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open config: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_text(ss.str());
}

std::string RunConfig::serialize() const {
    std::ostringstream out;
    out << "density.kind = " << density_kind << "\n";
    out << "density.A = " << fmt17(slit_height) << "\n";
    if (!density_file.empty()) out << "density.file = " << density_file << "\n";
    out << "field.x = " << fmt17(x) << "\n";
    out << "field.t = " << fmt17(t) << "\n";
    out << "contour.init = " << contour_init << "\n";
    if (!contour_file.empty()) out << "contour.file = " << contour_file << "\n";
    out << "contour.nodes = " << nodes << "\n";
    out << "contour.perturb = " << fmt17(perturb) << "\n";
    out << "solver.kkt_tol = " << fmt17(kkt_tol) << "\n";
    out << "solver.mass_tol = " << fmt17(mass_tol) << "\n";
    out << "optimizer.basis = " << basis_size << "\n";
    out << "optimizer.stat_tol = " << fmt17(stat_tol) << "\n";
    out << "optimizer.max_outer = " << max_outer << "\n";
    out << "reconstruct.enabled = " << (reconstruct_enabled ? "true" : "false") << "\n";
    out << "reconstruct.hbar = " << fmt17(hbar) << "\n";
    out << "reconstruct.grid = " << psi_grid << "\n";
    out << "reconstruct.span = " << fmt17(psi_span) << "\n";
    out << "run.out = " << out_dir << "\n";
    out << "run.seed = " << seed << "\n";
    out << "run.verbose = " << (verbose ? "true" : "false") << "\n";
    return out.str();
}

void RunConfig::validate() const {
    std::vector<std::string> bad;
    if (density_kind != "constant_i" && density_kind != "sampled")
        bad.push_back("density.kind must be constant_i or sampled");
    if (slit_height <= 0.0) bad.push_back("density.A must be > 0");
    if (density_kind == "sampled" && density_file.empty())
        bad.push_back("density.file required for sampled kind");
    if (x < 0.0) bad.push_back("field.x must be >= 0");
    if (t < 0.0) bad.push_back("field.t must be >= 0");
    if (contour_init != "wrapped-F0" && contour_init != "semicircle" && contour_init != "file")
        bad.push_back("contour.init must be wrapped-F0, semicircle or file");
    if (contour_init == "file" && contour_file.empty())
        bad.push_back("contour.file required for contour.init = file");
    if (nodes < 5) bad.push_back("contour.nodes must be >= 5");
    if (perturb < 0.0) bad.push_back("contour.perturb must be >= 0");
    if (kkt_tol <= 0.0) bad.push_back("solver.kkt_tol must be > 0");
    if (mass_tol <= 0.0) bad.push_back("solver.mass_tol must be > 0");
    if (basis_size < 1) bad.push_back("optimizer.basis must be >= 1");
    if (stat_tol <= 0.0) bad.push_back("optimizer.stat_tol must be > 0");
    if (max_outer < 1) bad.push_back("optimizer.max_outer must be >= 1");
    if (hbar <= 0.0) bad.push_back("reconstruct.hbar must be > 0");
    if (psi_grid < 2) bad.push_back("reconstruct.grid must be >= 2");
    if (psi_span <= 0.0) bad.push_back("reconstruct.span must be > 0");
    if (out_dir.empty()) bad.push_back("run.out must not be empty");
    if (!bad.empty()) {
        std::string msg = "invalid config:";
        for (const auto& b : bad) msg += "\n  - " + b;
        throw std::runtime_error(msg);
    }
}

bool RunReport::all_ok() const {
    for (const auto& s : stages)
        if (s.ran && !s.ok) return false;
    return true;
}

std::string RunReport::to_json() const {
    json j = json::array();
    for (const auto& s : stages) {
        j.push_back({{"stage", s.name},
                     {"ran", s.ran},
                     {"ok", s.ok},
                     {"residual", s.residual},
                     {"seconds", s.seconds},
                     {"detail", s.detail},
                     {"outputs", s.outputs}});
    }
    return j.dump(2) + "\n";
}

void atomic_write(const std::string& path, const std::string& content) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open for writing: " + tmp);
        out << content;
        if (!out) throw std::runtime_error("write failed: " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("atomic rename failed: " + path);
}

void emit_contour_csv(const Contour& c, const std::string& path) {
    std::ostringstream out;
    out << "re,im,side\n";
    for (const auto& p : c.nodes) {
        if (p.at_infinity) {
            out << "inf,inf,.\n";
            continue;
        }
        char flag = p.side == Side::plus ? '+' : (p.side == Side::minus ? '-' : '.');
        out << fmt17(p.value.real()) << "," << fmt17(p.value.imag()) << "," << flag << "\n";
    }
    atomic_write(path, out.str());
}

void emit_measure_csv(const DiscreteMeasure& mu, const std::string& path) {
    std::ostringstream out;
    out << "re,im,weight\n";
    for (std::size_t k = 0; k < mu.size(); ++k) {
        const auto& p = mu.host.nodes[k];
        if (p.at_infinity || mu.weights[Eigen::Index(k)] == 0.0) continue;
        out << fmt17(p.value.real()) << "," << fmt17(p.value.imag()) << ","
            << fmt17(mu.weights[Eigen::Index(k)]) << "\n";
    }
    atomic_write(path, out.str());
}

void emit_arc_csv(const std::vector<Complex>& arc, const std::string& path) {
    std::ostringstream out;
    out << "re,im\n";
    for (Complex z : arc) out << fmt17(z.real()) << "," << fmt17(z.imag()) << "\n";
    atomic_write(path, out.str());
}

void emit_psi_grid_csv(const ThetaParams& tp, int grid, double span, const std::string& path) {
    std::ostringstream out;
    out << "xhat,that,re_psi,im_psi,abs_psi\n";
    for (int i = 0; i < grid; ++i) {
        for (int j = 0; j < grid; ++j) {
            double xh = -span + 2.0 * span * i / (grid - 1);
            double th = -span + 2.0 * span * j / (grid - 1);
            Complex psi = assemble_psi(tp, xh, th);
            out << fmt17(xh) << "," << fmt17(th) << "," << fmt17(psi.real()) << ","
                << fmt17(psi.imag()) << "," << fmt17(std::abs(psi)) << "\n";
        }
    }
    atomic_write(path, out.str());
}

namespace {

struct PipelineState {
    RunConfig cfg;
    FieldModel field;
    Contour contour;           // current working contour
    EquilibriumSolution sol;
    bool have_solution = false;
    std::vector<Complex> endpoints;
};

FieldModel make_field(const RunConfig& cfg) {
    DensityModel d = cfg.density_kind == "constant_i" ? DensityModel::constant(cfg.slit_height)
                                                      : DensityModel::read(cfg.density_file);
    d.validate();
    FieldParams p;
    p.x = cfg.x;
    p.t = cfg.t;
    return FieldModel(std::move(d), p);
}

Contour make_initial_contour(const RunConfig& cfg) {
    if (cfg.contour_init == "wrapped-F0") {
        if (cfg.perturb > 0.0)
            return Contour::wrapped_slit_opened(cfg.slit_height, std::size_t(cfg.nodes),
                                                cfg.perturb);
        return Contour::wrapped_slit(cfg.slit_height, std::size_t(cfg.nodes));
    }
    if (cfg.contour_init == "semicircle")
        return Contour::circle_lens(cfg.slit_height, std::size_t(cfg.nodes));
    return Contour::read(cfg.contour_file, cfg.slit_height);
}

void dump_solution(const PipelineState& st, const std::string& path) {
    std::ostringstream out;
    const auto& mu = st.sol.measure;
    for (std::size_t k = 0; k < mu.size(); ++k) {
        const auto& p = mu.host.nodes[k];
        json line = {{"node_re", p.value.real()},
                     {"node_im", p.value.imag()},
                     {"side", p.side == Side::plus ? "+" : (p.side == Side::minus ? "-" : ".")},
                     {"weight", mu.weights[Eigen::Index(k)]},
                     {"potential_plus_phi",
                      green_potential(mu, p.value) + st.field.phi(p)}};
        out << line.dump() << "\n";
    }
    json summary = {{"energy", st.sol.energy},
                    {"kkt_supp", st.sol.kkt_residual_supp},
                    {"kkt_off", st.sol.kkt_residual_off},
                    {"b0_im", st.sol.b0 ? st.sol.b0->imag() : 0.0}};
    out << summary.dump() << "\n";
    atomic_write(path, out.str());
}

StageReport stage_equilibrium(PipelineState& st) {
    StageReport rep;
    rep.name = "equilibrium";
    rep.ran = true;
    double t0 = now_seconds();
    SolverOptions opt;
    opt.tol = st.cfg.kkt_tol;
    opt.mass_tol = st.cfg.mass_tol;
    st.sol = solve_equilibrium(st.contour, st.field, opt);
    st.have_solution = true;
    rep.residual = std::max(st.sol.kkt_residual_supp, st.sol.kkt_residual_off);
    rep.ok = st.sol.converged;
    rep.detail = "energy=" + fmt17(st.sol.energy);
    std::string p1 = st.cfg.out_dir + "/equilibrium.jsonl";
    std::string p2 = st.cfg.out_dir + "/contour.txt";
    dump_solution(st, p1);
    st.contour.write(p2);
    rep.outputs = {p1, p2};
    rep.seconds = now_seconds() - t0;
    return rep;
}

StageReport stage_maximize(PipelineState& st) {
    StageReport rep;
    rep.name = "maximize";
    rep.ran = true;
    double t0 = now_seconds();
    SolverOptions inner;
    inner.tol = st.cfg.kkt_tol;
    inner.mass_tol = st.cfg.mass_tol;
    if (st.cfg.t == 0.0) {
        // Degenerate case: the maximizer wraps the slit; the optimizer is
        // bypassed and validated against this configuration elsewhere.
        st.contour = Contour::wrapped_slit(st.cfg.slit_height, std::size_t(st.cfg.nodes));
        st.sol = solve_equilibrium(st.contour, st.field, inner);
        st.have_solution = true;
        rep.ok = st.sol.converged;
        rep.residual = std::max(st.sol.kkt_residual_supp, st.sol.kkt_residual_off);
        rep.detail = "degenerate t=0: wrapped contour";
    } else {
        MaxMinOptions opt;
        opt.basis_size = st.cfg.basis_size;
        opt.stat_tol = st.cfg.stat_tol;
        opt.max_outer = st.cfg.max_outer;
        opt.inner = inner;
        MaxMinResult r = maximize_contour(st.contour, st.field, opt);
        st.contour = r.contour;
        st.sol = r.solution;
        st.have_solution = true;
        rep.ok = r.converged;
        rep.residual = r.trace.empty() ? 0.0 : r.trace.back()[2];
        rep.detail = "iterations=" + std::to_string(r.trace.size()) +
                     " energy=" + fmt17(st.sol.energy);
        std::ostringstream tr;
        tr << "iter,energy,stat_residual\n";
        for (const auto& row : r.trace)
            tr << int(row[0]) << "," << fmt17(row[1]) << "," << fmt17(row[2]) << "\n";
        std::string p0 = st.cfg.out_dir + "/energy_trace.csv";
        atomic_write(p0, tr.str());
        rep.outputs.push_back(p0);
    }
    std::string p1 = st.cfg.out_dir + "/maximized_contour.txt";
    std::string p2 = st.cfg.out_dir + "/maximized.jsonl";
    st.contour.write(p1);
    dump_solution(st, p2);
    rep.outputs.push_back(p1);
    rep.outputs.push_back(p2);
    rep.seconds = now_seconds() - t0;
    return rep;
}

StageReport stage_verify_s(PipelineState& st) {
    StageReport rep;
    rep.name = "verify-s";
    rep.ran = true;
    double t0 = now_seconds();
    if (!st.have_solution) throw std::runtime_error("verify-s: no solution available");
    SignedSupport mu = SignedSupport::from_measure(st.sol.measure, st.cfg.mass_tol);
    RmuEvaluator ev(mu, st.field);
    SCurveReport rp = verify_s_property(st.contour, st.sol, st.field, 0.0, &ev);
    rep.residual = rp.max_mismatch;
    rep.ok = rp.max_mismatch <= 5e-2 && rp.sign_violations == 0;
    rep.detail = "checks=" + std::to_string(rp.checks.size()) +
                 " sign_violations=" + std::to_string(rp.sign_violations);
    json j;
    j["max_mismatch"] = rp.max_mismatch;
    j["sign_violations"] = rp.sign_violations;
    json arr = json::array();
    for (const auto& c : rp.checks)
        arr.push_back({{"node", c.node},
                       {"d_plus", c.d_plus},
                       {"d_minus", c.d_minus},
                       {"mismatch", c.mismatch},
                       {"offset", c.offset}});
    j["checks"] = arr;
    json eps = json::array();
    for (Complex e : rp.band_endpoints) eps.push_back({{"re", e.real()}, {"im", e.imag()}});
    j["band_endpoints"] = eps;
    j["endpoint_rmu_residuals"] = rp.endpoint_rmu_residuals;
    std::string p = st.cfg.out_dir + "/s_report.json";
    atomic_write(p, j.dump(2) + "\n");
    rep.outputs = {p};
    rep.seconds = now_seconds() - t0;
    return rep;
}

StageReport stage_endpoints(PipelineState& st) {
    StageReport rep;
    rep.name = "endpoints";
    rep.ran = true;
    double t0 = now_seconds();
    if (!st.have_solution) throw std::runtime_error("endpoints: no solution available");
    SignedSupport mu = SignedSupport::from_measure(st.sol.measure, st.cfg.mass_tol);
    RmuEvaluator ev(mu, st.field);
    // Seeds just outside the support-mask boundaries.
    std::vector<Complex> seeds;
    const auto& mask = st.sol.support_mask;
    double spacing = st.contour.mean_spacing();
    for (std::size_t i = 1; i + 1 < st.contour.size(); ++i) {
        if (mask[i] && (!mask[i - 1] || !mask[i + 1])) {
            Complex z = st.contour[i].value;
            seeds.push_back(z + Complex(2.0 * spacing, 2.0 * spacing));
            seeds.push_back(z - Complex(2.0 * spacing, -2.0 * spacing));
        }
    }
    st.endpoints = find_endpoints(ev, seeds);
    double worst = 0.0;
    for (Complex z : st.endpoints) {
        Complex vp = st.field.Vprime(z);
        worst = std::max(worst, std::abs(ev(z)) / (1.0 + std::norm(vp)));
    }
    rep.residual = worst;
    rep.ok = !st.endpoints.empty();
    rep.detail = "count=" + std::to_string(st.endpoints.size());
    json arr = json::array();
    for (Complex z : st.endpoints) arr.push_back({{"re", z.real()}, {"im", z.imag()}});
    std::string p = st.cfg.out_dir + "/endpoints.json";
    atomic_write(p, arr.dump(2) + "\n");
    rep.outputs = {p};
    rep.seconds = now_seconds() - t0;
    return rep;
}

StageReport stage_trace(PipelineState& st) {
    StageReport rep;
    rep.name = "trace";
    rep.ran = true;
    double t0 = now_seconds();
    if (!st.have_solution) throw std::runtime_error("trace: no solution available");
    SignedSupport mu = SignedSupport::from_measure(st.sol.measure, st.cfg.mass_tol);
    RmuEvaluator ev(mu, st.field);
    double spacing = st.contour.mean_spacing();
    Complex start;
    if (!st.endpoints.empty()) {
        start = st.endpoints.back();
    } else {
        // Topmost support node nudged off the cell.
        double top = 0.0;
        for (std::size_t k = 0; k < mu.size(); ++k)
            if (mu.nodes[k].imag() > top) {
                top = mu.nodes[k].imag();
                start = mu.nodes[k];
            }
        start += Complex(0.75 * spacing, 0.75 * spacing);
    }
    ArcTrace arc = trace_arc(ev, start, 0.5 * spacing, Complex(0.0, 0.0), st.endpoints);
    rep.residual = arc.max_re_residual;
    rep.ok = arc.points.size() > 3;
    rep.detail = "points=" + std::to_string(arc.points.size());
    std::string p = st.cfg.out_dir + "/arc.csv";
    emit_arc_csv(arc.points, p);
    rep.outputs = {p};
    rep.seconds = now_seconds() - t0;
    return rep;
}

StageReport stage_reconstruct(PipelineState& st) {
    StageReport rep;
    rep.name = "reconstruct";
    rep.ran = true;
    double t0 = now_seconds();
    if (!st.have_solution) throw std::runtime_error("reconstruct: no solution available");
    SolverOptions inner;
    inner.tol = st.cfg.kkt_tol;
    inner.mass_tol = st.cfg.mass_tol;
    // Phase data at perturbed slow variables: inner re-solve on the same
    // contour (the contour variation drops out at the maximizer).
    Contour host = st.contour;
    const FieldModel& base_field = st.field;
    StateProvider provider = [&](double x, double t) {
        FieldParams p;
        p.x = x;
        p.t = t;
        FieldModel f(base_field.density, p);
        EquilibriumSolution s = solve_equilibrium(host, f, inner);
        BandGapPartition part = theta_phi_on_contour(host, s, f);
        double theta1 = part.theta.empty() ? 0.0 : part.theta[0];
        double u0 = -(theta1 + part.alpha[0]);
        Eigen::VectorXd uvec(std::max(part.genus, 0));
        uvec.setZero();
        if (part.genus >= 1) {
            SurfaceCuts cuts = cuts_from_partition(part);
            SurfaceData sd = build_surface(cuts);
            holomorphic_differentials(sd);
            period_matrix(sd);
            auto pp = p_polynomial(part, cuts);
            Eigen::VectorXcd U = omega_b_periods(sd, pp);
            for (int j = 0; j < part.genus; ++j) uvec[j] = U[j].real();
        }
        return std::make_pair(u0, uvec);
    };
    ReconstructionResult rr =
        reconstruct(st.contour, st.sol, st.field, st.cfg.hbar, provider, st.cfg.x, st.cfg.t);
    json j;
    j["genus"] = rr.partition.genus;
    json eps = json::array();
    for (Complex e : rr.partition.endpoints) eps.push_back({{"re", e.real()}, {"im", e.imag()}});
    j["endpoints"] = eps;
    j["theta_consts"] = rr.partition.theta;
    j["alpha_consts"] = rr.partition.alpha;
    j["U0"] = rr.params.U0;
    j["k0"] = rr.params.k0;
    j["w0"] = rr.params.w0;
    j["amplitude_re"] = rr.params.amplitude.real();
    j["amplitude_im"] = rr.params.amplitude.imag();
    if (rr.surface) {
        json hm = json::array();
        for (int a = 0; a < rr.surface->genus(); ++a)
            for (int b = 0; b < rr.surface->genus(); ++b)
                hm.push_back({{"j", a},
                              {"k", b},
                              {"re", rr.surface->period(a, b).real()},
                              {"im", rr.surface->period(a, b).imag()}});
        j["period_matrix"] = hm;
        json uarr = json::array();
        for (int a = 0; a < rr.params.U.size(); ++a)
            uarr.push_back({{"re", rr.params.U[a].real()}, {"im", rr.params.U[a].imag()}});
        j["U"] = uarr;
        json yz = json::array();
        for (int a = 0; a < rr.params.Y.size(); ++a)
            yz.push_back({{"Y_re", rr.params.Y[a].real()},
                          {"Y_im", rr.params.Y[a].imag()},
                          {"Z_re", rr.params.Z[a].real()},
                          {"Z_im", rr.params.Z[a].imag()}});
        j["YZ"] = yz;
    }
    std::string p1 = st.cfg.out_dir + "/surface.json";
    atomic_write(p1, j.dump(2) + "\n");
    std::string p2 = st.cfg.out_dir + "/psi_grid.csv";
    emit_psi_grid_csv(rr.params, st.cfg.psi_grid, st.cfg.psi_span, p2);
    // Denominator safety across the grid is enforced inside assemble_psi.
    rep.residual = std::max(rr.partition.theta_deviation, rr.partition.alpha_deviation);
    rep.ok = true;
    rep.detail = "genus=" + std::to_string(rr.partition.genus);
    rep.outputs = {p1, p2};
    rep.seconds = now_seconds() - t0;
    return rep;
}

StageReport stage_hausdorff(PipelineState& st) {
    StageReport rep;
    rep.name = "hausdorff";
    rep.ran = true;
    double t0 = now_seconds();
    Contour fine = resample_contour(st.contour, 2 * st.contour.size());
    double d = hausdorff_distance(st.contour.as_set(), fine.as_set(), st.cfg.slit_height);
    rep.residual = d;
    rep.ok = d <= st.contour.mean_spacing();
    rep.detail = "distance=" + fmt17(d);
    json j = {{"distance", d}};
    std::string p = st.cfg.out_dir + "/hausdorff.json";
    atomic_write(p, j.dump(2) + "\n");
    rep.outputs = {p};
    rep.seconds = now_seconds() - t0;
    return rep;
}

}  // namespace

RunReport run_pipeline(const RunConfig& cfg, const std::string& stage) {
    cfg.validate();
    std::filesystem::create_directories(cfg.out_dir);
    RunReport report;
    PipelineState st;
    st.cfg = cfg;
    st.field = make_field(cfg);
    st.contour = make_initial_contour(cfg);

    auto want = [&](const std::string& name) { return stage == "all" || stage == name; };
    auto run_stage = [&](auto&& fn, const std::string& name) {
        if (!want(name)) return true;
        try {
            report.stages.push_back(fn(st));
        } catch (const std::exception& e) {
            StageReport rep;
            rep.name = name;
            rep.ran = true;
            rep.ok = false;
            rep.detail = e.what();
            report.stages.push_back(rep);
            return false;
        }
        return report.stages.back().ok;
    };

    bool cont = true;
    if (stage == "hausdorff") {
        run_stage(stage_hausdorff, "hausdorff");
        return report;
    }

    if (cont) cont = run_stage(stage_equilibrium, "equilibrium");
    if (cont && (want("maximize") || want("verify-s") || want("endpoints") || want("trace") ||
                 want("reconstruct")))
        cont = run_stage(stage_maximize, "maximize");
    if (cont && want("verify-s")) cont = run_stage(stage_verify_s, "verify-s");
    if (cont && want("endpoints")) cont = run_stage(stage_endpoints, "endpoints");
    if (cont && want("trace")) cont = run_stage(stage_trace, "trace");
    if (cont && (stage == "reconstruct" || (stage == "all" && cfg.reconstruct_enabled)))
        cont = run_stage(stage_reconstruct, "reconstruct");
    return report;
}

}  // namespace scurve
