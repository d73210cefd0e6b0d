#ifndef SCURVE_PIPELINE_HPP
#define SCURVE_PIPELINE_HPP

#include <map>
#include <string>
#include <vector>

#include "scurve/reconstruction.hpp"

// Batch orchestration: flat key=value configuration, staged execution
// (equilibrium -> maximize -> verify-s -> endpoints -> trace -> reconstruct),
// deterministic structured outputs.

namespace scurve {

struct RunConfig {
    // density
    std::string density_kind = "constant_i";  // constant_i | sampled
    double slit_height = 1.0;                 // A
    std::string density_file;                 // for sampled
    // field
    double x = 0.0;
    double t = 0.0;
    // contour
    std::string contour_init = "wrapped-F0";  // wrapped-F0 | semicircle | file
    std::string contour_file;
    int nodes = 201;
    double perturb = 0.0;  // bow applied to the initial contour before maximizing
    // solver
    double kkt_tol = 1e-6;
    double mass_tol = 1e-10;
    // optimizer
    int basis_size = 16;
    double stat_tol = 1e-4;
    int max_outer = 100;
    // reconstruction
    bool reconstruct_enabled = false;
    double hbar = 0.1;
    int psi_grid = 32;
    double psi_span = 5.0;
    // run
    std::string out_dir = "out";
    unsigned long long seed = 1;
    bool verbose = false;

    static RunConfig parse_file(const std::string& path);
    static RunConfig parse_text(const std::string& text);
    std::string serialize() const;
    // Throws listing every violated field.
    void validate() const;
};

struct StageReport {
    std::string name;
    bool ran = false;
    bool ok = false;
    double residual = 0.0;
    double seconds = 0.0;
    std::string detail;
    std::vector<std::string> outputs;
};

struct RunReport {
    std::vector<StageReport> stages;
    bool all_ok() const;
    std::string to_json() const;
};

// Stages: equilibrium | maximize | verify-s | endpoints | trace | reconstruct |
// hausdorff | all.
RunReport run_pipeline(const RunConfig& cfg, const std::string& stage);

// CSV emission with 17 significant digits, LF endings, atomic replace.
void emit_contour_csv(const Contour& c, const std::string& path);
void emit_measure_csv(const DiscreteMeasure& mu, const std::string& path);
void emit_arc_csv(const std::vector<Complex>& arc, const std::string& path);
void emit_psi_grid_csv(const ThetaParams& tp, int grid, double span, const std::string& path);

void atomic_write(const std::string& path, const std::string& content);

}  // namespace scurve

#endif
