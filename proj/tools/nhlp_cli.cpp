// command-line front end: measure generation, lattice/AOI construction with
// auto-tuning, verification suites, CSV/JSON emission for batch experiments
#include <CLI11.hpp>

#include "nhlp/czo.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fs = std::filesystem;
using namespace nhlp;
using nlohmann::json;

namespace {

struct RunConfig {
    std::string out_dir = ".";
    std::uint64_t seed = 1;
    int threads = 0;
    json raw = json::object();

    std::string hash() const {
        // output location is not part of the run identity
        json id = raw;
        id.erase("out");
        std::ostringstream os;
        os << std::hex << std::hash<std::string>{}(id.dump());
        return os.str();
    }
};

json report_envelope(const RunConfig& cfg, const VerificationReport& rep) {
    json j = rep.to_json();
    j["config_hash"] = cfg.hash();
    j["seed"] = cfg.seed;
    return j;
}

void write_json(const RunConfig& cfg, const std::string& name, const json& j) {
    fs::create_directories(cfg.out_dir);
    std::ofstream out(fs::path(cfg.out_dir) / name);
    if (!out) throw std::runtime_error("cannot write " + name);
    out << j.dump(2) << "\n";
}

void write_report(const RunConfig& cfg, const std::string& name, const VerificationReport& rep) {
    write_json(cfg, name, report_envelope(cfg, rep));
    std::cout << (rep.pass ? "pass  " : "FAIL  ") << rep.lemma << "  -> " << name << "\n";
}

void write_csv(const RunConfig& cfg, const std::string& name, const std::string& header,
               const std::vector<std::vector<double>>& rows) {
    fs::create_directories(cfg.out_dir);
    std::ofstream out(fs::path(cfg.out_dir) / name);
    out.precision(17);
    out << header << "\n";
    for (const auto& r : rows) {
        for (std::size_t t = 0; t < r.size(); ++t) out << r[t] << (t + 1 == r.size() ? "" : ",");
        out << "\n";
    }
}

CZKernel kernel_from_flag(const std::string& kind, const std::string& file, double n) {
    if (kind == "file") {
        std::ifstream in(file);
        if (!in) throw std::runtime_error("cannot read kernel file " + file);
        json j = json::parse(in);
        CZKernel K = CZKernel::make(j.at("kind").get<std::string>(), j.value("n", n),
                                    j.value("component", 0));
        if (j.contains("C1")) K.C1 = j["C1"].get<double>();
        if (j.contains("C2")) K.C2 = j["C2"].get<double>();
        if (j.contains("delta")) K.delta = j["delta"].get<double>();
        return K;
    }
    return CZKernel::make(kind, n);
}

// one shared pipeline so the suites agree on tuning and seeds
struct Pipeline {
    DiscreteMeasure mu;
    MeasureIndex idx;
    DeltaEngine eng;
    GenerationLattice lat;
    LPDecomposition decomp;
    std::vector<Cube> battery;

    explicit Pipeline(DiscreteMeasure m, std::uint64_t seed)
        : mu(std::move(m)), idx(mu), eng(mu, idx) {
        Rng rng(seed);
        lat = build_tuned_lattice(mu, eng, rng);
        decomp = build_decomposition(mu, lat);
        Rng brng(seed + 1);
        battery = doubling_battery(mu, lat, brng);
    }
};

int run_suite(const RunConfig& cfg, Pipeline& pl, const std::string& suite, const CZKernel& K,
              const T1Params& t1prm) {
    bool all = suite == "all";
    std::vector<VerificationReport> reps;
    Rng rng(cfg.seed + 2);

    if (all || suite == "delta") {
        reps.push_back(verify_delta_properties(pl.eng, rng));
        write_report(cfg, "report_delta_properties.json", reps.back());
    }
    if (all || suite == "lattice") {
        reps.push_back(verify_nesting(pl.lat));
        write_report(cfg, "report_nesting.json", reps.back());
        auto regu = verify_regularity(pl.lat, rng, 12000);
        reps.push_back(regu.report);
        write_report(cfg, "report_regularity.json", reps.back());
    }
    if (all || suite == "aoi") {
        for (int k = 1; k <= pl.lat.k_max; ++k) {
            std::string suffix = "_k" + std::to_string(k) + ".json";
            reps.push_back(verify_normalization(pl.mu, pl.lat, k));
            write_report(cfg, "report_normalization" + suffix, reps.back());
            reps.push_back(verify_kernel_bounds(pl.mu, pl.lat, k, build_s(pl.mu, pl.lat, k)));
            write_report(cfg, "report_kernel_bounds" + suffix, reps.back());
            reps.push_back(verify_phi_norms(pl.mu, pl.lat, k).report);
            write_report(cfg, "report_phi_norms" + suffix, reps.back());
        }
    }
    if (all || suite == "lp") {
        auto& d = pl.decomp;
        VerificationReport dec;
        dec.lemma = "lp_decomposition";
        dec.set("k_max", double(d.k_hi));
        dec.set("N", double(d.N));
        dec.set("I_minus_PhiN_norm", d.I_minus_PhiN_norm);
        dec.set("eta_hat", d.eta_hat);
        dec.set("eta_r2", d.eta_r2);
        dec.set("exceptional_k", double(d.exceptional_k));
        if (!(d.I_minus_PhiN_norm <= 0.5)) dec.fail("no N <= 10 with ||I - Phi_N|| <= 1/2");
        reps.push_back(dec);
        write_report(cfg, "report_lp_decomposition.json", reps.back());
        reps.push_back(quasi_orthogonality(pl.mu, pl.lat, d, 100, rng).report);
        write_report(cfg, "report_quasi_orthogonality.json", reps.back());
        auto b = log_distance_function(pl.mu, log_anchor(pl.mu));
        auto est = rbmo_norm(pl.mu, pl.battery, b);
        reps.push_back(est.report);
        write_report(cfg, "report_rbmo_norm.json", reps.back());
        reps.push_back(verify_rbmo_square(pl.mu, pl.lat, d, b, est.norm, std::max(d.N, 0)));
        write_report(cfg, "report_rbmo_square.json", reps.back());
    }
    if (all || suite == "carleson") {
        auto g = log_distance_function(pl.mu, log_anchor(pl.mu));
        reps.push_back(
            carleson_check(pl.mu, pl.lat, pl.decomp, pl.battery, g, std::max(pl.decomp.N, 0), 40, rng));
        write_report(cfg, "report_carleson.json", reps.back());
    }
    if (all || suite == "t1") {
        reps.push_back(kernel_constants_check(pl.mu, K, rng));
        write_report(cfg, "report_kernel_constants.json", reps.back());
        auto t1 = t1_battery(pl.mu, pl.battery, K, t1prm, rng);
        reps.push_back(t1.report);
        write_report(cfg, "report_t1_battery.json", reps.back());
        std::vector<std::vector<double>> rows;
        for (std::size_t t = 0; t < t1.eps.size(); ++t)
            rows.push_back({t1.eps[t], t1.wb_sup[t]});
        write_csv(cfg, "t1_wb_curve.csv", "eps,wb_sup", rows);
        auto T = truncate(pl.mu, K, pl.mu.resolution * 0.5);
        auto pd = pairing_decay(pl.mu, pl.decomp, T.matrix);
        reps.push_back(pd.report);
        write_report(cfg, "report_pairing_decay.json", reps.back());
        reps.push_back(separated_pairing_check(pl.mu, pl.battery, T.matrix, K, rng));
        write_report(cfg, "report_separated_pairing.json", reps.back());
    }
    if (all || suite == "paraproduct") {
        auto& d = pl.decomp;
        if (d.N >= 0 && d.I_minus_PhiN_norm <= 0.5) {
            auto b = log_distance_function(pl.mu, log_anchor(pl.mu));
            double bstar = rbmo_norm(pl.mu, pl.battery, b).norm;
            VerificationReport rep;
            rep.lemma = "paraproduct";
            std::vector<double> ones(pl.mu.size(), 1.0);
            double prev_ratio = -1;
            for (int m : {2, 4, 8}) {
                auto pp = paraproduct(pl.mu, d, b, m);
                double un = weighted_norm(pp.U, pl.mu.weights);
                auto ua = pp.U.apply_adjoint(pl.mu.weights, ones);
                double uamax = 0;
                for (double v : ua) uamax = std::max(uamax, std::abs(v));
                rep.set("norm_m" + std::to_string(m), un);
                rep.set("ratio_m" + std::to_string(m), bstar > 0 ? un / bstar : 0.0);
                rep.set("adjoint_one_m" + std::to_string(m), uamax);
                if (uamax > 1e-8) rep.fail("U*(1) != 0");
                prev_ratio = bstar > 0 ? un / bstar : 0.0;
            }
            (void)prev_ratio;
            reps.push_back(rep);
            write_report(cfg, "report_paraproduct.json", reps.back());
        } else {
            VerificationReport rep;
            rep.lemma = "paraproduct";
            rep.fail("Phi_N inverse not certified; paraproduct skipped");
            reps.push_back(rep);
            write_report(cfg, "report_paraproduct.json", reps.back());
        }
    }

    for (const auto& r : reps)
        if (!r.pass) {
            std::cerr << "first failing report: " << r.lemma << "\n";
            return 1;
        }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"non-homogeneous multiscale analysis toolkit"};
    app.require_subcommand(1);

    RunConfig cfg;
    std::string config_file;
    app.add_option("--config", config_file, "JSON run configuration");
    app.add_option("--out", cfg.out_dir, "output directory");
    app.add_option("--seed", cfg.seed, "RNG seed recorded in every output");
    app.add_option("--threads", cfg.threads, "OpenMP thread cap (0 = default)");

    // gen-measure
    auto* gen = app.add_subcommand("gen-measure", "generate a reference measure");
    GeneratorSpec spec;
    std::string gen_kind, gen_out = "measure.json";
    gen->add_option("kind", gen_kind,
                    "uniform-interval|uniform-square|cantor|comb|lipschitz-graph")
        ->required();
    gen->add_option("--atoms", spec.atoms);
    gen->add_option("--per-side", spec.per_side);
    gen->add_option("--level", spec.level);
    gen->add_option("--levels", spec.levels);
    gen->add_option("--atoms-per-level", spec.atoms_per_level);
    gen->add_option("--ratio", spec.ratio);
    gen->add_option("--min-x", spec.min_x);
    gen->add_option("--slope", spec.slope);
    gen->add_option("-o,--output", gen_out, "measure file name (inside --out)");

    // check-growth
    auto* growth = app.add_subcommand("check-growth", "growth constant and doubling witness");
    std::string measure_file;
    growth->add_option("--measure", measure_file)->required();

    // build-lattice
    auto* blat = app.add_subcommand("build-lattice", "auto-tuned generation lattice to JSON");
    blat->add_option("--measure", measure_file)->required();

    // build-aoi
    auto* baoi = app.add_subcommand("build-aoi", "operators S_k with verification reports");
    bool dump_kernels = false;
    baoi->add_option("--measure", measure_file)->required();
    baoi->add_flag("--dump-kernels", dump_kernels, "write each S_k kernel as CSV");

    // verify
    auto* ver = app.add_subcommand("verify", "run a verification suite");
    std::string suite = "all", kernel_kind = "cauchy-re", kernel_file;
    T1Params t1prm;
    std::string eps_grid;
    ver->add_option("--measure", measure_file)->required();
    ver->add_option("--suite", suite)
        ->check(CLI::IsMember({"delta", "lattice", "aoi", "lp", "carleson", "t1", "paraproduct",
                               "all"}));
    ver->add_option("--kernel", kernel_kind,
                    "cauchy-re|cauchy-im|riesz|bounded|violator|file");
    ver->add_option("--kernel-file", kernel_file);
    ver->add_option("--rho", t1prm.rho);
    ver->add_option("--gamma", t1prm.gamma);
    ver->add_option("--p", t1prm.p_list, "L^p exponents for the T(1) battery");
    ver->add_option("--eps-grid", eps_grid, "comma-separated truncation radii");

    // lp-analyze
    auto* lpa = app.add_subcommand("lp-analyze", "decompose a test function, emit curves");
    std::string f_spec = "random";
    lpa->add_option("--measure", measure_file)->required();
    lpa->add_option("--f", f_spec, "indicator|random|const|log");

    // t-one
    auto* tone = app.add_subcommand("t-one", "T(1) battery for one kernel");
    std::string report_out = "t1_report.json";
    tone->add_option("--measure", measure_file)->required();
    tone->add_option("--kernel", kernel_kind,
                     "cauchy-re|cauchy-im|riesz|bounded|violator|file");
    tone->add_option("--kernel-file", kernel_file);
    tone->add_option("--rho", t1prm.rho);
    tone->add_option("--gamma", t1prm.gamma);
    tone->add_option("--p", t1prm.p_list);
    tone->add_option("--eps-grid", eps_grid);
    tone->add_option("--report", report_out);

    CLI11_PARSE(app, argc, argv);

    try {
        if (!config_file.empty()) {
            std::ifstream in(config_file);
            if (!in) throw std::runtime_error("cannot read config " + config_file);
            cfg.raw = json::parse(in);
            if (cfg.raw.contains("seed")) cfg.seed = cfg.raw["seed"].get<std::uint64_t>();
            if (cfg.raw.contains("out")) cfg.out_dir = cfg.raw["out"].get<std::string>();
        } else {
            cfg.raw = {{"seed", cfg.seed}, {"out", cfg.out_dir}};
        }
#ifdef _OPENMP
        if (cfg.threads > 0) omp_set_num_threads(cfg.threads);
#endif
        if (!eps_grid.empty()) {
            t1prm.eps_list.clear();
            std::stringstream ss(eps_grid);
            for (std::string tok; std::getline(ss, tok, ',');)
                t1prm.eps_list.push_back(std::stod(tok));
        }

        if (gen->parsed()) {
            std::map<std::string, std::string> kinds = {
                {"uniform-interval", "uniform_interval"},
                {"uniform-square", "uniform_square"},
                {"cantor", "cantor_quarter_planar"},
                {"comb", "comb"},
                {"lipschitz-graph", "lipschitz_graph_arclength"}};
            if (!kinds.count(gen_kind)) throw std::runtime_error("unknown kind " + gen_kind);
            spec.kind = kinds[gen_kind];
            DiscreteMeasure mu = generate_example(spec);
            fs::create_directories(cfg.out_dir);
            save_measure(mu, (fs::path(cfg.out_dir) / gen_out).string());
            MeasureIndex idx(mu);
            double c0 = growth_constant(mu, idx);
            auto w = doubling_witness(mu, idx);
            std::cout << "measure " << mu.label << "  atoms=" << mu.size() << "  n=" << mu.n
                      << "  growth_constant=" << c0 << "\n";
            if (w.found)
                std::cout << "non-doubling witness: cube at (" << w.cube.center[0] << ","
                          << w.cube.center[1] << ") side=" << w.cube.side
                          << " ratio=" << w.ratio << "\n";
            else
                std::cout << "no doubling violation found\n";
            return 0;
        }

        DiscreteMeasure mu = load_measure(measure_file);

        if (growth->parsed()) {
            MeasureIndex idx(mu);
            double c0 = growth_constant(mu, idx);
            auto w = doubling_witness(mu, idx);
            VerificationReport rep;
            rep.lemma = "growth";
            rep.set("C0", c0);
            rep.set("doubling_violation", w.found ? 1.0 : 0.0);
            if (w.found) rep.set("witness_ratio", w.ratio);
            write_report(cfg, "report_growth.json", rep);
            std::cout << "growth_constant=" << c0 << "\n";
            return rep.pass ? 0 : 1;
        }

        if (blat->parsed()) {
            MeasureIndex idx(mu);
            DeltaEngine eng(mu, idx);
            Rng rng(cfg.seed);
            GenerationLattice lat = build_tuned_lattice(mu, eng, rng);
            json j = lattice_to_json(lat);
            j["config_hash"] = cfg.hash();
            j["seed"] = cfg.seed;
            write_json(cfg, "lattice.json", j);
            Rng r2(cfg.seed + 2);
            write_report(cfg, "report_nesting.json", verify_nesting(lat));
            write_report(cfg, "report_regularity.json", verify_regularity(lat, r2, 12000).report);
            std::cout << "k_max=" << lat.k_max << "  A=" << lat.cfg.A
                      << "  tuning_rounds=" << lat.cfg.tuning_rounds_used << "\n";
            return 0;
        }

        if (baoi->parsed()) {
            Pipeline pl(std::move(mu), cfg.seed);
            for (int k = 1; k <= pl.lat.k_max; ++k) {
                std::string suffix = "_k" + std::to_string(k);
                write_report(cfg, "report_normalization" + suffix + ".json",
                             verify_normalization(pl.mu, pl.lat, k));
                if (dump_kernels) {
                    std::ofstream out(fs::path(cfg.out_dir) / ("s" + std::to_string(k) + ".csv"));
                    to_csv(build_s(pl.mu, pl.lat, k).op, out, "S_" + std::to_string(k));
                }
            }
            return 0;
        }

        if (ver->parsed()) {
            CZKernel K = kernel_from_flag(kernel_kind, kernel_file, mu.n);
            Pipeline pl(std::move(mu), cfg.seed);
            return run_suite(cfg, pl, suite, K, t1prm);
        }

        if (lpa->parsed()) {
            Pipeline pl(std::move(mu), cfg.seed);
            auto& d = pl.decomp;
            std::vector<double> f(pl.mu.size(), 1.0);
            if (f_spec == "indicator") {
                const Cube& Q = pl.lat.at(0, 1).Q;
                for (std::size_t i = 0; i < pl.mu.size(); ++i)
                    f[i] = Q.is_standard() && Q.contains(pl.mu.points[i]) ? 1.0 : 0.0;
            } else if (f_spec == "random") {
                Rng rng(cfg.seed);
                std::normal_distribution<double> g(0.0, 1.0);
                for (double& v : f) v = g(rng);
            } else if (f_spec == "log") {
                f = log_distance_function(pl.mu, log_anchor(pl.mu));
            } else if (f_spec != "const") {
                throw std::runtime_error("unknown f spec " + f_spec);
            }
            std::vector<std::vector<double>> energy;
            double total = 0;
            for (int k = d.k_lo; k <= d.k_hi; ++k) {
                double e = std::pow(mu_norm(pl.mu.weights, d.D(k).apply(pl.mu.weights, f)), 2);
                energy.push_back({double(k), e});
                total += e;
            }
            write_csv(cfg, "energy_table.csv", "k,energy", energy);
            std::vector<std::vector<double>> decay;
            for (auto& [dist, nm] : d.decay_curve) decay.push_back({double(dist), nm});
            write_csv(cfg, "decay_curve.csv", "distance,norm", decay);
            std::vector<std::vector<double>> phiN;
            for (std::size_t t = 0; t < d.phi_norm_curve.size(); ++t)
                phiN.push_back({double(t), d.phi_norm_curve[t]});
            write_csv(cfg, "phi_norm_vs_N.csv", "N,I_minus_phi_norm", phiN);
            Rng rng(cfg.seed + 2);
            auto qo = quasi_orthogonality(pl.mu, pl.lat, d, 100, rng);
            std::vector<std::vector<double>> hist;
            for (double r : qo.ratios) hist.push_back({r});
            write_csv(cfg, "quasi_orthogonality.csv", "r", hist);
            double fn = mu_norm(pl.mu.weights, d.I_band.apply(pl.mu.weights, f));
            json j = {{"config_hash", cfg.hash()},
                      {"seed", cfg.seed},
                      {"eta_hat", d.eta_hat},
                      {"eta_r2", d.eta_r2},
                      {"N", d.N},
                      {"I_minus_PhiN_norm", d.I_minus_PhiN_norm},
                      {"r_f", fn > 0 ? total / (fn * fn) : 0.0},
                      {"f_spec", f_spec}};
            write_json(cfg, "lp_summary.json", j);
            std::cout << "r(f)=" << (fn > 0 ? total / (fn * fn) : 0.0) << "  eta_hat=" << d.eta_hat
                      << "\n";
            return 0;
        }

        if (tone->parsed()) {
            CZKernel K = kernel_from_flag(kernel_kind, kernel_file, mu.n);
            Pipeline pl(std::move(mu), cfg.seed);
            Rng rng(cfg.seed + 2);
            auto t1 = t1_battery(pl.mu, pl.battery, K, t1prm, rng);
            json j = report_envelope(cfg, t1.report);
            j["eps"] = t1.eps;
            j["wb_sup"] = t1.wb_sup;
            for (auto& [p, curve] : t1.lp_sup) j["lp_sup"][std::to_string(p)] = curve;
            write_json(cfg, report_out, j);
            std::cout << (t1.report.pass ? "pass" : "FAIL") << "  wb_sup_max="
                      << t1.report.get("wb_sup") << "\n";
            return t1.report.pass ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
