#pragma once

#include <functional>

#include "delta.hpp"

namespace nhlp {

enum class CubeClass { Transit, Stopping, Initial };

inline const char* cube_class_name(CubeClass c) {
    switch (c) {
        case CubeClass::Transit: return "transit";
        case CubeClass::Stopping: return "stopping";
        default: return "initial";
    }
}

struct AuxCubes {
    Cube Q1 = Cube::whole(), Q1hat = Cube::whole(), Q2 = Cube::whole(), Q2hat = Cube::whole(),
         Q3 = Cube::whole();
    Cube Q1check = Cube::whole(), Q1checkcheck = Cube::whole(), Q3hathat = Cube::whole();
    std::map<std::string, double> achieved;  // achieved delta offsets per cube
};

struct GenerationEntry {
    std::size_t point_index = 0;
    int k = 0;
    Cube Q = Cube::whole();
    CubeClass cls = CubeClass::Initial;
    double achieved_delta = 0;  // delta(Q, R^d) for transit cubes
    double deviation = 0;
    AuxCubes aux;
};

struct LatticeConfig {
    double sigma = 0, alpha1 = 0, alpha2 = 0, A = 0;
    double eps0 = 0, eps1 = 0, C0 = 0;
    double sigma_formula = 0;  // closed-form upper bound, reported for reference
    double m1 = 4, m2 = 4, m3 = 4;  // multipliers sigma->alpha1->alpha2->A
    int max_generations = 16;
    double stop_fraction = 0.99;
    int tuning_rounds_used = 0;

    void apply_chain() {
        alpha1 = m1 * sigma;
        alpha2 = m2 * alpha1;
        A = m3 * alpha2;
    }
    bool ordered() const {
        return sigma > 0 && alpha1 >= 4 * sigma && alpha2 >= 4 * alpha1 && A >= 4 * alpha2;
    }
};

struct GenerationLattice {
    const DiscreteMeasure* mu = nullptr;
    LatticeConfig cfg;
    int k_min = -1, k_max = 1;
    // generations[k - k_min][point]
    std::vector<std::vector<GenerationEntry>> generations;

    const GenerationEntry& at(std::size_t i, int k) const {
        return generations[std::size_t(k - k_min)][i];
    }
    bool has_k(int k) const { return k >= k_min && k <= k_max; }
    std::size_t points() const { return mu->size(); }

    // fraction of points stopping at generation k
    double stopped_fraction(int k) const {
        const auto& g = generations[std::size_t(k - k_min)];
        std::size_t s = 0;
        for (const auto& e : g)
            if (e.cls == CubeClass::Stopping) ++s;
        return double(s) / double(g.size());
    }
};

// Default constants: sigma from the measured probe (the delta cost of
// tripling a cube side, which hat-cubes must dominate) plus search-noise
// margin, then the multiplier chain. The closed-form sigma bound is recorded
// but unusable at atomic scales; see the config report.
inline LatticeConfig auto_config(const DiscreteMeasure& mu, const DeltaEngine& eng, Rng& rng) {
    LatticeConfig cfg;
    DeltaCalibration cal = calibrate_delta(eng, rng);
    cfg.eps0 = cal.eps0;
    cfg.eps1 = cal.eps1;
    cfg.C0 = growth_constant(mu, eng.index());
    cfg.sigma_formula = 100 * cal.eps0 + 100 * cal.eps1 + std::pow(12.0, mu.n + 1) * cfg.C0;
    cfg.sigma = std::max(1.05 * cal.sigma_probe, 1.5 * cal.eps1);
    cfg.apply_chain();
    return cfg;
}

inline GenerationLattice build_lattice(const DiscreteMeasure& mu, const DeltaEngine& eng,
                                       const LatticeConfig& cfg) {
    if (!LatticeConfig(cfg).ordered()) throw std::invalid_argument("lattice config ordering violated");
    GenerationLattice lat;
    lat.mu = &mu;
    lat.cfg = cfg;
    lat.k_min = -1;
    std::size_t N = mu.size();

    std::vector<double> full(N);
    for (std::size_t i = 0; i < N; ++i) full[i] = eng.point_delta_to_whole(i);

    // k <= 0: initial band
    for (int k = lat.k_min; k <= 0; ++k) {
        std::vector<GenerationEntry> g(N);
        for (std::size_t i = 0; i < N; ++i) {
            g[i].point_index = i;
            g[i].k = k;
            g[i].Q = Cube::whole();
            g[i].cls = CubeClass::Initial;
        }
        lat.generations.push_back(std::move(g));
    }

    double s = cfg.sigma, a1 = cfg.alpha1, a2 = cfg.alpha2, A = cfg.A;
    int k = 1;
    while (true) {
        std::vector<GenerationEntry> g(N);
        const auto& parent_gen = lat.generations.back();
        std::size_t stopped = 0;
        for (std::size_t i = 0; i < N; ++i) {
            GenerationEntry& e = g[i];
            e.point_index = i;
            e.k = k;
            double target = double(k) * A;
            const GenerationEntry& parent = parent_gen[i];
            bool parent_stopped = parent.cls == CubeClass::Stopping;
            if (parent_stopped || target >= full[i]) {
                e.cls = CubeClass::Stopping;
                e.Q = Cube::point(mu.points[i]);
                e.achieved_delta = full[i];
                e.deviation = 0;
                ++stopped;
                if (parent_stopped) {
                    // fully stopped: every auxiliary cube collapses too
                    e.aux.Q1 = e.aux.Q1hat = e.aux.Q2 = e.aux.Q2hat = e.aux.Q3 = e.Q;
                    e.aux.Q1check = e.aux.Q1checkcheck = e.aux.Q3hathat = e.Q;
                } else {
                    // stopping boundary: targets relative to Q_{x,k-1}
                    double pside = parent.Q.len();  // may be inf (parent initial)
                    auto from_parent = [&](double t) -> DoublingSearchResult {
                        return eng.inner(i, pside, t, pside, true);
                    };
                    auto place = [&](Cube& dst, const char* name, double t) {
                        auto r = from_parent(t);
                        dst = r.cube;
                        e.aux.achieved[name] = r.achieved_delta;
                    };
                    place(e.aux.Q1, "Q1", A - a1);
                    place(e.aux.Q1hat, "Q1hat", A - a1 - s);
                    place(e.aux.Q2, "Q2", A - a1 - a2);
                    place(e.aux.Q2hat, "Q2hat", A - a1 - a2 - s);
                    place(e.aux.Q3, "Q3", A - a1 - a2 - 2 * s);
                    place(e.aux.Q1check, "Q1check", A - a1 + s);
                    place(e.aux.Q1checkcheck, "Q1checkcheck", A - a1 + 2 * s);
                    place(e.aux.Q3hathat, "Q3hathat", A - a1 - a2 - 3 * s);
                }
                continue;
            }
            auto res = eng.inner(i, kInf, target);
            if (res.stopping || !res.cube.is_standard()) {
                e.cls = CubeClass::Stopping;
                e.Q = Cube::point(mu.points[i]);
                e.achieved_delta = full[i];
                ++stopped;
                continue;
            }
            e.cls = CubeClass::Transit;
            e.Q = res.cube;
            e.achieved_delta = res.achieved_delta;
            e.deviation = res.deviation;
            // auxiliary cubes grow outward from Q_{x,k}, capped by the parent
            double cap = parent.Q.len();
            auto grow = [&](Cube& dst, const char* name, double t) {
                auto r = eng.outer(i, e.Q.len(), t, cap, true);
                if (r.initial && !parent.Q.is_whole()) {
                    dst = parent.Q;  // capped: best available is the parent itself
                } else {
                    dst = r.cube;
                }
                e.aux.achieved[name] = r.achieved_delta;
            };
            grow(e.aux.Q1, "Q1", a1);
            grow(e.aux.Q1hat, "Q1hat", a1 + s);
            grow(e.aux.Q2, "Q2", a1 + a2);
            grow(e.aux.Q2hat, "Q2hat", a1 + a2 + s);
            grow(e.aux.Q3, "Q3", a1 + a2 + 2 * s);
            grow(e.aux.Q1check, "Q1check", a1 - s);
            grow(e.aux.Q1checkcheck, "Q1checkcheck", a1 - 2 * s);
            grow(e.aux.Q3hathat, "Q3hathat", a1 + a2 + 3 * s);
        }
        lat.generations.push_back(std::move(g));
        lat.k_max = k;
        double frac = double(stopped) / double(N);
        if (frac >= cfg.stop_fraction || k - 0 >= cfg.max_generations) break;
        ++k;
    }
    return lat;
}

inline VerificationReport verify_nesting(const GenerationLattice& lat) {
    VerificationReport rep;
    rep.lemma = "nesting_chain";
    std::size_t checked = 0, violations = 0;
    auto contains = [](const Cube& big, const Cube& small) { return big.contains(small); };
    for (int k = 1; k <= lat.k_max; ++k) {
        for (std::size_t i = 0; i < lat.points(); ++i) {
            const GenerationEntry& e = lat.at(i, k);
            if (e.cls != CubeClass::Transit) continue;
            const Cube& parent = lat.at(i, k - 1).Q;
            ++checked;
            const Cube* chain[] = {&e.Q, &e.aux.Q1, &e.aux.Q1hat, &e.aux.Q2, &e.aux.Q2hat,
                                   &e.aux.Q3, &parent};
            bool ok = true;
            for (int c = 0; c + 1 < 7; ++c)
                if (!contains(*chain[c + 1], *chain[c])) ok = false;
            if (e.aux.Q2hat.is_standard() && !contains(e.aux.Q3, e.aux.Q2hat.dilate(2.0))) ok = false;
            if (!ok) {
                ++violations;
                if (rep.worst_witness.empty())
                    rep.worst_witness = {{"point", i}, {"k", k}};
            }
        }
    }
    rep.set("transit_entries", double(checked));
    rep.set("violations", double(violations));
    if (violations) rep.fail("nesting chain violated");
    return rep;
}

struct RegularityResult {
    VerificationReport report;
    double eta_hat = std::numeric_limits<double>::quiet_NaN();
    std::size_t pairs_checked = 0;
};

inline RegularityResult verify_regularity(const GenerationLattice& lat, Rng& rng,
                                          std::size_t target_pairs = 20000) {
    RegularityResult out;
    VerificationReport& rep = out.report;
    rep.lemma = "regularity";
    std::size_t N = lat.points();
    std::size_t viol_a = 0, viol_b = 0, viol_c = 0, intersecting = 0;
    double eta_min = kInf;
    std::size_t eta_pairs = 0;

    std::uniform_int_distribution<std::size_t> pick(0, N - 1);
    std::uniform_int_distribution<int> pick_k(1, std::max(1, lat.k_max));
    std::uniform_int_distribution<int> pick_m(1, 4);
    std::size_t budget = target_pairs * 8;  // sampling attempts
    for (std::size_t t = 0; t < budget && out.pairs_checked < target_pairs; ++t) {
        std::size_t i = pick(rng), j = pick(rng);
        int k = pick_k(rng);
        const GenerationEntry& ei = lat.at(i, k);
        const GenerationEntry& ej = lat.at(j, k);
        ++out.pairs_checked;
        bool any = false;
        if (ei.aux.Q1.is_standard() && ej.aux.Q1.is_standard() &&
            cubes_intersect(ei.aux.Q1, ej.aux.Q1)) {
            any = true;
            if (!ej.aux.Q1hat.contains(ei.aux.Q1)) {
                ++viol_a;
                if (rep.worst_witness.empty())
                    rep.worst_witness = {{"claim", "a"}, {"x", i}, {"y", j}, {"k", k}};
            }
        }
        if (ei.aux.Q2.is_standard() && ej.aux.Q2.is_standard() &&
            cubes_intersect(ei.aux.Q2, ej.aux.Q2)) {
            any = true;
            if (!ej.aux.Q2hat.contains(ei.aux.Q2)) ++viol_b;
        }
        if (ei.Q.is_standard() && ej.Q.is_standard() && cubes_intersect(ei.Q, ej.Q)) {
            any = true;
            if (!lat.at(j, k - 1).Q.contains(ei.Q)) ++viol_c;
        }
        if (any) ++intersecting;

        // side decay: 2Q_{x,k} meets 2Q_{y,k+m}
        int m = pick_m(rng);
        if (k + m <= lat.k_max && ei.Q.is_standard()) {
            const GenerationEntry& em = lat.at(j, k + m);
            if (em.Q.is_standard() &&
                cubes_intersect(ei.Q.dilate(2.0), em.Q.dilate(2.0)) && em.Q.len() > 0) {
                double eta = std::log2(ei.Q.len() / em.Q.len()) / double(m);
                eta_min = std::min(eta_min, eta);
                ++eta_pairs;
            }
        }
    }
    rep.set("pairs_sampled", double(out.pairs_checked));
    rep.set("intersecting_pairs", double(intersecting));
    rep.set("violations_a", double(viol_a));
    rep.set("violations_b", double(viol_b));
    rep.set("violations_c", double(viol_c));
    if (eta_pairs) {
        out.eta_hat = eta_min;
        rep.set("eta_hat", eta_min);
        rep.set("eta_pairs", double(eta_pairs));
    }
    if (viol_a + viol_b + viol_c) rep.fail("regularity containment violated");
    return out;
}

// Auto-tuning: grow the constants until the structural checks pass.
// `extra_check` lets the caller chain the operator-level test (phi norms).
inline GenerationLattice tune_lattice(
    const DiscreteMeasure& mu, const DeltaEngine& eng, LatticeConfig cfg, Rng& rng,
    const std::function<bool(const GenerationLattice&)>& extra_check = nullptr,
    int max_rounds = 8) {
    for (int round = 0;; ++round) {
        GenerationLattice lat = build_lattice(mu, eng, cfg);
        lat.cfg.tuning_rounds_used = round;
        auto nest = verify_nesting(lat);
        bool regu_ok = true;
        if (nest.pass) {
            Rng r2(rng());
            auto regu = verify_regularity(lat, r2, 4000);
            regu_ok = regu.report.pass;
        }
        bool structural = nest.pass && regu_ok;
        bool extra_ok = structural && (!extra_check || extra_check(lat));
        if ((structural && extra_ok) || round >= max_rounds) return lat;
        if (!structural) {
            // containment slack is governed by sigma (the hat-gap)
            cfg.sigma *= 1.5;
        } else {
            // operator-level failure: widen the ladder, then the step
            switch (round % 3) {
                case 0: cfg.alpha2 *= 2; break;
                case 1: cfg.alpha1 *= 2; break;
                default: cfg.A *= 2; break;
            }
        }
        cfg.alpha1 = std::max(cfg.alpha1, 4 * cfg.sigma);
        cfg.alpha2 = std::max(cfg.alpha2, 4 * cfg.alpha1);
        cfg.A = std::max(cfg.A, 4 * cfg.alpha2);
    }
}

inline nlohmann::json lattice_to_json(const GenerationLattice& lat) {
    nlohmann::json j;
    j["k_min"] = lat.k_min;
    j["k_max"] = lat.k_max;
    j["config"] = {{"sigma", lat.cfg.sigma},   {"alpha1", lat.cfg.alpha1},
                   {"alpha2", lat.cfg.alpha2}, {"A", lat.cfg.A},
                   {"eps0", lat.cfg.eps0},     {"eps1", lat.cfg.eps1},
                   {"C0", lat.cfg.C0},         {"sigma_formula", lat.cfg.sigma_formula},
                   {"tuning_rounds", lat.cfg.tuning_rounds_used}};
    auto cube_json = [](const Cube& c) -> nlohmann::json {
        if (c.is_whole()) return {{"kind", "whole"}};
        if (c.is_point()) return {{"kind", "point"}, {"center", {c.center[0], c.center[1]}}};
        return {{"kind", "standard"}, {"center", {c.center[0], c.center[1]}}, {"side", c.side}};
    };
    auto& entries = j["entries"] = nlohmann::json::array();
    for (const auto& gen : lat.generations)
        for (const auto& e : gen) {
            nlohmann::json je = {{"point_index", e.point_index},
                                 {"k", e.k},
                                 {"class", cube_class_name(e.cls)},
                                 {"cube", cube_json(e.Q)},
                                 {"achieved_delta", e.achieved_delta},
                                 {"deviation", e.deviation}};
            if (e.cls == CubeClass::Transit || e.cls == CubeClass::Stopping) {
                je["aux"] = {{"Q1", cube_json(e.aux.Q1)},
                             {"Q1hat", cube_json(e.aux.Q1hat)},
                             {"Q2", cube_json(e.aux.Q2)},
                             {"Q2hat", cube_json(e.aux.Q2hat)},
                             {"Q3", cube_json(e.aux.Q3)},
                             {"Q1check", cube_json(e.aux.Q1check)},
                             {"Q1checkcheck", cube_json(e.aux.Q1checkcheck)},
                             {"Q3hathat", cube_json(e.aux.Q3hathat)}};
            }
            entries.push_back(std::move(je));
        }
    return j;
}

}  // namespace nhlp
