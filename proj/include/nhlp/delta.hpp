#pragma once

#include "measure.hpp"
#include "report.hpp"

namespace nhlp {

struct DeltaValue {
    double value = 0;
    Cube QR = Cube::whole();  // integration regions: QR\Q and RQ\R
    Cube RQ = Cube::whole();
};

// delta(Q,R) = max over both enclosing regions of sum w_i/|x_i - z|^n.
// General form, O(N); concentric queries should go through DeltaEngine.
inline DeltaValue delta(const DiscreteMeasure& mu, const Cube& Q, const Cube& R) {
    DeltaValue dv;
    if (Q.same_as(R)) return dv;
    auto term = [&](const Cube& A, const Cube& B, Cube& region_outer) -> double {
        if (A.is_whole()) {
            region_outer = Cube::whole();
            return 0.0;
        }
        Cube AB = enclosing_cube(A, B);
        region_outer = AB;
        double s = 0;
        for (std::size_t i = 0; i < mu.size(); ++i) {
            const Pt& p = mu.points[i];
            if (AB.contains(p) && !A.contains(p))
                s += mu.weights[i] / pow_n(eucl_dist(p, A.center), mu.n);
        }
        return s;
    };
    double t1 = term(Q, R, dv.QR);
    double t2 = term(R, Q, dv.RQ);
    dv.value = std::max(t1, t2);
    return dv;
}

struct DoublingSearchResult {
    Cube cube = Cube::whole();
    double achieved_delta = 0;
    double target_delta = 0;
    double deviation = 0;
    bool is_doubling = false;
    bool stopping = false;  // inner search: target unreachable, collapsed to the point
    bool initial = false;   // outer search: target beyond delta(R0, R^d)
    struct TracePoint {
        double side, delta;
        bool doubling;
    };
    std::vector<TracePoint> scan_trace;
};

// Concentric delta queries for cubes centered at support points, O(log N)
// via the per-point tables. All lattice scans go through here.
class DeltaEngine {
  public:
    DeltaEngine(const DiscreteMeasure& mu, const MeasureIndex& idx) : mu_(mu), idx_(idx) {}

    const DiscreteMeasure& measure() const { return mu_; }
    const MeasureIndex& index() const { return idx_; }

    // delta(Q(x_i, side), R^d); side 0 means the point itself
    double to_whole(std::size_t i, double side) const {
        return idx_.tab[i].kernel_tail(side / 2);
    }

    // delta between concentric cubes centered at x_i, sides s1 <= s2
    double concentric(std::size_t i, double s1, double s2) const {
        const PointTable& t = idx_.tab[i];
        return t.kernel_tail(s1 / 2) - t.kernel_tail(s2 / 2);
    }

    double point_delta_to_whole(std::size_t i) const { return idx_.tab[i].kernel_tail(0); }

    bool doubling_at(std::size_t i, double side) const {
        const PointTable& t = idx_.tab[i];
        double beta = std::pow(2.0, mu_.dim + 1);
        double m = t.cube_mass(side);
        return m > 0 && t.cube_mass(2 * side) <= beta * m;
    }

    // Doubling cube centered at x_i inside the concentric outer cube of side
    // `outer_side` (inf = R^d), with delta(Q, outer) as close to `target` as
    // the atomic structure allows. delta(Q(h), outer) = tail(h) - tail(outer/2)
    // is a step function of the half-side with breakpoints at neighbour
    // distances, so the scan walks breakpoints outward from the best index.
    // prefer_large: within the winning breakpoint interval (where delta is
    // constant) take the largest side instead of the smallest. Generation
    // cubes keep the small convention; enlarged aux cubes want the far edge
    // so the containment lemmas get their full slack.
    DoublingSearchResult inner(std::size_t i, double outer_side, double target,
                               double max_side = kInf, bool prefer_large = false) const {
        const PointTable& t = idx_.tab[i];
        DoublingSearchResult res;
        res.target_delta = target;
        double base = std::isinf(outer_side) ? 0.0 : t.kernel_tail(outer_side / 2);
        double from_point = t.kernel_tail(0.0) - base;
        if (from_point <= target) {  // no cube can reach the target: stopping
            res.cube = Cube::point(mu_.points[i]);
            res.achieved_delta = from_point;
            res.deviation = std::abs(from_point - target);
            res.stopping = true;
            res.is_doubling = true;
            return res;
        }
        double cap = std::min(outer_side, max_side);
        // candidate half-sides: just at each neighbour distance (cube gains
        // that atom, closed convention), restricted to the outer cube
        std::size_t nmax = t.supd.size();
        auto delta_at_count = [&](std::size_t k) { return t.ksuf[k] - base; };
        // find count k* minimizing |delta - target| (delta decreasing in k)
        std::size_t lo = 0, hi = nmax;
        while (lo < hi) {
            std::size_t mid = (lo + hi) / 2;
            if (delta_at_count(mid) > target) lo = mid + 1;
            else hi = mid;
        }
        bool found = false;
        double best_dev = kInf, best_side = kInf;
        double best_delta = 0;
        auto consider = [&](std::size_t k) -> bool {
            // cube with exactly k neighbour atoms; representative half-sides
            double h_lo = k == 0 ? (k < nmax ? t.supd[0] / 2 : mu_.resolution / 4) : t.supd[k - 1];
            double h_hi = k < nmax ? t.supd[k] * (1 - 1e-12) : std::max(h_lo, t.supd.back()) * 2;
            if (2 * h_lo > cap) return false;  // exceeded the allowed side
            h_hi = std::min(h_hi, cap / 2);
            double dv = delta_at_count(k);
            bool any = false;
            double gm = std::min(h_hi, std::sqrt(std::max(h_lo, 1e-300) * std::max(h_hi, 1e-300)));
            double cands[3] = {h_lo, gm, h_lo};
            if (prefer_large) {
                cands[0] = h_hi;
                cands[2] = h_hi;
            }
            for (double h : cands) {
                if (h < h_lo || h > h_hi || !(h > 0)) continue;
                bool dbl = doubling_at(i, 2 * h);
                res.scan_trace.push_back({2 * h, dv, dbl});
                if (!dbl) continue;
                any = true;
                double dev = std::abs(dv - target);
                double tol = 1e-15 * (1 + std::abs(target));
                bool better = dev < best_dev - tol ||
                              (dev <= best_dev + tol &&
                               (prefer_large ? 2 * h > best_side || best_side == kInf
                                             : 2 * h < best_side));
                if (!found) better = dev < best_dev;
                if (better) {
                    best_dev = dev;
                    best_side = 2 * h;
                    best_delta = dv;
                    found = true;
                }
            }
            return any;
        };
        // walk outward from k*; |delta-target| grows monotonically in each
        // direction, so the first doubling hit on each side settles it
        bool done_dn = false, done_up = false;
        for (std::size_t step = 0; step <= nmax && !(done_dn && done_up); ++step) {
            if (!done_up) {
                if (lo + step <= nmax) {
                    if (consider(lo + step)) done_up = true;
                } else done_up = true;
            }
            if (!done_dn) {
                if (step + 1 <= lo) {
                    if (consider(lo - step - 1)) done_dn = true;
                } else done_dn = true;
            }
        }
        if (!found) {
            // fall back to the point (can happen only under a tight side cap)
            res.cube = Cube::point(mu_.points[i]);
            res.achieved_delta = from_point;
            res.deviation = std::abs(from_point - target);
            res.stopping = true;
            res.is_doubling = true;
            return res;
        }
        res.cube = Cube::standard(mu_.points[i], best_side);
        res.achieved_delta = best_delta;
        res.deviation = best_dev;
        res.is_doubling = true;
        return res;
    }

    // Doubling cube S concentric with and containing Q(x_i, inner_side), with
    // delta(inner, S) near target; ell(S) >= 2*inner_side. Target beyond
    // delta(inner, R^d) returns WholeSpace flagged initial.
    DoublingSearchResult outer(std::size_t i, double inner_side, double target,
                               double max_side = kInf, bool prefer_large = false) const {
        const PointTable& t = idx_.tab[i];
        DoublingSearchResult res;
        res.target_delta = target;
        double base = t.kernel_tail(inner_side / 2);
        if (base <= target) {
            res.cube = Cube::whole();
            res.achieved_delta = base;
            res.deviation = std::abs(base - target);
            res.initial = true;
            res.is_doubling = true;
            return res;
        }
        std::size_t nmax = t.supd.size();
        auto delta_at_count = [&](std::size_t k) { return base - t.ksuf[k]; };  // increasing in k
        std::size_t lo = 0, hi = nmax;
        while (lo < hi) {
            std::size_t mid = (lo + hi) / 2;
            if (delta_at_count(mid) < target) lo = mid + 1;
            else hi = mid;
        }
        double floor_side = 2 * inner_side;
        bool found = false;
        double best_dev = kInf, best_side = kInf, best_delta = 0;
        auto consider = [&](std::size_t k) -> bool {
            double h_lo = k == 0 ? floor_side / 2 : std::max(t.supd[k - 1], floor_side / 2);
            double h_hi = k < nmax ? t.supd[k] * (1 - 1e-12) : std::max(h_lo, t.supd.back()) * 2;
            if (h_hi < floor_side / 2) return false;
            h_hi = std::min(h_hi, max_side / 2);
            if (h_lo > h_hi) return false;
            double dv = delta_at_count(k);
            bool any = false;
            double gm = std::sqrt(h_lo * h_hi);
            double cands[3] = {h_lo, gm, h_lo};
            if (prefer_large) {
                cands[0] = h_hi;
                cands[2] = h_hi;
            }
            for (double h : cands) {
                if (!(h > 0) || h > h_hi || h < h_lo) continue;
                bool dbl = doubling_at(i, 2 * h);
                res.scan_trace.push_back({2 * h, dv, dbl});
                if (!dbl) continue;
                any = true;
                double dev = std::abs(dv - target);
                double tol = 1e-15 * (1 + std::abs(target));
                bool better = dev < best_dev - tol ||
                              (dev <= best_dev + tol &&
                               (prefer_large ? 2 * h > best_side : 2 * h < best_side));
                if (!found) better = true;
                if (better) {
                    best_dev = dev;
                    best_side = 2 * h;
                    best_delta = dv;
                    found = true;
                }
            }
            return any;
        };
        bool done_dn = false, done_up = false;
        for (std::size_t step = 0; step <= nmax && !(done_dn && done_up); ++step) {
            if (!done_up) {
                if (lo + step <= nmax) {
                    if (consider(lo + step)) done_up = true;
                } else done_up = true;
            }
            if (!done_dn) {
                if (step + 1 <= lo) {
                    if (consider(lo - step - 1)) done_dn = true;
                } else done_dn = true;
            }
        }
        if (!found) {
            res.cube = Cube::whole();
            res.achieved_delta = base;
            res.deviation = std::abs(base - target);
            res.initial = true;
            res.is_doubling = true;
            return res;
        }
        res.cube = Cube::standard(mu_.points[i], best_side);
        res.achieved_delta = best_delta;
        res.deviation = best_dev;
        res.is_doubling = true;
        return res;
    }

  private:
    const DiscreteMeasure& mu_;
    const MeasureIndex& idx_;
};

// wrappers taking arbitrary cube pairs, as the statements are usually quoted
inline DoublingSearchResult find_doubling_inner(const DeltaEngine& eng, std::size_t point_index,
                                                const Cube& R0, double target) {
    Cube R = R0.is_whole() ? R0 : R0.dilate(2.0);
    double outer_side = R.is_whole() ? kInf : R.len();
    return eng.inner(point_index, outer_side, target);
}

inline DoublingSearchResult find_doubling_outer(const DeltaEngine& eng, std::size_t point_index,
                                                const Cube& R0, double target) {
    return eng.outer(point_index, R0.len(), target);
}

// ---------------------------------------------------------------------------
// calibration and property verification

struct DeltaCalibration {
    double eps0 = 0;     // max additivity deviation over non-concentric nested triples
    double eps1 = 0;     // max search deviation over the battery (>= eps0 by policy)
    double c6 = 0;       // quasi-triangle excess
    double sigma_probe = 0;  // sup of delta(Q, 3.2 Q) over sampled cubes
};

inline DeltaCalibration calibrate_delta(const DeltaEngine& eng, Rng& rng,
                                        std::size_t samples = 400) {
    const DiscreteMeasure& mu = eng.measure();
    const MeasureIndex& idx = eng.index();
    DeltaCalibration cal;
    std::uniform_int_distribution<std::size_t> pick(0, mu.size() - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    for (std::size_t s = 0; s < samples; ++s) {
        std::size_t i = pick(rng);
        const PointTable& t = idx.tab[i];
        if (t.supd.empty()) continue;
        // random dyadic-ish scale within the point's neighbour range
        double lg_lo = std::log(std::max(t.supd.front(), 1e-300));
        double lg_hi = std::log(t.supd.back());
        double side = 2 * std::exp(lg_lo + unit(rng) * std::max(0.0, lg_hi - lg_lo));
        // sigma probe: hat cubes must be able to triple the side, so measure
        // the delta cost of that ratio
        cal.sigma_probe = std::max(cal.sigma_probe, eng.concentric(i, side, 3.2 * side));

        // non-concentric nested triple P in Q in R for eps0 / C6
        std::size_t j = pick(rng);
        double dij = sup_dist(mu.points[i], mu.points[j]);
        Cube P = Cube::standard(mu.points[i], side);
        Cube Q = Cube::standard(mu.points[j], 2 * (dij + side));
        Cube R = Cube::standard(mu.points[i], 8 * (dij + side));
        if (!Q.contains(P) || !R.contains(Q)) continue;
        double dPR = delta(mu, P, R).value;
        double dPQ = delta(mu, P, Q).value;
        double dQR = delta(mu, Q, R).value;
        cal.eps0 = std::max(cal.eps0, std::abs(dPR - dPQ - dQR));
        cal.c6 = std::max(cal.c6, dPR - dPQ - dQR);
    }
    // search battery for eps1: mid-range targets against R^d and against
    // concentric outer cubes
    for (std::size_t s = 0; s < samples; ++s) {
        std::size_t i = pick(rng);
        double full = eng.point_delta_to_whole(i);
        double target = (0.15 + 0.7 * unit(rng)) * full;
        auto r1 = eng.inner(i, kInf, target);
        if (!r1.stopping) cal.eps1 = std::max(cal.eps1, r1.deviation);
        if (r1.cube.is_standard()) {
            double remain = eng.to_whole(i, r1.cube.len());
            auto r2 = eng.outer(i, r1.cube.len(), 0.5 * remain);
            if (!r2.initial) cal.eps1 = std::max(cal.eps1, r2.deviation);
        }
    }
    cal.eps1 = std::max(cal.eps1, cal.eps0);
    return cal;
}

inline VerificationReport verify_delta_properties(const DeltaEngine& eng, Rng& rng,
                                                  std::size_t samples = 300) {
    const DiscreteMeasure& mu = eng.measure();
    const MeasureIndex& idx = eng.index();
    VerificationReport rep;
    rep.lemma = "delta_properties";
    rep.tolerances["concentric_additivity"] = 1e-12;
    double c0 = growth_constant(mu, idx);
    rep.set("C0", c0);

    std::uniform_int_distribution<std::size_t> pick(0, mu.size() - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst_dilation_ratio = 0;   // delta(Q, rho Q) / (C0 2^n rho^n)
    double worst_additivity = 0;
    DeltaCalibration cal = calibrate_delta(eng, rng, samples);

    for (std::size_t s = 0; s < samples; ++s) {
        std::size_t i = pick(rng);
        const PointTable& t = idx.tab[i];
        if (t.supd.empty()) continue;
        double lg_lo = std::log(std::max(t.supd.front(), 1e-300));
        double lg_hi = std::log(t.supd.back());
        double side = 2 * std::exp(lg_lo + unit(rng) * std::max(0.0, lg_hi - lg_lo));
        for (double rho : {1.5, 2.0, 4.0}) {
            double d = eng.concentric(i, side, rho * side);
            double bound = c0 * std::pow(2.0, mu.n) * std::pow(rho, mu.n);
            double ratio = d / bound;
            if (ratio > worst_dilation_ratio) {
                worst_dilation_ratio = ratio;
                rep.worst_witness["dilation"] = {{"point", i}, {"side", side}, {"rho", rho},
                                                 {"delta", d}, {"bound", bound}};
            }
        }
        // concentric additivity, exact by construction of the regions
        double s2 = side * (1.5 + 2 * unit(rng)), s3 = side * (8 + 8 * unit(rng));
        Cube P = Cube::standard(mu.points[i], side);
        Cube Q = Cube::standard(mu.points[i], s2);
        Cube R = Cube::standard(mu.points[i], s3);
        double lhs = delta(mu, P, R).value;
        double rhs = delta(mu, P, Q).value + delta(mu, Q, R).value;
        double devn = std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs));
        worst_additivity = std::max(worst_additivity, devn);
    }
    rep.set("dilation_bound_ratio_max", worst_dilation_ratio);
    rep.set("concentric_additivity_max_dev", worst_additivity);
    rep.set("eps0", cal.eps0);
    rep.set("eps1", cal.eps1);
    rep.set("C6", cal.c6);
    rep.set("sigma_probe", cal.sigma_probe);
    if (worst_dilation_ratio > 1.0) rep.fail("delta(Q, rho Q) exceeded C0 2^n rho^n");
    if (worst_additivity > 1e-12) rep.fail("concentric additivity broken");
    return rep;
}

}  // namespace nhlp
