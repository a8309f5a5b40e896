#pragma once

#include "lattice.hpp"
#include "operator_matrix.hpp"

namespace nhlp {

// bump at y of generation k: radial capped power profile cut off by a
// sup-norm ramp that is 1 on Q2hat and 0 outside 2*Q2hat
struct BumpProfile {
    bool zero = true;
    Pt y{0, 0};
    double n = 1;
    double q1len = 0;      // ell(Q1)
    double cap = 0;        // min((2/ell)^n, 4/ell^n)
    double hat2_half = 0;  // ell(Q2hat)/2
};

inline BumpProfile make_profile(const DiscreteMeasure& mu, const GenerationEntry& e) {
    BumpProfile p;
    if (!e.Q.is_standard() && !e.Q.is_point()) return p;          // initial: psi == 0
    if (!e.aux.Q1.is_standard() || !e.aux.Q2hat.is_standard()) return p;
    p.zero = false;
    p.y = e.Q.is_standard() ? e.Q.center : e.aux.Q1.center;
    p.n = mu.n;
    p.q1len = e.aux.Q1.len();
    p.cap = std::min(pow_n(2.0 / p.q1len, mu.n), 4.0 / pow_n(p.q1len, mu.n));
    p.hat2_half = e.aux.Q2hat.len() / 2;
    return p;
}

inline double psi_eval(const BumpProfile& p, const Pt& x) {
    if (p.zero) return 0.0;
    double s = sup_dist(x, p.y);
    if (s >= 2 * p.hat2_half) return 0.0;
    double theta = s <= p.hat2_half ? 1.0 : (2 * p.hat2_half - s) / p.hat2_half;
    double t = eucl_dist(x, p.y);
    double h = t <= p.q1len / 2 ? p.cap : 1.0 / pow_n(t, p.n);
    return h * theta;
}

// raw row-normalizable kernel: entries[i][j] = phi_{x_j,k}(x_i), Dirac
// correction tops the row integral up to at least 1/4
inline OperatorMatrix build_s_tilde(const DiscreteMeasure& mu, const GenerationLattice& lat,
                                    int k) {
    std::size_t N = mu.size();
    OperatorMatrix S(N);
    double a2 = lat.cfg.alpha2;
    std::vector<BumpProfile> prof(N);
    if (k <= lat.k_max) {
        int kk = std::max(k, lat.k_min);
        for (std::size_t j = 0; j < N; ++j) prof[j] = make_profile(mu, lat.at(j, kk));
    }  // beyond k_max everything is fully stopped: phi == 0
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < std::ptrdiff_t(N); ++i) {
        const std::size_t ii = std::size_t(i);
        double rowsum = 0;
        for (std::size_t j = 0; j < N; ++j) {
            double v = psi_eval(prof[j], mu.points[ii]) / a2;
            S.k(ii, j) = v;
            rowsum += v * mu.weights[j];
        }
        S.diag[ii] = std::max(0.0, 0.25 - rowsum);
    }
    return S;
}

struct SOperator {
    OperatorMatrix op;
    std::vector<double> s1, m, wk;  // S~1, 1/S~1, 1/S~*(m)
    bool zero = false;              // initial band: S_k := 0
    int k = 0;
};

// S_k = M S~ W S~* M with m = 1/S~1 and w = 1/S~*(m); assembled symmetric by
// construction (upper triangle mirrored) so S_k* = S_k exactly
inline SOperator build_s(const DiscreteMeasure& mu, const GenerationLattice& lat, int k) {
    std::size_t N = mu.size();
    SOperator out;
    out.k = k;
    if (k < 1) {  // initial band: any WholeSpace entry forces S_k = 0
        out.zero = true;
        out.op = OperatorMatrix(N);
        return out;
    }
    OperatorMatrix St = build_s_tilde(mu, lat, k);
    std::vector<double> ones(N, 1.0);
    out.s1 = St.apply(mu.weights, ones);
    out.m.resize(N);
    for (std::size_t i = 0; i < N; ++i) {
        if (!(out.s1[i] > 0)) throw std::runtime_error("build_s: S~1 not positive at point " +
                                                       std::to_string(i));
        out.m[i] = 1.0 / out.s1[i];
    }
    std::vector<double> stm = St.apply_adjoint(mu.weights, out.m);
    out.wk.resize(N);
    for (std::size_t i = 0; i < N; ++i) {
        if (!(stm[i] > 0)) throw std::runtime_error("build_s: S~*(1/S~1) not positive at point " +
                                                    std::to_string(i));
        out.wk[i] = 1.0 / stm[i];
    }
    OperatorMatrix S(N);
    const auto& w = mu.weights;
#pragma omp parallel for schedule(dynamic, 8)
    for (std::ptrdiff_t ip = 0; ip < std::ptrdiff_t(N); ++ip) {
        const std::size_t i = std::size_t(ip);
        for (std::size_t j = i; j < N; ++j) {
            double t1 = 0;
            const double* ri = &St.ker[i * N];
            const double* rj = &St.ker[j * N];
            for (std::size_t l = 0; l < N; ++l) t1 += ri[l] * w[l] * out.wk[l] * rj[l];
            double t2 = ri[j] * out.wk[j] * St.diag[j] + St.diag[i] * out.wk[i] * rj[i];
            double v = out.m[i] * out.m[j] * (t1 + t2);
            S.k(i, j) = v;
            S.k(j, i) = v;
        }
        S.diag[i] = out.m[i] * out.m[i] * out.wk[i] * St.diag[i] * St.diag[i];
    }
    out.op = std::move(S);
    return out;
}

// Lemma-style bounds on the normalization factors; feeds the tuning loop
inline VerificationReport verify_normalization(const DiscreteMeasure& mu,
                                               const GenerationLattice& lat, int k) {
    VerificationReport rep;
    rep.lemma = "normalization_bounds";
    rep.tolerances["s_tilde_row"] = 0.0;
    OperatorMatrix St = build_s_tilde(mu, lat, k);
    std::vector<double> ones(mu.size(), 1.0);
    auto s1 = St.apply(mu.weights, ones);
    double s1_min = kInf, s1_max = 0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        if (s1[i] < s1_min) s1_min = s1[i];
        if (s1[i] > s1_max) {
            s1_max = s1[i];
            rep.worst_witness = {{"point", i}, {"k", k}, {"s_tilde_1", s1[i]}};
        }
    }
    std::vector<double> m(mu.size());
    for (std::size_t i = 0; i < mu.size(); ++i) m[i] = 1.0 / s1[i];
    auto stm = St.apply_adjoint(mu.weights, m);
    double wk_min = kInf, wk_max = 0;
    for (double v : stm) {
        double wk = 1.0 / v;
        wk_min = std::min(wk_min, wk);
        wk_max = std::max(wk_max, wk);
    }
    rep.set("s_tilde_1_min", s1_min);
    rep.set("s_tilde_1_max", s1_max);
    rep.set("m_min", 1.0 / s1_max);
    rep.set("m_max", 1.0 / s1_min);
    rep.set("w_min", wk_min);
    rep.set("w_max", wk_max);
    if (s1_min < 0.25 - 1e-12 || s1_max > 1.5 + 1e-12) rep.fail("S~1 outside [1/4, 3/2]");
    if (wk_min < 0 || wk_max > 6) rep.fail("w_k outside [0, 6]");
    return rep;
}

// L1 mass of the bumps: eps2 = max | ||psi||_L1 - alpha2 |, eps3 = max
// deviation of both phi integrals from 1 over transit points.
//
// The two integrals behave very differently.  The column integral (mass of
// one bump) is pinned near 1 by construction of the aux-cube ladder.  The
// row integral at z0 sums foreign bumps evaluated at z0, and every bump is
// capped at 4/len(Q^1)^n; when all the mass near z0 belongs to points whose
// Q^1 already swallows z0 (scale-graded measures), no admissible profile
// can lift the row above row_ub(z0) computed from the caps alone.  We
// record that bound: a row deviation with row_ub < 1/2 is unfixable by any
// profile or by enlarging alpha2, so it must not drive constant escalation.
struct PhiNormResult {
    VerificationReport report;
    double eps2 = 0, eps3 = 0;
    double eps3_col = 0, eps3_row = 0;
    double row_ub_min = kInf;            // min over transit z0 of the cap bound
    std::size_t row_forced = 0;          // row violations certified unattainable
    std::size_t row_tunable = 0;         // row violations a better profile could fix
};

inline PhiNormResult verify_phi_norms(const DiscreteMeasure& mu, const GenerationLattice& lat,
                                      int k) {
    PhiNormResult out;
    VerificationReport& rep = out.report;
    rep.lemma = "phi_norms";
    if (k < 1 || k > lat.k_max) {
        rep.notes.push_back("no live generation at this k");
        return out;
    }
    std::size_t N = mu.size();
    double a2 = lat.cfg.alpha2;
    std::vector<BumpProfile> prof(N);
    for (std::size_t j = 0; j < N; ++j) prof[j] = make_profile(mu, lat.at(j, k));
    std::vector<double> colsum(N, 0.0);  // integral over x of phi_{y,k}(x)
    std::vector<double> rowsum(N, 0.0);  // integral over y of phi_{y,k}(x)
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t jp = 0; jp < std::ptrdiff_t(N); ++jp) {
        const std::size_t j = std::size_t(jp);
        if (prof[j].zero) continue;
        double s = 0;
        for (std::size_t i = 0; i < N; ++i) s += psi_eval(prof[j], mu.points[i]) * mu.weights[i];
        colsum[j] = s / a2;
    }
    std::vector<double> rowub(N, 0.0);   // best row any admissible profile allows
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ip = 0; ip < std::ptrdiff_t(N); ++ip) {
        const std::size_t i = std::size_t(ip);
        double s = 0, ub = 0;
        for (std::size_t j = 0; j < N; ++j) {
            if (prof[j].zero) continue;
            s += psi_eval(prof[j], mu.points[i]) * mu.weights[j];
            const Cube& q3 = lat.at(j, k).aux.Q3;
            if (!q3.is_standard() || !q3.contains(mu.points[i])) continue;
            double cap4 = 4.0 / pow_n(prof[j].q1len, mu.n);
            double r = eucl_dist(mu.points[i], mu.points[j]);
            ub += mu.weights[j] * (r > 0 ? std::min(cap4, 1.0 / pow_n(r, mu.n)) : cap4);
        }
        rowsum[i] = s / a2;
        rowub[i] = ub / a2;
    }
    std::size_t live = 0;
    for (std::size_t i = 0; i < N; ++i) {
        if (!prof[i].zero) out.eps2 = std::max(out.eps2, std::abs(colsum[i] * a2 - a2));
        if (lat.at(i, k).cls != CubeClass::Transit) continue;
        ++live;
        double dc = std::abs(colsum[i] - 1.0), dr = std::abs(rowsum[i] - 1.0);
        out.eps3_col = std::max(out.eps3_col, dc);
        out.eps3_row = std::max(out.eps3_row, dr);
        out.row_ub_min = std::min(out.row_ub_min, rowub[i]);
        if (dr > 0.5) (rowub[i] < 0.5 ? out.row_forced : out.row_tunable)++;
        double d = std::max(dc, dr);
        if (d > out.eps3) {
            out.eps3 = d;
            rep.worst_witness = {{"point", i},
                                 {"k", k},
                                 {"col", colsum[i]},
                                 {"row", rowsum[i]},
                                 {"row_ub", rowub[i]}};
        }
    }
    rep.set("eps2", out.eps2);
    rep.set("eps3", out.eps3);
    rep.set("eps3_col", out.eps3_col);
    rep.set("eps3_row", out.eps3_row);
    rep.set("transit_points", double(live));
    if (live) {
        rep.set("row_ub_min", out.row_ub_min);
        rep.set("row_violations_forced", double(out.row_forced));
        rep.set("row_violations_tunable", double(out.row_tunable));
    }
    if (live && out.eps3 > 0.5) rep.fail("eps3 exceeds 1/2");
    return out;
}

// kernel size/support/regularity constants of an assembled S_k
inline VerificationReport verify_kernel_bounds(const DiscreteMeasure& mu,
                                               const GenerationLattice& lat, int k,
                                               const SOperator& S) {
    VerificationReport rep;
    rep.lemma = "kernel_bounds";
    std::size_t N = mu.size();
    if (S.zero) {
        rep.notes.push_back("zero operator");
        return rep;
    }
    auto len_at = [&](std::size_t i, int kk) -> double {
        if (kk < lat.k_min) return kInf;
        if (kk > lat.k_max) return 0.0;
        const Cube& Q = lat.at(i, kk).Q;
        return Q.is_whole() ? kInf : Q.len();
    };
    std::size_t support_viol = 0;
    double c_b = 0, neg = 0;
    for (std::size_t i = 0; i < N; ++i) {
        const Cube& parent =
            k - 1 > lat.k_max ? Cube::point(mu.points[i]) : lat.at(i, std::max(k - 1, lat.k_min)).Q;
        for (std::size_t j = 0; j < N; ++j) {
            double v = S.op.k(i, j);
            neg = std::min(neg, v);
            if (v == 0) continue;
            if (!parent.contains(mu.points[j])) ++support_viol;
            double den = len_at(i, k) + len_at(j, k) + eucl_dist(mu.points[i], mu.points[j]);
            if (den > 0 && !std::isinf(den)) c_b = std::max(c_b, v * pow_n(den, mu.n));
        }
    }
    // regularity: |s(x,y) - s(x',y)| against |x-x'|/ell(Q_{x,k}) times the
    // size bound, over support points x' inside Q_{x,k}
    double c_c = 0;
    for (std::size_t i = 0; i < N; ++i) {
        double li = len_at(i, k);
        if (!(li > 0) || std::isinf(li)) continue;
        Cube Qi = Cube::standard(mu.points[i], li);
        for (std::size_t ip = 0; ip < N; ++ip) {
            if (ip == i || !Qi.contains(mu.points[ip])) continue;
            double dxx = eucl_dist(mu.points[i], mu.points[ip]);
            if (dxx == 0) continue;
            for (std::size_t j = 0; j < N; ++j) {
                double diff = std::abs(S.op.k(i, j) - S.op.k(ip, j));
                if (diff == 0) continue;
                double den = li + len_at(j, k) + eucl_dist(mu.points[i], mu.points[j]);
                if (!(den > 0) || std::isinf(den)) continue;
                c_c = std::max(c_c, diff * li / dxx * pow_n(den, mu.n));
            }
        }
    }
    rep.set("support_violations", double(support_viol));
    rep.set("min_entry", neg);
    rep.set("C_b", c_b);
    rep.set("C_c", c_c);
    if (support_viol) rep.fail("kernel support escapes Q_{x,k-1}");
    if (neg < 0) rep.fail("negative kernel entry");
    return rep;
}

// operator-level health check chained into the lattice tuning loop.  Only
// deviations that enlarging the constants can actually cure gate the loop:
// column mass and row violations below the cap certificate.  Certified-
// unattainable row deviations stay in the reports but escalating on them
// just collapses the generation depth without moving the rows.
inline bool aoi_health_check(const DiscreteMeasure& mu, const GenerationLattice& lat) {
    for (int k = 1; k <= lat.k_max; ++k) {
        if (!verify_normalization(mu, lat, k).pass) return false;
        PhiNormResult pn = verify_phi_norms(mu, lat, k);
        if (pn.eps3_col > 0.5 || pn.row_tunable > 0) return false;
    }
    return true;
}

// standard pipeline: calibrate, build, tune against both the structural and
// the operator-level checks
inline GenerationLattice build_tuned_lattice(const DiscreteMeasure& mu, const DeltaEngine& eng,
                                             Rng& rng) {
    LatticeConfig cfg = auto_config(mu, eng, rng);
    return tune_lattice(mu, eng, cfg, rng,
                        [&](const GenerationLattice& lat) { return aoi_health_check(mu, lat); });
}

}  // namespace nhlp
