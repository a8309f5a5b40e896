#pragma once

#include "aoi.hpp"
#include "delta.hpp"

namespace nhlp {

// Band-limited multiscale decomposition: D_k = S_k - S_{k-1} for k in
// [1, k_max], telescoping exactly to I_band := S_{k_max}. Below the band
// S_k = 0, above it S_k = I, so D_k vanishes off the band.
struct LPDecomposition {
    int k_lo = 1, k_hi = 0;
    std::vector<OperatorMatrix> Sk;  // index k - k_lo
    std::vector<OperatorMatrix> Dk;
    OperatorMatrix I_band;
    int exceptional_k = 0;  // the one k with D_k 1 != 0 (carries the band constant)

    int N = -1;  // smallest N with ||I_band - Phi_N|| <= 1/2, -1 if none found
    OperatorMatrix PhiN;
    double I_minus_PhiN_norm = kInf;
    std::vector<double> phi_norm_curve;  // ||I_band - Phi_N|| for N = 0,1,...

    double eta_hat = 0, eta_r2 = 0;
    std::vector<std::pair<int, double>> decay_curve;  // (|j-k|, ||D_j D_k||)

    int bands() const { return k_hi - k_lo + 1; }
    const OperatorMatrix& D(int k) const { return Dk[std::size_t(k - k_lo)]; }
    const OperatorMatrix& S(int k) const { return Sk[std::size_t(k - k_lo)]; }

    // D_k^N = sum_{|j-k|<=N} D_j, clipped to the band
    OperatorMatrix DN(int k, int Nwin) const {
        OperatorMatrix out(I_band.n);
        for (int j = std::max(k_lo, k - Nwin); j <= std::min(k_hi, k + Nwin); ++j) out += D(j);
        return out;
    }

    std::vector<double> apply_D(int k, const std::vector<double>& w,
                                const std::vector<double>& f) const {
        return D(k).apply(w, f);
    }
};

// E_k = sum_j D_{k+j} D_j over the band
inline OperatorMatrix band_E(const DiscreteMeasure& mu, const LPDecomposition& d, int k) {
    OperatorMatrix E(d.I_band.n);
    for (int j = std::max(d.k_lo, d.k_lo - k); j <= std::min(d.k_hi, d.k_hi - k); ++j)
        E += OperatorMatrix::compose(d.D(k + j), d.D(j), mu.weights);
    return E;
}

// Phi_N = sum_{|k|<=N} E_k
inline OperatorMatrix build_phi(const DiscreteMeasure& mu, const LPDecomposition& d, int N) {
    OperatorMatrix Phi = band_E(mu, d, 0);
    for (int k = 1; k <= N; ++k) {
        Phi += band_E(mu, d, k);
        Phi += band_E(mu, d, -k);
    }
    return Phi;
}

inline LPDecomposition build_decomposition(const DiscreteMeasure& mu, const GenerationLattice& lat,
                                           int N_max = 10) {
    LPDecomposition d;
    d.k_lo = 1;
    d.k_hi = std::max(1, lat.k_max);
    std::size_t n = mu.size();
    OperatorMatrix prev(n);  // S_0 = 0
    for (int k = d.k_lo; k <= d.k_hi; ++k) {
        SOperator s = build_s(mu, lat, k);
        OperatorMatrix dk = s.op;
        dk -= prev;
        d.Dk.push_back(std::move(dk));
        prev = s.op;
        d.Sk.push_back(std::move(s.op));
    }
    d.I_band = d.Sk.back();

    // the unique generation whose difference does not annihilate constants
    std::vector<double> ones(n, 1.0);
    for (int k = d.k_lo; k <= d.k_hi; ++k) {
        auto v = d.D(k).apply(mu.weights, ones);
        double mx = 0;
        for (double x : v) mx = std::max(mx, std::abs(x));
        if (mx > 1e-9) d.exceptional_k = k;
    }

    // pairwise product norms and the decay fit ||D_j D_k|| ~ 2^{-|j-k| eta}.
    // The bound is an envelope, so the fit runs on the max norm per distance.
    // The exceptional band is excluded: its difference operator keeps the
    // band constant (D 1 != 0), and the decay mechanism is cancellation of
    // D_k 1 against kernel regularity.  Products that underflow to numerical
    // zero carry no information for a log fit and are dropped.
    std::vector<double> envelope(std::size_t(d.bands()), 0.0);
    for (int j = d.k_lo; j <= d.k_hi; ++j)
        for (int k = d.k_lo; k <= d.k_hi; ++k) {
            double nm = weighted_norm_chain({&d.D(j), &d.D(k)}, mu.weights);
            d.decay_curve.push_back({std::abs(j - k), nm});
            if (j != d.exceptional_k && k != d.exceptional_k)
                envelope[std::size_t(std::abs(j - k))] =
                    std::max(envelope[std::size_t(std::abs(j - k))], nm);
        }
    std::vector<double> xs, ys;
    for (std::size_t t = 0; t < envelope.size(); ++t)
        if (envelope[t] > 1e-15) {
            xs.push_back(double(t));
            ys.push_back(std::log2(envelope[t]));
        }
    LinFit fit = linear_fit(xs, ys);
    d.eta_hat = -fit.slope;
    d.eta_r2 = fit.r2;

    // E_k = sum_j D_{k+j} D_j; Phi_N = sum_{|k|<=N} E_k, N grows until the
    // band identity is approximated within 1/2
    int span = d.bands() - 1;
    auto e_of = [&](int k) { return band_E(mu, d, k); };
    OperatorMatrix Phi = e_of(0);
    for (int Ncur = 0; Ncur <= N_max; ++Ncur) {
        if (Ncur > 0 && Ncur <= span) {
            Phi += e_of(Ncur);
            Phi += e_of(-Ncur);
        }
        OperatorMatrix R = d.I_band;
        R -= Phi;
        double nm = weighted_norm(R, mu.weights);
        d.phi_norm_curve.push_back(nm);
        if (nm <= 0.5) {
            d.N = Ncur;
            d.PhiN = Phi;
            d.I_minus_PhiN_norm = nm;
            break;
        }
        if (Ncur == N_max || Ncur >= span) {  // curve is constant past the span
            d.PhiN = Phi;
            d.I_minus_PhiN_norm = nm;
            break;
        }
    }
    return d;
}

// weighted l^p norm: L^p(mu) for atomic mu
inline double lp_norm(const DiscreteMeasure& mu, const std::vector<double>& f, double p) {
    double s = 0;
    for (std::size_t i = 0; i < mu.size(); ++i) s += mu.weights[i] * std::pow(std::abs(f[i]), p);
    return std::pow(s, 1.0 / p);
}

// deterministic test family: lattice-cube indicators, gaussians in the
// weighted space, smooth bumps anchored at atoms; all band-projected
inline std::vector<double> test_function(const DiscreteMeasure& mu, const GenerationLattice& lat,
                                         std::size_t idx, Rng& rng) {
    std::size_t n = mu.size();
    std::vector<double> f(n, 0.0);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    switch (idx % 3) {
        case 0: {  // indicator of a random standard lattice cube
            std::uniform_int_distribution<int> pick_k(1, std::max(1, lat.k_max));
            for (int tries = 0; tries < 64; ++tries) {
                const Cube& Q = lat.at(pick(rng), pick_k(rng)).Q;
                if (!Q.is_standard()) continue;
                for (std::size_t i = 0; i < n; ++i) f[i] = Q.contains(mu.points[i]) ? 1.0 : 0.0;
                return f;
            }
            f[pick(rng)] = 1.0;
            return f;
        }
        case 1: {  // gaussian noise
            std::normal_distribution<double> g(0.0, 1.0);
            for (double& v : f) v = g(rng);
            return f;
        }
        default: {  // smooth bump at an atom, width from its finest live cube
            std::size_t c = pick(rng);
            double s = 0;
            for (int k = lat.k_max; k >= 1; --k)
                if (lat.at(c, k).Q.is_standard()) {
                    s = lat.at(c, k).Q.len();
                    break;
                }
            if (s == 0) s = 1.0;
            std::uniform_real_distribution<double> widen(1.0, 8.0);
            s *= widen(rng);
            for (std::size_t i = 0; i < n; ++i) {
                double t = eucl_dist(mu.points[i], mu.points[c]) / s;
                f[i] = std::exp(-0.5 * t * t);
            }
            return f;
        }
    }
}

struct QuasiOrthResult {
    VerificationReport report;
    double r_min = kInf, r_max = 0;
    std::vector<double> ratios;
};

// r(f) = sum_k ||D_k f||^2 / ||f||^2 over a band-projected family
inline QuasiOrthResult quasi_orthogonality(const DiscreteMeasure& mu, const GenerationLattice& lat,
                                           const LPDecomposition& d, std::size_t family_size,
                                           Rng& rng) {
    QuasiOrthResult out;
    out.report.lemma = "quasi_orthogonality";
    for (std::size_t t = 0; t < family_size; ++t) {
        std::vector<double> f = d.I_band.apply(mu.weights, test_function(mu, lat, t, rng));
        double nf = mu_norm(mu.weights, f);
        if (nf < 1e-12) continue;
        double s = 0;
        for (int k = d.k_lo; k <= d.k_hi; ++k) {
            double nd = mu_norm(mu.weights, d.D(k).apply(mu.weights, f));
            s += nd * nd;
        }
        double r = s / (nf * nf);
        out.ratios.push_back(r);
        if (r < out.r_min) {
            out.r_min = r;
            out.report.worst_witness = {{"kind", t % 3}, {"index", t}, {"r", r}};
        }
        out.r_max = std::max(out.r_max, r);
    }
    out.report.set("family_size", double(out.ratios.size()));
    out.report.set("r_min", out.r_min);
    out.report.set("r_max", out.r_max);
    if (out.ratios.empty() || !(out.r_min > 0) || !std::isfinite(out.r_max))
        out.report.fail("quasi-orthogonality ratios degenerate");
    return out;
}

// (||f||_p, || (sum_k |D_k f|^2)^{1/2} ||_p); f is band-projected first
inline std::pair<double, double> square_function_lp(const DiscreteMeasure& mu,
                                                    const LPDecomposition& d,
                                                    const std::vector<double>& f0, double p) {
    std::vector<double> f = d.I_band.apply(mu.weights, f0);
    std::vector<double> sq(mu.size(), 0.0);
    for (int k = d.k_lo; k <= d.k_hi; ++k) {
        auto v = d.D(k).apply(mu.weights, f);
        for (std::size_t i = 0; i < mu.size(); ++i) sq[i] += v[i] * v[i];
    }
    for (double& v : sq) v = std::sqrt(v);
    return {lp_norm(mu, f, p), lp_norm(mu, sq, p)};
}

// ---------------------------------------------------------------------------
// RBMO: oscillation over doubling cubes plus delta-penalized mean jumps over
// nested doubling pairs, evaluated on a deterministic sampled battery.

struct RBMOEstimate {
    VerificationReport report;
    double norm = 0, oscillation_part = 0, transition_part = 0;
    std::vector<Cube> battery;
};

inline bool cube_is_doubling(const DiscreteMeasure& mu, const Cube& Q) {
    double m = cube_mass(mu, Q);
    return m > 0 && cube_mass(mu, Q.dilate(2.0)) <= std::pow(2.0, mu.dim + 1) * m;
}

inline std::vector<Cube> doubling_battery(const DiscreteMeasure& mu, const GenerationLattice& lat,
                                          Rng& rng, std::size_t extra = 400) {
    std::vector<Cube> bat;
    for (int k = lat.k_min; k <= lat.k_max; ++k)
        for (std::size_t i = 0; i < mu.size(); ++i) {
            const Cube& Q = lat.at(i, k).Q;
            if (Q.is_standard() && cube_is_doubling(mu, Q)) bat.push_back(Q);
        }
    // per-atom minimal cubes, so sups over the battery see every atom
    for (std::size_t i = 0; i < mu.size(); ++i) {
        double nn = kInf;
        for (std::size_t j = 0; j < mu.size(); ++j) {
            double t = sup_dist(mu.points[i], mu.points[j]);
            if (j != i && t > 0) nn = std::min(nn, t);
        }
        if (!std::isfinite(nn)) continue;
        Cube Q = Cube::standard(mu.points[i], nn);
        if (cube_is_doubling(mu, Q)) bat.push_back(Q);
    }
    // random cubes: center at an atom, side = a dilated inter-atom distance
    std::uniform_int_distribution<std::size_t> pick(0, mu.size() - 1);
    std::uniform_real_distribution<double> lam(1.0, 4.0);
    for (std::size_t t = 0; t < extra; ++t) {
        std::size_t i = pick(rng), j = pick(rng);
        if (i == j) continue;
        double side = 2.0 * lam(rng) * sup_dist(mu.points[i], mu.points[j]);
        if (!(side > 0) || !std::isfinite(side)) continue;
        Cube Q = Cube::standard(mu.points[i], side);
        if (cube_is_doubling(mu, Q)) bat.push_back(Q);
    }
    return bat;
}

inline double cube_mean(const DiscreteMeasure& mu, const Cube& Q, const std::vector<double>& f,
                        double* mass_out = nullptr) {
    double m = 0, s = 0;
    for (std::size_t i = 0; i < mu.size(); ++i)
        if (Q.contains(mu.points[i])) {
            m += mu.weights[i];
            s += mu.weights[i] * f[i];
        }
    if (mass_out) *mass_out = m;
    return m > 0 ? s / m : 0.0;
}

inline RBMOEstimate rbmo_norm(const DiscreteMeasure& mu, const std::vector<Cube>& battery,
                              const std::vector<double>& f) {
    RBMOEstimate out;
    out.report.lemma = "rbmo_norm";
    out.battery = battery;
    std::vector<double> means(battery.size());
    for (std::size_t b = 0; b < battery.size(); ++b) {
        const Cube& Q = battery[b];
        double mass = 0;
        double mq = cube_mean(mu, Q, f, &mass);
        means[b] = mq;
        if (mass <= 0) continue;
        double osc = 0;
        for (std::size_t i = 0; i < mu.size(); ++i)
            if (Q.contains(mu.points[i])) osc += mu.weights[i] * std::abs(f[i] - mq);
        osc /= mass;
        if (osc > out.oscillation_part) {
            out.oscillation_part = osc;
            out.report.worst_witness = {{"part", "oscillation"}, {"cube", b}, {"value", osc}};
        }
    }
    // nested pairs, penalized by 1 + delta(Q, R)
    for (std::size_t a = 0; a < battery.size(); ++a)
        for (std::size_t b = 0; b < battery.size(); ++b) {
            if (a == b || !battery[b].contains(battery[a])) continue;
            double dv = delta(mu, battery[a], battery[b]).value;
            double jump = std::abs(means[a] - means[b]) / (1.0 + dv);
            if (jump > out.transition_part) {
                out.transition_part = jump;
                out.report.worst_witness = {{"part", "transition"}, {"inner", a}, {"outer", b},
                                            {"value", jump}};
            }
        }
    out.norm = std::max(out.oscillation_part, out.transition_part);
    out.report.set("norm", out.norm);
    out.report.set("oscillation_part", out.oscillation_part);
    out.report.set("transition_part", out.transition_part);
    out.report.set("battery_size", double(battery.size()));
    return out;
}

// canonical RBMO test function: log-distance to a reference atom
inline std::vector<double> log_distance_function(const DiscreteMeasure& mu, std::size_t anchor) {
    std::vector<double> f(mu.size());
    for (std::size_t i = 0; i < mu.size(); ++i)
        f[i] = std::log(mu.resolution + eucl_dist(mu.points[i], mu.points[anchor]));
    return f;
}

// default anchor: the atom closest to its nearest neighbour, i.e. adjacent
// to the measure's accumulation point.  Anchored there, log-distance varies
// across every scale the lattice resolves instead of being locally constant.
inline std::size_t log_anchor(const DiscreteMeasure& mu) {
    std::size_t best = 0;
    double best_d = kInf;
    for (std::size_t i = 0; i < mu.size(); ++i)
        for (std::size_t j = i + 1; j < mu.size(); ++j) {
            double t = eucl_dist(mu.points[i], mu.points[j]);
            if (t > 0 && t < best_d) {
                best_d = t;
                best = i;
            }
        }
    return best;
}

// local square-sum vs RBMO mass: for generation cubes Q at depth k, compare
// sum_{j >= k - N0} ||D_j f||^2 restricted to Q against ||f||_*^2 mu(Q).
// The exceptional band (D 1 != 0) is excluded: it carries the band constant,
// which oscillation-type norms cannot see.
inline VerificationReport verify_rbmo_square(const DiscreteMeasure& mu,
                                             const GenerationLattice& lat,
                                             const LPDecomposition& d, const std::vector<double>& f,
                                             double fstar, int N0) {
    VerificationReport rep;
    rep.lemma = "rbmo_square";
    rep.set("N0", double(N0));
    if (!(fstar > 0)) {
        rep.fail("zero RBMO norm");
        return rep;
    }
    std::vector<std::vector<double>> Df(std::size_t(d.bands()));
    for (int k = d.k_lo; k <= d.k_hi; ++k)
        Df[std::size_t(k - d.k_lo)] = d.D(k).apply(mu.weights, f);
    double worst = 0;
    std::size_t cubes = 0;
    for (int k = 1; k <= lat.k_max; ++k)
        for (std::size_t i = 0; i < mu.size(); ++i) {
            const Cube& Q = lat.at(i, k).Q;
            if (!Q.is_standard() || !cube_is_doubling(mu, Q)) continue;
            ++cubes;
            double mass = 0, s = 0;
            for (std::size_t x = 0; x < mu.size(); ++x) {
                if (!Q.contains(mu.points[x])) continue;
                mass += mu.weights[x];
                for (int j = std::max(d.k_lo, k - N0); j <= d.k_hi; ++j) {
                    if (j == d.exceptional_k) continue;
                    double v = Df[std::size_t(j - d.k_lo)][x];
                    s += mu.weights[x] * v * v;
                }
            }
            if (mass <= 0) continue;
            double ratio = s / (fstar * fstar * mass);
            if (ratio > worst) {
                worst = ratio;
                rep.worst_witness = {{"point", i}, {"k", k}, {"ratio", ratio}};
            }
        }
    rep.set("cubes_checked", double(cubes));
    rep.set("max_ratio", worst);
    if (!std::isfinite(worst)) rep.fail("rbmo square ratio not finite");
    return rep;
}

// discrete Carleson test with the paraproduct densities a_k = (D_k^N g)^2:
// measure the packing constant C9 over doubling generation cubes, then the
// embedding ratio sum_k ||S_k f||^2_{nu_k} / (C9 ||f||^2) over a family
inline VerificationReport carleson_check(const DiscreteMeasure& mu, const GenerationLattice& lat,
                                         const LPDecomposition& d, const std::vector<Cube>& battery,
                                         const std::vector<double>& g, int Nwin,
                                         std::size_t family_size, Rng& rng) {
    VerificationReport rep;
    rep.lemma = "carleson";
    std::size_t n = mu.size();
    std::vector<std::vector<double>> a(std::size_t(d.bands()));
    for (int k = d.k_lo; k <= d.k_hi; ++k) {
        auto v = d.DN(k, Nwin).apply(mu.weights, g);
        for (double& x : v) x = x * x;
        a[std::size_t(k - d.k_lo)] = std::move(v);
    }
    // packing constant over the doubling battery; generation cubes get the
    // depth-matched tail j >= k - 2, free cubes the full band
    auto packing = [&](const Cube& Q, int k) {
        double mass = 0, s = 0;
        for (std::size_t x = 0; x < n; ++x) {
            if (!Q.contains(mu.points[x])) continue;
            mass += mu.weights[x];
            for (int j = std::max(d.k_lo, k - 2); j <= d.k_hi; ++j)
                s += a[std::size_t(j - d.k_lo)][x] * mu.weights[x];
        }
        return mass > 0 ? s / mass : 0.0;
    };
    double c9 = 0;
    for (int k = 1; k <= lat.k_max; ++k)
        for (std::size_t i = 0; i < n; ++i) {
            const Cube& Q = lat.at(i, k).Q;
            if (Q.is_standard() && cube_is_doubling(mu, Q)) c9 = std::max(c9, packing(Q, k));
        }
    for (const Cube& Q : battery) c9 = std::max(c9, packing(Q, d.k_lo));
    rep.set("C9", c9);
    if (!(c9 > 0)) {
        rep.notes.push_back("trivial density family");
        return rep;
    }
    double worst = 0;
    for (std::size_t t = 0; t < family_size; ++t) {
        std::vector<double> f = test_function(mu, lat, t, rng);
        double nf = mu_norm(mu.weights, f);
        if (nf < 1e-12) continue;
        double s = 0;
        for (int k = d.k_lo; k <= d.k_hi; ++k) {
            auto v = d.S(k).apply(mu.weights, f);
            const auto& ak = a[std::size_t(k - d.k_lo)];
            for (std::size_t i = 0; i < n; ++i) s += v[i] * v[i] * ak[i] * mu.weights[i];
        }
        double ratio = s / (c9 * nf * nf);
        if (ratio > worst) {
            worst = ratio;
            rep.worst_witness = {{"f_index", t}, {"ratio", ratio}};
        }
    }
    rep.set("max_ratio", worst);
    if (!std::isfinite(worst)) rep.fail("carleson ratio not finite");
    return rep;
}

// pointwise maximal functions over a deterministic cube battery
struct MaximalResult {
    std::vector<double> M2, MS;
    double c_hat = 0;  // measured constant in M_S f <= C M_{(2)} f
};

inline MaximalResult maximal_ops(const DiscreteMeasure& mu, const GenerationLattice& lat,
                                 const LPDecomposition& d, const std::vector<Cube>& battery,
                                 const std::vector<double>& f) {
    std::size_t n = mu.size();
    MaximalResult out;
    out.M2.assign(n, 0.0);
    out.MS.assign(n, 0.0);
    std::vector<double> absf(n);
    for (std::size_t i = 0; i < n; ++i) absf[i] = std::abs(f[i]);
    const double dil[4] = {1.0, 1.5, 2.0, 4.0};
    auto sweep = [&](const Cube& Q0) {
        if (!Q0.is_standard()) return;
        for (double lam : dil) {
            Cube Q = Q0.dilate(lam);
            double m2 = cube_mass(mu, Q.dilate(2.0));
            if (!(m2 > 0)) continue;
            double s = 0;
            for (std::size_t x = 0; x < n; ++x)
                if (Q.contains(mu.points[x])) s += mu.weights[x] * absf[x];
            double val = s / m2;
            for (std::size_t x = 0; x < n; ++x)
                if (Q.contains(mu.points[x])) out.M2[x] = std::max(out.M2[x], val);
        }
    };
    for (int k = lat.k_min; k <= lat.k_max; ++k)
        for (std::size_t c = 0; c < n; ++c) sweep(lat.at(c, k).Q);
    for (const Cube& Q : battery) sweep(Q);
    for (int k = d.k_lo; k <= d.k_hi; ++k) {
        auto v = d.S(k).apply(mu.weights, f);
        for (std::size_t z = 0; z < n; ++z) {
            const Cube& Q = lat.at(z, k).Q;
            if (!Q.is_standard() || !(Q.len() > 0)) continue;  // point cubes: empty interior
            double av = std::abs(v[z]);
            for (std::size_t x = 0; x < n; ++x)
                if (Q.contains(mu.points[x])) out.MS[x] = std::max(out.MS[x], av);
        }
    }
    for (std::size_t x = 0; x < n; ++x)
        if (out.M2[x] > 0) out.c_hat = std::max(out.c_hat, out.MS[x] / out.M2[x]);
    return out;
}

}  // namespace nhlp
