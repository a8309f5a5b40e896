#pragma once

#include <fstream>
#include <memory>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "cube.hpp"

namespace nhlp {

// Weighted point cloud standing in for a Radon measure with growth
// mu(B(x,r)) <= C0 r^n for r >= resolution.
struct DiscreteMeasure {
    int dim = 1;
    double n = 1.0;  // growth exponent, 0 < n <= dim
    double resolution = 0.0;
    std::string label;
    std::vector<Pt> points;
    std::vector<double> weights;

    std::size_t size() const { return points.size(); }

    double total_mass() const { return std::accumulate(weights.begin(), weights.end(), 0.0); }

    double diameter() const {
        double d = 0;
        for (std::size_t i = 0; i < size(); ++i)
            for (std::size_t j = i + 1; j < size(); ++j)
                d = std::max(d, eucl_dist(points[i], points[j]));
        return d;
    }

    void validate() const {
        if (points.size() != weights.size()) throw std::invalid_argument("points/weights length mismatch");
        if (points.empty()) throw std::invalid_argument("empty measure");
        if (!(n > 0) || n > dim) throw std::invalid_argument("growth exponent out of (0, dim]");
        if (!(resolution > 0)) throw std::invalid_argument("resolution must be positive");
        for (double w : weights)
            if (!(w > 0)) throw std::invalid_argument("weights must be positive");
    }
};

inline double ball_mass(const DiscreteMeasure& mu, const Pt& x, double r) {
    double m = 0;
    for (std::size_t i = 0; i < mu.size(); ++i)
        if (eucl_dist(mu.points[i], x) <= r) m += mu.weights[i];
    return m;
}

inline double cube_mass(const DiscreteMeasure& mu, const Cube& Q) {
    double m = 0;
    for (std::size_t i = 0; i < mu.size(); ++i)
        if (Q.contains(mu.points[i])) m += mu.weights[i];
    return m;
}

// Per-point tables: neighbours sorted by sup-norm distance, with prefix mass
// and suffix sums of w/|.|^n. Concentric mass/delta queries become binary
// searches; this is what makes the lattice scans cheap.
struct PointTable {
    std::vector<double> supd;   // sorted, self excluded
    std::vector<double> wpre;   // prefix mass in supd order (atoms with supd <= supd[i])
    std::vector<double> ksuf;   // ksuf[i] = sum over j >= i of w_j/|x-x_j|^n (supd order)
    std::vector<double> eucd;   // sorted Euclidean distances, self excluded
    std::vector<double> wpre_e; // prefix mass in eucd order
    double self_weight = 0;

    // mass of the closed cube centered here with given side (includes self)
    double cube_mass(double side) const {
        double h = side / 2;
        auto it = std::upper_bound(supd.begin(), supd.end(), h);
        std::size_t k = std::size_t(it - supd.begin());
        return self_weight + (k ? wpre[k - 1] : 0.0);
    }

    double ball_mass(double r) const {
        auto it = std::upper_bound(eucd.begin(), eucd.end(), r);
        std::size_t k = std::size_t(it - eucd.begin());
        return self_weight + (k ? wpre_e[k - 1] : 0.0);
    }

    // sum of w/|.|^n over atoms with sup-distance strictly greater than h
    double kernel_tail(double h) const {
        auto it = std::upper_bound(supd.begin(), supd.end(), h);
        std::size_t k = std::size_t(it - supd.begin());
        return k < ksuf.size() ? ksuf[k] : 0.0;
    }
};

struct MeasureIndex {
    const DiscreteMeasure* mu = nullptr;
    std::vector<PointTable> tab;
    double diam = 0;

    explicit MeasureIndex(const DiscreteMeasure& m) : mu(&m) {
        std::size_t N = m.size();
        tab.resize(N);
        std::vector<std::pair<double, std::size_t>> order;
        for (std::size_t i = 0; i < N; ++i) {
            PointTable& t = tab[i];
            t.self_weight = m.weights[i];
            order.clear();
            for (std::size_t j = 0; j < N; ++j)
                if (j != i) order.emplace_back(sup_dist(m.points[i], m.points[j]), j);
            std::sort(order.begin(), order.end());
            t.supd.resize(order.size());
            t.wpre.resize(order.size());
            t.ksuf.assign(order.size() + 1, 0.0);
            double acc = 0;
            for (std::size_t r = 0; r < order.size(); ++r) {
                t.supd[r] = order[r].first;
                acc += m.weights[order[r].second];
                t.wpre[r] = acc;
            }
            for (std::size_t r = order.size(); r-- > 0;) {
                double ed = eucl_dist(m.points[i], m.points[order[r].second]);
                t.ksuf[r] = t.ksuf[r + 1] + m.weights[order[r].second] / pow_n(ed, m.n);
            }
            order.clear();
            for (std::size_t j = 0; j < N; ++j)
                if (j != i) order.emplace_back(eucl_dist(m.points[i], m.points[j]), j);
            std::sort(order.begin(), order.end());
            t.eucd.resize(order.size());
            t.wpre_e.resize(order.size());
            acc = 0;
            for (std::size_t r = 0; r < order.size(); ++r) {
                t.eucd[r] = order[r].first;
                acc += m.weights[order[r].second];
                t.wpre_e[r] = acc;
            }
            if (!t.supd.empty()) diam = std::max(diam, t.eucd.back());
        }
    }
};

// C0 := sup over support points and r >= resolution of
// max(mu(B(x,r))/r^n, mu(Q(x,2r))/(2r)^n). For atomic measures the sup over r
// is attained at an atom distance or at r = resolution, so the scan is exact.
inline double growth_constant(const DiscreteMeasure& mu, const MeasureIndex& idx) {
    if (mu.size() < 2) throw std::invalid_argument("growth_constant: single-atom measure");
    double c0 = 0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        const PointTable& t = idx.tab[i];
        double r = mu.resolution;
        c0 = std::max(c0, t.ball_mass(r) / pow_n(r, mu.n));
        c0 = std::max(c0, t.cube_mass(2 * r) / pow_n(2 * r, mu.n));
        for (double d : t.eucd)
            if (d >= mu.resolution) c0 = std::max(c0, t.ball_mass(d) / pow_n(d, mu.n));
        for (double d : t.supd)
            if (d >= mu.resolution) c0 = std::max(c0, t.cube_mass(2 * d) / pow_n(2 * d, mu.n));
    }
    return c0;
}

inline double growth_constant(const DiscreteMeasure& mu) {
    MeasureIndex idx(mu);
    return growth_constant(mu, idx);
}

inline bool is_doubling(const DiscreteMeasure& mu, const Cube& Q, double alpha = 2.0,
                        double beta = -1.0) {
    if (beta < 0) beta = std::pow(2.0, mu.dim + 1);
    if (Q.is_whole()) return true;
    if (Q.is_point()) {
        if (cube_mass(mu, Q) <= 0) throw std::invalid_argument("is_doubling: point carries no mass");
        return true;
    }
    double mQ = cube_mass(mu, Q);
    if (mQ <= 0) throw std::invalid_argument("is_doubling: cube not centered on support mass");
    return cube_mass(mu, Q.dilate(alpha)) <= beta * mQ;
}

// ---------------------------------------------------------------------------
// reference measure generators

inline DiscreteMeasure gen_uniform_interval(std::size_t atoms, double total_mass = 1.0) {
    if (atoms < 2) throw std::invalid_argument("uniform_interval: need at least 2 atoms");
    DiscreteMeasure mu;
    mu.dim = 1;
    mu.n = 1;
    mu.label = "uniform_interval";
    double h = 1.0 / double(atoms);
    for (std::size_t i = 0; i < atoms; ++i) {
        mu.points.push_back({(double(i) + 0.5) * h, 0});
        mu.weights.push_back(total_mass * h);
    }
    mu.resolution = h;
    return mu;
}

inline DiscreteMeasure gen_uniform_square(std::size_t per_side) {
    if (per_side < 2) throw std::invalid_argument("uniform_square: need at least 2 per side");
    DiscreteMeasure mu;
    mu.dim = 2;
    mu.n = 2;
    mu.label = "uniform_square";
    double h = 1.0 / double(per_side);
    for (std::size_t i = 0; i < per_side; ++i)
        for (std::size_t j = 0; j < per_side; ++j) {
            mu.points.push_back({(double(i) + 0.5) * h, (double(j) + 0.5) * h});
            mu.weights.push_back(h * h);
        }
    mu.resolution = h;
    return mu;
}

// planar 1/4-Cantor set: four corner squares of side 1/4 at every step
inline DiscreteMeasure gen_cantor_quarter(int level) {
    if (level < 1 || level > 5) throw std::invalid_argument("cantor: level in [1,5]");
    DiscreteMeasure mu;
    mu.dim = 2;
    mu.n = 1;
    mu.label = "cantor_quarter_planar";
    std::size_t count = 1;
    for (int i = 0; i < level; ++i) count *= 4;
    double w = 1.0 / double(count);
    double cell = std::pow(0.25, level);
    for (std::size_t idx = 0; idx < count; ++idx) {
        double x = 0, y = 0, side = 1.0;
        std::size_t c = idx;
        for (int i = 0; i < level; ++i) {
            std::size_t digit = (c >> (2 * (level - 1 - i))) & 3;
            if (digit & 1) x += 0.75 * side;
            if (digit & 2) y += 0.75 * side;
            side *= 0.25;
        }
        mu.points.push_back({x + cell / 2, y + cell / 2});
        mu.weights.push_back(w);
    }
    mu.resolution = cell;
    return mu;
}

// comb: one segment per level, lengths and masses both shrinking by `ratio`
// (constant density along each segment), segment m sitting at 2*ratio^m.
// Deep level counts give a measure spanning many delta-scales.
inline DiscreteMeasure gen_comb(int levels, int atoms_per_level = 6, double ratio = 0.25) {
    if (levels < 2 || atoms_per_level < 1) throw std::invalid_argument("comb: bad params");
    if (!(ratio > 0 && ratio < 0.5)) throw std::invalid_argument("comb: ratio in (0, 1/2)");
    DiscreteMeasure mu;
    mu.dim = 1;
    mu.n = 1;
    mu.label = "comb";
    double ell = 1.0;
    double min_gap = kInf;
    for (int m = 0; m < levels; ++m) {
        double a = 2 * ell;
        double h = ell / atoms_per_level;
        for (int j = 0; j < atoms_per_level; ++j) {
            mu.points.push_back({a + (j + 0.5) * h, 0});
            mu.weights.push_back(h);
        }
        min_gap = std::min(min_gap, h);
        ell *= ratio;
    }
    mu.resolution = min_gap;
    return mu;
}

// arclength measure on the graph y = slope*|x|, discretized on a mesh graded
// geometrically toward the kink so the atomization spans many delta-scales.
inline DiscreteMeasure gen_lipschitz_graph(std::size_t per_side, double min_x = 1e-60,
                                           double slope = 0.5) {
    if (per_side < 8) throw std::invalid_argument("lipschitz_graph: need >= 8 per side");
    if (!(min_x > 0 && min_x < 0.5)) throw std::invalid_argument("lipschitz_graph: bad min_x");
    DiscreteMeasure mu;
    mu.dim = 2;
    mu.n = 1;
    mu.label = "lipschitz_graph_arclength";
    double g = std::pow(min_x, 1.0 / double(per_side - 1));
    double arc = std::sqrt(1.0 + slope * slope);
    std::vector<double> xs(per_side);
    for (std::size_t j = 0; j < per_side; ++j) xs[j] = std::pow(g, double(j));
    double min_gap = kInf;
    for (int sgn : {+1, -1}) {
        for (std::size_t j = 0; j < per_side; ++j) {
            double hi = j == 0 ? xs[0] : std::sqrt(xs[j - 1] * xs[j]);
            double lo = j + 1 == per_side ? 0.0 : std::sqrt(xs[j] * xs[j + 1]);
            double x = sgn * xs[j];
            mu.points.push_back({x, slope * xs[j]});
            mu.weights.push_back((hi - lo) * arc);
            if (j) min_gap = std::min(min_gap, xs[j - 1] - xs[j]);
        }
    }
    mu.resolution = min_gap;
    return mu;
}

struct GeneratorSpec {
    std::string kind;
    std::size_t atoms = 200;   // uniform_interval
    std::size_t per_side = 16; // uniform_square / lipschitz_graph
    int level = 4;             // cantor
    int levels = 40;           // comb
    int atoms_per_level = 6;
    double ratio = 0.25;
    double min_x = 1e-60;
    double slope = 0.5;
};

inline DiscreteMeasure generate_example(const GeneratorSpec& s) {
    DiscreteMeasure mu;
    if (s.kind == "uniform_interval") mu = gen_uniform_interval(s.atoms);
    else if (s.kind == "uniform_square") mu = gen_uniform_square(s.per_side);
    else if (s.kind == "cantor_quarter_planar") mu = gen_cantor_quarter(s.level);
    else if (s.kind == "comb") mu = gen_comb(s.levels, s.atoms_per_level, s.ratio);
    else if (s.kind == "lipschitz_graph_arclength")
        mu = gen_lipschitz_graph(s.per_side, s.min_x, s.slope);
    else throw std::invalid_argument("unknown generator kind: " + s.kind);
    mu.validate();
    return mu;
}

// scan for a doubling violation: a cube Q with mu(2Q) > 2^{d+1} mu(Q)
struct DoublingWitness {
    bool found = false;
    Cube cube = Cube::whole();
    double ratio = 0;
};

inline DoublingWitness doubling_witness(const DiscreteMeasure& mu, const MeasureIndex& idx) {
    DoublingWitness w;
    double beta = std::pow(2.0, mu.dim + 1);
    for (std::size_t i = 0; i < mu.size(); ++i) {
        const PointTable& t = idx.tab[i];
        // ratio mu(2Q)/mu(Q) is maximized when an atom sits exactly on the
        // boundary of 2Q, i.e. side = neighbour distance
        for (double side : t.supd) {
            double m1 = t.cube_mass(side), m2 = t.cube_mass(2 * side);
            if (m1 > 0 && m2 > beta * m1 && m2 / m1 > w.ratio) {
                w.found = true;
                w.ratio = m2 / m1;
                w.cube = Cube::standard(mu.points[i], side);
            }
        }
    }
    return w;
}

// ---------------------------------------------------------------------------
// serialization

inline nlohmann::json measure_to_json(const DiscreteMeasure& mu) {
    nlohmann::json j;
    j["dim"] = mu.dim;
    j["n"] = mu.n;
    j["resolution"] = mu.resolution;
    j["label"] = mu.label;
    auto& pts = j["points"] = nlohmann::json::array();
    for (const Pt& p : mu.points) {
        if (mu.dim == 1) pts.push_back({p[0]});
        else pts.push_back({p[0], p[1]});
    }
    j["weights"] = mu.weights;
    return j;
}

inline DiscreteMeasure measure_from_json(const nlohmann::json& j) {
    DiscreteMeasure mu;
    mu.dim = j.at("dim").get<int>();
    mu.n = j.at("n").get<double>();
    mu.resolution = j.at("resolution").get<double>();
    mu.label = j.value("label", "");
    for (const auto& p : j.at("points")) {
        Pt q{0, 0};
        for (std::size_t c = 0; c < p.size() && c < 2; ++c) q[c] = p[c].get<double>();
        mu.points.push_back(q);
    }
    mu.weights = j.at("weights").get<std::vector<double>>();
    mu.validate();
    return mu;
}

inline void save_measure(const DiscreteMeasure& mu, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << measure_to_json(mu).dump(2) << "\n";
}

inline DiscreteMeasure load_measure(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    nlohmann::json j;
    in >> j;
    return measure_from_json(j);
}

// CSV import: one row per atom, x1..xd,w
inline DiscreteMeasure measure_from_csv(const std::string& path, int dim, double n,
                                        double resolution, const std::string& label = "csv") {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    DiscreteMeasure mu;
    mu.dim = dim;
    mu.n = n;
    mu.resolution = resolution;
    mu.label = label;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::vector<double> cells;
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(std::stod(cell));
        if (cells.size() != std::size_t(dim) + 1) throw std::runtime_error("csv row arity mismatch");
        Pt p{0, 0};
        for (int c = 0; c < dim; ++c) p[c] = cells[c];
        mu.points.push_back(p);
        mu.weights.push_back(cells.back());
    }
    mu.validate();
    return mu;
}

}  // namespace nhlp
