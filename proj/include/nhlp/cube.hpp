#pragma once

#include "core.hpp"

namespace nhlp {

// Closed axis-parallel cube in sup-norm geometry. Two degenerate variants:
// a single point (side 0) and the whole space (side +inf).
struct Cube {
    enum class Kind { Standard, Point, Whole };
    Kind kind = Kind::Whole;
    Pt center{0, 0};
    double side = kInf;

    static Cube standard(Pt c, double s) {
        if (!(s > 0)) throw std::invalid_argument("cube side must be positive");
        return Cube{Kind::Standard, c, s};
    }
    static Cube point(Pt c) { return Cube{Kind::Point, c, 0.0}; }
    static Cube whole() { return Cube{Kind::Whole, {0, 0}, kInf}; }

    bool is_standard() const { return kind == Kind::Standard; }
    bool is_point() const { return kind == Kind::Point; }
    bool is_whole() const { return kind == Kind::Whole; }
    double len() const { return side; }
    bool has_center() const { return kind != Kind::Whole; }

    bool contains(const Pt& p) const {
        switch (kind) {
            case Kind::Whole: return true;
            case Kind::Point: return p[0] == center[0] && p[1] == center[1];
            default: return sup_dist(p, center) <= side / 2;
        }
    }

    // containment of cubes, boundary inclusive
    bool contains(const Cube& o) const {
        if (kind == Kind::Whole) return true;
        if (o.kind == Kind::Whole) return false;
        if (o.kind == Kind::Point) return contains(o.center);
        if (kind == Kind::Point) return false;
        return sup_dist(o.center, center) + o.side / 2 <= side / 2 + 1e-12 * side;
    }

    Cube dilate(double rho) const {
        if (!(rho > 0)) throw std::invalid_argument("dilation factor must be positive");
        switch (kind) {
            case Kind::Whole: return *this;
            case Kind::Point: return *this;
            default: return standard(center, side * rho);
        }
    }

    bool same_as(const Cube& o) const {
        if (kind != o.kind) return false;
        if (kind == Kind::Whole) return true;
        return center == o.center && side == o.side;
    }
};

inline bool cubes_intersect(const Cube& a, const Cube& b) {
    if (a.is_whole() || b.is_whole()) return true;
    double d = sup_dist(a.center, b.center);
    return d <= a.side / 2 + b.side / 2;
}

// Q_R: smallest cube concentric with Q containing Q and R.
inline Cube enclosing_cube(const Cube& Q, const Cube& R) {
    if (Q.is_whole()) throw std::invalid_argument("enclosing_cube: first cube has no center");
    if (R.is_whole()) return Cube::whole();
    // farthest sup-norm distance from z_Q to a point of R
    double reach = sup_dist(Q.center, R.center) + R.side / 2;
    double side = std::max(Q.len(), 2 * reach);
    if (side == 0) return Cube::point(Q.center);
    return Cube::standard(Q.center, side);
}

}  // namespace nhlp
