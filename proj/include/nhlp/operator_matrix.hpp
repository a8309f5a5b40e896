#pragma once

#include "core.hpp"

#include <ostream>

namespace nhlp {

// Dense kernel operator on L^2(mu): (Af)(x_i) = sum_j ker(i,j) w_j f(x_j)
// + diag(i) f(x_i). The diagonal term is a Dirac correction applied to
// function values, not weighted. Closed under composition and mu-adjoints.
struct OperatorMatrix {
    std::size_t n = 0;
    std::vector<double> ker;   // row-major n*n
    std::vector<double> diag;  // size n

    OperatorMatrix() = default;
    explicit OperatorMatrix(std::size_t n_) : n(n_), ker(n_ * n_, 0.0), diag(n_, 0.0) {}

    static OperatorMatrix identity(std::size_t n_) {
        OperatorMatrix m(n_);
        std::fill(m.diag.begin(), m.diag.end(), 1.0);
        return m;
    }

    double& k(std::size_t i, std::size_t j) { return ker[i * n + j]; }
    double k(std::size_t i, std::size_t j) const { return ker[i * n + j]; }

    bool is_zero() const {
        for (double v : ker)
            if (v != 0) return false;
        for (double v : diag)
            if (v != 0) return false;
        return true;
    }

    std::vector<double> apply(const std::vector<double>& w, const std::vector<double>& f) const {
        std::vector<double> out(n, 0.0);
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < std::ptrdiff_t(n); ++i) {
            const double* row = &ker[std::size_t(i) * n];
            double s = 0;
            for (std::size_t j = 0; j < n; ++j) s += row[j] * w[j] * f[j];
            out[std::size_t(i)] = s + diag[std::size_t(i)] * f[std::size_t(i)];
        }
        return out;
    }

    // mu-adjoint: kernel transposed, same diagonal
    std::vector<double> apply_adjoint(const std::vector<double>& w,
                                      const std::vector<double>& f) const {
        std::vector<double> out(n, 0.0);
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t j = 0; j < std::ptrdiff_t(n); ++j) {
            double s = 0;
            for (std::size_t i = 0; i < n; ++i) s += ker[i * n + std::size_t(j)] * w[i] * f[i];
            out[std::size_t(j)] = s + diag[std::size_t(j)] * f[std::size_t(j)];
        }
        return out;
    }

    OperatorMatrix adjoint() const {
        OperatorMatrix m(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) m.k(i, j) = k(j, i);
        m.diag = diag;
        return m;
    }

    OperatorMatrix& operator+=(const OperatorMatrix& o) {
        for (std::size_t t = 0; t < ker.size(); ++t) ker[t] += o.ker[t];
        for (std::size_t t = 0; t < diag.size(); ++t) diag[t] += o.diag[t];
        return *this;
    }
    OperatorMatrix& operator-=(const OperatorMatrix& o) {
        for (std::size_t t = 0; t < ker.size(); ++t) ker[t] -= o.ker[t];
        for (std::size_t t = 0; t < diag.size(); ++t) diag[t] -= o.diag[t];
        return *this;
    }
    OperatorMatrix& operator*=(double a) {
        for (double& v : ker) v *= a;
        for (double& v : diag) v *= a;
        return *this;
    }
    friend OperatorMatrix operator+(OperatorMatrix a, const OperatorMatrix& b) { return a += b; }
    friend OperatorMatrix operator-(OperatorMatrix a, const OperatorMatrix& b) { return a -= b; }
    friend OperatorMatrix operator*(double a, OperatorMatrix m) { return m *= a; }

    // (A o B) f = A(B f); kernel/diag form is closed under this product
    static OperatorMatrix compose(const OperatorMatrix& A, const OperatorMatrix& B,
                                  const std::vector<double>& w) {
        OperatorMatrix m(A.n);
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < std::ptrdiff_t(A.n); ++i) {
            const std::size_t ii = std::size_t(i);
            double* out = &m.ker[ii * A.n];
            const double* ra = &A.ker[ii * A.n];
            for (std::size_t l = 0; l < A.n; ++l) {
                double c = ra[l] * w[l];
                if (c == 0) continue;
                const double* rb = &B.ker[l * A.n];
                for (std::size_t j = 0; j < A.n; ++j) out[j] += c * rb[j];
            }
            for (std::size_t j = 0; j < A.n; ++j)
                out[j] += ra[j] * B.diag[j] + A.diag[ii] * B.ker[ii * A.n + j];
            m.diag[ii] = A.diag[ii] * B.diag[ii];
        }
        return m;
    }
};

inline double mu_dot(const std::vector<double>& w, const std::vector<double>& a,
                     const std::vector<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += w[i] * a[i] * b[i];
    return s;
}

inline double mu_norm(const std::vector<double>& w, const std::vector<double>& a) {
    return std::sqrt(std::max(0.0, mu_dot(w, a, a)));
}

// Operator norm on L^2(mu) by power iteration on A*A. Fixed seed makes runs
// reproducible; relative tolerance 1e-8.
inline double weighted_norm(const OperatorMatrix& A, const std::vector<double>& w,
                            std::uint64_t seed = 12345, double tol = 1e-8,
                            int max_iters = 1000) {
    if (A.n == 0 || A.is_zero()) return 0.0;
    Rng rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::vector<double> v(A.n);
    for (double& x : v) x = unit(rng);
    double nv = mu_norm(w, v);
    if (nv == 0) return 0.0;
    for (double& x : v) x /= nv;
    double lam = 0;
    for (int it = 0; it < max_iters; ++it) {
        std::vector<double> av = A.apply(w, v);
        double cur = mu_norm(w, av);  // = ||Av||, and lam -> ||A||
        std::vector<double> bv = A.apply_adjoint(w, av);
        double nb = mu_norm(w, bv);
        if (nb == 0) return cur;
        for (std::size_t i = 0; i < A.n; ++i) v[i] = bv[i] / nb;
        if (it > 2 && std::abs(cur - lam) <= tol * std::max(1e-300, cur)) return cur;
        lam = cur;
    }
    return lam;
}

// norm of a composition A1 o A2 o ... without forming the product: power
// iteration applying the chain and its adjoint in sequence
inline double weighted_norm_chain(const std::vector<const OperatorMatrix*>& chain,
                                  const std::vector<double>& w, std::uint64_t seed = 12345,
                                  double tol = 1e-8, int max_iters = 1000) {
    if (chain.empty()) return 0.0;
    std::size_t n = chain.front()->n;
    auto fwd = [&](std::vector<double> f) {
        for (auto it = chain.rbegin(); it != chain.rend(); ++it) f = (*it)->apply(w, f);
        return f;
    };
    auto bwd = [&](std::vector<double> f) {
        for (const OperatorMatrix* op : chain) f = op->apply_adjoint(w, f);
        return f;
    };
    Rng rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::vector<double> v(n);
    for (double& x : v) x = unit(rng);
    double nv = mu_norm(w, v);
    if (nv == 0) return 0.0;
    for (double& x : v) x /= nv;
    double lam = 0;
    for (int it = 0; it < max_iters; ++it) {
        std::vector<double> av = fwd(v);
        double cur = mu_norm(w, av);
        std::vector<double> bv = bwd(av);
        double nb = mu_norm(w, bv);
        if (nb == 0) return cur;
        for (std::size_t i = 0; i < n; ++i) v[i] = bv[i] / nb;
        if (it > 2 && std::abs(cur - lam) <= tol * std::max(1e-300, cur)) return cur;
        lam = cur;
    }
    return lam;
}

inline void to_csv(const OperatorMatrix& A, std::ostream& os, const std::string& label) {
    os << "# " << label << " N=" << A.n << "\n";
    os.precision(17);
    for (std::size_t i = 0; i < A.n; ++i) {
        for (std::size_t j = 0; j < A.n; ++j) {
            os << A.k(i, j);
            os << (j + 1 == A.n ? "" : ",");
        }
        os << "\n";
    }
    os << "# diag\n";
    for (std::size_t i = 0; i < A.n; ++i) os << A.diag[i] << (i + 1 == A.n ? "\n" : ",");
}

}  // namespace nhlp
