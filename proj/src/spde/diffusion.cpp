#include "srd/spde/diffusion.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <numbers>

namespace srd::spde {

void apply_laplacian(const TorusGrid& grid, std::span<const double> u, std::span<double> out) {
    const int M = grid.M;
    const double inv_h2 = 1.0 / (grid.h() * grid.h());
    if (grid.d == 1) {
        for (int j = 0; j < M; ++j) {
            const int jm = j == 0 ? M - 1 : j - 1;
            const int jp = j == M - 1 ? 0 : j + 1;
            out[static_cast<std::size_t>(j)] = (u[static_cast<std::size_t>(jm)] - 2.0 * u[static_cast<std::size_t>(j)] + u[static_cast<std::size_t>(jp)]) * inv_h2;
        }
        return;
    }
    const std::size_t m = static_cast<std::size_t>(M);
    for (std::size_t y = 0; y < m; ++y) {
        const std::size_t ym = y == 0 ? m - 1 : y - 1;
        const std::size_t yp = y == m - 1 ? 0 : y + 1;
        for (std::size_t x = 0; x < m; ++x) {
            const std::size_t xm = x == 0 ? m - 1 : x - 1;
            const std::size_t xp = x == m - 1 ? 0 : x + 1;
            out[y * m + x] = (u[y * m + xm] + u[y * m + xp] + u[ym * m + x] + u[yp * m + x] - 4.0 * u[y * m + x]) * inv_h2;
        }
    }
}

std::vector<double> discrete_laplacian(const TorusField& field, int species) {
    std::vector<double> out(field.grid().cells());
    apply_laplacian(field.grid(), field.species(species), out);
    return out;
}

namespace {

std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

// Cyclic tridiagonal system with diagonal b and off-diagonals/corners -r.
struct CyclicTridiagonal {
    int M = 0;
    double r = 0.0, gamma = 0.0;
    std::vector<double> cp, denom, z;
    double zfac = 0.0;

    CyclicTridiagonal(int M_, double r_) : M(M_), r(r_), cp(static_cast<std::size_t>(M_)), denom(static_cast<std::size_t>(M_)), z(static_cast<std::size_t>(M_)) {
        const double b = 1.0 + 2.0 * r;
        const double off = -r;
        gamma = -b;
        std::vector<double> diag(static_cast<std::size_t>(M), b);
        diag[0] = b - gamma;
        diag[static_cast<std::size_t>(M - 1)] = b - off * off / gamma;
        // Thomas factorisation of the modified tridiagonal part
        denom[0] = diag[0];
        cp[0] = off / denom[0];
        for (int i = 1; i < M; ++i) {
            const auto k = static_cast<std::size_t>(i);
            denom[k] = diag[k] - off * cp[k - 1];
            cp[k] = off / denom[k];
        }
        std::vector<double> u(static_cast<std::size_t>(M), 0.0);
        u[0] = gamma;
        u[static_cast<std::size_t>(M - 1)] = off;
        z = u;
        thomas(z);
        zfac = 1.0 + z[0] + off * z[static_cast<std::size_t>(M - 1)] / gamma;
    }

    void thomas(std::vector<double>& x) const {
        const double off = -r;
        x[0] /= denom[0];
        for (int i = 1; i < M; ++i) {
            const auto k = static_cast<std::size_t>(i);
            x[k] = (x[k] - off * x[k - 1]) / denom[k];
        }
        for (int i = M - 2; i >= 0; --i) {
            const auto k = static_cast<std::size_t>(i);
            x[k] -= cp[k] * x[k + 1];
        }
    }

    void solve(std::span<double> u, std::vector<double>& work) const {
        const double off = -r;
        work.assign(u.begin(), u.end());
        thomas(work);
        const double fact = (work[0] + off * work[static_cast<std::size_t>(M - 1)] / gamma) / zfac;
        for (int i = 0; i < M; ++i) {
            const auto k = static_cast<std::size_t>(i);
            u[k] = work[k] - fact * z[k];
        }
    }
};

}  // namespace

struct DiffusionSolver::Impl {
    TorusGrid grid;
    Vec4 kappa;
    double dt;
    enum class Method { Tridiagonal, Fft, ConjugateGradient } method;

    std::vector<CyclicTridiagonal> tri;
    std::vector<double> work;

    // FFT path
    double* real_buf = nullptr;
    fftw_complex* spec_buf = nullptr;
    fftw_plan fwd = nullptr, bwd = nullptr;
    std::array<std::vector<double>, 4> scale;

    // CG path
    std::vector<double> r, p, ap, lap;

    Impl(const TorusGrid& g, const Vec4& k, double dt_) : grid(g), kappa(k), dt(dt_) {
        grid.validate();
        if (!(dt > 0.0)) throw std::invalid_argument("DiffusionSolver: dt must be > 0");
        const double h2 = grid.h() * grid.h();
        if (grid.d == 1) {
            method = Method::Tridiagonal;
            for (double kap : kappa) tri.emplace_back(grid.M, dt * kap / h2);
        } else if (is_power_of_two(grid.M)) {
            method = Method::Fft;
            const int M = grid.M;
            const int mc = M / 2 + 1;
            {
                std::lock_guard<std::mutex> lock(fftw_planner_mutex());
                real_buf = fftw_alloc_real(static_cast<std::size_t>(M) * M);
                spec_buf = fftw_alloc_complex(static_cast<std::size_t>(M) * mc);
                // FFTW_ESTIMATE: plan choice must not depend on timing, or
                // results could differ between runs
                fwd = fftw_plan_dft_r2c_2d(M, M, real_buf, spec_buf, FFTW_ESTIMATE);
                bwd = fftw_plan_dft_c2r_2d(M, M, spec_buf, real_buf, FFTW_ESTIMATE);
            }
            const double norm = 1.0 / (static_cast<double>(M) * M);
            for (std::size_t s = 0; s < 4; ++s) {
                scale[s].resize(static_cast<std::size_t>(M) * mc);
                for (int ky = 0; ky < M; ++ky) {
                    const double sy = std::sin(std::numbers::pi * ky / M);
                    for (int kx = 0; kx < mc; ++kx) {
                        const double sx = std::sin(std::numbers::pi * kx / M);
                        const double lambda = 4.0 / h2 * (sx * sx + sy * sy);
                        scale[s][static_cast<std::size_t>(ky) * mc + kx] = norm / (1.0 + dt * kappa[s] * lambda);
                    }
                }
            }
        } else {
            method = Method::ConjugateGradient;
        }
    }

    ~Impl() {
        if (real_buf || spec_buf) {
            std::lock_guard<std::mutex> lock(fftw_planner_mutex());
            if (fwd) fftw_destroy_plan(fwd);
            if (bwd) fftw_destroy_plan(bwd);
            fftw_free(real_buf);
            fftw_free(spec_buf);
        }
    }

    void solve_fft(int s, std::span<double> u) {
        const std::size_t n = u.size();
        std::copy(u.begin(), u.end(), real_buf);
        fftw_execute(fwd);
        const auto& sc = scale[static_cast<std::size_t>(s)];
        for (std::size_t k = 0; k < sc.size(); ++k) {
            spec_buf[k][0] *= sc[k];
            spec_buf[k][1] *= sc[k];
        }
        fftw_execute(bwd);
        std::copy(real_buf, real_buf + n, u.begin());
    }

    void apply_op(double c, std::span<const double> x, std::span<double> out) {
        lap.resize(x.size());
        apply_laplacian(grid, x, lap);
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - c * lap[i];
    }

    void solve_cg(int s, std::span<double> u) {
        const double c = dt * kappa[static_cast<std::size_t>(s)];
        const std::size_t n = u.size();
        std::vector<double> b(u.begin(), u.end());
        r.resize(n);
        p.resize(n);
        ap.resize(n);
        apply_op(c, u, ap);
        double bnorm = 0.0, rr = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            r[i] = b[i] - ap[i];
            p[i] = r[i];
            rr += r[i] * r[i];
            bnorm += b[i] * b[i];
        }
        bnorm = std::sqrt(bnorm);
        const double tol = 1e-12 * (bnorm > 0.0 ? bnorm : 1.0);
        const int max_iter = static_cast<int>(10 * n) + 100;
        int it = 0;
        while (std::sqrt(rr) > tol) {
            if (++it > max_iter) throw SolverError("DiffusionSolver: conjugate gradients did not converge", std::sqrt(rr) / (bnorm > 0 ? bnorm : 1.0));
            apply_op(c, p, ap);
            double pap = 0.0;
            for (std::size_t i = 0; i < n; ++i) pap += p[i] * ap[i];
            const double alpha = rr / pap;
            double rr_new = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                u[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
                rr_new += r[i] * r[i];
            }
            const double beta = rr_new / rr;
            rr = rr_new;
            for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
        }
    }
};

DiffusionSolver::DiffusionSolver(const TorusGrid& grid, const Vec4& kappa, double dt)
    : impl_(std::make_unique<Impl>(grid, kappa, dt)) {}
DiffusionSolver::~DiffusionSolver() = default;
DiffusionSolver::DiffusionSolver(DiffusionSolver&&) noexcept = default;
DiffusionSolver& DiffusionSolver::operator=(DiffusionSolver&&) noexcept = default;

void DiffusionSolver::solve(int species, std::span<double> u) {
    if (u.size() != impl_->grid.cells()) throw std::invalid_argument("DiffusionSolver: size mismatch");
    switch (impl_->method) {
        case Impl::Method::Tridiagonal: impl_->tri[static_cast<std::size_t>(species)].solve(u, impl_->work); break;
        case Impl::Method::Fft: impl_->solve_fft(species, u); break;
        case Impl::Method::ConjugateGradient: impl_->solve_cg(species, u); break;
    }
}

const char* DiffusionSolver::method() const {
    switch (impl_->method) {
        case Impl::Method::Tridiagonal: return "cyclic_tridiagonal";
        case Impl::Method::Fft: return "fft";
        case Impl::Method::ConjugateGradient: return "conjugate_gradient";
    }
    return "unknown";
}

}  // namespace srd::spde
