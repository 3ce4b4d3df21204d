#pragma once

#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "srd/spde/grid.hpp"

namespace srd::spde {

class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, double residual) : std::runtime_error(what), residual_(residual) {}
    double residual() const { return residual_; }

private:
    double residual_;
};

// Periodic 3-point (d=1) or 5-point (d=2) Laplacian divided by h^2.
void apply_laplacian(const TorusGrid& grid, std::span<const double> u, std::span<double> out);
std::vector<double> discrete_laplacian(const TorusField& field, int species);

// Solves (I - dt*kappa_i*Lap_h) u = rhs in place for each species.
//  d=1: cyclic tridiagonal elimination (Sherman-Morrison correction)
//  d=2, M a power of two: FFT diagonalisation
//  d=2 otherwise: conjugate gradients to relative residual 1e-12
class DiffusionSolver {
public:
    DiffusionSolver(const TorusGrid& grid, const Vec4& kappa, double dt);
    ~DiffusionSolver();
    DiffusionSolver(DiffusionSolver&&) noexcept;
    DiffusionSolver& operator=(DiffusionSolver&&) noexcept;
    DiffusionSolver(const DiffusionSolver&) = delete;
    DiffusionSolver& operator=(const DiffusionSolver&) = delete;

    void solve(int species, std::span<double> u);
    const char* method() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace srd::spde
