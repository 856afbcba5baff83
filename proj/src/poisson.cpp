#include "cavityforge/poisson.hpp"

#include "cavityforge/errors.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <vector>

namespace cavityforge::compose {

BlendResult seamless_blend(const Grid<double>& background, const Grid<double>& patch, const Mask& mask,
                           double tolerance) {
    const int w = background.width();
    const int h = background.height();
    if (patch.width() != w || patch.height() != h || mask.width() != w || mask.height() != h) {
        throw DomainError("blend region, patch and mask must have the same shape");
    }
    Grid<int> index(w, h, -1);
    int n = 0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!mask(x, y)) continue;
            if (x == 0 || y == 0 || x == w - 1 || y == h - 1) {
                throw DomainError("blend mask touches the region border");
            }
            index(x, y) = n++;
        }
    }
    BlendResult result;
    result.blended = background;
    result.unknowns = static_cast<std::size_t>(n);
    if (n == 0) return result;

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(n) * 5);
    Eigen::VectorXd b(n);
    constexpr int dx[4] = {1, -1, 0, 0};
    constexpr int dy[4] = {0, 0, 1, -1};
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const int row = index(x, y);
            if (row < 0) continue;
            // Negated Laplacian keeps the system positive definite.
            double rhs = -discrete_laplacian(patch, x, y);
            triplets.emplace_back(row, row, 4.0);
            for (int k = 0; k < 4; ++k) {
                const int nx = x + dx[k];
                const int ny = y + dy[k];
                const int col = index(nx, ny);
                if (col >= 0) {
                    triplets.emplace_back(row, col, -1.0);
                } else {
                    rhs += background(nx, ny);
                }
            }
            b[row] = rhs;
        }
    }
    Eigen::SparseMatrix<double> a(n, n);
    a.setFromTriplets(triplets.begin(), triplets.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
    solver.compute(a);
    if (solver.info() != Eigen::Success) throw SolverError("Poisson system factorization failed", -1.0);
    const Eigen::VectorXd f = solver.solve(b);
    if (solver.info() != Eigen::Success) throw SolverError("Poisson solve failed", -1.0);
    const double bnorm = b.norm();
    const double rnorm = (a * f - b).norm();
    result.residual = bnorm > 0.0 ? rnorm / bnorm : rnorm;
    if (!(result.residual < tolerance)) {
        throw SolverError("Poisson residual " + std::to_string(result.residual) + " above tolerance",
                          result.residual);
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const int row = index(x, y);
            if (row >= 0) result.blended(x, y) = f[row];
        }
    }
    return result;
}

}  // namespace cavityforge::compose
