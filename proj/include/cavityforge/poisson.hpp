#pragma once

#include "cavityforge/grid.hpp"

namespace cavityforge::compose {

struct BlendResult {
    Grid<double> blended;     ///< same size as the region
    double residual = 0.0;    ///< ||A f - b||_2 / ||b||_2 of the solved system
    std::size_t unknowns = 0;
};

/// Gradient-domain blend: inside the mask, solves lap(f) = lap(patch) with
/// f = background on the mask border (5-point stencil, direct sparse
/// Cholesky). Pixels outside the mask are copied from `background` unchanged.
/// The mask must keep a 1-pixel margin to the region edge (DomainError).
/// Throws SolverError when the relative residual exceeds `tolerance`.
BlendResult seamless_blend(const Grid<double>& background, const Grid<double>& patch, const Mask& mask,
                           double tolerance = 1e-6);

/// 5-point discrete Laplacian at an interior cell.
inline double discrete_laplacian(const Grid<double>& g, int x, int y) noexcept {
    return g(x + 1, y) + g(x - 1, y) + g(x, y + 1) + g(x, y - 1) - 4.0 * g(x, y);
}

}  // namespace cavityforge::compose
