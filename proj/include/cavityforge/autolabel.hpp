#pragma once

#include "cavityforge/boxes.hpp"
#include "cavityforge/grid.hpp"
#include "cavityforge/patch.hpp"

#include <vector>

namespace cavityforge::label {

enum class LabelMethod { Watershed, SquareFallback };

struct LabelMask {
    Mask mask;              ///< same shape as the patch
    PixelBox bbox;          ///< tight box of the set pixels, patch coordinates
    LabelMethod method = LabelMethod::Watershed;
    double radius_px = 0.0; ///< measured fringe radius used for the decision
};

struct LabelOptions {
    double fallback_radius_px = 8.0;  ///< below this the square label is used
    double fallback_scale = 1.5;      ///< square side = round(scale * 2 * radius)
    double snap_window_px = 3.0;
    patch::FringeCheckOptions fringe;

    bool operator==(const LabelOptions&) const = default;
};

/// Marker-seeded watershed on the inverted intensity followed by per-ray
/// snapping of the boundary to the darkest point of the fringe. Throws
/// LabelError when no fringe is detected or the fallback square does not fit.
LabelMask label_patch(const patch::CavityPatch& patch, const LabelOptions& opt = {});

/// Plain two-marker watershed (priority flood, 4-connected, ties broken by
/// insertion order). `markers` holds 0 for unlabeled cells and a positive label
/// otherwise; returns the completed label image.
Grid<int> watershed(const Grid<double>& relief, Grid<int> markers);

/// Normalized box of the mask's tight bbox placed at `origin` in an image of the
/// given size. Throws DomainError for an empty mask.
io::BoxRecord mask_to_box(const LabelMask& mask, int origin_x, int origin_y, int image_width, int image_height);

}  // namespace cavityforge::label
