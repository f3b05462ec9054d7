// Copyright 2026 The nist-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "nist/mesh.hpp"

namespace nist::shapes {

// Procedural low-poly test objects, centered at the origin with unit-ish
// extent. Curved shapes carry analytic vertex normals so the Phong-tessellated
// label converges toward the smooth surface they approximate.

/// Unit icosphere; subdivisions = 0 is the icosahedron. Normals are radial.
Mesh icosphere(int subdivisions);

/// Torus in the xz-plane with major radius 0.7 and minor radius 0.3.
Mesh torus(int segments_u, int segments_v);

/// Capped cylinder of radius 0.6 and height 1.6 along y. Caps use their own
/// vertices so the rim stays a hard edge.
Mesh cylinder(int segments);

/// Capsule of radius 0.5 and total height 2 along y with smooth normals.
Mesh capsule(int segments);

/// Flat grille of parallel bars in the z = 0 plane, normals +z.
Mesh bar_grid();

} // namespace nist::shapes
