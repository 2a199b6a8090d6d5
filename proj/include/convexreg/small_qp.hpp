#pragma once

#include "convexreg/types.hpp"

#include <optional>

namespace convexreg {

// Minimum-norm point of {x : normals.row(k) . x <= bounds[k]} by the
// Goldfarb-Idnani dual active-set method. Constraints violated by at most
// `tol` count as satisfied. Returns nullopt when the set is empty.
// Intended for few variables and many constraints, only a handful active.
std::optional<Vector> min_norm_point(const PointMatrix& normals, const Vector& bounds, double tol);

}  // namespace convexreg
