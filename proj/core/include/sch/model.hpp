#pragma once

// The double-well nonlinearity f = F' of the equation, shared by the
// time-stepping schemes, the linearized eigenvalue problem and the residual
// estimators.  f' is bounded below by -1, which several solvers rely on.

namespace sch {

inline double double_well(double u) { return u * u * u - u; }
inline double double_well_prime(double u) { return 3.0 * u * u - 1.0; }

} // namespace sch
