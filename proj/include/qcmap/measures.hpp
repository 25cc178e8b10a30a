#pragma once

#include "qcmap/grid.hpp"
#include "qcmap/image.hpp"

#include <optional>
#include <utility>

namespace qcmap {

/// Per-element values of the n^2 first derivatives, d y_i / d x_j in
/// row-major order. Shared building block of the determinant, the
/// distortion measures and the energy.
std::vector<Eigen::VectorXd> derivative_fields(const Eigen::VectorXd& Y,
                                               const DiscreteOperators& ops);

/// Element-wise Jacobian determinant of the piecewise-linear map Y.
Eigen::VectorXd jacobian_determinant(const Eigen::VectorXd& Y,
                                     const DiscreteOperators& ops);
Eigen::VectorXd jacobian_determinant(const std::vector<Eigen::VectorXd>& deriv,
                                     int n);

/// Conformality distortion K = |grad y|_F^2 / (n det^(2/n)) where det > 0,
/// +inf sentinel on inverted elements.
Eigen::VectorXd conformality_distortion(const Eigen::VectorXd& Y,
                                        const DiscreteOperators& ops);

/// Beltrami coefficient magnitude |mu| per element (2D only).
Eigen::VectorXd beltrami_magnitude(const Eigen::VectorXd& Y,
                                   const DiscreteOperators& ops);

/// Dilatation K_d = (1+|mu|)/(1-|mu|).
Eigen::VectorXd dilatation(const Eigen::VectorXd& mu_magnitude);

/// Registration mismatch 100 * |T(PY)-R|^2 / |T(PX)-R|^2.
double re_ssd(const SplineImage& T, const Eigen::VectorXd& R_cells,
              const Eigen::VectorXd& Y, const Grid& grid,
              const DiscreteOperators& ops);

struct Histogram {
    Eigen::VectorXi counts;
    double lo = 0.0, hi = 0.0;       // bin range
    double min = 0.0, max = 0.0;
    double mean = 0.0, median = 0.0;
};

Histogram field_histogram(const Eigen::VectorXd& field, int bins,
                          std::optional<std::pair<double, double>> range = {});

} // namespace qcmap
