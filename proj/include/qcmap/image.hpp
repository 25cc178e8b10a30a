#pragma once

#include "qcmap/grid.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <utility>
#include <vector>

namespace qcmap {

/// Scalar image sampled on a regular grid. Sample k of axis a sits at
/// origin[a] + k*spacing[a]; values are lexicographic with axis 0 fastest.
struct ScalarImage {
    int n = 0;
    std::vector<int> dims;
    Eigen::VectorXd spacing;
    Eigen::VectorXd origin;
    Eigen::VectorXd values;
    std::pair<double, double> source_range{0.0, 1.0};   // before normalization

    Eigen::Index num_samples() const;

    /// Samples placed at the cell centers of `box` (dims[a] cells per axis).
    static ScalarImage cell_centered(int n, const std::vector<int>& dims,
                                     const Box& box);
};

/// Cubic B-spline interpolant of a ScalarImage with mirror-boundary
/// prefiltering and clamp-to-edge extension. Values are C^2 and gradients
/// C^1 inside the sample hull; outside, queries clamp to the hull and the
/// gradient components of clamped axes are zero.
class SplineImage {
public:
    double value(const Eigen::VectorXd& point) const;
    void value_and_gradient(const Eigen::VectorXd& point, double& value,
                            Eigen::VectorXd& gradient) const;

    const ScalarImage& source() const { return source_; }
    const Eigen::VectorXd& coefficients() const { return coeffs_; }

    friend SplineImage fit_spline(const ScalarImage& image);

private:
    ScalarImage source_;
    Eigen::VectorXd coeffs_;
};

SplineImage fit_spline(const ScalarImage& image);

/// Values and the sparse point-wise gradient operator of a batch query.
/// `points` is coordinate-major ([x_1 of all points; x_2 of all points; ...]);
/// the jacobian has one row per point with entry (k, j*m+k) = dT/dx_j at
/// point k.
struct PointGradients {
    Eigen::VectorXd values;
    SparseMat jacobian;   // m x n*m
};

PointGradients eval_with_jacobian(const SplineImage& model,
                                  const Eigen::VectorXd& points);

/// Spline evaluation at the N^n cell centers of the grid.
Eigen::VectorXd resample_to_cells(const ScalarImage& image, const Grid& grid);
Eigen::VectorXd resample_to_cells(const SplineImage& model, const Grid& grid);

} // namespace qcmap
