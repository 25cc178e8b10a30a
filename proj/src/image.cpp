#include "qcmap/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qcmap {

Eigen::Index ScalarImage::num_samples() const {
    Eigen::Index m = 1;
    for (int d : dims) m *= d;
    return m;
}

ScalarImage ScalarImage::cell_centered(int n, const std::vector<int>& dims,
                                       const Box& box) {
    ScalarImage img;
    img.n = n;
    img.dims = dims;
    img.spacing.resize(n);
    img.origin.resize(n);
    for (int k = 0; k < n; ++k) {
        img.spacing[k] = box.extent(k) / dims[k];
        img.origin[k] = box.lo[k] + 0.5 * img.spacing[k];
    }
    img.values = Eigen::VectorXd::Zero(img.num_samples());
    return img;
}

namespace {

constexpr double kPole = -0.26794919243112270647;   // sqrt(3) - 2

// Unser-style recursive prefilter for cubic B-spline coefficients,
// mirror boundary.
void prefilter_line(double* c, Eigen::Index len, Eigen::Index stride) {
    if (len == 1) return;
    const double z = kPole;
    const double gain = (1.0 - z) * (1.0 - 1.0 / z);

    auto at = [&](Eigen::Index i) -> double& { return c[i * stride]; };

    for (Eigen::Index i = 0; i < len; ++i) at(i) *= gain;

    // causal init: sum over the mirrored extension, truncated at machine
    // precision (full period for short lines)
    const Eigen::Index horizon =
        static_cast<Eigen::Index>(std::ceil(std::log(1e-17) / std::log(std::abs(z))));
    double sum;
    if (horizon < len) {
        sum = at(0);
        double zn = z;
        for (Eigen::Index i = 1; i < horizon; ++i) {
            sum += zn * at(i);
            zn *= z;
        }
    } else {
        double zn = z;
        double iz = 1.0 / z;
        double z2n = std::pow(z, static_cast<double>(len - 1));
        sum = at(0) + z2n * at(len - 1);
        z2n *= z2n * iz;
        for (Eigen::Index i = 1; i < len - 1; ++i) {
            sum += (zn + z2n) * at(i);
            zn *= z;
            z2n *= iz;
        }
        sum /= (1.0 - std::pow(z, static_cast<double>(2 * len - 2)));
    }

    at(0) = sum;
    for (Eigen::Index i = 1; i < len; ++i) at(i) += z * at(i - 1);

    at(len - 1) = (z / (z * z - 1.0)) * (z * at(len - 2) + at(len - 1));
    for (Eigen::Index i = len - 2; i >= 0; --i) at(i) = z * (at(i + 1) - at(i));
}

// cubic B-spline weights and derivatives for the 4 support points
// floor(t)-1 .. floor(t)+2, u = t - floor(t)
void bspline_weights(double u, double w[4]) {
    const double u2 = u * u, u3 = u2 * u;
    w[0] = (1.0 - 3.0 * u + 3.0 * u2 - u3) / 6.0;
    w[1] = (4.0 - 6.0 * u2 + 3.0 * u3) / 6.0;
    w[2] = (1.0 + 3.0 * u + 3.0 * u2 - 3.0 * u3) / 6.0;
    w[3] = u3 / 6.0;
}

void bspline_dweights(double u, double dw[4]) {
    const double u2 = u * u;
    dw[0] = (-3.0 + 6.0 * u - 3.0 * u2) / 6.0;
    dw[1] = (-12.0 * u + 9.0 * u2) / 6.0;
    dw[2] = (3.0 + 6.0 * u - 9.0 * u2) / 6.0;
    dw[3] = 3.0 * u2 / 6.0;
}

// mirror index into [0, len-1]
inline Eigen::Index mirror(Eigen::Index i, Eigen::Index len) {
    if (len == 1) return 0;
    const Eigen::Index period = 2 * (len - 1);
    i = std::abs(i) % period;
    return (i < len) ? i : period - i;
}

struct AxisQuery {
    double w[4];
    double dw[4];
    Eigen::Index idx[4];
    bool clamped;
};

} // namespace

SplineImage fit_spline(const ScalarImage& image) {
    if (image.n < 1 || static_cast<int>(image.dims.size()) != image.n)
        throw std::invalid_argument("fit_spline: inconsistent image dimensions");
    for (int d : image.dims)
        if (d < 2) throw std::invalid_argument("fit_spline: dims must be >= 2 per axis");
    if (!image.values.allFinite())
        throw std::invalid_argument("fit_spline: non-finite image values");
    if (image.values.size() != image.num_samples())
        throw std::invalid_argument("fit_spline: value count mismatch");

    SplineImage model;
    model.source_ = image;
    model.coeffs_ = image.values;

    // separable prefilter, one axis at a time
    Eigen::Index stride = 1;
    const Eigen::Index total = image.num_samples();
    for (int axis = 0; axis < image.n; ++axis) {
        const Eigen::Index len = image.dims[axis];
        const Eigen::Index lines = total / len;
        for (Eigen::Index line = 0; line < lines; ++line) {
            const Eigen::Index low = line % stride;
            const Eigen::Index high = line / stride;
            double* base = model.coeffs_.data() + low + high * stride * len;
            prefilter_line(base, len, stride);
        }
        stride *= len;
    }
    return model;
}

namespace {

// per-axis interpolation setup at a (possibly clamped) query point
AxisQuery axis_query(const ScalarImage& img, int axis, double x) {
    AxisQuery q;
    const Eigen::Index len = img.dims[axis];
    double t = (x - img.origin[axis]) / img.spacing[axis];
    q.clamped = (t < 0.0) || (t > static_cast<double>(len - 1));
    t = std::clamp(t, 0.0, static_cast<double>(len - 1));
    double fl = std::floor(t);
    if (fl > static_cast<double>(len - 2)) fl = static_cast<double>(len - 2);
    const double u = t - fl;
    bspline_weights(u, q.w);
    bspline_dweights(u, q.dw);
    const Eigen::Index i0 = static_cast<Eigen::Index>(fl);
    for (int k = 0; k < 4; ++k) q.idx[k] = mirror(i0 - 1 + k, len);
    return q;
}

} // namespace

double SplineImage::value(const Eigen::VectorXd& point) const {
    double v;
    Eigen::VectorXd g;
    value_and_gradient(point, v, g);
    return v;
}

void SplineImage::value_and_gradient(const Eigen::VectorXd& point, double& value,
                                     Eigen::VectorXd& gradient) const {
    const ScalarImage& img = source_;
    const int n = img.n;
    gradient.resize(n);

    std::vector<AxisQuery> q(n);
    for (int a = 0; a < n; ++a) q[a] = axis_query(img, a, point[a]);

    // tensor-product accumulation over the 4^n support
    value = 0.0;
    gradient.setZero();
    Eigen::Index strides[3] = {1, 0, 0};
    for (int a = 1; a < n; ++a)
        strides[a] = strides[a - 1] * img.dims[a - 1];

    std::vector<int> k(n, 0);
    while (true) {
        Eigen::Index idx = 0;
        double w = 1.0;
        for (int a = 0; a < n; ++a) {
            idx += q[a].idx[k[a]] * strides[a];
            w *= q[a].w[k[a]];
        }
        const double c = coeffs_[idx];
        value += w * c;
        for (int g = 0; g < n; ++g) {
            double wg = 1.0;
            for (int a = 0; a < n; ++a)
                wg *= (a == g) ? q[a].dw[k[a]] : q[a].w[k[a]];
            gradient[g] += wg * c;
        }
        int a = 0;
        while (a < n && ++k[a] == 4) k[a++] = 0;
        if (a == n) break;
    }

    for (int a = 0; a < n; ++a) {
        // clamped axes contribute no spatial variation
        gradient[a] = q[a].clamped ? 0.0 : gradient[a] / img.spacing[a];
    }
}

PointGradients eval_with_jacobian(const SplineImage& model,
                                  const Eigen::VectorXd& points) {
    const int n = model.source().n;
    if (points.size() % n != 0)
        throw std::invalid_argument("eval_with_jacobian: point vector length not a multiple of n");
    const Eigen::Index m = points.size() / n;

    PointGradients out;
    out.values.resize(m);
    out.jacobian.resize(m, n * m);

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(n * m);
    Eigen::VectorXd p(n), g(n);
    for (Eigen::Index k = 0; k < m; ++k) {
        for (int a = 0; a < n; ++a) p[a] = points[a * m + k];
        double v;
        model.value_and_gradient(p, v, g);
        out.values[k] = v;
        for (int a = 0; a < n; ++a) trips.emplace_back(k, a * m + k, g[a]);
    }
    out.jacobian.setFromTriplets(trips.begin(), trips.end());
    out.jacobian.makeCompressed();
    return out;
}

Eigen::VectorXd resample_to_cells(const SplineImage& model, const Grid& grid) {
    if (model.source().n != grid.n)
        throw std::invalid_argument("resample_to_cells: dimension mismatch");
    const Eigen::Index cells = grid.num_cells();
    Eigen::VectorXd out(cells);
    for (Eigen::Index c = 0; c < cells; ++c) out[c] = model.value(grid.cell_center(c));
    return out;
}

Eigen::VectorXd resample_to_cells(const ScalarImage& image, const Grid& grid) {
    return resample_to_cells(fit_spline(image), grid);
}

} // namespace qcmap
