#include "qcmap/measures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace qcmap {

std::vector<Eigen::VectorXd> derivative_fields(const Eigen::VectorXd& Y,
                                               const DiscreteOperators& ops) {
    if (Y.size() != ops.A.front().cols())
        throw std::invalid_argument("derivative_fields: nodal field length mismatch");
    std::vector<Eigen::VectorXd> d;
    d.reserve(ops.A.size());
    for (const auto& Al : ops.A) d.push_back(Al * Y);
    return d;
}

Eigen::VectorXd jacobian_determinant(const std::vector<Eigen::VectorXd>& g, int n) {
    if (n == 2) {
        // A1Y.*A4Y - A2Y.*A3Y
        return g[0].cwiseProduct(g[3]) - g[1].cwiseProduct(g[2]);
    }
    return g[0].cwiseProduct(g[4].cwiseProduct(g[8]) - g[5].cwiseProduct(g[7])) -
           g[1].cwiseProduct(g[3].cwiseProduct(g[8]) - g[5].cwiseProduct(g[6])) +
           g[2].cwiseProduct(g[3].cwiseProduct(g[7]) - g[4].cwiseProduct(g[6]));
}

Eigen::VectorXd jacobian_determinant(const Eigen::VectorXd& Y,
                                     const DiscreteOperators& ops) {
    return jacobian_determinant(derivative_fields(Y, ops), ops.n);
}

Eigen::VectorXd conformality_distortion(const Eigen::VectorXd& Y,
                                        const DiscreteOperators& ops) {
    const auto g = derivative_fields(Y, ops);
    const Eigen::VectorXd det = jacobian_determinant(g, ops.n);
    Eigen::VectorXd frob2 = Eigen::VectorXd::Zero(det.size());
    for (const auto& gl : g) frob2 += gl.cwiseProduct(gl);

    Eigen::VectorXd K(det.size());
    const double inf = std::numeric_limits<double>::infinity();
    for (Eigen::Index e = 0; e < det.size(); ++e) {
        K[e] = (det[e] > 0.0)
                   ? frob2[e] / (ops.n * std::pow(det[e], 2.0 / ops.n))
                   : inf;
    }
    return K;
}

Eigen::VectorXd beltrami_magnitude(const Eigen::VectorXd& Y,
                                   const DiscreteOperators& ops) {
    if (ops.n != 2)
        throw std::invalid_argument("beltrami_magnitude: defined for n = 2 only");
    const auto g = derivative_fields(Y, ops);
    const Eigen::VectorXd det = jacobian_determinant(g, 2);
    Eigen::VectorXd frob2 = Eigen::VectorXd::Zero(det.size());
    for (const auto& gl : g) frob2 += gl.cwiseProduct(gl);

    Eigen::VectorXd mu(det.size());
    for (Eigen::Index e = 0; e < det.size(); ++e) {
        const double num = frob2[e] - 2.0 * det[e];
        const double den = frob2[e] + 2.0 * det[e];
        mu[e] = (den != 0.0) ? std::sqrt(std::max(0.0, num / den))
                             : std::numeric_limits<double>::infinity();
    }
    return mu;
}

Eigen::VectorXd dilatation(const Eigen::VectorXd& mu_magnitude) {
    Eigen::VectorXd kd(mu_magnitude.size());
    for (Eigen::Index e = 0; e < mu_magnitude.size(); ++e) {
        const double m = mu_magnitude[e];
        if (!(m >= 0.0 && m < 1.0))
            throw std::domain_error("dilatation: |mu| must lie in [0,1)");
        kd[e] = (1.0 + m) / (1.0 - m);
    }
    return kd;
}

double re_ssd(const SplineImage& T, const Eigen::VectorXd& R_cells,
              const Eigen::VectorXd& Y, const Grid& grid,
              const DiscreteOperators& ops) {
    if (R_cells.size() != grid.num_cells())
        throw std::invalid_argument("re_ssd: reference must be a cell field");
    const Eigen::VectorXd warped = eval_with_jacobian(T, ops.P * Y).values;
    const Eigen::VectorXd base =
        eval_with_jacobian(T, ops.P * grid.identity_map()).values;
    const double denom = (base - R_cells).squaredNorm();
    if (denom == 0.0)
        throw std::domain_error("re_ssd: undefined, T(PX) equals R exactly");
    return 100.0 * (warped - R_cells).squaredNorm() / denom;
}

Histogram field_histogram(const Eigen::VectorXd& field, int bins,
                          std::optional<std::pair<double, double>> range) {
    if (field.size() == 0) throw std::invalid_argument("field_histogram: empty field");
    if (bins < 1) throw std::invalid_argument("field_histogram: bins must be >= 1");

    Histogram hist;
    hist.min = field.minCoeff();
    hist.max = field.maxCoeff();
    hist.mean = field.mean();
    std::vector<double> sorted(field.data(), field.data() + field.size());
    std::sort(sorted.begin(), sorted.end());
    const size_t mid = sorted.size() / 2;
    hist.median = (sorted.size() % 2 == 1)
                      ? sorted[mid]
                      : 0.5 * (sorted[mid - 1] + sorted[mid]);

    hist.lo = range ? range->first : hist.min;
    hist.hi = range ? range->second : hist.max;
    if (!(hist.hi > hist.lo)) hist.hi = hist.lo + 1.0;

    hist.counts = Eigen::VectorXi::Zero(bins);
    const double width = (hist.hi - hist.lo) / bins;
    for (Eigen::Index e = 0; e < field.size(); ++e) {
        const double v = field[e];
        if (v < hist.lo || v > hist.hi) continue;
        int b = static_cast<int>((v - hist.lo) / width);
        b = std::clamp(b, 0, bins - 1);
        ++hist.counts[b];
    }
    return hist;
}

} // namespace qcmap
