#include "qcmap/energy.hpp"

#include "qcmap/measures.hpp"

#include <cmath>
#include <stdexcept>

namespace qcmap {

namespace {

constexpr double kExpClamp = 60.0;
constexpr double kEpsReg = 1e-10;   // Tikhonov shift on the Y Hessian

double clamped_exp(double t, bool& hit) {
    if (t > kExpClamp) {
        hit = true;
        t = kExpClamp;
    } else if (t < -kExpClamp) {
        hit = true;
        t = -kExpClamp;
    }
    return std::exp(t);
}

void check_finite(const Eigen::VectorXd& v, const char* who) {
    if (!v.allFinite()) throw std::invalid_argument(std::string(who) + ": non-finite input");
}

} // namespace

const SparseMat& Problem::btb() const {
    if (btb_.rows() == 0) {
        btb_ = ops.B.transpose() * ops.B;
        btb_.makeCompressed();
    }
    return btb_;
}

const SparseMat& Problem::i2ti2() const {
    if (i2ti2_.rows() == 0 && landmarks && landmarks->size() > 0) {
        i2ti2_ = landmarks->I2.transpose() * landmarks->I2;
        i2ti2_.makeCompressed();
    }
    return i2ti2_;
}

ThetaContext make_theta_context(const Eigen::VectorXd& Y,
                                const Eigen::VectorXd& lambda1,
                                const Weights& weights, const Problem& problem) {
    ThetaContext ctx;
    ctx.weights = weights;
    ctx.h = problem.grid.h;
    ctx.n = problem.grid.n;
    ctx.prior = problem.prior ? &*problem.prior : nullptr;

    const auto deriv = derivative_fields(Y, problem.ops);
    ctx.r = Eigen::VectorXd::Zero(problem.grid.num_elements());
    for (const auto& g : deriv) ctx.r += g.cwiseProduct(g);
    ctx.s = jacobian_determinant(deriv, ctx.n) + lambda1 / weights.rho1;
    return ctx;
}

double theta_value(const Eigen::VectorXd& theta, const ThetaContext& ctx,
                   bool* clamp_hit) {
    check_finite(theta, "theta_value");
    const Weights& w = ctx.weights;
    const double h = ctx.h;
    const double n = ctx.n;

    bool hit = false;
    double distortion = 0.0, penalty = 0.0;
    for (Eigen::Index e = 0; e < theta.size(); ++e) {
        distortion += ctx.r[e] * clamped_exp(-2.0 / n * theta[e], hit);
        const double et = clamped_exp(theta[e], hit);
        const double d = et - ctx.s[e];
        penalty += d * d;
    }
    double value = 0.5 * w.alpha1 * h * theta.squaredNorm() +
                   w.alpha2 * h / n * distortion + 0.5 * w.rho1 * h * penalty;
    if (ctx.prior && w.alpha4 != 0.0) {
        const Eigen::VectorXd d = ctx.prior->I1 * theta - ctx.prior->theta_bar;
        value += 0.5 * w.alpha4 * h * d.squaredNorm();
    }
    if (clamp_hit) *clamp_hit = *clamp_hit || hit;
    return value;
}

ThetaEval theta_value_grad_hess(const Eigen::VectorXd& theta,
                                const ThetaContext& ctx) {
    check_finite(theta, "theta_value_grad_hess");
    const Weights& w = ctx.weights;
    const double h = ctx.h;
    const double n = ctx.n;
    const Eigen::Index m = theta.size();

    ThetaEval ev;
    ev.grad = Eigen::VectorXd::Zero(m);
    ev.hess_diag = Eigen::VectorXd::Zero(m);

    bool hit = false;
    double distortion = 0.0, penalty = 0.0;
    for (Eigen::Index e = 0; e < m; ++e) {
        const double em = clamped_exp(-2.0 / n * theta[e], hit);
        const double et = clamped_exp(theta[e], hit);
        const double d = et - ctx.s[e];
        distortion += ctx.r[e] * em;
        penalty += d * d;
        ev.grad[e] = w.alpha1 * h * theta[e] -
                     2.0 * w.alpha2 * h / (n * n) * ctx.r[e] * em +
                     w.rho1 * h * et * d;
        ev.hess_diag[e] = w.alpha1 * h +
                          4.0 * w.alpha2 * h / (n * n * n) * ctx.r[e] * em +
                          w.rho1 * h * et * et;
    }
    ev.value = 0.5 * w.alpha1 * h * theta.squaredNorm() +
               w.alpha2 * h / n * distortion + 0.5 * w.rho1 * h * penalty;

    if (ctx.prior && w.alpha4 != 0.0) {
        const Eigen::VectorXd d = ctx.prior->I1 * theta - ctx.prior->theta_bar;
        ev.value += 0.5 * w.alpha4 * h * d.squaredNorm();
        ev.grad += w.alpha4 * h * (ctx.prior->I1.transpose() * d);
        for (int k = 0; k < ctx.prior->I1.outerSize(); ++k)
            for (SparseMat::InnerIterator it(ctx.prior->I1, k); it; ++it)
                ev.hess_diag[it.col()] += w.alpha4 * h;
    }
    ev.clamp_hit = hit;
    return ev;
}

YContext make_y_context(const Eigen::VectorXd& theta,
                        const Eigen::VectorXd& lambda1,
                        const Eigen::VectorXd& lambda2, const Weights& weights,
                        const Problem& problem, HessianDistortion mode) {
    YContext ctx;
    ctx.weights = weights;
    ctx.problem = &problem;
    ctx.hess_mode = mode;
    ctx.lambda1 = lambda1;
    ctx.lambda2 = lambda2;

    bool hit = false;
    const double n = problem.grid.n;
    ctx.exp_theta.resize(theta.size());
    ctx.dist_weight.resize(theta.size());
    for (Eigen::Index e = 0; e < theta.size(); ++e) {
        ctx.exp_theta[e] = clamped_exp(theta[e], hit);
        ctx.dist_weight[e] = clamped_exp(-2.0 / n * theta[e], hit);
    }
    ctx.clamp_hit = hit;
    return ctx;
}

namespace {

struct YTerms {
    double distortion = 0.0;
    double smooth = 0.0;
    double ssd = 0.0;
    double det_penalty = 0.0;
    double landmark = 0.0;

    double total() const { return distortion + smooth + ssd + det_penalty + landmark; }
};

// shared value computation; optionally exposes intermediate fields for the
// gradient/Hessian path
YTerms y_terms(const Eigen::VectorXd& Y, const YContext& ctx,
               std::vector<Eigen::VectorXd>* deriv_out,
               Eigen::VectorXd* det_shift_out, Eigen::VectorXd* smooth_field_out,
               PointGradients* intensity_out, Eigen::VectorXd* lm_shift_out) {
    const Problem& p = *ctx.problem;
    const Weights& w = ctx.weights;
    const double h = p.grid.h;
    const double n = p.grid.n;

    YTerms t;
    auto deriv = derivative_fields(Y, p.ops);

    Eigen::VectorXd r = Eigen::VectorXd::Zero(p.grid.num_elements());
    for (const auto& g : deriv) r += g.cwiseProduct(g);
    t.distortion = w.alpha2 * h / n * r.dot(ctx.dist_weight);

    if (w.alpha3 != 0.0) {
        Eigen::VectorXd by = p.ops.B * Y;
        t.smooth = 0.5 * w.alpha3 * h * by.squaredNorm();
        if (smooth_field_out) *smooth_field_out = std::move(by);
    } else if (smooth_field_out) {
        smooth_field_out->resize(0);
    }

    if (w.alpha5 != 0.0 && p.template_image) {
        PointGradients pg = eval_with_jacobian(*p.template_image, p.ops.P * Y);
        t.ssd = 0.5 * w.alpha5 * h * (pg.values - p.reference_cells).squaredNorm();
        if (intensity_out) *intensity_out = std::move(pg);
    }

    Eigen::VectorXd det_shift =
        jacobian_determinant(deriv, p.grid.n) - ctx.exp_theta + ctx.lambda1 / w.rho1;
    t.det_penalty = 0.5 * w.rho1 * h * det_shift.squaredNorm();

    if (p.landmarks && p.landmarks->size() > 0) {
        Eigen::VectorXd lm_shift =
            p.landmarks->I2 * Y - p.landmarks->Q + ctx.lambda2 / w.rho2;
        t.landmark = 0.5 * w.rho2 * lm_shift.squaredNorm();
        if (lm_shift_out) *lm_shift_out = std::move(lm_shift);
    }

    if (det_shift_out) *det_shift_out = std::move(det_shift);
    if (deriv_out) *deriv_out = std::move(deriv);
    return t;
}

} // namespace

double y_value(const Eigen::VectorXd& Y, const YContext& ctx) {
    check_finite(Y, "y_value");
    return y_terms(Y, ctx, nullptr, nullptr, nullptr, nullptr, nullptr).total();
}

SparseMat determinant_jacobian(const std::vector<Eigen::VectorXd>& g,
                               const DiscreteOperators& ops) {
    if (ops.n == 2) {
        SparseMat m2 = g[0].asDiagonal() * ops.A[3];
        m2 += g[3].asDiagonal() * ops.A[0];
        m2 -= g[1].asDiagonal() * ops.A[2];
        m2 -= g[2].asDiagonal() * ops.A[1];
        return m2;
    }
    // cofactor of entry (i,j) pairs with A[(i,j)]
    std::vector<Eigen::VectorXd> cof(9);
    cof[0] = g[4].cwiseProduct(g[8]) - g[5].cwiseProduct(g[7]);
    cof[1] = g[5].cwiseProduct(g[6]) - g[3].cwiseProduct(g[8]);
    cof[2] = g[3].cwiseProduct(g[7]) - g[4].cwiseProduct(g[6]);
    cof[3] = g[2].cwiseProduct(g[7]) - g[1].cwiseProduct(g[8]);
    cof[4] = g[0].cwiseProduct(g[8]) - g[2].cwiseProduct(g[6]);
    cof[5] = g[1].cwiseProduct(g[6]) - g[0].cwiseProduct(g[7]);
    cof[6] = g[1].cwiseProduct(g[5]) - g[2].cwiseProduct(g[4]);
    cof[7] = g[2].cwiseProduct(g[3]) - g[0].cwiseProduct(g[5]);
    cof[8] = g[0].cwiseProduct(g[4]) - g[1].cwiseProduct(g[3]);
    SparseMat m2 = cof[0].asDiagonal() * ops.A[0];
    for (int l = 1; l < 9; ++l) m2 += cof[l].asDiagonal() * ops.A[l];
    return m2;
}

YEval y_value_grad_hess(const Eigen::VectorXd& Y, const YContext& ctx) {
    check_finite(Y, "y_value_grad_hess");
    const Problem& p = *ctx.problem;
    const Weights& w = ctx.weights;
    const double h = p.grid.h;
    const double n = p.grid.n;

    std::vector<Eigen::VectorXd> deriv;
    Eigen::VectorXd det_shift, smooth_field, lm_shift;
    PointGradients intensity;
    const YTerms terms =
        y_terms(Y, ctx, &deriv, &det_shift, &smooth_field, &intensity, &lm_shift);

    YEval ev;
    ev.value = terms.total();
    ev.grad = Eigen::VectorXd::Zero(Y.size());

    // distortion: (2 a2 h / n) sum_l A_l' diag(w) A_l Y
    if (w.alpha2 != 0.0)
        for (size_t l = 0; l < deriv.size(); ++l)
            ev.grad += (2.0 * w.alpha2 * h / n) *
                       (p.ops.A[l].transpose() * ctx.dist_weight.cwiseProduct(deriv[l]));

    if (w.alpha3 != 0.0)
        ev.grad += w.alpha3 * h * (p.ops.B.transpose() * smooth_field);

    SparseMat W;   // T_PY * P
    if (w.alpha5 != 0.0 && p.template_image) {
        W = intensity.jacobian * p.ops.P;
        ev.grad += w.alpha5 * h *
                   (W.transpose() * (intensity.values - p.reference_cells));
    }

    const SparseMat M2 = determinant_jacobian(deriv, p.ops);
    ev.grad += w.rho1 * h * (M2.transpose() * det_shift);

    if (p.landmarks && p.landmarks->size() > 0)
        ev.grad += w.rho2 * (p.landmarks->I2.transpose() * lm_shift);

    // approximated Hessian
    SparseMat H;
    if (w.alpha2 != 0.0) {
        SparseMat M1 = deriv[0].asDiagonal() * p.ops.A[0];
        for (size_t l = 1; l < deriv.size(); ++l)
            M1 += deriv[l].asDiagonal() * p.ops.A[l];
        if (ctx.hess_mode == HessianDistortion::Weighted) {
            const SparseMat M1w = ctx.dist_weight.asDiagonal() * M1;
            H = (2.0 * w.alpha2 * h / n) * SparseMat(M1.transpose() * M1w);
        } else {
            H = (2.0 * w.alpha2 * h / n) * SparseMat(M1.transpose() * M1);
        }
    } else {
        H.resize(Y.size(), Y.size());
    }
    if (w.alpha3 != 0.0) H += w.alpha3 * h * p.btb();
    if (w.alpha5 != 0.0 && p.template_image)
        H += w.alpha5 * h * SparseMat(W.transpose() * W);
    H += w.rho1 * h * SparseMat(M2.transpose() * M2);
    if (p.landmarks && p.landmarks->size() > 0) H += w.rho2 * p.i2ti2();

    SparseMat reg(Y.size(), Y.size());
    reg.setIdentity();
    H += kEpsReg * reg;
    H.makeCompressed();
    ev.hess = std::move(H);
    return ev;
}

EnergyBreakdown augmented_lagrangian_value(const Eigen::VectorXd& Y,
                                           const Eigen::VectorXd& theta,
                                           const Eigen::VectorXd& lambda1,
                                           const Eigen::VectorXd& lambda2,
                                           const Weights& weights,
                                           const Problem& problem,
                                           bool* clamp_hit) {
    const double h = problem.grid.h;
    const double n = problem.grid.n;
    if (theta.size() != problem.grid.num_elements() ||
        lambda1.size() != problem.grid.num_elements())
        throw std::invalid_argument("augmented_lagrangian_value: element field shape mismatch");

    EnergyBreakdown b;
    b.theta_l2 = 0.5 * weights.alpha1 * h * theta.squaredNorm();

    bool hit = false;
    const auto deriv = derivative_fields(Y, problem.ops);
    Eigen::VectorXd r = Eigen::VectorXd::Zero(theta.size());
    for (const auto& g : deriv) r += g.cwiseProduct(g);
    Eigen::VectorXd exp_theta(theta.size());
    for (Eigen::Index e = 0; e < theta.size(); ++e) {
        b.distortion += weights.alpha2 * h / n * r[e] * clamped_exp(-2.0 / n * theta[e], hit);
        exp_theta[e] = clamped_exp(theta[e], hit);
    }

    if (weights.alpha3 != 0.0)
        b.smooth = 0.5 * weights.alpha3 * h * (problem.ops.B * Y).squaredNorm();

    if (problem.prior && weights.alpha4 != 0.0) {
        const Eigen::VectorXd d = problem.prior->I1 * theta - problem.prior->theta_bar;
        b.prior = 0.5 * weights.alpha4 * h * d.squaredNorm();
    }

    if (problem.template_image && weights.alpha5 != 0.0) {
        const Eigen::VectorXd warped =
            eval_with_jacobian(*problem.template_image, problem.ops.P * Y).values;
        b.ssd = 0.5 * weights.alpha5 * h * (warped - problem.reference_cells).squaredNorm();
    }

    const Eigen::VectorXd E = jacobian_determinant(deriv, problem.grid.n) - exp_theta;
    b.det_constraint = h * lambda1.dot(E) + 0.5 * weights.rho1 * h * E.squaredNorm();

    if (problem.landmarks && problem.landmarks->size() > 0) {
        const Eigen::VectorXd lm = problem.landmarks->I2 * Y - problem.landmarks->Q;
        b.landmark = lambda2.dot(lm) + 0.5 * weights.rho2 * lm.squaredNorm();
    }

    if (clamp_hit) *clamp_hit = *clamp_hit || hit;
    return b;
}

} // namespace qcmap
