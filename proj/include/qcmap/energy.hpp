#pragma once

#include "qcmap/grid.hpp"
#include "qcmap/image.hpp"

#include <optional>

namespace qcmap {

/// Term weights and penalty parameters of the deformation model.
struct Weights {
    double alpha1 = 0.0;   // volumetric (theta) L2
    double alpha2 = 0.0;   // conformality distortion
    double alpha3 = 0.0;   // Laplacian smoothness
    double alpha4 = 0.0;   // volume prior
    double alpha5 = 0.0;   // intensity SSD
    double rho1 = 1.0;     // determinant-constraint penalty (grows)
    double rho2 = 1e4;     // landmark penalty (fixed)
};

/// Choice of the distortion block of the approximated Hessian of the
/// Y-subproblem: `Weighted` scales M1 rows by the frozen distortion
/// denominators, `Paper` keeps the unweighted M1'M1 form.
enum class HessianDistortion { Weighted, Paper };

/// The full deformation problem: operators plus whichever optional data
/// terms are active. `reference_cells` is empty when alpha5 = 0.
struct Problem {
    Grid grid;
    DiscreteOperators ops;
    std::optional<LandmarkSet> landmarks;
    std::optional<RegionPrior> prior;
    std::optional<SplineImage> template_image;
    Eigen::VectorXd reference_cells;

    const SparseMat& btb() const;     // cached B'B
    const SparseMat& i2ti2() const;   // cached I2'I2

private:
    mutable SparseMat btb_;
    mutable SparseMat i2ti2_;
};

/// Frozen data of the theta subproblem: r holds the per-element squared
/// Frobenius norm of the current deformation gradient, s the shifted
/// determinant det + lambda1/rho1.
struct ThetaContext {
    Eigen::VectorXd r;
    Eigen::VectorXd s;
    const RegionPrior* prior = nullptr;
    Weights weights;
    double h = 0.0;
    int n = 0;
};

ThetaContext make_theta_context(const Eigen::VectorXd& Y,
                                const Eigen::VectorXd& lambda1,
                                const Weights& weights, const Problem& problem);

struct ThetaEval {
    double value = 0.0;
    Eigen::VectorXd grad;
    Eigen::VectorXd hess_diag;   // strictly positive, so the GN solve is a division
    bool clamp_hit = false;
};

double theta_value(const Eigen::VectorXd& theta, const ThetaContext& ctx,
                   bool* clamp_hit = nullptr);
ThetaEval theta_value_grad_hess(const Eigen::VectorXd& theta,
                                const ThetaContext& ctx);

/// Frozen data of the Y subproblem.
struct YContext {
    Eigen::VectorXd exp_theta;   // frozen e^theta
    Eigen::VectorXd dist_weight; // e^(-2 theta / n)
    Eigen::VectorXd lambda1;
    Eigen::VectorXd lambda2;     // empty without landmarks
    const Problem* problem = nullptr;
    Weights weights;
    HessianDistortion hess_mode = HessianDistortion::Weighted;
    bool clamp_hit = false;
};

YContext make_y_context(const Eigen::VectorXd& theta,
                        const Eigen::VectorXd& lambda1,
                        const Eigen::VectorXd& lambda2, const Weights& weights,
                        const Problem& problem,
                        HessianDistortion mode = HessianDistortion::Weighted);

struct YEval {
    double value = 0.0;
    Eigen::VectorXd grad;
    SparseMat hess;
};

double y_value(const Eigen::VectorXd& Y, const YContext& ctx);
YEval y_value_grad_hess(const Eigen::VectorXd& Y, const YContext& ctx);

/// Jacobian of the per-element determinant with respect to Y (the paper's
/// M2), assembled from the cofactor fields.
SparseMat determinant_jacobian(const std::vector<Eigen::VectorXd>& deriv,
                               const DiscreteOperators& ops);

/// Labeled terms of the augmented Lagrangian: the five energy terms plus
/// the two multiplier/penalty pairs.
struct EnergyBreakdown {
    double theta_l2 = 0.0;
    double distortion = 0.0;
    double smooth = 0.0;
    double prior = 0.0;
    double ssd = 0.0;
    double det_constraint = 0.0;   // <lambda1, E> h + rho1 h/2 |E|^2
    double landmark = 0.0;         // lambda2'(I2Y-Q) + rho2/2 |I2Y-Q|^2

    double energy() const { return theta_l2 + distortion + smooth + prior + ssd; }
    double total() const { return energy() + det_constraint + landmark; }
};

EnergyBreakdown augmented_lagrangian_value(const Eigen::VectorXd& Y,
                                           const Eigen::VectorXd& theta,
                                           const Eigen::VectorXd& lambda1,
                                           const Eigen::VectorXd& lambda2,
                                           const Weights& weights,
                                           const Problem& problem,
                                           bool* clamp_hit = nullptr);

} // namespace qcmap
