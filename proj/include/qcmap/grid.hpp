#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace qcmap {

using SparseMat = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;

/// Axis-aligned box domain.
struct Box {
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;

    static Box unit(int n);

    int dim() const { return static_cast<int>(lo.size()); }
    double extent(int axis) const { return hi[axis] - lo[axis]; }
    double volume() const;
    bool contains(const Eigen::VectorXd& p) const;
};

/// Regular nodal grid over a box with a simplicial partition (triangles in
/// 2D, Freudenthal 6-tet split per cube in 3D). Node indexing is
/// lexicographic, axis 0 fastest. Nodal vector fields are stored
/// coordinate-major: [all y_1; all y_2; ...], length n*(N+1)^n.
struct Grid {
    int n = 0;                 // dimension, 2 or 3
    int N = 0;                 // cells per axis
    Box domain;
    Eigen::VectorXd node_coords;   // identity map X, coordinate-major
    Eigen::MatrixXi elements;      // num_elements x (n+1), positive orientation
    double h = 0.0;                // measure of one element

    Eigen::Index nodes_per_axis() const { return N + 1; }
    Eigen::Index num_nodes() const;
    Eigen::Index num_cells() const;      // N^n
    Eigen::Index num_elements() const { return elements.rows(); }
    double spacing(int axis) const { return domain.extent(axis) / N; }

    Eigen::Index node_index(const Eigen::VectorXi& multi) const;
    Eigen::VectorXd node_position(Eigen::Index node) const;
    Eigen::VectorXd element_centroid(Eigen::Index e) const;
    Eigen::VectorXd cell_center(Eigen::Index cell) const;

    const Eigen::VectorXd& identity_map() const { return node_coords; }
};

Grid build_grid(int n, int N, const Box& domain);
Grid build_grid(int n, int N);   // unit box

enum class BoundaryCondition { Neumann, Dirichlet };

/// Sparse operators of the discretization. A holds the n^2 per-element
/// first-derivative maps in row-major (i,j) order, so A[i*n+j] takes a
/// nodal field Y to the element-wise constant value of d y_i / d x_j.
/// For n=2 that ordering is A1..A4. B is the nodal vector Laplacian
/// (one scalar stencil per coordinate block); P averages the 2^n corner
/// nodes of each cell onto the cell-centered grid.
struct DiscreteOperators {
    int n = 0;
    int N = 0;
    std::vector<SparseMat> A;   // each num_elements x n*(N+1)^n
    SparseMat B;                // n*(N+1)^n square
    SparseMat P;                // n*N^n x n*(N+1)^n
    BoundaryCondition bc = BoundaryCondition::Neumann;
};

DiscreteOperators build_operators(const Grid& grid,
                                  BoundaryCondition bc = BoundaryCondition::Neumann);

struct SnapWarning {
    Eigen::Index landmark;     // row in the input pair list
    double displacement;       // |p - snapped(p)| in domain units
};

/// Landmark pairs snapped to grid nodes. I2 extracts the deformation at
/// the snapped nodes (coordinate-major rows: [coord-1 of all landmarks;
/// coord-2 of all landmarks; ...]); Q stacks the targets the same way.
struct LandmarkSet {
    Eigen::MatrixXd sources;   // m x n, as given
    Eigen::MatrixXd targets;   // m x n
    std::vector<Eigen::Index> snapped_nodes;
    SparseMat I2;              // n*m x n*(N+1)^n, one unit entry per row
    Eigen::VectorXd Q;         // n*m
    std::vector<SnapWarning> warnings;

    Eigen::Index size() const { return sources.rows(); }
};

LandmarkSet build_landmarks(const Grid& grid, const Eigen::MatrixXd& pairs);

/// Volume prior on a sub-region Omega': element e belongs iff its centroid
/// passes the mask predicate. I1 selects the masked elements; theta_bar
/// holds one prior value per masked element (aligned with I1 rows).
struct RegionPrior {
    std::vector<char> element_mask;   // one flag per element
    SparseMat I1;                     // num_masked x num_elements
    Eigen::VectorXd theta_bar;        // num_masked

    Eigen::Index num_masked() const { return I1.rows(); }
};

using RegionMask = std::function<bool(const Eigen::VectorXd&)>;

RegionPrior build_region_prior(const Grid& grid, const RegionMask& mask,
                               double theta_bar);
RegionPrior build_region_prior(const Grid& grid, const RegionMask& mask,
                               const Eigen::VectorXd& theta_bar_per_element);

/// Predicate for a union of axis-aligned boxes.
RegionMask boxes_mask(std::vector<Box> boxes);

} // namespace qcmap
