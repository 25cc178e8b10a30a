#include "qcmap/grid.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

namespace qcmap {

Box Box::unit(int n) {
    Box b;
    b.lo = Eigen::VectorXd::Zero(n);
    b.hi = Eigen::VectorXd::Ones(n);
    return b;
}

double Box::volume() const {
    double v = 1.0;
    for (int k = 0; k < dim(); ++k) v *= extent(k);
    return v;
}

bool Box::contains(const Eigen::VectorXd& p) const {
    for (int k = 0; k < dim(); ++k)
        if (p[k] < lo[k] || p[k] > hi[k]) return false;
    return true;
}

Eigen::Index Grid::num_nodes() const {
    Eigen::Index m = 1;
    for (int k = 0; k < n; ++k) m *= (N + 1);
    return m;
}

Eigen::Index Grid::num_cells() const {
    Eigen::Index m = 1;
    for (int k = 0; k < n; ++k) m *= N;
    return m;
}

Eigen::Index Grid::node_index(const Eigen::VectorXi& multi) const {
    Eigen::Index idx = 0, stride = 1;
    for (int k = 0; k < n; ++k) {
        idx += multi[k] * stride;
        stride *= (N + 1);
    }
    return idx;
}

Eigen::VectorXd Grid::node_position(Eigen::Index node) const {
    Eigen::VectorXd p(n);
    for (int k = 0; k < n; ++k) {
        p[k] = domain.lo[k] + spacing(k) * static_cast<double>(node % (N + 1));
        node /= (N + 1);
    }
    return p;
}

Eigen::VectorXd Grid::element_centroid(Eigen::Index e) const {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
    for (int v = 0; v <= n; ++v) c += node_position(elements(e, v));
    return c / (n + 1);
}

Eigen::VectorXd Grid::cell_center(Eigen::Index cell) const {
    Eigen::VectorXd p(n);
    for (int k = 0; k < n; ++k) {
        p[k] = domain.lo[k] + spacing(k) * (static_cast<double>(cell % N) + 0.5);
        cell /= N;
    }
    return p;
}

namespace {

double signed_volume(const Grid& g, const Eigen::VectorXi& verts) {
    const int n = g.n;
    Eigen::MatrixXd D(n, n);
    Eigen::VectorXd x0 = g.node_position(verts[0]);
    for (int v = 1; v <= n; ++v) D.col(v - 1) = g.node_position(verts[v]) - x0;
    double fact = (n == 2) ? 2.0 : 6.0;
    return D.determinant() / fact;
}

void append_cell_simplices_2d(Grid& g, int ci, int cj, Eigen::Index& row) {
    const int s = g.N + 1;
    const int a = ci + cj * s;
    const int b = (ci + 1) + cj * s;
    const int c = (ci + 1) + (cj + 1) * s;
    const int d = ci + (cj + 1) * s;
    // split along the (a,c) diagonal, both triangles counterclockwise
    g.elements.row(row++) << a, b, c;
    g.elements.row(row++) << a, c, d;
}

void append_cell_simplices_3d(Grid& g, int ci, int cj, int ck, Eigen::Index& row) {
    const int s = g.N + 1;
    auto id = [&](int i, int j, int k) { return i + j * s + k * s * s; };
    // Freudenthal/Kuhn split: one tet per permutation of the axis order,
    // walking from the base corner to the opposite corner
    static const std::array<std::array<int, 3>, 6> perms = {{
        {0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
    for (const auto& perm : perms) {
        std::array<int, 3> ofs = {0, 0, 0};
        std::array<int, 4> verts;
        verts[0] = id(ci, cj, ck);
        for (int step = 0; step < 3; ++step) {
            ofs[perm[step]] = 1;
            verts[step + 1] = id(ci + ofs[0], cj + ofs[1], ck + ofs[2]);
        }
        // parity of the permutation decides the sign; swap to keep
        // positive orientation
        int inversions = 0;
        for (int a = 0; a < 3; ++a)
            for (int b = a + 1; b < 3; ++b)
                if (perm[a] > perm[b]) ++inversions;
        if (inversions % 2 == 1) std::swap(verts[2], verts[3]);
        g.elements.row(row++) << verts[0], verts[1], verts[2], verts[3];
    }
}

} // namespace

Grid build_grid(int n, int N, const Box& domain) {
    if (n != 2 && n != 3)
        throw std::invalid_argument("build_grid: dimension must be 2 or 3, got " +
                                    std::to_string(n));
    if (N < 2)
        throw std::invalid_argument("build_grid: N must be >= 2, got " +
                                    std::to_string(N));
    if (domain.dim() != n)
        throw std::invalid_argument("build_grid: domain dimension mismatch");
    for (int k = 0; k < n; ++k)
        if (!(domain.extent(k) > 0))
            throw std::invalid_argument("build_grid: empty domain extent");

    Grid g;
    g.n = n;
    g.N = N;
    g.domain = domain;

    const Eigen::Index nodes = g.num_nodes();
    g.node_coords.resize(n * nodes);
    for (Eigen::Index i = 0; i < nodes; ++i) {
        Eigen::VectorXd p = g.node_position(i);
        for (int k = 0; k < n; ++k) g.node_coords[k * nodes + i] = p[k];
    }

    const Eigen::Index per_cell = (n == 2) ? 2 : 6;
    g.elements.resize(per_cell * g.num_cells(), n + 1);
    Eigen::Index row = 0;
    if (n == 2) {
        for (int cj = 0; cj < N; ++cj)
            for (int ci = 0; ci < N; ++ci) append_cell_simplices_2d(g, ci, cj, row);
    } else {
        for (int ck = 0; ck < N; ++ck)
            for (int cj = 0; cj < N; ++cj)
                for (int ci = 0; ci < N; ++ci)
                    append_cell_simplices_3d(g, ci, cj, ck, row);
    }

    g.h = domain.volume() / static_cast<double>(g.num_elements());

    for (Eigen::Index e = 0; e < g.num_elements(); ++e) {
        if (!(signed_volume(g, g.elements.row(e)) > 0))
            throw std::logic_error("build_grid: element with non-positive orientation");
    }
    return g;
}

Grid build_grid(int n, int N) { return build_grid(n, N, Box::unit(n)); }

namespace {

// 1D second-difference stencil rows. Neumann uses a shifted one-sided
// stencil at the ends (vanishes on affine data); Dirichlet treats the
// ghost value as zero.
void laplacian_1d_triplets(int N, double delta, BoundaryCondition bc,
                           std::vector<Eigen::Triplet<double>>& out) {
    const double w = 1.0 / (delta * delta);
    const int s = N + 1;
    for (int i = 0; i < s; ++i) {
        if (i > 0 && i < N) {
            out.emplace_back(i, i - 1, w);
            out.emplace_back(i, i, -2.0 * w);
            out.emplace_back(i, i + 1, w);
        } else if (bc == BoundaryCondition::Neumann) {
            int base = (i == 0) ? 0 : N - 2;
            out.emplace_back(i, base, w);
            out.emplace_back(i, base + 1, -2.0 * w);
            out.emplace_back(i, base + 2, w);
        } else {
            int nb = (i == 0) ? 1 : N - 1;
            out.emplace_back(i, i, -2.0 * w);
            out.emplace_back(i, nb, w);
        }
    }
}

SparseMat scalar_laplacian(const Grid& g, BoundaryCondition bc) {
    const Eigen::Index nodes = g.num_nodes();
    const int s = g.N + 1;

    SparseMat L(nodes, nodes);
    std::vector<Eigen::Triplet<double>> trips;
    for (int axis = 0; axis < g.n; ++axis) {
        std::vector<Eigen::Triplet<double>> one_d;
        laplacian_1d_triplets(g.N, g.spacing(axis), bc, one_d);
        Eigen::Index stride = 1;
        for (int k = 0; k < axis; ++k) stride *= s;
        Eigen::Index planes = nodes / s;   // nodes with axis coordinate fixed
        for (Eigen::Index p = 0; p < planes; ++p) {
            // decompose p into (low, high) parts around the axis
            Eigen::Index low = p % stride;
            Eigen::Index high = p / stride;
            Eigen::Index base = low + high * stride * s;
            for (const auto& t : one_d)
                trips.emplace_back(base + t.row() * stride,
                                   base + t.col() * stride, t.value());
        }
    }
    L.setFromTriplets(trips.begin(), trips.end());
    L.makeCompressed();
    return L;
}

} // namespace

DiscreteOperators build_operators(const Grid& g, BoundaryCondition bc) {
    DiscreteOperators ops;
    ops.n = g.n;
    ops.N = g.N;
    ops.bc = bc;

    const int n = g.n;
    const Eigen::Index nodes = g.num_nodes();
    const Eigen::Index nel = g.num_elements();

    // per-element gradients of the linear shape functions
    std::vector<std::vector<Eigen::Triplet<double>>> trips(n * n);
    for (auto& t : trips) t.reserve(nel * (n + 1));

    Eigen::MatrixXd D(n, n);
    for (Eigen::Index e = 0; e < nel; ++e) {
        const Eigen::VectorXd x0 = g.node_position(g.elements(e, 0));
        for (int v = 1; v <= n; ++v)
            D.col(v - 1) = g.node_position(g.elements(e, v)) - x0;
        const Eigen::MatrixXd G = D.inverse();   // G(k,j) = d lambda_k / d x_j
        for (int j = 0; j < n; ++j) {
            double c0 = 0.0;
            for (int k = 0; k < n; ++k) c0 -= G(k, j);
            for (int i = 0; i < n; ++i) {
                auto& t = trips[i * n + j];
                t.emplace_back(e, i * nodes + g.elements(e, 0), c0);
                for (int k = 0; k < n; ++k)
                    t.emplace_back(e, i * nodes + g.elements(e, k + 1), G(k, j));
            }
        }
    }
    ops.A.resize(n * n);
    for (int l = 0; l < n * n; ++l) {
        ops.A[l].resize(nel, n * nodes);
        ops.A[l].setFromTriplets(trips[l].begin(), trips[l].end());
        ops.A[l].makeCompressed();
    }

    // vector Laplacian: same scalar stencil on each coordinate block
    SparseMat L = scalar_laplacian(g, bc);
    ops.B.resize(n * nodes, n * nodes);
    {
        std::vector<Eigen::Triplet<double>> bt;
        bt.reserve(n * L.nonZeros());
        for (int k = 0; k < L.outerSize(); ++k)
            for (SparseMat::InnerIterator it(L, k); it; ++it)
                for (int c = 0; c < n; ++c)
                    bt.emplace_back(c * nodes + it.row(), c * nodes + it.col(),
                                    it.value());
        ops.B.setFromTriplets(bt.begin(), bt.end());
        ops.B.makeCompressed();
    }

    // nodal-to-cell averaging
    const Eigen::Index cells = g.num_cells();
    const double wcorner = std::pow(0.5, n);
    std::vector<Eigen::Triplet<double>> pt;
    pt.reserve(n * cells * (Eigen::Index(1) << n));
    const int s = g.N + 1;
    for (Eigen::Index cell = 0; cell < cells; ++cell) {
        Eigen::VectorXi ci(n);
        Eigen::Index rest = cell;
        for (int k = 0; k < n; ++k) {
            ci[k] = static_cast<int>(rest % g.N);
            rest /= g.N;
        }
        for (int corner = 0; corner < (1 << n); ++corner) {
            Eigen::Index node = 0, stride = 1;
            for (int k = 0; k < n; ++k) {
                node += (ci[k] + ((corner >> k) & 1)) * stride;
                stride *= s;
            }
            for (int c = 0; c < n; ++c)
                pt.emplace_back(c * cells + cell, c * nodes + node, wcorner);
        }
    }
    ops.P.resize(n * cells, n * nodes);
    ops.P.setFromTriplets(pt.begin(), pt.end());
    ops.P.makeCompressed();

    return ops;
}

LandmarkSet build_landmarks(const Grid& g, const Eigen::MatrixXd& pairs) {
    const int n = g.n;
    if (pairs.size() > 0 && pairs.cols() != 2 * n)
        throw std::invalid_argument("build_landmarks: expected 2n columns");

    const Eigen::Index m = pairs.rows();
    LandmarkSet lm;
    lm.sources.resize(m, n);
    lm.targets.resize(m, n);
    lm.snapped_nodes.resize(m);

    const Eigen::Index nodes = g.num_nodes();
    std::vector<Eigen::Index> owner(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        Eigen::VectorXd p = pairs.row(i).head(n);
        Eigen::VectorXd q = pairs.row(i).tail(n);
        if (!g.domain.contains(p) || !g.domain.contains(q))
            throw std::invalid_argument("build_landmarks: landmark " +
                                        std::to_string(i) + " outside the domain");
        lm.sources.row(i) = p;
        lm.targets.row(i) = q;

        Eigen::VectorXi multi(n);
        double disp2 = 0.0;
        for (int k = 0; k < n; ++k) {
            double t = (p[k] - g.domain.lo[k]) / g.spacing(k);
            double fl = std::floor(t);
            // ties snap to the lower index
            int idx = (t - fl == 0.5) ? static_cast<int>(fl)
                                      : static_cast<int>(std::lround(t));
            idx = std::clamp(idx, 0, g.N);
            multi[k] = idx;
            double d = p[k] - (g.domain.lo[k] + idx * g.spacing(k));
            disp2 += d * d;
        }
        lm.snapped_nodes[i] = g.node_index(multi);
        double disp = std::sqrt(disp2);
        if (disp > 1e-12) lm.warnings.push_back({i, disp});
    }

    // conflicting landmarks on one node are an error; exact duplicates collapse
    std::vector<Eigen::Index> keep;
    std::vector<Eigen::Index> node_of;
    for (Eigen::Index i = 0; i < m; ++i) {
        bool dup = false;
        for (Eigen::Index k : keep) {
            if (lm.snapped_nodes[k] == lm.snapped_nodes[i]) {
                if ((lm.targets.row(k) - lm.targets.row(i)).cwiseAbs().maxCoeff() > 0.0)
                    throw std::invalid_argument(
                        "build_landmarks: landmarks " + std::to_string(k) + " and " +
                        std::to_string(i) + " snap to the same node with different targets");
                dup = true;
                break;
            }
        }
        if (!dup) keep.push_back(i);
    }
    if (static_cast<Eigen::Index>(keep.size()) != m) {
        Eigen::MatrixXd src(keep.size(), n), tgt(keep.size(), n);
        std::vector<Eigen::Index> snapped;
        for (size_t k = 0; k < keep.size(); ++k) {
            src.row(k) = lm.sources.row(keep[k]);
            tgt.row(k) = lm.targets.row(keep[k]);
            snapped.push_back(lm.snapped_nodes[keep[k]]);
        }
        lm.sources = src;
        lm.targets = tgt;
        lm.snapped_nodes = snapped;
    }

    const Eigen::Index mm = lm.sources.rows();
    lm.I2.resize(n * mm, n * nodes);
    lm.Q.resize(n * mm);
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(n * mm);
    for (Eigen::Index i = 0; i < mm; ++i) {
        for (int c = 0; c < n; ++c) {
            trips.emplace_back(c * mm + i, c * nodes + lm.snapped_nodes[i], 1.0);
            lm.Q[c * mm + i] = lm.targets(i, c);
        }
    }
    lm.I2.setFromTriplets(trips.begin(), trips.end());
    lm.I2.makeCompressed();
    return lm;
}

RegionPrior build_region_prior(const Grid& g, const RegionMask& mask,
                               const Eigen::VectorXd& theta_bar_per_element) {
    if (theta_bar_per_element.size() != g.num_elements())
        throw std::invalid_argument("build_region_prior: theta_bar length mismatch");

    RegionPrior prior;
    prior.element_mask.assign(g.num_elements(), 0);
    std::vector<Eigen::Index> selected;
    for (Eigen::Index e = 0; e < g.num_elements(); ++e) {
        if (mask(g.element_centroid(e))) {
            prior.element_mask[e] = 1;
            selected.push_back(e);
        }
    }
    if (selected.empty())
        throw std::invalid_argument("build_region_prior: mask selects no element");

    prior.I1.resize(selected.size(), g.num_elements());
    prior.theta_bar.resize(selected.size());
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(selected.size());
    for (size_t r = 0; r < selected.size(); ++r) {
        trips.emplace_back(r, selected[r], 1.0);
        prior.theta_bar[r] = theta_bar_per_element[selected[r]];
    }
    prior.I1.setFromTriplets(trips.begin(), trips.end());
    prior.I1.makeCompressed();
    return prior;
}

RegionPrior build_region_prior(const Grid& g, const RegionMask& mask, double theta_bar) {
    return build_region_prior(
        g, mask, Eigen::VectorXd::Constant(g.num_elements(), theta_bar));
}

RegionMask boxes_mask(std::vector<Box> boxes) {
    return [boxes = std::move(boxes)](const Eigen::VectorXd& p) {
        for (const auto& b : boxes)
            if (b.contains(p)) return true;
        return false;
    };
}

} // namespace qcmap
