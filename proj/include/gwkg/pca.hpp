#pragma once
// PCA dimension harmonization: descriptors of each entity kind arrive with
// their own dimensionality and are projected onto a shared one before graph
// construction.

#include <cstddef>
#include <vector>

#include "gwkg/datamodel.hpp"
#include "gwkg/matrix.hpp"

namespace gwkg::vocab {

using data::Descriptor;

struct PcaProjection {
    Descriptor mean;    // input-dim; empty mean + empty components = identity
    Matrix components;  // target_dim x input_dim, rows orthonormal

    std::size_t input_dim() const { return identity_dim ? identity_dim : mean.size(); }
    std::size_t target_dim() const { return identity_dim ? identity_dim : components.rows(); }
    bool is_identity() const { return identity_dim != 0; }

    // Pass-through projection for kinds whose dim already matches the target.
    static PcaProjection identity(std::size_t dim) {
        PcaProjection p;
        p.identity_dim = dim;
        return p;
    }

    std::size_t identity_dim = 0;
};

// Components are the top-target_dim eigenvectors of the 1/n sample
// covariance in descending eigenvalue order; each component's first nonzero
// coordinate is made positive so the result is sign-deterministic.
PcaProjection fit_pca(const std::vector<Descriptor>& vectors, std::size_t target_dim);

Descriptor apply_pca(const PcaProjection& proj, const Descriptor& v);

// mean + sum_k <v-mean, c_k> c_k; used by tests and diagnostics.
Descriptor reconstruct_pca(const PcaProjection& proj, const Descriptor& projected);

namespace detail {
// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
// eigenvalues in descending order; eigenvectors(i, :) is the unit
// eigenvector for eigenvalue i.
struct EigenSym {
    std::vector<double> values;
    Matrix vectors;  // n x n, row i = eigenvector i
};
EigenSym jacobi_eigensym(Matrix a);
} // namespace detail

} // namespace gwkg::vocab
