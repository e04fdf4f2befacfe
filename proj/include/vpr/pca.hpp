#pragma once

#include <string>
#include <vector>

#include "vpr/common.hpp"

namespace vpr {

// Principal components of a descriptor set. Rows of `components` are
// orthonormal; variances are non-increasing.
struct PcaModel {
    int in_dim = 0;
    int out_dim = 0;
    bool whiten = false;
    std::vector<double> mean;        // [in]
    std::vector<double> components;  // [out][in], row-major
    std::vector<double> variances;   // [out]
};

// Cyclic Jacobi eigendecomposition of a symmetric n x n matrix (row-major).
// Returns eigenvalues and eigenvectors as columns of V. Deterministic.
void jacobi_eigh(std::vector<double> a, int n, std::vector<double>& eigvals,
                 std::vector<double>& eigvecs);

// Mean-centered covariance eigendecomposition (sample covariance, divisor
// N-1). When the dimension exceeds the sample count, the Gram-matrix
// factorization is used instead. Components are sign-fixed (largest
// magnitude entry positive) and sorted by variance descending.
PcaModel pca_fit(const std::vector<std::vector<float>>& descriptors,
                 int out_dim, bool whiten);

// (x - mean) projected onto the components, optionally whitened, then
// re-L2-normalized. A vector that projects to zero stays zero.
std::vector<float> pca_apply(const PcaModel& model,
                             const std::vector<float>& x);

void save_pca(const std::string& path, const PcaModel& model);
PcaModel load_pca(const std::string& path);

}  // namespace vpr
