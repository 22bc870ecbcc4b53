#pragma once

#include <cstddef>
#include <vector>

namespace bisimlab {

// Solve A x = b by Gaussian elimination with partial pivoting.
// A is n x n row-major and is consumed; throws Error("SingularMatrix") on
// pivot breakdown.
std::vector<double> solve_dense(std::vector<double> a, std::vector<double> b, std::size_t n);

// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
// Returns eigenvalues; `vectors` (row-major, columns are eigenvectors) is
// filled when non-null.
std::vector<double> symmetric_eigen(std::vector<double> a, std::size_t n,
                                    std::vector<double>* vectors);

// Principal square root of a symmetric PSD matrix (eigenvalues clipped at 0).
std::vector<double> symmetric_sqrt(const std::vector<double>& a, std::size_t n);

}  // namespace bisimlab
