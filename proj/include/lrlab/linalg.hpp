#pragma once

#include <functional>

#include "lrlab/types.hpp"

namespace lrlab {

/// Process-wide numeric setup. Pins BLAS to `blas_threads` (parallelism in
/// this codebase lives at the realization level, and a fixed thread count
/// keeps outputs byte-reproducible) and, when the CPU supports AVX-512 and
/// OPENBLAS_CORETYPE is unset, selects the SKYLAKEX kernels: the generic
/// fallback OpenBLAS picks on unrecognized CPUs is ~4x slower. Call once from
/// main() before any matrix work; later calls are no-ops.
void init_runtime(int blas_threads = 1);

struct HermitianEig {
  RealVector values;        // ascending
  Matrix vectors;           // complex eigenvectors; empty when the real path ran
  RealMatrix vectors_real;  // real eigenvectors; empty when the complex path ran
  bool real() const { return vectors_real.size() > 0; }
};

/// Eigendecomposition of a Hermitian matrix. Real-symmetric input (detected
/// entrywise) is routed to the real solver, which is ~4x faster and keeps the
/// eigenvector matrix real for downstream mixed-precision products.
HermitianEig hermitian_eigensolve(const Matrix& m);

/// Eigenvalues only (ascending).
RealVector hermitian_eigenvalues(const Matrix& m);

/// Largest singular value. Small matrices go through an SVD; larger ones
/// through the top eigenvalue of m^dagger m.
double matrix_spectral_norm(const Matrix& m);

/// Largest |eigenvalue| of a Hermitian operator given only by its action
/// y = op(x). Lanczos with full reorthogonalization; `seed` fixes the start
/// vector so results are reproducible. Returns 0 for the zero operator.
double lanczos_extreme_magnitude(
    const std::function<void(const Vector&, Vector&)>& apply_op, long dim,
    std::uint64_t seed, double rtol = 1e-9, int max_iter = 200,
    double abs_floor = 1e-14);

/// Mixed real/complex products without promoting the real factor.
void multiply_real_complex(const RealMatrix& a, const Matrix& b, Matrix& out);
/// out = a^T * b for real a, complex b.
void multiply_realT_complex(const RealMatrix& a, const Matrix& b, Matrix& out);
/// out = a * b for complex a, real b.
void multiply_complex_real(const Matrix& a, const RealMatrix& b, Matrix& out);
/// out = a * b^T for complex a, real b.
void multiply_complex_realT(const Matrix& a, const RealMatrix& b, Matrix& out);

/// Adaptive Simpson quadrature of f over [a, b].
double integrate(const std::function<double(double)>& f, double a, double b,
                 double rel_tol = 1e-12, int max_depth = 40);

}  // namespace lrlab
