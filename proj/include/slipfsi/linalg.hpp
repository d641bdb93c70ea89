#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/UmfPackSupport>

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace slipfsi {

using SpMat = Eigen::SparseMatrix<double>;
using Cplx = std::complex<double>;
using CSpMat = Eigen::SparseMatrix<Cplx>;
using VecX = Eigen::VectorXd;
using CVecX = Eigen::VectorXcd;
using MatX = Eigen::MatrixXd;

class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Direct solver for the gauged saddle system
///   [ K   B^T  0 ] [x]   [f]
///   [ B   0    c ] [p] = [g]
///   [ 0   c^T  0 ] [s]   [0]
/// where c fixes the additive constant of p (zero mean when c holds the
/// integrals of the pressure basis).
template <class Scalar>
class GaugedSaddle {
public:
    using SMat = Eigen::SparseMatrix<Scalar>;
    using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    GaugedSaddle() = default;
    GaugedSaddle(const SMat& K, const SpMat& B, const VecX& c) { factor(K, B, c); }

    void factor(const SMat& K, const SpMat& B, const VecX& c) {
        n_ = static_cast<int>(K.rows());
        m_ = static_cast<int>(B.rows());
        const int N = n_ + m_ + 1;
        std::vector<Eigen::Triplet<Scalar>> trip;
        trip.reserve(K.nonZeros() + 2 * B.nonZeros() + 2 * m_);
        for (int k = 0; k < K.outerSize(); ++k)
            for (typename SMat::InnerIterator it(K, k); it; ++it) trip.emplace_back(it.row(), it.col(), it.value());
        for (int k = 0; k < B.outerSize(); ++k)
            for (SpMat::InnerIterator it(B, k); it; ++it) {
                trip.emplace_back(n_ + it.row(), it.col(), Scalar(it.value()));
                trip.emplace_back(it.col(), n_ + it.row(), Scalar(it.value()));
            }
        for (int i = 0; i < m_; ++i) {
            if (c(i) == 0.0) continue;
            trip.emplace_back(n_ + i, n_ + m_, Scalar(c(i)));
            trip.emplace_back(n_ + m_, n_ + i, Scalar(c(i)));
        }
        A_.resize(N, N);
        A_.setFromTriplets(trip.begin(), trip.end());
        A_.makeCompressed();
        lu_.compute(A_);
        if (lu_.info() != Eigen::Success) throw SolverError("saddle factorization failed");
    }

    /// Returns (x, p); the gauge multiplier is discarded.
    std::pair<Vec, Vec> solve(const Vec& f, const Vec& g) const {
        Vec rhs = Vec::Zero(n_ + m_ + 1);
        rhs.head(n_) = f;
        if (g.size() > 0) rhs.segment(n_, m_) = g;
        Vec sol = lu_.solve(rhs);
        if (lu_.info() != Eigen::Success) throw SolverError("saddle solve failed");
        return {sol.head(n_), sol.segment(n_, m_)};
    }
    std::pair<Vec, Vec> solve(const Vec& f) const { return solve(f, Vec()); }

    int n() const { return n_; }
    int m() const { return m_; }

private:
    int n_ = 0, m_ = 0;
    SMat A_;  // the factorization keeps pointers into it
    mutable Eigen::UmfPackLU<SMat> lu_;
};

using RealSaddle = GaugedSaddle<double>;
using ComplexSaddle = GaugedSaddle<Cplx>;

inline CSpMat to_complex(const SpMat& A) { return A.cast<Cplx>(); }

inline CVecX make_complex(const VecX& re, const VecX& im) {
    CVecX z(re.size());
    z.real() = re;
    z.imag() = im;
    return z;
}

}  // namespace slipfsi
