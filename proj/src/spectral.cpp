#include "slipfsi/spectral.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace slipfsi {

namespace {

MatX random_matrix(int rows, int cols, unsigned seed) {
    std::mt19937 gen(seed);
    std::normal_distribution<double> nd;
    MatX X(rows, cols);
    for (int j = 0; j < cols; ++j)
        for (int i = 0; i < rows; ++i) X(i, j) = nd(gen);
    return X;
}

/// Appends the columns of X to the MM-orthonormal basis V (two passes of
/// Gram-Schmidt). Returns the indices of accepted columns.
std::vector<int> extend_basis(const SpMat& MM, MatX& V, MatX& MV, const MatX& X) {
    std::vector<int> kept;
    for (int j = 0; j < X.cols(); ++j) {
        VecX x = X.col(j);
        const double n0 = std::sqrt(std::max(x.dot(MM * x), 0.0));
        if (n0 == 0.0) continue;
        for (int pass = 0; pass < 2; ++pass)
            if (V.cols() > 0) x -= V * (MV.transpose() * x);
        VecX mx = MM * x;
        const double n1 = std::sqrt(std::max(x.dot(mx), 0.0));
        if (n1 < 1e-10 * n0) continue;
        V.conservativeResize(V.rows(), V.cols() + 1);
        MV.conservativeResize(MV.rows(), MV.cols() + 1);
        V.col(V.cols() - 1) = x / n1;
        MV.col(MV.cols() - 1) = mx / n1;
        kept.push_back(j);
    }
    return kept;
}

}  // namespace

double eigen_residual(const CoupledOperator& op, double lambda, const VecX& z) {
    const auto [w, xi] = op.split(z);
    const auto [aw, axi] = op.apply(w, xi);
    const VecX rw = aw - lambda * w;
    const Vec6 rxi = axi - lambda * xi;
    const SpMat Mff = op.blocks().free_block(op.blocks().Mu);
    const double num = rw.dot(Mff * rw) + rxi.dot(op.K() * rxi);
    const double den = w.dot(Mff * w) + xi.dot(op.K() * xi);
    return std::sqrt(std::max(num, 0.0) / den);
}

SpectralReport spectrum(const CoupledOperator& op, const SpectrumOptions& opt) {
    const SpMat& MM = op.MM();
    const int nz = op.nz();
    const int np = static_cast<int>(op.blocks().B.rows());
    const RealSaddle inv(op.AA(), op.blocks().B, op.blocks().gauge);
    auto apply_inv = [&](const MatX& X) {
        MatX Y(nz, X.cols());
        for (int j = 0; j < X.cols(); ++j) Y.col(j) = inv.solve(MM * X.col(j), VecX::Zero(np)).first;
        return Y;
    };

    const int count = std::max(1, opt.count);
    const int keep = std::min(nz - 1, count + opt.block);
    SpectralReport rep;
    MatX V(nz, 0), MV(nz, 0), W(nz, 0);
    MatX block = apply_inv(random_matrix(nz, opt.block, opt.seed));

    Eigen::VectorXd theta;
    MatX ritz, ritz_w;
    for (int restart = 0; restart <= opt.max_restarts; ++restart) {
        rep.restarts = restart;
        for (int b = 0; b < opt.krylov_blocks && V.cols() < nz - 1; ++b) {
            const int before = static_cast<int>(V.cols());
            extend_basis(MM, V, MV, block);
            const int added = static_cast<int>(V.cols()) - before;
            if (added == 0) break;
            const MatX Y = apply_inv(V.rightCols(added));
            W.conservativeResize(nz, V.cols());
            W.rightCols(added) = Y;
            block = Y;
        }
        MatX H = MV.transpose() * W;
        H = 0.5 * (H + H.transpose()).eval();
        Eigen::SelfAdjointEigenSolver<MatX> es(H);
        const int m = static_cast<int>(H.rows());
        theta.resize(m);
        MatX S(m, m);
        for (int j = 0; j < m; ++j) {
            theta[j] = es.eigenvalues()[m - 1 - j];
            S.col(j) = es.eigenvectors().col(m - 1 - j);
        }
        ritz = V * S;
        ritz_w = W * S;
        bool ok = true;
        std::vector<int> pending;
        for (int j = 0; j < std::min(count, m); ++j) {
            const VecX r = ritz_w.col(j) - theta[j] * ritz.col(j);
            const double rel = std::sqrt(std::max(r.dot(MM * r), 0.0)) / std::abs(theta[j]);
            if (rel > opt.tol) {
                ok = false;
                pending.push_back(j);
            }
        }
        if (ok && m >= count) {
            rep.converged = true;
            break;
        }
        if (restart == opt.max_restarts) break;
        // Thick restart on the leading Ritz pairs.
        const int k = std::min(keep, m);
        V = ritz.leftCols(k);
        MV = MM * V;
        W = ritz_w.leftCols(k);
        MatX next(nz, std::max<int>(1, static_cast<int>(pending.size())));
        for (size_t i = 0; i < pending.size(); ++i)
            next.col(i) = ritz_w.col(pending[i]) - theta[pending[i]] * ritz.col(pending[i]);
        if (pending.empty()) next.col(0) = ritz_w.col(0);
        block = next;
    }

    const int n_out = std::min<int>(count, static_cast<int>(theta.size()));
    rep.eigenvectors.resize(nz, n_out);
    rep.abscissa = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < n_out; ++j) {
        const double lam = -1.0 / theta[j];
        rep.eigenvalues.emplace_back(lam, 0.0);
        rep.eigenvectors.col(j) = ritz.col(j);
        rep.residuals.push_back(eigen_residual(op, lam, ritz.col(j)));
        rep.abscissa = std::max(rep.abscissa, lam);
    }
    rep.eta0 = -rep.abscissa;
    return rep;
}

std::vector<double> dense_spectrum(const CoupledOperator& op) {
    const MatX B = MatX(op.blocks().B);
    Eigen::ColPivHouseholderQR<MatX> qr(B.transpose());
    const int r = static_cast<int>(qr.rank());
    const MatX Q = qr.householderQ();
    const MatX Z = Q.rightCols(Q.cols() - r);
    const MatX A = Z.transpose() * (op.AA() * Z);
    const MatX M = Z.transpose() * (op.MM() * Z);
    Eigen::GeneralizedSelfAdjointEigenSolver<MatX> es(0.5 * (A + A.transpose()), 0.5 * (M + M.transpose()));
    std::vector<double> ev(es.eigenvalues().size());
    for (int i = 0; i < es.eigenvalues().size(); ++i) ev[i] = -es.eigenvalues()[i];
    std::sort(ev.begin(), ev.end(), std::greater<>());
    return ev;
}

SectorBound sector_bound(const CoupledOperator& op, const std::vector<Cplx>& samples, int iterations, double tol,
                         unsigned seed) {
    const SpMat& MM = op.MM();
    const int nz = op.nz();
    const CSpMat Mc = MM.cast<Cplx>();
    const CSpMat Ac = op.AA().cast<Cplx>();
    SectorBound out;
    out.samples = samples;
    out.bound = 0.0;
    const VecX x0 = random_matrix(nz, 1, seed).col(0);
    for (size_t s = 0; s < samples.size(); ++s) {
        const Cplx lam = samples[s];
        double value = std::numeric_limits<double>::quiet_NaN();
        try {
            const ComplexSaddle R(CSpMat((lam * Mc + Ac).pruned()), op.blocks().B, op.blocks().gauge);
            auto resolve = [&](const CVecX& x) { return CVecX(lam * R.solve(CVecX(Mc * x)).first); };
            auto adjoint = [&](const CVecX& x) { return CVecX(resolve(x.conjugate()).conjugate()); };
            auto norm = [&](const CVecX& x) { return std::sqrt(std::abs(x.dot(Mc * x))); };
            CVecX x = resolve(x0.cast<Cplx>());
            x /= norm(x);
            double prev = 0.0;
            for (int it = 0; it < iterations; ++it) {
                const CVecX y = resolve(x);
                const double sigma = norm(y);
                if (!std::isfinite(sigma)) break;
                value = sigma;
                if (it > 0 && std::abs(sigma - prev) <= tol * sigma) break;
                prev = sigma;
                x = adjoint(y);
                x /= norm(x);
            }
        } catch (const SolverError&) {
            value = std::numeric_limits<double>::quiet_NaN();
        }
        if (!std::isfinite(value) || value > 1e12) {
            out.flagged.push_back(static_cast<int>(s));
            out.values.push_back(std::numeric_limits<double>::quiet_NaN());
            continue;
        }
        out.values.push_back(value);
        out.bound = std::max(out.bound, value);
    }
    return out;
}

std::vector<Cplx> sector_grid(double rmin, double rmax, int per_decade) {
    const double pi = std::acos(-1.0);
    const double args[] = {0.0, pi / 4, pi / 2, -pi / 4, -pi / 2};
    const int n = std::max(1, static_cast<int>(std::round(std::log10(rmax / rmin) * per_decade)));
    std::vector<Cplx> out;
    for (int i = 0; i <= n; ++i) {
        const double r = rmin * std::pow(rmax / rmin, static_cast<double>(i) / n);
        for (double a : args) out.push_back(std::polar(r, a));
    }
    return out;
}

DecayFit fit_decay_rate(const std::vector<double>& t, const std::vector<double>& y, double tail) {
    if (t.size() != y.size()) throw std::invalid_argument("fit_decay_rate: size mismatch");
    if (!(tail > 0.0 && tail <= 1.0)) throw std::invalid_argument("fit_decay_rate: tail fraction out of range");
    const size_t n = t.size();
    const size_t start = n - static_cast<size_t>(std::ceil(tail * static_cast<double>(n)));
    if (n - start < 10) throw std::invalid_argument("fit_decay_rate: fewer than 10 samples in the tail window");
    double st = 0, sy = 0, stt = 0, sty = 0;
    const double m = static_cast<double>(n - start);
    for (size_t i = start; i < n; ++i) {
        if (!(y[i] > 0.0)) throw std::invalid_argument("fit_decay_rate: series must be positive");
        const double ly = std::log(y[i]);
        st += t[i];
        sy += ly;
        stt += t[i] * t[i];
        sty += t[i] * ly;
    }
    const double den = m * stt - st * st;
    if (den == 0.0) throw std::invalid_argument("fit_decay_rate: degenerate time grid");
    const double slope = (m * sty - st * sy) / den;
    DecayFit f;
    f.eta = -slope;
    f.intercept = (sy - slope * st) / m;
    // Rounding leaves |slope| ~ 1e-16 on a constant series.
    const double span = t[n - 1] - t[start];
    if (std::abs(f.eta) * span < 1e-12) f.eta = 0.0;
    f.decaying = f.eta > 0.0;
    f.used = static_cast<int>(m);
    return f;
}

}  // namespace slipfsi
