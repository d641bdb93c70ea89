#pragma once

#include "slipfsi/coupled.hpp"

#include <vector>

namespace slipfsi {

struct SpectrumOptions {
    int count = 6;
    int block = 4;          // Krylov block size; > 1 resolves repeated eigenvalues
    int max_restarts = 30;
    int krylov_blocks = 12;  // blocks added per restart
    double tol = 1e-10;     // relative Ritz residual
    unsigned seed = 1;
};

struct SpectralReport {
    std::vector<Cplx> eigenvalues;  // rightmost first
    std::vector<double> residuals;  // ||A_FS v - lambda v|| / ||v|| in the energy norm
    MatX eigenvectors;              // z coordinates, one column per eigenvalue
    double abscissa = 0.0;
    double eta0 = 0.0;
    bool converged = false;
    int restarts = 0;
};

/// Rightmost eigenvalues of the coupled operator by block Krylov iteration on
/// the inverse (AA z + B^T p = MM x, B z = 0) in the energy inner product.
SpectralReport spectrum(const CoupledOperator& op, const SpectrumOptions& opt = {});

/// All eigenvalues from a dense solve on the divergence-free subspace.
/// Intended for coarse meshes only.
std::vector<double> dense_spectrum(const CoupledOperator& op);

/// ||A_FS v - lambda v|| / ||v|| in the energy norm, through the block form.
double eigen_residual(const CoupledOperator& op, double lambda, const VecX& z);

struct SectorBound {
    double bound = 0.0;
    std::vector<Cplx> samples;
    std::vector<double> values;  // NaN for flagged samples
    std::vector<int> flagged;
};

/// sup over samples of ||lambda (lambda - A_FS)^{-1}|| in the energy norm,
/// each estimated by power iteration on R^* R.
SectorBound sector_bound(const CoupledOperator& op, const std::vector<Cplx>& samples, int iterations = 60,
                         double tol = 1e-8, unsigned seed = 7);

/// Samples with |lambda| log-spaced in [rmin, rmax] on rays with argument in
/// {0, pi/4, pi/2, -pi/4, -pi/2}.
std::vector<Cplx> sector_grid(double rmin = 1e-3, double rmax = 1e3, int per_decade = 2);

struct DecayFit {
    double eta = 0.0;
    double intercept = 0.0;
    bool decaying = false;
    int used = 0;
};

/// Least-squares slope of log(y) against t over the last `tail` fraction of
/// the samples; eta = -slope. Throws std::invalid_argument on non-positive
/// values or fewer than 10 samples in the window.
DecayFit fit_decay_rate(const std::vector<double>& t, const std::vector<double>& y, double tail = 0.6);

}  // namespace slipfsi
