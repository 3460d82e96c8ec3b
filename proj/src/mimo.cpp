#include "linkagent/mimo.hpp"

#include "linkagent/error.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace linkagent {

namespace {

// Relative eigenvalue floor of H^H H below which ZF is declared singular.
constexpr double kSingularTolerance = 1e-10;

} // namespace

CMatrix precoder_matrix(Precoding p, const CMatrix& h)
{
    const auto n_tx = h.cols();
    const auto n_rx = h.rows();
    switch (p) {
    case Precoding::identity:
        return CMatrix::Identity(n_tx, n_tx) / std::sqrt(static_cast<double>(n_tx));
    case Precoding::svd_rank1:
    case Precoding::svd_full: {
        Eigen::JacobiSVD<CMatrix> svd(h, Eigen::ComputeFullV);
        const Eigen::Index streams =
            p == Precoding::svd_rank1 ? 1 : std::min(n_tx, n_rx);
        return svd.matrixV().leftCols(streams) / std::sqrt(static_cast<double>(streams));
    }
    }
    throw std::invalid_argument("unknown precoding");
}

CMatrix precode(const CMatrix& symbols, const CMatrix& precoder)
{
    if (symbols.rows() != precoder.cols()) {
        throw std::invalid_argument("precode: " + std::to_string(symbols.rows()) +
                                    " streams for a precoder with " +
                                    std::to_string(precoder.cols()) + " columns");
    }
    return precoder.lazyProduct(symbols);
}

double tx_power_linear(int power_level_db)
{
    return std::pow(10.0, power_level_db / 10.0);
}

double p_extra_nats(int power_level_db)
{
    return std::log(tx_power_linear(power_level_db));
}

PoweredVectors apply_power(const CMatrix& vectors, int power_level_db)
{
    PoweredVectors out;
    out.tx_power_linear = tx_power_linear(power_level_db);
    out.p_extra = std::log(out.tx_power_linear);
    out.vectors = vectors * std::sqrt(out.tx_power_linear);
    return out;
}

CMatrix transmit(const CMatrix& x, const CMatrix& h, double noise_var, Rng& rng)
{
    if (h.cols() != x.rows()) {
        throw std::invalid_argument("transmit: channel has " + std::to_string(h.cols()) +
                                    " inputs, vectors have " + std::to_string(x.rows()));
    }
    CMatrix y = h.lazyProduct(x);
    if (noise_var > 0.0) {
        for (Eigen::Index c = 0; c < y.cols(); ++c) {
            for (Eigen::Index r = 0; r < y.rows(); ++r) {
                y(r, c) += rng.complex_gaussian(noise_var);
            }
        }
    }
    return y;
}

CMatrix pilot_matrix(int n_tx)
{
    return CMatrix::Identity(n_tx, n_tx) / std::sqrt(static_cast<double>(n_tx));
}

int pilot_uses(Estimator e, int n_tx)
{
    return e == Estimator::perfect ? 0 : n_tx;
}

CMatrix estimate_channel(Estimator e, const CMatrix& pilot_rx, const CMatrix& true_h,
                         double noise_var)
{
    if (e == Estimator::perfect) {
        return true_h;
    }
    const double n_tx = static_cast<double>(pilot_rx.cols());
    // P = I / sqrt(n_tx), so P^-1 = sqrt(n_tx) I.
    CMatrix ls = pilot_rx * std::sqrt(n_tx);
    if (e == Estimator::ls) {
        return ls;
    }
    return ls * (1.0 / (1.0 + noise_var * n_tx));
}

Equalized equalize(const CMatrix& received, const CMatrix& h_hat, Equalizer eq,
                   double noise_var, const CMatrix& precoder)
{
    const CMatrix h_eff = h_hat * precoder;
    const Eigen::Index streams = h_eff.cols();
    const CMatrix hh = h_eff.adjoint();
    CMatrix gram = hh * h_eff;

    // MMSE without noise regularization degenerates to ZF and needs the same check.
    if (eq == Equalizer::zf || noise_var <= 0.0) {
        if (streams > h_eff.rows()) {
            throw NumericalSingularity("zf: " + std::to_string(streams) + " streams on " +
                                       std::to_string(h_eff.rows()) + " receive antennas");
        }
        Eigen::SelfAdjointEigenSolver<CMatrix> eig(gram, Eigen::EigenvaluesOnly);
        const auto& ev = eig.eigenvalues();
        if (!(ev.maxCoeff() > 0.0) || ev.minCoeff() <= kSingularTolerance * ev.maxCoeff()) {
            throw NumericalSingularity("zf: effective channel is rank deficient");
        }
    }
    if (eq == Equalizer::mmse) {
        gram += noise_var * CMatrix::Identity(streams, streams);
    }

    const CMatrix w = gram.ldlt().solve(hh);
    const CMatrix a = w * h_eff;

    Equalized out;
    out.symbols = w.lazyProduct(received);
    out.gain.resize(streams);
    out.noise_var.resize(streams);
    for (Eigen::Index k = 0; k < streams; ++k) {
        const double beta = a(k, k).real();
        double interference = 0.0;
        for (Eigen::Index j = 0; j < streams; ++j) {
            if (j != k) {
                interference += std::norm(a(k, j));
            }
        }
        const double noise = noise_var * w.row(k).squaredNorm();
        out.gain(k) = beta;
        out.noise_var(k) = beta > 0.0 ? (interference + noise) / (beta * beta)
                                      : std::numeric_limits<double>::infinity();
    }
    return out;
}

} // namespace linkagent
