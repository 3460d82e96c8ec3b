#pragma once

#include "linkagent/channel_env.hpp"
#include "linkagent/rng.hpp"
#include "linkagent/strategy.hpp"

namespace linkagent {

/// Transmit precoder (n_tx x streams) for one channel block, ||F||_F^2 = 1.
///   identity  -> I / sqrt(n_tx)
///   svd_rank1 -> dominant right singular vector
///   svd_full  -> first min(n_tx, n_rx) right singular vectors / sqrt(streams)
CMatrix precoder_matrix(Precoding p, const CMatrix& h);

/// Maps a streams x uses symbol matrix to n_tx x uses transmit vectors.
CMatrix precode(const CMatrix& symbols, const CMatrix& precoder);

double tx_power_linear(int power_level_db);
/// ln(tx_power_linear(level)), nats relative to the reference power.
double p_extra_nats(int power_level_db);

struct PoweredVectors {
    CMatrix vectors;
    double p_extra = 0.0;
    double tx_power_linear = 1.0;
};

PoweredVectors apply_power(const CMatrix& vectors, int power_level_db);

/// y = H x + n with n ~ CN(0, noise_var) per receive antenna and use.
CMatrix transmit(const CMatrix& x, const CMatrix& h, double noise_var, Rng& rng);

/// Orthogonal pilot block: identity scaled by 1/sqrt(n_tx), one column per use.
CMatrix pilot_matrix(int n_tx);

/// Number of pilot vector uses the estimator needs per channel block.
int pilot_uses(Estimator e, int n_tx);

/// Channel estimate from the pilot observation Y = H P + N.
///   perfect -> true_h (no pilots needed)
///   ls      -> Y P^-1
///   lmmse   -> LS * 1 / (1 + noise_var * n_tx), for a unit-variance prior
CMatrix estimate_channel(Estimator e, const CMatrix& pilot_rx, const CMatrix& true_h,
                         double noise_var);

struct Equalized {
    CMatrix symbols;        // streams x uses, raw filter output W y
    Eigen::VectorXd gain;   // real part of diag(W H_eff): per-stream bias
    Eigen::VectorXd noise_var; // post-equalization noise + interference after bias removal
};

/// Linear MIMO detection against H_eff = h_hat * precoder.
///   zf   -> W = (H^H H)^-1 H^H; throws NumericalSingularity if H_eff is rank deficient
///   mmse -> W = (H^H H + noise_var I)^-1 H^H
Equalized equalize(const CMatrix& received, const CMatrix& h_hat, Equalizer eq,
                   double noise_var, const CMatrix& precoder);

} // namespace linkagent
