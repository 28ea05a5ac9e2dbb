#pragma once

#include "sgmca/matrix.hpp"

namespace sgmca {

struct AlignedEstimate {
    Matrix a;  // columns permuted/rescaled to match the truth ordering
    Matrix s;  // rows likewise; the product AS is unchanged
    std::vector<std::size_t> permutation;  // true index -> original estimate index
    std::vector<double> scales;            // factor applied to each aligned source row
};

/// Resolves the BSS permutation/scale indeterminacy: assigns estimated sources
/// to true ones by maximizing total |Pearson correlation| (exhaustive over
/// permutations, I <= 9), then least-squares rescales each source with the
/// inverse scale on the mixing column.
AlignedEstimate align(const Matrix& a_est, const Matrix& s_est, const Matrix& a_true,
                      const Matrix& s_true);

/// Spectral angular distance in dB: -10*log10(angle(a_est, a_true)), cosine
/// clamped to [-1, 1] and the angle floored at 1e-12 rad (cap 120 dB).
double sad(std::span<const double> a_est, std::span<const double> a_true);

struct BssRatios {
    double sdr, sir, snr, sar;  // dB, each clamped to [-120, 120]
};

/// Orthogonal four-way decomposition of one estimated source into target,
/// interference, noise and artifact parts via successive projections onto the
/// true source, the span of all true sources, and that span plus the realized
/// noise rows. Exposed for property tests; `evaluate` drives it per source.
struct BssDecomposition {
    std::vector<double> target, interf, noise, artif;
    BssRatios ratios;
    bool rank_deficient = false;  // projections fell back to the pseudo-inverse
};
BssDecomposition bss_eval(std::span<const double> s_est, const Matrix& s_true,
                          std::size_t target_index, const Matrix& n_true);

struct EvalReport {
    std::vector<double> sad_per_spectrum;  // dB, in truth order
    double sad_overall = 0.0;              // mean over spectra
    std::vector<double> sdr, sir, snr, sar;
    std::vector<std::size_t> permutation;
    std::vector<double> scales;
};

/// align + per-spectrum SAD + per-source bss_eval.
EvalReport evaluate(const Matrix& a_est, const Matrix& s_est, const Matrix& a_true,
                    const Matrix& s_true, const Matrix& n_true);

} // namespace sgmca
