#pragma once

#include <cstdint>

#include "sgmca/matrix.hpp"
#include "sgmca/rng.hpp"

namespace sgmca {

// ---------------------------------------------------------------------------
// Spectrum generators. Channels are indexed j = 1..J; every generated spectrum
// is nonnegative with unit l2 norm.
// ---------------------------------------------------------------------------

/// Gaussian emission line, width proportional to its center:
/// a_j ~ exp(-(j - center)^2 / (2 (width_factor*center)^2)).
std::vector<double> gen_gaussian_line(double center, double width_factor, std::size_t channels);

/// Absorbed power law: a_j ~ (j/J)^(-index) * exp(-absorption / (j/J)^3).
std::vector<double> gen_powerlaw(double index, double absorption, std::size_t channels);

/// Hot-plasma proxy: exponential-cutoff continuum plus a seeded comb of narrow
/// Gaussian lines whose positions are fixed by line_seed; the two free
/// parameters are the continuum shape and the line strength.
std::vector<double> gen_thermal_proxy(double continuum_tau, double line_strength,
                                      std::uint64_t line_seed, std::size_t channels);

enum class FamilyKind { gaussian_line, powerlaw, thermal_proxy };

/// A one- or two-parameter manifold of spectra to sample from.
struct SpectrumFamily {
    FamilyKind kind = FamilyKind::gaussian_line;
    std::size_t channels = 64;
    double p1_min = 0.0, p1_max = 0.0;  // center | index | continuum_tau
    double p2_min = 0.0, p2_max = 0.0;  // (unused) | absorption | line_strength
    double width_factor = 0.05;         // gaussian_line width-to-center ratio
    std::uint64_t line_seed = 17;       // thermal_proxy line positions
};

SpectrumFamily gaussian_line_family(std::size_t channels, double center_min, double center_max,
                                    double width_factor = 0.05);
SpectrumFamily powerlaw_family(std::size_t channels, double index_min = 1.5,
                               double index_max = 3.0, double absorption_min = 0.02,
                               double absorption_max = 0.2);
SpectrumFamily thermal_family(std::size_t channels, double tau_min = 0.2, double tau_max = 0.6,
                              double line_min = 0.5, double line_max = 3.0,
                              std::uint64_t line_seed = 17);

std::vector<double> sample_spectrum(const SpectrumFamily& family, Rng& rng);

/// `count` draws with a fresh generator; one spectrum per row.
Matrix sample_spectra(const SpectrumFamily& family, std::size_t count, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Spatial templates and mixtures
// ---------------------------------------------------------------------------

/// Nonnegative synthetic source images (anisotropic Gaussian blobs, plus
/// filament curves on alternating sources), one row-major image per row,
/// each row unit l2 norm. Morphologies differ per source.
Matrix gen_templates(std::size_t width, std::size_t height, std::size_t n_sources,
                     std::uint64_t seed);

struct MixOutput {
    Matrix x;  // A*S + N
    Matrix n;  // realized noise (zero matrix when snr_db is infinite)
};

/// Adds white Gaussian noise rescaled so the realized SNR equals snr_db
/// exactly; an infinite snr_db yields N = 0.
MixOutput mix(const Matrix& a, const Matrix& s, double snr_db, std::uint64_t seed);

struct MixtureSpec {
    double snr_db = 40.0;
    double delta = 20.0;   // channel distance between the two Gaussian line centers
    double k_ratio = 1.0;  // amplitude ratio applied to the non-synchrotron sources
    std::uint64_t seed = 0;
};

/// The three families of the four-source protocol plus the channel around
/// which the two Gaussian line centers are split by +-delta/2.
struct ExperimentFamilies {
    SpectrumFamily sync;     // powerlaw
    SpectrumFamily thermal;  // thermal_proxy
    SpectrumFamily gauss;    // gaussian_line
    double central_channel = 0.0;  // 0 -> J/2
};

ExperimentFamilies default_families(std::size_t channels);

struct ExperimentData {
    Matrix x;       // J x P
    Matrix a_true;  // J x 4: sync, thermal, gauss-, gauss+
    Matrix s_true;  // 4 x P
    Matrix n;       // J x P
    std::size_t width = 0, height = 0;
};

/// One realization of the four-source protocol: draw the synchrotron and
/// thermal spectra, place the two Gaussian lines delta channels apart, scale
/// source rows 2-4 by k, and mix at the requested SNR.
ExperimentData build_experiment(const MixtureSpec& spec, const ExperimentFamilies& families,
                                const Matrix& templates, std::size_t width, std::size_t height);

} // namespace sgmca
