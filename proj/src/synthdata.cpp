#include "sgmca/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace sgmca {

namespace {

void normalize_l2(std::vector<double>& v, const char* who) {
    double sq = 0.0;
    for (double x : v) sq += x * x;
    if (sq <= 0.0) throw std::runtime_error(std::string(who) + ": degenerate zero spectrum");
    const double inv = 1.0 / std::sqrt(sq);
    for (double& x : v) x *= inv;
}

} // namespace

std::vector<double> gen_gaussian_line(double center, double width_factor, std::size_t channels) {
    if (!(center > 0.0) || !(center < static_cast<double>(channels))) {
        throw std::invalid_argument("gen_gaussian_line: center " + std::to_string(center) +
                                    " outside (0, " + std::to_string(channels) + ")");
    }
    if (width_factor < 0.0) {
        throw std::invalid_argument("gen_gaussian_line: negative width_factor");
    }
    std::vector<double> a(channels, 0.0);
    const double width = width_factor * center;
    if (width == 0.0) {
        // Delta limit: all mass on the channel nearest the center.
        a[static_cast<std::size_t>(std::llround(center)) - 1] = 1.0;
        return a;
    }
    for (std::size_t j = 1; j <= channels; ++j) {
        const double d = static_cast<double>(j) - center;
        a[j - 1] = std::exp(-d * d / (2.0 * width * width));
    }
    normalize_l2(a, "gen_gaussian_line");
    return a;
}

std::vector<double> gen_powerlaw(double index, double absorption, std::size_t channels) {
    if (absorption < 0.0) throw std::invalid_argument("gen_powerlaw: negative absorption");
    std::vector<double> a(channels);
    for (std::size_t j = 1; j <= channels; ++j) {
        const double e = static_cast<double>(j) / static_cast<double>(channels);
        a[j - 1] = std::pow(e, -index) * std::exp(-absorption / (e * e * e));
    }
    normalize_l2(a, "gen_powerlaw");
    return a;
}

std::vector<double> gen_thermal_proxy(double continuum_tau, double line_strength,
                                      std::uint64_t line_seed, std::size_t channels) {
    if (continuum_tau <= 0.0) throw std::invalid_argument("gen_thermal_proxy: tau must be > 0");
    if (line_strength < 0.0) {
        throw std::invalid_argument("gen_thermal_proxy: negative line strength");
    }
    const double j_max = static_cast<double>(channels);

    // The line comb is a fixed property of the family: positions, widths and
    // relative amplitudes depend only on line_seed.
    constexpr std::size_t n_lines = 6;
    Rng rng(line_seed);
    double centers[n_lines], widths[n_lines], amps[n_lines];
    for (std::size_t l = 0; l < n_lines; ++l) {
        centers[l] = rng.uniform(0.1 * j_max, 0.9 * j_max);
        widths[l] = rng.uniform(0.6, 1.6);
        amps[l] = rng.uniform(0.3, 1.0);
    }

    std::vector<double> a(channels);
    for (std::size_t j = 1; j <= channels; ++j) {
        const double e = static_cast<double>(j) / j_max;
        double v = std::exp(-e / continuum_tau);
        for (std::size_t l = 0; l < n_lines; ++l) {
            const double d = static_cast<double>(j) - centers[l];
            v += line_strength * amps[l] * std::exp(-d * d / (2.0 * widths[l] * widths[l]));
        }
        a[j - 1] = v;
    }
    normalize_l2(a, "gen_thermal_proxy");
    return a;
}

SpectrumFamily gaussian_line_family(std::size_t channels, double center_min, double center_max,
                                    double width_factor) {
    SpectrumFamily f;
    f.kind = FamilyKind::gaussian_line;
    f.channels = channels;
    f.p1_min = center_min;
    f.p1_max = center_max;
    f.width_factor = width_factor;
    return f;
}

SpectrumFamily powerlaw_family(std::size_t channels, double index_min, double index_max,
                               double absorption_min, double absorption_max) {
    SpectrumFamily f;
    f.kind = FamilyKind::powerlaw;
    f.channels = channels;
    f.p1_min = index_min;
    f.p1_max = index_max;
    f.p2_min = absorption_min;
    f.p2_max = absorption_max;
    return f;
}

SpectrumFamily thermal_family(std::size_t channels, double tau_min, double tau_max,
                              double line_min, double line_max, std::uint64_t line_seed) {
    SpectrumFamily f;
    f.kind = FamilyKind::thermal_proxy;
    f.channels = channels;
    f.p1_min = tau_min;
    f.p1_max = tau_max;
    f.p2_min = line_min;
    f.p2_max = line_max;
    f.line_seed = line_seed;
    return f;
}

std::vector<double> sample_spectrum(const SpectrumFamily& family, Rng& rng) {
    switch (family.kind) {
        case FamilyKind::gaussian_line:
            return gen_gaussian_line(rng.uniform(family.p1_min, family.p1_max),
                                     family.width_factor, family.channels);
        case FamilyKind::powerlaw:
            return gen_powerlaw(rng.uniform(family.p1_min, family.p1_max),
                                rng.uniform(family.p2_min, family.p2_max), family.channels);
        case FamilyKind::thermal_proxy:
            return gen_thermal_proxy(rng.uniform(family.p1_min, family.p1_max),
                                     rng.uniform(family.p2_min, family.p2_max), family.line_seed,
                                     family.channels);
    }
    throw std::logic_error("sample_spectrum: unknown family kind");
}

Matrix sample_spectra(const SpectrumFamily& family, std::size_t count, std::uint64_t seed) {
    Rng rng(seed);
    Matrix out(count, family.channels);
    for (std::size_t i = 0; i < count; ++i) {
        out.set_row(i, sample_spectrum(family, rng));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Templates
// ---------------------------------------------------------------------------

namespace {

void stamp_gaussian(std::vector<double>& img, std::size_t width, std::size_t height, double cx,
                    double cy, double sx, double sy, double theta, double amp) {
    const double c = std::cos(theta), s = std::sin(theta);
    const double reach = 3.5 * std::max(sx, sy);
    const std::size_t x0 = static_cast<std::size_t>(std::max(0.0, cx - reach));
    const std::size_t x1 = std::min(width - 1, static_cast<std::size_t>(std::max(0.0, cx + reach)));
    const std::size_t y0 = static_cast<std::size_t>(std::max(0.0, cy - reach));
    const std::size_t y1 =
        std::min(height - 1, static_cast<std::size_t>(std::max(0.0, cy + reach)));
    for (std::size_t y = y0; y <= y1; ++y) {
        for (std::size_t x = x0; x <= x1; ++x) {
            const double dx = static_cast<double>(x) - cx;
            const double dy = static_cast<double>(y) - cy;
            const double u = c * dx + s * dy;
            const double v = -s * dx + c * dy;
            img[y * width + x] +=
                amp * std::exp(-(u * u / (2.0 * sx * sx) + v * v / (2.0 * sy * sy)));
        }
    }
}

} // namespace

Matrix gen_templates(std::size_t width, std::size_t height, std::size_t n_sources,
                     std::uint64_t seed) {
    if (width < 8 || height < 8) {
        throw std::invalid_argument("gen_templates: image must be at least 8x8");
    }
    const double dim = static_cast<double>(std::min(width, height));
    Matrix out(n_sources, width * height);

    for (std::size_t i = 0; i < n_sources; ++i) {
        Rng rng(derive_seed(seed, 7, i));
        std::vector<double> img(width * height, 0.0);

        // Even sources: compact blob fields; odd sources: a filament plus a few
        // blobs, so morphologies stay distinct. Structures are kept small
        // (sigma of a few pixels) so each source is sparse in the wavelet
        // domain and sources rarely overlap.
        const bool filament = (i % 2) == 1;
        const std::size_t n_blobs = filament ? 2 + (i / 2) % 2 : 6 + (i / 2) % 3;
        for (std::size_t b = 0; b < n_blobs; ++b) {
            const double cx = rng.uniform(0.1, 0.9) * static_cast<double>(width);
            const double cy = rng.uniform(0.1, 0.9) * static_cast<double>(height);
            const double major = std::max(1.0, rng.uniform(0.02, 0.045) * dim);
            const double minor = major / rng.uniform(1.3, 2.5);
            stamp_gaussian(img, width, height, cx, cy, major, minor,
                           rng.uniform(0.0, 3.14159265358979323846), rng.uniform(0.5, 1.0));
        }
        if (filament) {
            // Quadratic Bezier ridge, rendered as closely spaced round stamps.
            const double x0 = rng.uniform(0.05, 0.25) * static_cast<double>(width);
            const double y0 = rng.uniform(0.1, 0.9) * static_cast<double>(height);
            const double x2 = rng.uniform(0.75, 0.95) * static_cast<double>(width);
            const double y2 = rng.uniform(0.1, 0.9) * static_cast<double>(height);
            const double x1 = rng.uniform(0.3, 0.7) * static_cast<double>(width);
            const double y1 = rng.uniform(0.05, 0.95) * static_cast<double>(height);
            const double sigma = rng.uniform(1.0, 2.0);
            const std::size_t steps = 4 * std::max(width, height);
            for (std::size_t t = 0; t <= steps; ++t) {
                const double u = static_cast<double>(t) / static_cast<double>(steps);
                const double w0 = (1 - u) * (1 - u), w1 = 2 * u * (1 - u), w2 = u * u;
                stamp_gaussian(img, width, height, w0 * x0 + w1 * x1 + w2 * x2,
                               w0 * y0 + w1 * y1 + w2 * y2, sigma, sigma, 0.0, 0.12);
            }
        }

        normalize_l2(img, "gen_templates");
        out.set_row(i, img);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Mixing
// ---------------------------------------------------------------------------

MixOutput mix(const Matrix& a, const Matrix& s, double snr_db, std::uint64_t seed) {
    if (a.cols() != s.rows()) throw std::invalid_argument("mix: A cols != S rows");
    MixOutput out;
    out.x = a * s;
    const double signal = out.x.frobenius_norm();
    if (signal == 0.0) throw std::invalid_argument("mix: zero signal");
    if (std::isinf(snr_db)) {
        out.n = Matrix(out.x.rows(), out.x.cols());
        return out;
    }
    if (!std::isfinite(snr_db)) throw std::invalid_argument("mix: snr_db is NaN");

    out.n = gaussian_matrix(out.x.rows(), out.x.cols(), seed);
    // Rescale the realized draw so the achieved SNR is exact, not just in
    // expectation.
    const double sigma = signal / (out.n.frobenius_norm() * std::pow(10.0, snr_db / 20.0));
    out.n *= sigma;
    out.x += out.n;
    return out;
}

ExperimentFamilies default_families(std::size_t channels) {
    ExperimentFamilies fam;
    fam.sync = powerlaw_family(channels);
    fam.thermal = thermal_family(channels);
    // Centers roam the middle band; widths ~5% of the center channel.
    fam.gauss = gaussian_line_family(channels, 0.25 * static_cast<double>(channels),
                                     0.75 * static_cast<double>(channels));
    fam.central_channel = 0.5 * static_cast<double>(channels);
    return fam;
}

ExperimentData build_experiment(const MixtureSpec& spec, const ExperimentFamilies& families,
                                const Matrix& templates, std::size_t width, std::size_t height) {
    const std::size_t channels = families.sync.channels;
    if (families.thermal.channels != channels || families.gauss.channels != channels) {
        throw std::invalid_argument("build_experiment: family channel counts differ");
    }
    if (templates.rows() != 4) {
        throw std::invalid_argument("build_experiment: the four-source protocol needs exactly 4 "
                                    "templates, got " + std::to_string(templates.rows()));
    }
    if (templates.cols() != width * height) {
        throw std::invalid_argument("build_experiment: template size != width*height");
    }
    if (spec.delta < 0.0) throw std::invalid_argument("build_experiment: delta must be >= 0");
    if (!(spec.k_ratio > 0.0)) throw std::invalid_argument("build_experiment: k must be > 0");

    const double central = families.central_channel > 0.0
                               ? families.central_channel
                               : 0.5 * static_cast<double>(channels);

    ExperimentData data;
    data.width = width;
    data.height = height;
    data.a_true = Matrix(channels, 4);

    Rng sync_rng(derive_seed(spec.seed, 1, 0));
    Rng thermal_rng(derive_seed(spec.seed, 1, 1));
    data.a_true.set_col(0, sample_spectrum(families.sync, sync_rng));
    data.a_true.set_col(1, sample_spectrum(families.thermal, thermal_rng));
    data.a_true.set_col(2, gen_gaussian_line(central - spec.delta / 2.0,
                                             families.gauss.width_factor, channels));
    data.a_true.set_col(3, gen_gaussian_line(central + spec.delta / 2.0,
                                             families.gauss.width_factor, channels));

    data.s_true = templates;
    for (std::size_t i = 1; i < 4; ++i) {
        for (std::size_t p = 0; p < data.s_true.cols(); ++p) {
            data.s_true(i, p) *= spec.k_ratio;
        }
    }

    MixOutput mixed = mix(data.a_true, data.s_true, spec.snr_db, derive_seed(spec.seed, 2, 0));
    data.x = std::move(mixed.x);
    data.n = std::move(mixed.n);
    return data;
}

} // namespace sgmca
