#pragma once

// Spectral reconstruction of a rotation from its return-time set: Cesaro
// averages, FFT scan, peak refinement, integer relations among frequencies and
// the reconstructed group with the image of the rotation.

#include "kronrec/group.hpp"
#include "kronrec/orbit.hpp"

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace kronrec {

struct SpectrumPeak {
    /// Frequency in [0,1); lambda = exp(2 pi i theta).
    double theta = 0.0;
    /// Cesaro average at N_used.
    std::complex<double> amplitude;
    /// |A_N - A_{N/2}| for refined peaks; ||A_N| - |A_{N/2}|| on the scan grid.
    double convergence_gap = 0.0;
    std::int64_t N_used = 0;
    /// Refinement ended on the bracket edge or could not run.
    bool flagged = false;
};

/// (1/N) sum_{n=1}^N exp(2 pi i theta n) 1_R(n). Requires [1,N] inside the window.
std::complex<double> cesaro_average(const ReturnSet& R, double theta, std::int64_t N);

/// Default decision threshold 20 / sqrt(N).
double default_threshold(std::int64_t N);

/// Cesaro averages on the grid theta_j = j / G, j = 0..G-1, from one real FFT.
class SpectrumGrid {
public:
    SpectrumGrid(const ReturnSet& R, std::size_t grid_size, std::int64_t N);

    std::size_t grid_size() const { return grid_size_; }
    std::int64_t N() const { return N_; }
    double theta(std::size_t j) const { return static_cast<double>(j) / static_cast<double>(grid_size_); }
    std::complex<double> at(std::size_t j) const;

private:
    std::size_t grid_size_;
    std::int64_t N_;
    /// j = 0..G/2; the rest follows from A(1 - theta) = conj(A(theta)).
    std::vector<std::complex<double>> half_;
};

struct ScanOptions {
    /// 0 selects the smallest power of two >= 8 N.
    std::size_t grid_size = 0;
    /// <= 0 selects default_threshold(N).
    double threshold = 0.0;
    /// 0 uses N = window.hi.
    std::int64_t N = 0;
};

/// Grid local maxima with |A| >= threshold and scan gap <= threshold / 2, in
/// ascending theta. Sidelobes of stronger peaks are suppressed.
std::vector<SpectrumPeak> scan_spectrum(const ReturnSet& R, const ScanOptions& options = {});
std::vector<SpectrumPeak> scan_spectrum(const ReturnSet& R, std::size_t grid_size, double threshold);

struct RefineOptions {
    /// 0 uses N = window.hi.
    std::int64_t N = 0;
    /// Bracket theta0 +- half_width; 0 selects 1/(4N).
    double half_width = 0.0;
};

/// Golden-section maximization of |A(theta)| around theta0 until the bracket is narrower than tol.
SpectrumPeak refine_peak(const ReturnSet& R, double theta0, double tol, const RefineOptions& options = {});

enum class Verdict { Converged, ConvergingToZero, Inconclusive };
const char* to_string(Verdict v);

struct CoefficientEstimate {
    std::complex<double> value;
    std::vector<std::int64_t> schedule;
    std::vector<std::complex<double>> averages;
    /// |A_{N_{i+1}} - A_{N_i}|
    std::vector<double> differences;
    double threshold = 0.0;
    Verdict verdict = Verdict::Inconclusive;
};

/// N_max / 2^(count-1), ..., N_max / 2, N_max.
std::vector<std::int64_t> dyadic_schedule(std::int64_t N_max, int count = 8);

/// Averages along an increasing schedule. ConvergingToZero when the final
/// magnitude is below the threshold; Converged when the last difference is
/// below it and the differences are not growing; Inconclusive otherwise.
CoefficientEstimate estimate_coefficient(const ReturnSet& R, double theta, const std::vector<std::int64_t>& schedule,
                                         double threshold = 0.0);

struct RelationLattice {
    /// HNF basis; each row is (k_1, ..., k_m, k_0) with sum k_i theta_i - k_0 ~ 0.
    std::vector<std::vector<std::int64_t>> basis;
    double tolerance = 0.0;
    bool lattice_reduction = false;
};

/// Tolerance max(1e-7, 10 * resolution).
double relation_tolerance(double resolution);

struct RelationOptions {
    /// Frequency resolution of the thetas.
    double resolution = 1e-9;
    /// Force lattice reduction instead of exhaustive search.
    bool lattice_reduction = false;
};

/// Integer relations with |k_i| <= H. Exhaustive for at most 4 frequencies and
/// H <= 100; otherwise throws CapExceeded unless lattice reduction is requested.
RelationLattice detect_relations(const std::vector<double>& thetas, std::int64_t H, const RelationOptions& options = {});

struct PeakAssignment {
    SpectrumPeak peak;
    Character character;
};

struct ReconstructionResult {
    GroupDescriptor group;
    GroupPoint alpha_image;
    std::vector<PeakAssignment> assignments;
    /// Rows (k_1, ..., k_m, k_0) over the generator frequencies, in assignment order without theta = 0.
    std::vector<std::vector<std::int64_t>> relation_basis;
    std::int64_t height = 0;
    std::size_t top_m = 0;
    double tolerance = 0.0;
    std::vector<std::string> warnings;
};

struct ReconstructOptions {
    std::size_t top_m = 25;
    /// Frequency resolution of the refined peaks; 0 selects 1/(4N).
    double resolution = 0.0;
};

/// Rebuilds the group and the image of the rotation from refined peaks. Peaks
/// are ordered by descending |amplitude| then ascending theta.
ReconstructionResult reconstruct_group(const std::vector<SpectrumPeak>& peaks, std::int64_t H,
                                       const ReconstructOptions& options = {});

struct SpectralPipelineOptions {
    ScanOptions scan;
    double refine_tol = 1e-13;
    std::int64_t height = 16;
    std::size_t top_m = 25;
};

/// scan_spectrum followed by refine_peak on every coarse peak.
std::vector<SpectrumPeak> refined_spectrum(const ReturnSet& R, const SpectralPipelineOptions& options = {});

enum class CompareKind { ConsistentIsomorphic, Distinguished, Inconclusive };
const char* to_string(CompareKind k);

struct CompareVerdict {
    CompareKind kind = CompareKind::Inconclusive;
    double theta = 0.0;
    std::complex<double> amplitude1;
    std::complex<double> amplitude2;
    std::string to_string() const;
};

/// Equal bitmasks are consistent with isomorphic systems; otherwise the first
/// frequency (ascending) whose amplitudes differ by more than tol distinguishes them.
CompareVerdict compare_systems(const ReturnSet& R1, const ReturnSet& R2, double tol,
                               const SpectralPipelineOptions& options = {});

/// {"theta":..,"re":..,"im":..,"gap":..,"N":..} per line.
void write_spectrum_jsonl(std::ostream& out, const std::vector<SpectrumPeak>& peaks);
/// {"rank":..,"torsion":[..],"alpha_image":..,"assignments":[..],"relations":[..],...}
std::string reconstruction_json(const ReconstructionResult& r);
/// theta,abs_amplitude for every `stride`-th grid point.
void write_grid_csv(std::ostream& out, const SpectrumGrid& grid, std::size_t stride = 1);

/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

}  // namespace kronrec
