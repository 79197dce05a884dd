#include "kronrec/spectral.hpp"

#include "kronrec/errors.hpp"
#include "lattice.hpp"

#include <fftw3.h>
#include "json.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>
#include <ostream>

namespace kronrec {

namespace {

std::int64_t resolve_N(const ReturnSet& R, std::int64_t N) {
    if (N <= 0) N = R.window().hi;
    if (N < 1) throw ShapeError("the window must contain [1, N] for some N >= 1");
    if (R.window().lo > 1 || R.window().hi < N) {
        throw ShapeError("window [" + std::to_string(R.window().lo) + ", " + std::to_string(R.window().hi) +
                         "] does not contain [1, " + std::to_string(N) + "]");
    }
    return N;
}

struct Neumaier {
    double sum = 0.0;
    double comp = 0.0;
    void add(double v) {
        const double t = sum + v;
        comp += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
        sum = t;
    }
    double value() const { return sum + comp; }
};

double rounded_magnitude(std::complex<double> z) { return std::round(std::abs(z) * 1e9) / 1e9; }

/// Enumeration order of frequencies: descending |amplitude| (to 1e-9), then ascending theta.
bool enumeration_before(const SpectrumPeak& a, const SpectrumPeak& b) {
    const double ma = rounded_magnitude(a.amplitude);
    const double mb = rounded_magnitude(b.amplitude);
    if (ma != mb) return ma > mb;
    return a.theta < b.theta;
}

std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

}  // namespace

std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// Cesaro averages

std::complex<double> cesaro_average(const ReturnSet& R, double theta, std::int64_t N) {
    N = resolve_N(R, N);
    const double th = wrap01(theta);
    const auto step = unit_phasor(th);
    const double wr = step.real();
    const double wi = step.imag();
    const auto& bits = R.bits();
    const std::int64_t lo = R.window().lo;
    constexpr std::int64_t block = 256;
    Neumaier re, im;
    for (std::int64_t n0 = 1; n0 <= N; n0 += block) {
        // Resynchronize the phasor from the exactly reduced phase.
        const auto z0 = unit_phasor(frac_of_product(th, n0));
        double zr = z0.real();
        double zi = z0.imag();
        double br = 0.0;
        double bi = 0.0;
        const std::int64_t end = std::min(N, n0 + block - 1);
        for (std::int64_t n = n0; n <= end; ++n) {
            if (bits[static_cast<std::size_t>(n - lo)]) {
                br += zr;
                bi += zi;
            }
            const double nr = zr * wr - zi * wi;
            zi = zr * wi + zi * wr;
            zr = nr;
        }
        re.add(br);
        im.add(bi);
    }
    return {re.value() / static_cast<double>(N), im.value() / static_cast<double>(N)};
}

double default_threshold(std::int64_t N) { return 20.0 / std::sqrt(static_cast<double>(N)); }

SpectrumGrid::SpectrumGrid(const ReturnSet& R, std::size_t grid_size, std::int64_t N)
    : grid_size_(grid_size), N_(resolve_N(R, N)) {
    if (grid_size_ < 2 || grid_size_ % 2 != 0 || grid_size_ <= static_cast<std::size_t>(N_)) {
        throw ShapeError("grid size " + std::to_string(grid_size_) + " must be even and exceed N = " + std::to_string(N_));
    }
    const std::size_t G = grid_size_;
    double* in = fftw_alloc_real(G);
    fftw_complex* out = fftw_alloc_complex(G / 2 + 1);
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        plan = fftw_plan_dft_r2c_1d(static_cast<int>(G), in, out, FFTW_ESTIMATE);
    }
    std::fill(in, in + G, 0.0);
    const auto& bits = R.bits();
    const std::int64_t lo = R.window().lo;
    for (std::int64_t n = 1; n <= N_; ++n) {
        if (bits[static_cast<std::size_t>(n - lo)]) in[n] = 1.0;
    }
    fftw_execute(plan);
    half_.resize(G / 2 + 1);
    const double scale = 1.0 / static_cast<double>(N_);
    // sum_n x_n e^{+2 pi i j n / G} is the conjugate of FFTW's forward transform.
    for (std::size_t j = 0; j <= G / 2; ++j) half_[j] = {out[j][0] * scale, -out[j][1] * scale};
    {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }
    fftw_free(in);
    fftw_free(out);
}

std::complex<double> SpectrumGrid::at(std::size_t j) const {
    j %= grid_size_;
    if (j <= grid_size_ / 2) return half_[j];
    return std::conj(half_[grid_size_ - j]);
}

// ---------------------------------------------------------------------------
// Scan

std::vector<SpectrumPeak> scan_spectrum(const ReturnSet& R, const ScanOptions& options) {
    const std::int64_t N = resolve_N(R, options.N);
    std::size_t G = options.grid_size;
    if (G == 0) {
        G = 2;
        while (G < 8 * static_cast<std::size_t>(N)) G *= 2;
    }
    if (G < 4 * static_cast<std::size_t>(N)) {
        throw ShapeError("grid size " + std::to_string(G) + " is below 4N = " + std::to_string(4 * N));
    }
    if (G % 2 != 0) throw ShapeError("grid size must be even");
    const double thr = options.threshold > 0.0 ? options.threshold : default_threshold(N);

    const SpectrumGrid full(R, G, N);
    std::optional<SpectrumGrid> half;
    if (N >= 2) half.emplace(R, G, N / 2);

    const std::size_t H = G / 2;
    std::vector<double> mag(H + 1);
    for (std::size_t j = 0; j <= H; ++j) mag[j] = std::abs(full.at(j));

    struct Candidate {
        std::size_t j;
        double mag;
        double gap;
    };
    std::vector<Candidate> cands;
    for (std::size_t j = 0; j <= H; ++j) {
        if (mag[j] < thr) continue;
        const double left = j == 0 ? mag[1] : mag[j - 1];
        const double right = j == H ? mag[H - 1] : mag[j + 1];
        if (!(mag[j] > left && mag[j] >= right)) continue;
        const double gap = half ? std::abs(mag[j] - std::abs(half->at(j))) : 0.0;
        if (gap > thr / 2.0) continue;
        cands.push_back({j, mag[j], gap});
    }
    std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) { return a.mag > b.mag; });

    // Reject candidates explained by the Dirichlet-kernel leakage of stronger peaks.
    std::vector<Candidate> kept;
    for (const auto& c : cands) {
        const double th = full.theta(c.j);
        double envelope = 0.0;
        for (const auto& k : kept) {
            const double tk = full.theta(k.j);
            for (double other : {tk, 1.0 - tk}) {
                const double d = circle_distance(th, other);
                if (d == 0.0) continue;
                envelope += k.mag / (2.0 * static_cast<double>(N) * d);
            }
        }
        if (c.mag <= envelope) continue;
        kept.push_back(c);
    }

    std::vector<SpectrumPeak> peaks;
    for (const auto& k : kept) {
        SpectrumPeak p;
        p.theta = full.theta(k.j);
        p.amplitude = full.at(k.j);
        p.convergence_gap = k.gap;
        p.N_used = N;
        peaks.push_back(p);
        if (k.j != 0 && k.j != H) {
            p.theta = full.theta(G - k.j);
            p.amplitude = full.at(G - k.j);
            peaks.push_back(p);
        }
    }
    std::sort(peaks.begin(), peaks.end(), [](const SpectrumPeak& a, const SpectrumPeak& b) { return a.theta < b.theta; });
    return peaks;
}

std::vector<SpectrumPeak> scan_spectrum(const ReturnSet& R, std::size_t grid_size, double threshold) {
    ScanOptions o;
    o.grid_size = grid_size;
    o.threshold = threshold;
    return scan_spectrum(R, o);
}

// ---------------------------------------------------------------------------
// Refinement

SpectrumPeak refine_peak(const ReturnSet& R, double theta0, double tol, const RefineOptions& options) {
    const std::int64_t N = resolve_N(R, options.N);
    const double h = options.half_width > 0.0 ? options.half_width : 1.0 / (4.0 * static_cast<double>(N));
    auto finish = [&](double theta, bool flagged) {
        SpectrumPeak p;
        p.theta = wrap01(theta);
        p.amplitude = cesaro_average(R, p.theta, N);
        p.convergence_gap = N >= 2 ? std::abs(p.amplitude - cesaro_average(R, p.theta, N / 2)) : 0.0;
        p.N_used = N;
        p.flagged = flagged;
        return p;
    };
    if (!(tol > 0.0) || tol >= 2.0 * h) {
        return finish(theta0, true);
    }

    auto f = [&](double t) { return std::norm(cesaro_average(R, t, N)); };
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = theta0 - h;
    double b = theta0 + h;
    double c = b - invphi * (b - a);
    double d = a + invphi * (b - a);
    double fc = f(c);
    double fd = f(d);
    double best_t = fc >= fd ? c : d;
    double best_f = std::max(fc, fd);
    while (b - a > tol) {
        if (fc >= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = f(c);
            if (fc > best_f) {
                best_f = fc;
                best_t = c;
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = f(d);
            if (fd > best_f) {
                best_f = fd;
                best_t = d;
            }
        }
    }
    // The bracket edges themselves.
    const double lo_edge = theta0 - h;
    const double hi_edge = theta0 + h;
    bool flagged = false;
    for (double e : {lo_edge, hi_edge}) {
        const double fe = f(e);
        if (fe > best_f) {
            best_f = fe;
            best_t = e;
        }
    }
    if (best_t - lo_edge < 2.0 * tol || hi_edge - best_t < 2.0 * tol) flagged = true;
    return finish(best_t, flagged);
}

// ---------------------------------------------------------------------------
// Coefficient estimates

const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::Converged:
            return "converged";
        case Verdict::ConvergingToZero:
            return "converging to 0";
        case Verdict::Inconclusive:
            return "inconclusive";
    }
    return "?";
}

std::vector<std::int64_t> dyadic_schedule(std::int64_t N_max, int count) {
    std::vector<std::int64_t> out;
    for (int i = count - 1; i >= 0; --i) {
        const std::int64_t n = N_max >> i;
        if (n >= 1 && (out.empty() || out.back() < n)) out.push_back(n);
    }
    return out;
}

CoefficientEstimate estimate_coefficient(const ReturnSet& R, double theta, const std::vector<std::int64_t>& schedule,
                                         double threshold) {
    if (schedule.empty()) throw ShapeError("empty schedule");
    for (std::size_t i = 1; i < schedule.size(); ++i) {
        if (schedule[i] <= schedule[i - 1]) throw ShapeError("schedule must be strictly increasing");
    }
    CoefficientEstimate est;
    est.schedule = schedule;
    for (auto n : schedule) est.averages.push_back(cesaro_average(R, theta, n));
    for (std::size_t i = 1; i < est.averages.size(); ++i) {
        est.differences.push_back(std::abs(est.averages[i] - est.averages[i - 1]));
    }
    est.value = est.averages.back();
    est.threshold = threshold > 0.0 ? threshold : default_threshold(schedule.back());

    if (std::abs(est.value) < est.threshold) {
        est.verdict = Verdict::ConvergingToZero;
        return est;
    }
    const auto& d = est.differences;
    if (d.empty()) {
        est.verdict = Verdict::Converged;
        return est;
    }
    const std::size_t mid = d.size() / 2;
    const double head = mid == 0 ? d.front() : *std::max_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid));
    const double tail = *std::max_element(d.begin() + static_cast<std::ptrdiff_t>(mid), d.end());
    est.verdict = d.back() < est.threshold && tail <= head + 1e-15 ? Verdict::Converged : Verdict::Inconclusive;
    return est;
}

// ---------------------------------------------------------------------------
// Integer relations

double relation_tolerance(double resolution) { return std::max(1e-7, 10.0 * resolution); }

namespace {

using detail::IntMatrix;
using detail::IntVector;

long double frac_ld(long double x) { return x - std::floor(x); }

long double circle_dist_ld(long double x) {
    const long double f = frac_ld(x);
    return std::min(f, 1.0L - f);
}

std::vector<std::vector<std::int64_t>> to_int64(const IntMatrix& m) {
    std::vector<std::vector<std::int64_t>> out;
    for (const auto& row : m) {
        std::vector<std::int64_t> r;
        for (const auto& v : row) r.push_back(v.convert_to<std::int64_t>());
        out.push_back(std::move(r));
    }
    return out;
}

/// Table of frac(k * t) for |k| <= H, sorted, for the last coefficient.
struct FracTable {
    std::vector<std::pair<long double, std::int64_t>> entries;

    FracTable(long double t, std::int64_t H) {
        for (std::int64_t k = -H; k <= H; ++k) entries.emplace_back(frac_ld(k * t), k);
        std::sort(entries.begin(), entries.end());
    }

    /// Every k with frac(k t) within delta of target (on the circle).
    template <typename Fn>
    void near(long double target, long double delta, Fn&& fn) const {
        auto scan = [&](long double lo, long double hi) {
            auto it = std::lower_bound(entries.begin(), entries.end(), std::make_pair(lo, std::numeric_limits<std::int64_t>::min()));
            for (; it != entries.end() && it->first <= hi; ++it) fn(it->second);
        };
        target = frac_ld(target);
        const long double lo = target - delta;
        const long double hi = target + delta;
        scan(std::max(lo, 0.0L), std::min(hi, 1.0L));
        if (lo < 0) scan(lo + 1.0L, 1.0L);
        if (hi > 1) scan(0.0L, hi - 1.0L);
    }
};

/// Calls fn(k) for every k in [-H, H]^m (k != 0) with sum k_i t_i within delta of an integer.
template <typename Fn>
void exhaustive_relations(const std::vector<long double>& t, std::int64_t H, long double delta, Fn&& fn) {
    const std::size_t m = t.size();
    if (m == 0) return;
    const FracTable table(t.back(), H);
    std::vector<std::int64_t> k(m, -H);
    std::vector<std::int64_t> found;
    for (;;) {
        long double s = 0;
        for (std::size_t i = 0; i + 1 < m; ++i) s += k[i] * t[i];
        found.clear();
        table.near(-s, delta, [&](std::int64_t last) { found.push_back(last); });
        std::sort(found.begin(), found.end());
        found.erase(std::unique(found.begin(), found.end()), found.end());
        for (auto last : found) {
            k[m - 1] = last;
            if (std::any_of(k.begin(), k.end(), [](std::int64_t v) { return v != 0; })) fn(k);
        }
        std::size_t p = 0;
        while (p + 1 < m && ++k[p] > H) k[p++] = -H;
        if (p + 1 == m) break;
    }
}

/// Candidate relations from an LLL-reduced embedding, each verified directly.
std::vector<std::vector<std::int64_t>> lll_relations(const std::vector<long double>& t, std::int64_t H, long double delta) {
    const std::size_t m = t.size();
    const long double C = 1.0L / delta;
    IntMatrix basis;
    for (std::size_t i = 0; i <= m; ++i) {
        IntVector row(m + 2, BigInt(0));
        row[i] = 1;
        const long double v = i < m ? t[i] : -1.0L;
        row[m + 1] = BigInt(std::llround(C * v));
        basis.push_back(std::move(row));
    }
    const IntMatrix reduced = detail::lll_reduce(basis);
    std::vector<std::vector<std::int64_t>> rows;
    for (const auto& r : reduced) {
        std::vector<std::int64_t> k(m);
        bool small = true;
        for (std::size_t i = 0; i < m; ++i) {
            if (abs(r[i]) > H) small = false;
            if (small) k[i] = r[i].convert_to<std::int64_t>();
        }
        if (small) rows.push_back(std::move(k));
    }
    std::vector<std::vector<std::int64_t>> out;
    auto verify = [&](const std::vector<std::int64_t>& k) {
        if (std::all_of(k.begin(), k.end(), [](std::int64_t v) { return v == 0; })) return;
        if (std::any_of(k.begin(), k.end(), [&](std::int64_t v) { return std::llabs(v) > H; })) return;
        long double s = 0;
        for (std::size_t i = 0; i < m; ++i) s += k[i] * t[i];
        if (circle_dist_ld(s) < delta) out.push_back(k);
    };
    for (const auto& r : rows) verify(r);
    for (std::size_t a = 0; a < rows.size(); ++a) {
        for (std::size_t b = a + 1; b < rows.size(); ++b) {
            std::vector<std::int64_t> sum(m), diff(m);
            for (std::size_t i = 0; i < m; ++i) {
                sum[i] = rows[a][i] + rows[b][i];
                diff[i] = rows[a][i] - rows[b][i];
            }
            verify(sum);
            verify(diff);
        }
    }
    return out;
}

std::vector<std::int64_t> with_k0(const std::vector<std::int64_t>& k, const std::vector<long double>& t) {
    long double s = 0;
    for (std::size_t i = 0; i < k.size(); ++i) s += k[i] * t[i];
    auto out = k;
    out.push_back(std::llround(s));
    return out;
}

}  // namespace

RelationLattice detect_relations(const std::vector<double>& thetas, std::int64_t H, const RelationOptions& options) {
    if (H < 1) throw ShapeError("height bound must be positive");
    const std::size_t m = thetas.size();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j) {
            if (thetas[i] == thetas[j]) throw ShapeError("frequencies must be deduplicated");
        }
    }
    RelationLattice out;
    out.tolerance = relation_tolerance(options.resolution);
    out.lattice_reduction = options.lattice_reduction;
    if (!options.lattice_reduction && (m > 4 || H > 100)) {
        throw CapExceeded("exhaustive relation search handles at most 4 frequencies and H <= 100 (got " +
                          std::to_string(m) + " and H = " + std::to_string(H) + "); use lattice-reduction mode");
    }
    std::vector<long double> t(thetas.begin(), thetas.end());
    IntMatrix found;
    auto record = [&](const std::vector<std::int64_t>& k) {
        IntVector row;
        for (auto v : with_k0(k, t)) row.emplace_back(v);
        found.push_back(std::move(row));
    };
    if (options.lattice_reduction) {
        for (const auto& k : lll_relations(t, H, out.tolerance)) record(k);
    } else {
        exhaustive_relations(t, H, out.tolerance, record);
    }
    out.basis = to_int64(detail::hnf_rows(std::move(found)));
    return out;
}

// ---------------------------------------------------------------------------
// Reconstruction

namespace {

struct Representation {
    /// theta = sum_i q_i b_i + r (mod 1).
    std::vector<Rational> q;
    Rational r;
};

BigInt lcm_big(const BigInt& a, const BigInt& b) { return a / boost::multiprecision::gcd(a, b) * b; }

Rational frac_rational(const Rational& x) {
    const BigInt fl = floor_div(boost::multiprecision::numerator(x), boost::multiprecision::denominator(x));
    return x - Rational(fl);
}

/// Smallest k0 >= 1 with k0 theta = sum k_i b_i + n (|k_i| <= H), or nullopt.
std::optional<Representation> represent(long double theta, const std::vector<long double>& basis, std::int64_t H,
                                        long double delta) {
    const std::size_t s = basis.size();
    for (std::int64_t k0 = 1; k0 <= H; ++k0) {
        std::vector<std::vector<std::int64_t>> sols;
        if (s == 0) {
            if (circle_dist_ld(k0 * theta) < delta) sols.emplace_back();
        } else if (s <= 3) {
            // Relations among (b_1..b_s, -k0 theta) with the last coefficient pinned to 1.
            std::vector<long double> t = basis;
            const long double target = k0 * theta;
            const FracTable table(t.back(), H);
            std::vector<std::int64_t> k(s, -H);
            for (;;) {
                long double acc = 0;
                for (std::size_t i = 0; i + 1 < s; ++i) acc += k[i] * t[i];
                table.near(target - acc, delta, [&](std::int64_t last) {
                    auto v = k;
                    v[s - 1] = last;
                    if (std::find(sols.begin(), sols.end(), v) == sols.end()) sols.push_back(v);
                });
                std::size_t p = 0;
                while (p + 1 < s && ++k[p] > H) k[p++] = -H;
                if (p + 1 >= s) break;
            }
        } else {
            std::vector<long double> t{theta};
            t.insert(t.end(), basis.begin(), basis.end());
            for (const auto& rel : lll_relations(t, H, delta)) {
                if (rel[0] == 0 || std::llabs(rel[0]) != k0) continue;
                std::vector<std::int64_t> v(s);
                const std::int64_t sign = rel[0] > 0 ? -1 : 1;
                for (std::size_t i = 0; i < s; ++i) v[i] = sign * rel[i + 1];
                if (std::find(sols.begin(), sols.end(), v) == sols.end()) sols.push_back(v);
            }
        }
        if (sols.empty()) continue;
        if (sols.size() > 1) {
            throw ToleranceConflict("frequency " + format_double(static_cast<double>(theta)) + " satisfies " +
                                    std::to_string(sols.size()) + " distinct relations at multiplier " +
                                    std::to_string(k0) + "; lower H or tighten the resolution");
        }
        const auto& k = sols.front();
        long double acc = 0;
        for (std::size_t i = 0; i < s; ++i) acc += k[i] * basis[i];
        const std::int64_t n = std::llround(k0 * theta - acc);
        Representation rep;
        for (std::size_t i = 0; i < s; ++i) rep.q.emplace_back(k[i], k0);
        rep.r = frac_rational(Rational(n, k0));
        return rep;
    }
    return std::nullopt;
}

}  // namespace

ReconstructionResult reconstruct_group(const std::vector<SpectrumPeak>& peaks, std::int64_t H,
                                       const ReconstructOptions& options) {
    if (H < 1) throw ShapeError("height bound must be positive");
    ReconstructionResult out;
    out.height = H;
    out.top_m = options.top_m;
    std::int64_t N = 0;
    for (const auto& p : peaks) N = std::max(N, p.N_used);
    const double resolution =
        options.resolution > 0.0 ? options.resolution : (N > 0 ? 1.0 / (4.0 * static_cast<double>(N)) : 1e-9);
    out.tolerance = relation_tolerance(resolution);
    const long double delta = out.tolerance;

    std::vector<SpectrumPeak> ordered = peaks;
    std::sort(ordered.begin(), ordered.end(), enumeration_before);

    std::vector<SpectrumPeak> zero;
    std::vector<SpectrumPeak> gens;
    for (const auto& p : ordered) {
        if (circle_distance(p.theta, 0.0) < out.tolerance) {
            zero.push_back(p);
        } else if (gens.size() < options.top_m) {
            gens.push_back(p);
        }
    }
    if (gens.empty()) {
        out.group = GroupDescriptor::make(0, {});
        out.warnings.emplace_back("stabilizer hypothesis likely violated: no nonzero frequency detected");
        for (const auto& p : zero) out.assignments.push_back({p, Character{}});
        return out;
    }

    // Exact coordinates of every frequency over a rationally independent basis.
    std::vector<long double> basis;
    std::vector<Representation> reps;
    for (const auto& p : gens) {
        const long double th = p.theta;
        auto rep = represent(th, basis, H, delta);
        if (!rep) {
            rep.emplace();
            rep->q.assign(basis.size(), Rational(0));
            rep->q.emplace_back(1);
            rep->r = 0;
            basis.push_back(th);
        }
        reps.push_back(std::move(*rep));
    }
    const std::size_t s = basis.size();
    const std::size_t m = gens.size();
    for (auto& rep : reps) rep.q.resize(s, Rational(0));

    BigInt D = 1;
    for (const auto& rep : reps) {
        for (const auto& q : rep.q) D = lcm_big(D, boost::multiprecision::denominator(q));
        D = lcm_big(D, boost::multiprecision::denominator(rep.r));
    }
    auto scaled = [&](const Rational& x) {
        const Rational v = x * Rational(D);
        return BigInt(boost::multiprecision::numerator(v));
    };

    // Relation lattice: k with sum_j k_j W_ji = 0 for every i and sum_j k_j w_j = 0 (mod D).
    detail::IntMatrix M;
    for (std::size_t i = 0; i < s; ++i) {
        detail::IntVector row(m + 1, BigInt(0));
        for (std::size_t j = 0; j < m; ++j) row[j] = scaled(reps[j].q[i]);
        M.push_back(std::move(row));
    }
    {
        detail::IntVector row(m + 1, BigInt(0));
        for (std::size_t j = 0; j < m; ++j) row[j] = scaled(reps[j].r);
        row[m] = -D;
        M.push_back(std::move(row));
    }
    detail::IntMatrix L;
    for (auto& v : detail::integer_kernel(M, m + 1)) {
        v.pop_back();
        L.push_back(std::move(v));
    }
    L = detail::hnf_rows(std::move(L));

    std::vector<long double> thetas;
    for (const auto& p : gens) thetas.push_back(p.theta);
    for (const auto& row : L) {
        std::vector<std::int64_t> k;
        for (const auto& v : row) k.push_back(v.convert_to<std::int64_t>());
        out.relation_basis.push_back(with_k0(k, thetas));
    }

    const auto snf = detail::smith_form(L, m);
    const std::size_t ell = snf.diag.size();
    std::vector<std::int64_t> torsion;
    std::vector<std::size_t> torsion_index;
    for (std::size_t i = 0; i < ell; ++i) {
        if (snf.diag[i] > 1) {
            torsion.push_back(snf.diag[i].convert_to<std::int64_t>());
            torsion_index.push_back(i);
        }
    }
    out.group = GroupDescriptor::make(static_cast<int>(m - ell), torsion);

    // Image of alpha: beta_i = sum_j Qinv_ij theta_j.
    for (std::size_t i = ell; i < m; ++i) {
        long double v = 0;
        for (std::size_t j = 0; j < m; ++j) v += snf.Qinv[i][j].convert_to<long double>() * thetas[j];
        out.alpha_image.torus.push_back(TorusCoord::approx(wrap01(static_cast<double>(frac_ld(v)))));
    }
    for (std::size_t t = 0; t < torsion_index.size(); ++t) {
        const std::size_t i = torsion_index[t];
        Rational rat = 0;
        for (std::size_t k = 0; k < s; ++k) {
            Rational coeff = 0;
            for (std::size_t j = 0; j < m; ++j) coeff += Rational(snf.Qinv[i][j]) * reps[j].q[k];
            if (coeff != 0) {
                throw ToleranceConflict("torsion coordinate " + std::to_string(t) + " has an irrational component");
            }
        }
        for (std::size_t j = 0; j < m; ++j) rat += Rational(snf.Qinv[i][j]) * reps[j].r;
        const Rational scaled_rat = frac_rational(rat) * Rational(snf.diag[i]);
        if (boost::multiprecision::denominator(scaled_rat) != 1) {
            throw ToleranceConflict("torsion coordinate " + std::to_string(t) + " is not of order " + snf.diag[i].str());
        }
        out.alpha_image.torsion.push_back(BigInt(boost::multiprecision::numerator(scaled_rat)).convert_to<std::int64_t>());
    }

    for (std::size_t j = 0; j < m; ++j) {
        Character chi;
        for (std::size_t i = ell; i < m; ++i) chi.torus_freqs.push_back(snf.Q[j][i].convert_to<std::int64_t>());
        for (std::size_t t = 0; t < torsion_index.size(); ++t) {
            const std::int64_t d = torsion[t];
            BigInt c = snf.Q[j][torsion_index[t]] % d;
            if (c < 0) c += d;
            chi.torsion_freqs.push_back(c.convert_to<std::int64_t>());
        }
        out.assignments.push_back({gens[j], std::move(chi)});
    }
    Character trivial;
    trivial.torus_freqs.assign(m - ell, 0);
    trivial.torsion_freqs.assign(torsion.size(), 0);
    for (const auto& p : zero) out.assignments.push_back({p, trivial});

    if (out.group.is_trivial()) {
        out.warnings.emplace_back("stabilizer hypothesis likely violated: reconstructed group is trivial");
    }
    return out;
}

std::vector<SpectrumPeak> refined_spectrum(const ReturnSet& R, const SpectralPipelineOptions& options) {
    const auto coarse = scan_spectrum(R, options.scan);
    std::vector<SpectrumPeak> out;
    for (const auto& c : coarse) {
        if (c.theta > 0.5) continue;
        RefineOptions ro;
        ro.N = c.N_used;
        auto p = refine_peak(R, c.theta, options.refine_tol, ro);
        const double tol = 1.0 / (2.0 * static_cast<double>(c.N_used));
        // |A| is symmetric about 0 and 1/2; land exactly on them when they are the maximum.
        for (double fixed : {0.0, 0.5}) {
            if (p.theta == fixed || circle_distance(p.theta, fixed) >= tol) continue;
            const auto a = cesaro_average(R, fixed, p.N_used);
            if (std::abs(a) >= std::abs(p.amplitude) - 1e-12) {
                p.theta = fixed;
                p.amplitude = a;
                p.convergence_gap = p.N_used >= 2 ? std::abs(a - cesaro_average(R, fixed, p.N_used / 2)) : 0.0;
            }
        }
        const bool dup = std::any_of(out.begin(), out.end(), [&](const SpectrumPeak& q) {
            return circle_distance(q.theta, p.theta) < tol || circle_distance(q.theta, 1.0 - p.theta) < tol;
        });
        if (dup) continue;
        out.push_back(p);
        if (circle_distance(p.theta, 0.0) >= tol && circle_distance(p.theta, 0.5) >= tol) {
            SpectrumPeak mirror = p;
            mirror.theta = wrap01(1.0 - p.theta);
            mirror.amplitude = std::conj(p.amplitude);
            out.push_back(mirror);
        }
    }
    std::sort(out.begin(), out.end(), [](const SpectrumPeak& a, const SpectrumPeak& b) { return a.theta < b.theta; });
    return out;
}

// ---------------------------------------------------------------------------
// Comparison

const char* to_string(CompareKind k) {
    switch (k) {
        case CompareKind::ConsistentIsomorphic:
            return "consistent-isomorphic";
        case CompareKind::Distinguished:
            return "distinguished";
        case CompareKind::Inconclusive:
            return "inconclusive";
    }
    return "?";
}

std::string CompareVerdict::to_string() const {
    std::string s = kronrec::to_string(kind);
    if (kind == CompareKind::Distinguished) {
        s += " at theta=" + format_double(theta) + " (|a1|=" + format_double(std::abs(amplitude1)) +
             ", |a2|=" + format_double(std::abs(amplitude2)) + ")";
    }
    return s;
}

CompareVerdict compare_systems(const ReturnSet& R1, const ReturnSet& R2, double tol,
                               const SpectralPipelineOptions& options) {
    if (!(R1.window() == R2.window())) throw ShapeError("compare_systems needs equal windows");
    CompareVerdict v;
    if (R1.bits() == R2.bits()) {
        v.kind = CompareKind::ConsistentIsomorphic;
        return v;
    }
    auto s1 = refined_spectrum(R1, options);
    auto s2 = refined_spectrum(R2, options);
    std::vector<SpectrumPeak> all = s1;
    all.insert(all.end(), s2.begin(), s2.end());
    std::sort(all.begin(), all.end(), enumeration_before);
    std::vector<double> seen;
    for (const auto& p : all) {
        const double sep = 1.0 / (2.0 * static_cast<double>(p.N_used));
        if (std::any_of(seen.begin(), seen.end(), [&](double t) { return circle_distance(t, p.theta) < sep; })) continue;
        seen.push_back(p.theta);
        const auto a1 = cesaro_average(R1, p.theta, p.N_used);
        const auto a2 = cesaro_average(R2, p.theta, p.N_used);
        if (std::abs(a1 - a2) > tol) {
            v.kind = CompareKind::Distinguished;
            v.theta = p.theta;
            v.amplitude1 = a1;
            v.amplitude2 = a2;
            return v;
        }
    }
    v.kind = CompareKind::Inconclusive;
    return v;
}

// ---------------------------------------------------------------------------
// Output

void write_spectrum_jsonl(std::ostream& out, const std::vector<SpectrumPeak>& peaks) {
    for (const auto& p : peaks) {
        nlohmann::ordered_json j;
        j["theta"] = p.theta;
        j["re"] = p.amplitude.real();
        j["im"] = p.amplitude.imag();
        j["gap"] = p.convergence_gap;
        j["N"] = p.N_used;
        if (p.flagged) j["flagged"] = true;
        out << j.dump() << '\n';
    }
}

std::string reconstruction_json(const ReconstructionResult& r) {
    nlohmann::ordered_json j;
    j["group"] = r.group.to_string();
    j["rank"] = r.group.torus_rank;
    j["torsion"] = r.group.torsion_orders;
    nlohmann::ordered_json alpha;
    alpha["torus"] = nlohmann::ordered_json::array();
    for (const auto& c : r.alpha_image.torus) alpha["torus"].push_back(c.value());
    alpha["torsion"] = r.alpha_image.torsion;
    j["alpha_image"] = alpha;
    auto assignments = nlohmann::ordered_json::array();
    for (const auto& a : r.assignments) {
        nlohmann::ordered_json e;
        e["theta"] = a.peak.theta;
        e["re"] = a.peak.amplitude.real();
        e["im"] = a.peak.amplitude.imag();
        e["torus_freqs"] = a.character.torus_freqs;
        e["torsion_freqs"] = a.character.torsion_freqs;
        assignments.push_back(e);
    }
    j["assignments"] = assignments;
    j["relations"] = r.relation_basis;
    j["height"] = r.height;
    j["top_m"] = r.top_m;
    j["tolerance"] = r.tolerance;
    j["warnings"] = r.warnings;
    return j.dump(2);
}

void write_grid_csv(std::ostream& out, const SpectrumGrid& grid, std::size_t stride) {
    stride = std::max<std::size_t>(1, stride);
    out << "theta,abs_amplitude\n";
    for (std::size_t j = 0; j < grid.grid_size(); j += stride) {
        out << format_double(grid.theta(j)) << ',' << format_double(std::abs(grid.at(j))) << '\n';
    }
}

}  // namespace kronrec
