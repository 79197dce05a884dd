#include "kronrec/open_set.hpp"

#include "kronrec/errors.hpp"
#include "open_set_detail.hpp"
#include "text_util.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace kronrec {

namespace {

const QuadraticNumber kOne = QuadraticNumber::from_integer(1);
const QuadraticNumber kHalf = QuadraticNumber::from_rational(Rational(1, 2));

std::int64_t mod_floor(std::int64_t a, std::int64_t m) {
    const std::int64_t r = a % m;
    return r < 0 ? r + m : r;
}

}  // namespace

// ---------------------------------------------------------------------------
// Arc

Arc Arc::make(const QuadraticNumber& lo, const QuadraticNumber& hi) {
    const QuadraticNumber width = hi - lo;
    if (width.sign() <= 0 || width > kOne) {
        throw ShapeError("arc (" + lo.to_string() + ", " + hi.to_string() + ") must have length in (0, 1]");
    }
    if (width == kOne) {
        return whole();
    }
    Arc a;
    a.lo_ = lo.frac();
    a.width_ = width;
    a.lo_d_ = wrap01(a.lo_.to_double());
    a.width_d_ = width.to_double();
    a.full_ = false;
    return a;
}

Arc Arc::whole() { return Arc{}; }

bool Arc::contains(const QuadraticNumber& x) const {
    if (full_) return true;
    const QuadraticNumber d = (x - lo_).frac();
    return d.sign() > 0 && d < width_;
}

bool Arc::on_boundary(const QuadraticNumber& x) const {
    if (full_) return false;
    const QuadraticNumber d = (x - lo_).frac();
    return d.is_zero() || d == width_;
}

std::string Arc::to_string() const {
    if (full_) return "T";
    return "(" + lo_.to_string() + "," + hi().to_string() + ")";
}

const char* to_string(Membership m) {
    switch (m) {
        case Membership::In:
            return "in";
        case Membership::Out:
            return "out";
        case Membership::BoundaryAmbiguous:
            return "boundary-ambiguous";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// OpenSet

OpenSet::OpenSet(GroupDescriptor group, std::vector<Box> boxes) : group_(std::move(group)), boxes_(std::move(boxes)) {
    const auto r = static_cast<std::size_t>(group_.torus_rank);
    for (auto& box : boxes_) {
        if (box.arcs.size() != r || box.residues.size() != group_.torsion_orders.size()) {
            throw ShapeError("box shape does not match group " + group_.to_string());
        }
        for (std::size_t i = 0; i < box.residues.size(); ++i) {
            auto& res = box.residues[i];
            for (auto& v : res) v = mod_floor(v, group_.torsion_orders[i]);
            std::sort(res.begin(), res.end());
            res.erase(std::unique(res.begin(), res.end()), res.end());
        }
    }
    // A box with an empty residue set contributes nothing.
    std::erase_if(boxes_, [](const Box& b) {
        return std::any_of(b.residues.begin(), b.residues.end(), [](const auto& v) { return v.empty(); });
    });
}

OpenSet OpenSet::whole(const GroupDescriptor& group) {
    Box b;
    b.arcs.assign(static_cast<std::size_t>(group.torus_rank), Arc::whole());
    for (auto m : group.torsion_orders) {
        std::vector<std::int64_t> all(static_cast<std::size_t>(m));
        std::iota(all.begin(), all.end(), 0);
        b.residues.push_back(std::move(all));
    }
    return OpenSet(group, {b});
}

OpenSet OpenSet::translated(const GroupPoint& shift) const {
    validate_point(group_, shift);
    std::vector<Box> out = boxes_;
    for (auto& box : out) {
        for (std::size_t j = 0; j < box.arcs.size(); ++j) {
            if (box.arcs[j].is_full()) continue;
            if (!shift.torus[j].is_exact()) {
                throw ShapeError("translating an open set requires exact torus coordinates");
            }
            const auto& s = *shift.torus[j].exact_value();
            box.arcs[j] = Arc::make(box.arcs[j].lo() + s, box.arcs[j].hi() + s);
        }
        for (std::size_t i = 0; i < box.residues.size(); ++i) {
            for (auto& v : box.residues[i]) v += shift.torsion[i];
        }
    }
    return OpenSet(group_, std::move(out));
}

std::string OpenSet::to_string() const {
    if (boxes_.empty()) return "empty";
    std::string out;
    for (std::size_t b = 0; b < boxes_.size(); ++b) {
        if (b) out += " | ";
        std::vector<std::string> factors;
        for (const auto& a : boxes_[b].arcs) factors.push_back(a.to_string());
        for (std::size_t i = 0; i < boxes_[b].residues.size(); ++i) {
            const auto& res = boxes_[b].residues[i];
            if (static_cast<std::int64_t>(res.size()) == group_.torsion_orders[i]) {
                factors.emplace_back("*");
                continue;
            }
            std::string s = "{";
            for (std::size_t k = 0; k < res.size(); ++k) {
                if (k) s += ",";
                s += std::to_string(res[k]);
            }
            factors.push_back(s + "}");
        }
        if (factors.empty()) factors.emplace_back("*");
        for (std::size_t f = 0; f < factors.size(); ++f) {
            if (f) out += " x ";
            out += factors[f];
        }
    }
    return out;
}

OpenSet parse_open_set(const GroupDescriptor& K, std::string_view text) {
    const std::string body = detail::trim(text);
    if (body == "empty") {
        return OpenSet(K, {});
    }
    if (body == "K" || body == "all") {
        return OpenSet::whole(K);
    }
    const auto r = static_cast<std::size_t>(K.torus_rank);
    std::vector<Box> boxes;
    for (const auto& box_text : detail::split_top_level(body, '|')) {
        auto factors = detail::split_top_level(box_text, 'x');
        // The trivial group has a single point and no coordinates.
        if (K.dimension() == 0 && factors.size() == 1 && detail::trim(factors[0]) == "*") {
            factors.clear();
        }
        if (factors.size() != K.dimension()) {
            throw ShapeError("box '" + detail::trim(box_text) + "' has " + std::to_string(factors.size()) +
                             " factors, group " + K.to_string() + " has " + std::to_string(K.dimension()));
        }
        Box box;
        for (std::size_t i = 0; i < factors.size(); ++i) {
            const std::string f = detail::trim(factors[i]);
            if (i < r) {
                if (f == "T") {
                    box.arcs.push_back(Arc::whole());
                    continue;
                }
                if (f.size() < 2 || f.front() != '(' || f.back() != ')') {
                    throw ShapeError("expected arc '(lo,hi)' or 'T', got '" + f + "'");
                }
                const auto ends = detail::split_top_level(f.substr(1, f.size() - 2), ',');
                if (ends.size() != 2) {
                    throw ShapeError("arc '" + f + "' needs two endpoints");
                }
                box.arcs.push_back(Arc::make(parse_quadratic(ends[0]), parse_quadratic(ends[1])));
            } else {
                const std::int64_t m = K.torsion_orders[i - r];
                std::vector<std::int64_t> res;
                if (f == "*") {
                    res.resize(static_cast<std::size_t>(m));
                    std::iota(res.begin(), res.end(), 0);
                } else {
                    if (f.size() < 2 || f.front() != '{' || f.back() != '}') {
                        throw ShapeError("expected residue set '{a,b}' or '*', got '" + f + "'");
                    }
                    const std::string inner = detail::trim(f.substr(1, f.size() - 2));
                    if (!inner.empty()) {
                        for (const auto& item : detail::split(inner, ',')) res.push_back(std::stoll(detail::trim(item)));
                    }
                }
                box.residues.push_back(std::move(res));
            }
        }
        boxes.push_back(std::move(box));
    }
    return OpenSet(K, std::move(boxes));
}

// ---------------------------------------------------------------------------
// Membership

namespace detail {

std::optional<bool> filtered_membership(const OpenSet& U, const double* torus, const std::int64_t* torsion,
                                        double bound) {
    bool undecided = false;
    for (const auto& box : U.boxes()) {
        bool residues_ok = true;
        for (std::size_t i = 0; i < box.residues.size(); ++i) {
            if (!std::binary_search(box.residues[i].begin(), box.residues[i].end(), torsion[i])) {
                residues_ok = false;
                break;
            }
        }
        if (!residues_ok) continue;
        bool inside = true;
        bool unsure = false;
        for (std::size_t j = 0; j < box.arcs.size(); ++j) {
            const Arc& a = box.arcs[j];
            if (a.is_full()) continue;
            const double d = wrap01(torus[j] - a.lo_value());
            const double w = a.width_value();
            const double dist = std::min({d, 1.0 - d, std::abs(d - w)});
            if (dist <= bound) {
                unsure = true;
            } else if (!(d < w)) {
                inside = false;
                break;
            }
        }
        if (!inside) continue;
        if (!unsure) return true;
        undecided = true;
    }
    if (undecided) return std::nullopt;
    return false;
}

bool exact_membership(const OpenSet& U, const std::vector<QuadraticNumber>& torus, const std::int64_t* torsion) {
    for (const auto& box : U.boxes()) {
        bool in = true;
        for (std::size_t i = 0; i < box.residues.size() && in; ++i) {
            in = std::binary_search(box.residues[i].begin(), box.residues[i].end(), torsion[i]);
        }
        for (std::size_t j = 0; j < box.arcs.size() && in; ++j) {
            in = box.arcs[j].contains(torus[j]);
        }
        if (in) return true;
    }
    return false;
}

}  // namespace detail

Membership membership(const OpenSet& U, const GroupPoint& x, double guard) {
    validate_point(U.group(), x);
    if (x.is_exact()) {
        try {
            std::vector<QuadraticNumber> coords;
            coords.reserve(x.torus.size());
            for (const auto& c : x.torus) coords.push_back(*c.exact_value());
            return detail::exact_membership(U, coords, x.torsion.data()) ? Membership::In : Membership::Out;
        } catch (const std::domain_error&) {
            // mixed radicands: fall through to the floating path
        }
    }
    std::vector<double> values;
    values.reserve(x.torus.size());
    for (const auto& c : x.torus) values.push_back(c.value());
    const auto decided = detail::filtered_membership(U, values.data(), x.torsion.data(), guard);
    if (!decided) return Membership::BoundaryAmbiguous;
    return *decided ? Membership::In : Membership::Out;
}

// ---------------------------------------------------------------------------
// Cell decomposition

namespace {

struct CoordCells {
    std::vector<QuadraticNumber> mids;
    std::vector<QuadraticNumber> lengths;
};

void sort_unique(std::vector<QuadraticNumber>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
}

CoordCells cells_from_endpoints(std::vector<QuadraticNumber> pts) {
    sort_unique(pts);
    CoordCells c;
    if (pts.empty()) {
        c.mids.push_back(kHalf);
        c.lengths.push_back(kOne);
        return c;
    }
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const QuadraticNumber a = pts[i];
        const QuadraticNumber b = i + 1 < pts.size() ? pts[i + 1] : pts[0] + kOne;
        c.mids.push_back(((a + b) * Rational(1, 2)).frac());
        c.lengths.push_back(b - a);
    }
    return c;
}

std::vector<QuadraticNumber> endpoints_of(const OpenSet& U, std::size_t j) {
    std::vector<QuadraticNumber> pts;
    for (const auto& box : U.boxes()) {
        const Arc& a = box.arcs[j];
        if (a.is_full()) continue;
        pts.push_back(a.lo());
        pts.push_back(a.hi().frac());
    }
    sort_unique(pts);
    return pts;
}

/// Mixed-radix iteration over the cells of every coordinate.
template <typename Fn>
void for_each_cell(const std::vector<std::size_t>& extents, Fn&& fn) {
    std::vector<std::size_t> idx(extents.size(), 0);
    for (auto e : extents) {
        if (e == 0) return;
    }
    for (;;) {
        fn(idx);
        std::size_t pos = 0;
        while (pos < idx.size()) {
            if (++idx[pos] < extents[pos]) break;
            idx[pos] = 0;
            ++pos;
        }
        if (pos == idx.size()) return;
    }
}

bool in_set_at(const OpenSet& U, const std::vector<CoordCells>& torus_cells, const std::vector<std::size_t>& idx,
               const std::vector<QuadraticNumber>* shift_torus, const std::vector<std::int64_t>* shift_torsion) {
    const std::size_t r = torus_cells.size();
    std::vector<QuadraticNumber> p(r);
    for (std::size_t j = 0; j < r; ++j) {
        p[j] = torus_cells[j].mids[idx[j]];
        if (shift_torus) p[j] = (p[j] - (*shift_torus)[j]).frac();
    }
    std::vector<std::int64_t> t(idx.size() - r);
    for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = static_cast<std::int64_t>(idx[r + i]);
        if (shift_torsion) t[i] = mod_floor(t[i] - (*shift_torsion)[i], U.group().torsion_orders[i]);
    }
    return detail::exact_membership(U, p, t.data());
}

}  // namespace

std::string StabilizerReport::to_string() const {
    std::string out = "{";
    for (std::size_t i = 0; i < shifts.size(); ++i) {
        if (i) out += ", ";
        out += point_to_string(shifts[i]);
    }
    out += "}";
    for (std::size_t j = 0; j < full_torus_directions.size(); ++j) {
        if (full_torus_directions[j]) out += " + full circle in torus coordinate " + std::to_string(j);
    }
    out += is_trivial ? " (trivial)" : " (nontrivial)";
    return out;
}

StabilizerReport closure_stabilizer(const OpenSet& U) {
    if (U.empty()) {
        throw Error("closure_stabilizer: the open set is empty");
    }
    const GroupDescriptor& K = U.group();
    const auto r = static_cast<std::size_t>(K.torus_rank);
    const std::size_t t = K.torsion_orders.size();

    std::vector<std::vector<QuadraticNumber>> endpoints(r);
    std::vector<CoordCells> cells(r);
    std::vector<std::size_t> extents;
    for (std::size_t j = 0; j < r; ++j) {
        endpoints[j] = endpoints_of(U, j);
        cells[j] = cells_from_endpoints(endpoints[j]);
        extents.push_back(cells[j].mids.size());
    }
    for (auto m : K.torsion_orders) extents.push_back(static_cast<std::size_t>(m));

    // Membership of every cell of the common refinement.
    std::vector<std::size_t> stride(extents.size(), 1);
    for (std::size_t i = 1; i < extents.size(); ++i) stride[i] = stride[i - 1] * extents[i - 1];
    const std::size_t total = extents.empty() ? 1 : stride.back() * extents.back();
    std::vector<char> member(total, 0);
    for_each_cell(extents, [&](const std::vector<std::size_t>& idx) {
        std::size_t flat = 0;
        for (std::size_t i = 0; i < idx.size(); ++i) flat += idx[i] * stride[i];
        member[flat] = in_set_at(U, cells, idx, nullptr, nullptr) ? 1 : 0;
    });

    StabilizerReport report;
    report.full_torus_directions.assign(r, false);
    for (std::size_t j = 0; j < r; ++j) {
        bool invariant = true;
        for_each_cell(extents, [&](const std::vector<std::size_t>& idx) {
            if (!invariant) return;
            std::size_t flat = 0;
            for (std::size_t i = 0; i < idx.size(); ++i) flat += idx[i] * stride[i];
            const std::size_t next_j = (idx[j] + 1) % extents[j];
            const std::size_t flat_next = flat + (next_j - idx[j]) * stride[j];
            if (member[flat] != member[flat_next]) invariant = false;
        });
        report.full_torus_directions[j] = invariant;
    }

    // Candidate shifts: endpoint differences on non-full torus coordinates,
    // every residue on torsion coordinates.
    std::vector<std::vector<QuadraticNumber>> torus_candidates(r);
    for (std::size_t j = 0; j < r; ++j) {
        if (report.full_torus_directions[j]) {
            torus_candidates[j] = {QuadraticNumber{}};
            continue;
        }
        for (const auto& a : endpoints[j]) {
            for (const auto& b : endpoints[j]) torus_candidates[j].push_back((a - b).frac());
        }
        sort_unique(torus_candidates[j]);
    }
    std::vector<std::size_t> cand_extents;
    for (std::size_t j = 0; j < r; ++j) cand_extents.push_back(torus_candidates[j].size());
    for (auto m : K.torsion_orders) cand_extents.push_back(static_cast<std::size_t>(m));

    for_each_cell(cand_extents, [&](const std::vector<std::size_t>& cidx) {
        std::vector<QuadraticNumber> s(r);
        std::vector<std::int64_t> st(t);
        for (std::size_t j = 0; j < r; ++j) s[j] = torus_candidates[j][cidx[j]];
        for (std::size_t i = 0; i < t; ++i) st[i] = static_cast<std::int64_t>(cidx[r + i]);

        // Refine each non-full coordinate by the shifted endpoints.
        std::vector<CoordCells> refined(r);
        std::vector<std::size_t> rext;
        for (std::size_t j = 0; j < r; ++j) {
            if (report.full_torus_directions[j]) {
                refined[j] = cells[j];
            } else {
                auto pts = endpoints[j];
                for (const auto& e : endpoints[j]) pts.push_back((e + s[j]).frac());
                refined[j] = cells_from_endpoints(std::move(pts));
            }
            rext.push_back(refined[j].mids.size());
        }
        for (auto m : K.torsion_orders) rext.push_back(static_cast<std::size_t>(m));

        bool ok = true;
        for_each_cell(rext, [&](const std::vector<std::size_t>& idx) {
            if (!ok) return;
            if (in_set_at(U, refined, idx, nullptr, nullptr) != in_set_at(U, refined, idx, &s, &st)) ok = false;
        });
        if (!ok) return;
        GroupPoint p;
        for (const auto& v : s) p.torus.push_back(TorusCoord::exact(v));
        p.torsion = st;
        report.shifts.push_back(std::move(p));
    });

    std::sort(report.shifts.begin(), report.shifts.end(), [](const GroupPoint& a, const GroupPoint& b) {
        for (std::size_t j = 0; j < a.torus.size(); ++j) {
            const auto& x = *a.torus[j].exact_value();
            const auto& y = *b.torus[j].exact_value();
            if (x != y) return x < y;
        }
        return a.torsion < b.torsion;
    });
    report.is_trivial = report.shifts.size() == 1 &&
                        std::none_of(report.full_torus_directions.begin(), report.full_torus_directions.end(),
                                     [](bool b) { return b; });
    return report;
}

double jordan_measure(const OpenSet& U) {
    const GroupDescriptor& K = U.group();
    const auto r = static_cast<std::size_t>(K.torus_rank);
    if (U.empty()) return 0.0;
    std::vector<CoordCells> cells(r);
    std::vector<std::size_t> extents;
    for (std::size_t j = 0; j < r; ++j) {
        cells[j] = cells_from_endpoints(endpoints_of(U, j));
        extents.push_back(cells[j].mids.size());
    }
    for (auto m : K.torsion_orders) extents.push_back(static_cast<std::size_t>(m));
    const double torsion_cell = 1.0 / static_cast<double>(K.torsion_size());

    // Neumaier summation of cell volumes.
    double sum = 0.0;
    double comp = 0.0;
    for_each_cell(extents, [&](const std::vector<std::size_t>& idx) {
        if (!in_set_at(U, cells, idx, nullptr, nullptr)) return;
        double vol = torsion_cell;
        for (std::size_t j = 0; j < r; ++j) vol *= cells[j].lengths[idx[j]].to_double();
        const double tsum = sum + vol;
        comp += std::abs(sum) >= std::abs(vol) ? (sum - tsum) + vol : (vol - tsum) + sum;
        sum = tsum;
    });
    return sum + comp;
}

}  // namespace kronrec
