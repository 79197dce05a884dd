#include "kronrec/gset.hpp"

#include "kronrec/errors.hpp"
#include "text_util.hpp"

#include "json.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <limits>
#include <ostream>
#include <random>
#include <set>
#include <thread>

namespace kronrec::gset {

namespace {

constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();
constexpr std::size_t kTableLimit = 512;

void require_transitive(const PermAction& A) {
    if (!A.transitive()) throw ShapeError("action is not transitive");
}

void require_points(const PermAction& A, const PointSet& U) {
    if (U.size() != A.degree()) {
        throw ShapeError("subset has " + std::to_string(U.size()) + " points, action has degree " +
                         std::to_string(A.degree()));
    }
}

/// Groups keys by first appearance.
BlockSystem partition_by_key(const std::vector<boost::dynamic_bitset<>>& keys) {
    BlockSystem B;
    B.block_of.resize(keys.size());
    std::map<boost::dynamic_bitset<>, std::uint32_t> ids;
    for (std::size_t x = 0; x < keys.size(); ++x) {
        auto [it, fresh] = ids.emplace(keys[x], static_cast<std::uint32_t>(ids.size()));
        B.block_of[x] = it->second;
    }
    B.count = ids.size();
    return B;
}

bool trivial_setwise_stabilizer(const PermAction& A, const PointSet& U) {
    for (std::uint32_t g = 1; g < A.group().order(); ++g) {
        if (A.translate(g, U) == U) return false;
    }
    return true;
}

std::size_t parse_index(const std::string& s, const std::string& context) {
    if (s.empty() || !std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); })) {
        throw ShapeError("bad number '" + s + "' in " + context);
    }
    return std::stoul(s);
}

}  // namespace

// ---------------------------------------------------------------------------
// Permutations

Perm compose(const Perm& p, const Perm& q) {
    Perm r(q.size());
    for (std::size_t x = 0; x < q.size(); ++x) r[x] = p[q[x]];
    return r;
}

Perm inverse(const Perm& p) {
    Perm r(p.size());
    for (std::size_t x = 0; x < p.size(); ++x) r[p[x]] = static_cast<std::uint32_t>(x);
    return r;
}

Perm identity_perm(std::size_t n) {
    Perm r(n);
    for (std::size_t x = 0; x < n; ++x) r[x] = static_cast<std::uint32_t>(x);
    return r;
}

bool is_permutation(const Perm& p) {
    std::vector<bool> seen(p.size(), false);
    for (auto y : p) {
        if (y >= p.size() || seen[y]) return false;
        seen[y] = true;
    }
    return true;
}

Perm parse_cycles(const std::string& text, std::size_t degree) {
    Perm p = identity_perm(degree);
    std::vector<bool> used(degree, false);
    const std::string s = detail::trim(text);
    std::size_t i = 0;
    if (s.empty()) throw ShapeError("empty permutation");
    while (i < s.size()) {
        if (std::isspace(static_cast<unsigned char>(s[i]))) {
            ++i;
            continue;
        }
        if (s[i] != '(') throw ShapeError("expected '(' in permutation '" + s + "'");
        const auto close = s.find(')', i);
        if (close == std::string::npos) throw ShapeError("unclosed cycle in '" + s + "'");
        std::string body = s.substr(i + 1, close - i - 1);
        std::replace(body.begin(), body.end(), ',', ' ');
        std::vector<std::uint32_t> cycle;
        std::size_t pos = 0;
        while (pos < body.size()) {
            while (pos < body.size() && std::isspace(static_cast<unsigned char>(body[pos]))) ++pos;
            std::size_t end = pos;
            while (end < body.size() && !std::isspace(static_cast<unsigned char>(body[end]))) ++end;
            if (end > pos) {
                const std::size_t x = parse_index(body.substr(pos, end - pos), "'" + s + "'");
                if (x >= degree) throw ShapeError("point " + std::to_string(x) + " outside degree " + std::to_string(degree));
                if (used[x]) throw ShapeError("point " + std::to_string(x) + " repeated in '" + s + "'");
                used[x] = true;
                cycle.push_back(static_cast<std::uint32_t>(x));
            }
            pos = end;
        }
        for (std::size_t k = 0; k < cycle.size(); ++k) p[cycle[k]] = cycle[(k + 1) % cycle.size()];
        i = close + 1;
    }
    return p;
}

std::string to_cycles(const Perm& p) {
    std::string out;
    std::vector<bool> seen(p.size(), false);
    for (std::uint32_t x = 0; x < p.size(); ++x) {
        if (seen[x] || p[x] == x) continue;
        out += '(';
        for (std::uint32_t y = x; !seen[y]; y = p[y]) {
            seen[y] = true;
            if (y != x) out += ' ';
            out += std::to_string(y);
        }
        out += ')';
    }
    return out.empty() ? "()" : out;
}

PointSet point_set(std::size_t n, const std::vector<std::uint32_t>& points) {
    PointSet U(n);
    for (auto x : points) {
        if (x >= n) throw ShapeError("point " + std::to_string(x) + " outside degree " + std::to_string(n));
        U.set(x);
    }
    return U;
}

std::vector<std::uint32_t> members(const boost::dynamic_bitset<>& s) {
    std::vector<std::uint32_t> out;
    for (auto i = s.find_first(); i != boost::dynamic_bitset<>::npos; i = s.find_next(i)) {
        out.push_back(static_cast<std::uint32_t>(i));
    }
    return out;
}

// ---------------------------------------------------------------------------
// FiniteGroup

std::shared_ptr<const FiniteGroup> FiniteGroup::generate(std::vector<Perm> generators, std::size_t cap,
                                                         std::string name) {
    if (generators.empty()) throw ShapeError("a group needs at least one generator");
    const std::size_t n = generators[0].size();
    if (n == 0) throw ShapeError("permutations of degree 0");
    for (const auto& g : generators) {
        if (g.size() != n) throw ShapeError("generators have different degrees");
        if (!is_permutation(g)) throw ShapeError("generator is not a permutation");
    }
    std::shared_ptr<FiniteGroup> G(new FiniteGroup());
    G->name_ = std::move(name);
    G->degree_ = n;
    G->generators_ = std::move(generators);
    G->elements_.push_back(identity_perm(n));
    G->index_.emplace(G->elements_[0], 0);
    G->parent_.push_back(0);
    G->parent_gen_.push_back(0);
    for (std::size_t i = 0; i < G->elements_.size(); ++i) {
        for (std::size_t k = 0; k < G->generators_.size(); ++k) {
            Perm p = compose(G->generators_[k], G->elements_[i]);
            if (G->index_.count(p)) continue;
            if (G->elements_.size() >= cap) {
                throw CapExceeded("group order exceeds cap " + std::to_string(cap));
            }
            G->index_.emplace(p, static_cast<std::uint32_t>(G->elements_.size()));
            G->elements_.push_back(std::move(p));
            G->parent_.push_back(static_cast<std::uint32_t>(i));
            G->parent_gen_.push_back(static_cast<std::uint32_t>(k));
        }
    }
    for (const auto& g : G->generators_) G->generator_index_.push_back(G->index_.at(g));
    const std::size_t order = G->elements_.size();
    G->inverse_.resize(order);
    for (std::size_t i = 0; i < order; ++i) G->inverse_[i] = G->index_.at(gset::inverse(G->elements_[i]));
    if (order <= kTableLimit) {
        G->table_.resize(order * order);
        for (std::size_t a = 0; a < order; ++a) {
            for (std::size_t b = 0; b < order; ++b) {
                G->table_[a * order + b] = G->index_.at(compose(G->elements_[a], G->elements_[b]));
            }
        }
    }
    return G;
}

std::uint32_t FiniteGroup::multiply(std::uint32_t a, std::uint32_t b) const {
    if (!table_.empty()) return table_[a * elements_.size() + b];
    return index_.at(compose(elements_[a], elements_[b]));
}

std::optional<std::uint32_t> FiniteGroup::index_of(const Perm& p) const {
    const auto it = index_.find(p);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

ElementSet FiniteGroup::closure(const std::vector<std::uint32_t>& gens) const {
    ElementSet H(order());
    std::vector<std::uint32_t> list{0};
    H.set(0);
    for (std::size_t i = 0; i < list.size(); ++i) {
        for (auto s : gens) {
            const auto e = multiply(s, list[i]);
            if (!H.test(e)) {
                H.set(e);
                list.push_back(e);
            }
        }
    }
    return H;
}

bool FiniteGroup::same_as(const FiniteGroup& other) const {
    return this == &other || (generators_ == other.generators_ && elements_ == other.elements_);
}

// ---------------------------------------------------------------------------
// PermAction

PermAction::PermAction(GroupPtr group, const std::vector<Perm>& generator_images) : group_(std::move(group)) {
    if (!group_) throw ShapeError("null group");
    const auto& G = *group_;
    if (generator_images.size() != G.generators().size()) {
        throw ShapeError("expected " + std::to_string(G.generators().size()) + " generator images");
    }
    degree_ = generator_images[0].size();
    if (degree_ == 0) throw ShapeError("action of degree 0");
    for (const auto& p : generator_images) {
        if (p.size() != degree_ || !is_permutation(p)) throw ShapeError("generator image is not a permutation");
    }
    images_.resize(G.order());
    images_[0] = identity_perm(degree_);
    for (std::uint32_t i = 1; i < G.order(); ++i) {
        images_[i] = compose(generator_images[G.parent_generator(i)], images_[G.parent(i)]);
    }
    for (std::uint32_t i = 0; i < G.order(); ++i) {
        for (std::size_t k = 0; k < generator_images.size(); ++k) {
            if (images_[G.multiply(G.generator_index(k), i)] != compose(generator_images[k], images_[i])) {
                throw ShapeError("generator images do not define an action");
            }
        }
    }
    std::vector<bool> seen(degree_, false);
    std::vector<std::uint32_t> queue{0};
    seen[0] = true;
    for (std::size_t i = 0; i < queue.size(); ++i) {
        for (const auto& p : generator_images) {
            const auto y = p[queue[i]];
            if (!seen[y]) {
                seen[y] = true;
                queue.push_back(y);
            }
        }
    }
    transitive_ = queue.size() == degree_;
}

PermAction PermAction::natural(GroupPtr group) {
    auto gens = group->generators();
    return PermAction(std::move(group), gens);
}

std::vector<Perm> PermAction::generator_images() const {
    std::vector<Perm> out;
    for (std::size_t k = 0; k < group_->generators().size(); ++k) out.push_back(images_[group_->generator_index(k)]);
    return out;
}

PointSet PermAction::translate(std::uint32_t g, const PointSet& U) const {
    PointSet out(degree_);
    const auto& p = images_[g];
    for (auto x = U.find_first(); x != PointSet::npos; x = U.find_next(x)) out.set(p[x]);
    return out;
}

ElementSet PermAction::point_stabilizer(std::uint32_t x) const {
    ElementSet S(group_->order());
    for (std::uint32_t g = 0; g < group_->order(); ++g) {
        if (images_[g][x] == x) S.set(g);
    }
    return S;
}

std::vector<std::uint32_t> PermAction::transversal(std::uint32_t base) const {
    std::vector<std::uint32_t> tr(degree_, kNone);
    tr[base] = 0;
    std::vector<std::uint32_t> queue{base};
    for (std::size_t i = 0; i < queue.size(); ++i) {
        for (std::size_t k = 0; k < group_->generators().size(); ++k) {
            const auto s = group_->generator_index(k);
            const auto y = images_[s][queue[i]];
            if (tr[y] == kNone) {
                tr[y] = group_->multiply(s, tr[queue[i]]);
                queue.push_back(y);
            }
        }
    }
    return tr;
}

PermAction enumerate_group(const std::vector<Perm>& generators, std::size_t cap) {
    return PermAction::natural(FiniteGroup::generate(generators, cap));
}

// ---------------------------------------------------------------------------
// Subgroups and coset actions

PermAction coset_action(const GroupPtr& group, const ElementSet& H) {
    const auto& G = *group;
    if (H.size() != G.order() || !H.test(0)) throw ShapeError("not a subgroup");
    const auto hs = members(H);
    for (auto a : hs) {
        for (auto b : hs) {
            if (!H.test(G.multiply(a, b))) throw ShapeError("not a subgroup");
        }
    }
    std::vector<std::uint32_t> coset_of(G.order(), kNone);
    std::vector<std::uint32_t> rep;
    for (std::uint32_t g = 0; g < G.order(); ++g) {
        if (coset_of[g] != kNone) continue;
        const auto c = static_cast<std::uint32_t>(rep.size());
        rep.push_back(g);
        for (auto h : hs) coset_of[G.multiply(g, h)] = c;
    }
    std::vector<Perm> images;
    for (std::size_t k = 0; k < G.generators().size(); ++k) {
        Perm p(rep.size());
        for (std::size_t c = 0; c < rep.size(); ++c) p[c] = coset_of[G.multiply(G.generator_index(k), rep[c])];
        images.push_back(std::move(p));
    }
    return PermAction(group, images);
}

std::vector<ElementSet> subgroups(const FiniteGroup& G, std::size_t cap) {
    if (G.order() > cap) {
        throw CapExceeded("subgroup enumeration is exhaustive only up to order " + std::to_string(cap) +
                          "; group has order " + std::to_string(G.order()));
    }
    // Every subgroup is generated by cyclic subgroups, so joining cyclic
    // subgroups onto known ones reaches all of them.
    std::vector<std::pair<std::uint32_t, ElementSet>> cyclic;
    std::set<ElementSet> cyclic_seen;
    for (std::uint32_t g = 1; g < G.order(); ++g) {
        auto C = G.closure({g});
        if (cyclic_seen.insert(C).second) cyclic.emplace_back(g, std::move(C));
    }
    struct Entry {
        ElementSet bits;
        std::vector<std::uint32_t> gens;
    };
    std::set<ElementSet> found;
    std::deque<Entry> queue;
    ElementSet trivial(G.order());
    trivial.set(0);
    found.insert(trivial);
    queue.push_back({trivial, {}});
    while (!queue.empty()) {
        const Entry H = std::move(queue.front());
        queue.pop_front();
        for (const auto& [c, C] : cyclic) {
            if (H.bits.test(c)) continue;
            auto gens = H.gens;
            gens.push_back(c);
            auto K = G.closure(gens);
            if (found.insert(K).second) queue.push_back({std::move(K), std::move(gens)});
        }
    }
    std::vector<ElementSet> out(found.begin(), found.end());
    std::stable_sort(out.begin(), out.end(),
                     [](const ElementSet& a, const ElementSet& b) { return a.count() > b.count(); });
    return out;
}

std::vector<TransitiveAction> transitive_actions(const GroupPtr& group, bool up_to_conjugacy,
                                                 std::size_t subgroup_cap) {
    const auto& G = *group;
    std::vector<TransitiveAction> out;
    std::set<ElementSet> classes;
    for (const auto& H : subgroups(G, subgroup_cap)) {
        if (up_to_conjugacy) {
            ElementSet key = H;
            const auto hs = members(H);
            for (std::uint32_t g = 1; g < G.order(); ++g) {
                ElementSet conj(G.order());
                for (auto h : hs) conj.set(G.multiply(G.multiply(g, h), G.inverse(g)));
                key = std::min(key, conj);
            }
            if (!classes.insert(key).second) continue;
        }
        out.push_back({coset_action(group, H), H});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Block systems

std::vector<std::uint32_t> setwise_stabilizer(const PermAction& A, const PointSet& U) {
    require_points(A, U);
    std::vector<std::uint32_t> out;
    for (std::uint32_t g = 0; g < A.group().order(); ++g) {
        if (A.translate(g, U) == U) out.push_back(g);
    }
    return out;
}

std::vector<std::vector<std::uint32_t>> BlockSystem::blocks() const {
    std::vector<std::vector<std::uint32_t>> out(count);
    for (std::uint32_t x = 0; x < block_of.size(); ++x) out[block_of[x]].push_back(x);
    return out;
}

bool is_block_system(const PermAction& A, const BlockSystem& B) {
    if (B.block_of.size() != A.degree() || B.count == 0) return false;
    std::vector<bool> used(B.count, false);
    for (auto b : B.block_of) {
        if (b >= B.count) return false;
        used[b] = true;
    }
    if (std::find(used.begin(), used.end(), false) != used.end()) return false;
    for (const auto& p : A.generator_images()) {
        std::vector<std::uint32_t> to(B.count, kNone);
        std::vector<bool> hit(B.count, false);
        for (std::uint32_t x = 0; x < A.degree(); ++x) {
            const auto from = B.block_of[x];
            const auto image = B.block_of[p[x]];
            if (to[from] == kNone) {
                if (hit[image]) return false;
                to[from] = image;
                hit[image] = true;
            } else if (to[from] != image) {
                return false;
            }
        }
    }
    return true;
}

bool is_union_of_blocks(const BlockSystem& B, const PointSet& U) {
    if (U.size() != B.block_of.size()) return false;
    std::vector<int> state(B.count, -1);
    for (std::size_t x = 0; x < U.size(); ++x) {
        const int in = U.test(x) ? 1 : 0;
        auto& s = state[B.block_of[x]];
        if (s == -1) {
            s = in;
        } else if (s != in) {
            return false;
        }
    }
    return true;
}

BlockSystem block_system_generated(const PermAction& A, const PointSet& U) {
    require_transitive(A);
    require_points(A, U);
    const auto& G = A.group();
    std::vector<boost::dynamic_bitset<>> profile(A.degree(), boost::dynamic_bitset<>(G.order()));
    for (std::uint32_t g = 0; g < G.order(); ++g) {
        // x in gU iff g^-1 x in U
        const auto& inv = A.image(G.inverse(g));
        for (std::uint32_t x = 0; x < A.degree(); ++x) {
            if (U.test(inv[x])) profile[x].set(g);
        }
    }
    return partition_by_key(profile);
}

bool is_simple(const PermAction& A, const PointSet& U) { return block_system_generated(A, U).singletons(); }

ElementSet return_subset(const PermAction& A, std::uint32_t x0, const PointSet& U) {
    require_transitive(A);
    require_points(A, U);
    if (x0 >= A.degree()) throw ShapeError("base point outside the action");
    ElementSet S(A.group().order());
    for (std::uint32_t g = 0; g < A.group().order(); ++g) {
        if (U.test(A.act(g, x0))) S.set(g);
    }
    return S;
}

ReconstructedAction reconstruct_from_return_subset(const GroupPtr& group, const ElementSet& S) {
    const auto& G = *group;
    if (S.size() != G.order()) throw ShapeError("return subset does not match the group order");
    std::vector<boost::dynamic_bitset<>> profile(G.order(), boost::dynamic_bitset<>(G.order()));
    for (std::uint32_t h = 0; h < G.order(); ++h) {
        for (std::uint32_t g = 0; g < G.order(); ++g) {
            if (S.test(G.multiply(g, h))) profile[h].set(g);
        }
    }
    auto blocks = partition_by_key(profile);
    std::vector<std::uint32_t> rep(blocks.count, kNone);
    for (std::uint32_t h = 0; h < G.order(); ++h) {
        if (rep[blocks.block_of[h]] == kNone) rep[blocks.block_of[h]] = h;
    }
    std::vector<Perm> images;
    for (std::size_t k = 0; k < G.generators().size(); ++k) {
        Perm p(blocks.count);
        for (std::size_t b = 0; b < blocks.count; ++b) p[b] = blocks.block_of[G.multiply(G.generator_index(k), rep[b])];
        images.push_back(std::move(p));
    }
    const auto base = blocks.block_of[0];
    return {PermAction(group, images), base, std::move(blocks)};
}

std::optional<Perm> actions_isomorphic(const PermAction& A1, std::uint32_t x1, const PermAction& A2,
                                       std::uint32_t x2) {
    if (!A1.group().same_as(A2.group())) throw ShapeError("actions of different groups");
    require_transitive(A1);
    require_transitive(A2);
    if (A1.degree() != A2.degree()) return std::nullopt;
    if (x1 >= A1.degree() || x2 >= A2.degree()) throw ShapeError("base point outside the action");
    const auto& G = A1.group();
    for (std::uint32_t g = 0; g < G.order(); ++g) {
        if (A1.act(g, x1) == x1 && A2.act(g, x2) != x2) return std::nullopt;
    }
    const auto tr = A1.transversal(x1);
    Perm phi(A1.degree());
    for (std::uint32_t y = 0; y < A1.degree(); ++y) phi[y] = A2.act(tr[y], x2);
    if (!is_permutation(phi)) return std::nullopt;
    for (std::size_t k = 0; k < G.generators().size(); ++k) {
        const auto s = G.generator_index(k);
        for (std::uint32_t y = 0; y < A1.degree(); ++y) {
            if (phi[A1.act(s, y)] != A2.act(s, phi[y])) return std::nullopt;
        }
    }
    return phi;
}

std::optional<Perm> actions_isomorphic(const PermAction& A1, const PermAction& A2) {
    if (A1.degree() != A2.degree()) {
        if (!A1.group().same_as(A2.group())) throw ShapeError("actions of different groups");
        return std::nullopt;
    }
    for (std::uint32_t x2 = 0; x2 < A2.degree(); ++x2) {
        if (auto phi = actions_isomorphic(A1, 0, A2, x2)) return phi;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Catalog

GroupPtr catalog_group(const std::string& raw, std::size_t cap) {
    const std::string name = detail::trim(raw);
    if (name == "Q8" || name == "Q_8") {
        // Left multiplication on {1,i,j,k,-1,-i,-j,-k}; point = unit + 4 * negative.
        static const int table[4][4][2] = {
            {{0, 0}, {1, 0}, {2, 0}, {3, 0}},
            {{1, 0}, {0, 1}, {3, 0}, {2, 1}},
            {{2, 0}, {3, 1}, {0, 1}, {1, 0}},
            {{3, 0}, {2, 0}, {1, 1}, {0, 1}},
        };
        auto left = [&](int u) {
            Perm p(8);
            for (int x = 0; x < 8; ++x) {
                const auto& r = table[u][x % 4];
                const int neg = (x / 4 + r[1]) % 2;
                p[x] = static_cast<std::uint32_t>(r[0] + 4 * neg);
            }
            return p;
        };
        return FiniteGroup::generate({left(1), left(2)}, cap, "Q8");
    }
    const auto us = name.find('_');
    if (us == std::string::npos || us != 1) throw ShapeError("unknown catalog group '" + name + "'");
    const char family = name[0];
    const std::size_t n = parse_index(name.substr(2), "catalog name '" + name + "'");
    if (n == 0) throw ShapeError("catalog group '" + name + "' needs n >= 1");
    auto cycle = [](std::size_t len, std::size_t from, std::size_t degree) {
        Perm p = identity_perm(degree);
        for (std::size_t i = 0; i < len; ++i) p[from + i] = static_cast<std::uint32_t>(from + (i + 1) % len);
        return p;
    };
    std::vector<Perm> gens;
    switch (family) {
        case 'C':
            gens.push_back(cycle(n, 0, n));
            break;
        case 'D': {
            if (n < 3) throw ShapeError("D_n needs n >= 3");
            gens.push_back(cycle(n, 0, n));
            Perm flip(n);
            for (std::size_t x = 0; x < n; ++x) flip[x] = static_cast<std::uint32_t>((n - x) % n);
            gens.push_back(flip);
            break;
        }
        case 'S':
            gens.push_back(n >= 2 ? cycle(2, 0, n) : identity_perm(n));
            if (n >= 3) gens.push_back(cycle(n, 0, n));
            break;
        case 'A':
            if (n < 3) gens.push_back(identity_perm(n));
            for (std::size_t i = 2; i < n; ++i) {
                Perm p = identity_perm(n);
                p[0] = 1;
                p[1] = static_cast<std::uint32_t>(i);
                p[i] = 0;
                gens.push_back(p);
            }
            break;
        default:
            throw ShapeError("unknown catalog group '" + name + "'");
    }
    return FiniteGroup::generate(std::move(gens), cap, std::string(1, family) + "_" + std::to_string(n));
}

std::vector<GroupPtr> parse_catalog(const std::string& text, std::size_t cap) {
    std::vector<GroupPtr> out;
    if (detail::trim(text).empty()) return out;
    for (const auto& item : detail::split(text, ',')) {
        const std::string s = detail::trim(item);
        const auto dots = s.find("..");
        if (dots == std::string::npos) {
            out.push_back(catalog_group(s, cap));
            continue;
        }
        const std::string a = detail::trim(s.substr(0, dots));
        const std::string b = detail::trim(s.substr(dots + 2));
        if (a.size() < 3 || b.size() < 3 || a.substr(0, 2) != b.substr(0, 2)) {
            throw ShapeError("bad catalog range '" + s + "'");
        }
        const auto lo = parse_index(a.substr(2), "range '" + s + "'");
        const auto hi = parse_index(b.substr(2), "range '" + s + "'");
        for (auto n = lo; n <= hi; ++n) out.push_back(catalog_group(a.substr(0, 2) + std::to_string(n), cap));
    }
    return out;
}

GroupPtr group_from_generators(const std::string& text, std::size_t cap, std::string name) {
    const auto parts = detail::split(text, ';');
    std::size_t degree = 0;
    for (char c : text) {
        if (!std::isdigit(static_cast<unsigned char>(c)) && c != ' ' && c != ',' && c != '(' && c != ')' && c != ';' &&
            !std::isspace(static_cast<unsigned char>(c))) {
            throw ShapeError("unexpected character '" + std::string(1, c) + "' in generators");
        }
    }
    for (std::size_t i = 0; i < text.size();) {
        if (!std::isdigit(static_cast<unsigned char>(text[i]))) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
        degree = std::max<std::size_t>(degree, std::stoul(text.substr(i, j - i)) + 1);
        i = j;
    }
    if (degree == 0) degree = 1;
    std::vector<Perm> gens;
    for (const auto& p : parts) gens.push_back(parse_cycles(p, degree));
    return FiniteGroup::generate(std::move(gens), cap, std::move(name));
}

// ---------------------------------------------------------------------------
// Search

const char* const kOpenQuestionBanner =
    "open question evidence: results of a finite search; they do not settle the general question";

CertificateCheck verify_certificate(const Certificate& c) {
    const std::size_t n = c.degree;
    if (n == 0) return {false, "degree 0"};
    if (c.generators.empty()) return {false, "no generators"};
    for (const auto& g : c.generators) {
        if (g.size() != n || !is_permutation(g)) return {false, "generator is not a permutation of the points"};
    }
    std::vector<int> block_of(n, -1);
    bool nontrivial = false;
    for (std::size_t b = 0; b < c.blocks.size(); ++b) {
        if (c.blocks[b].empty()) return {false, "empty block"};
        if (c.blocks[b].size() > 1) nontrivial = true;
        for (auto x : c.blocks[b]) {
            if (x >= n || block_of[x] != -1) return {false, "blocks are not disjoint"};
            block_of[x] = static_cast<int>(b);
        }
    }
    if (std::find(block_of.begin(), block_of.end(), -1) != block_of.end()) return {false, "blocks do not cover"};
    if (!nontrivial) return {false, "partition is all singletons"};
    for (const auto& g : c.generators) {
        for (const auto& B : c.blocks) {
            std::vector<std::uint32_t> image;
            for (auto x : B) image.push_back(g[x]);
            std::sort(image.begin(), image.end());
            auto target = c.blocks[block_of[image[0]]];
            std::sort(target.begin(), target.end());
            if (image != target) return {false, "partition is not invariant"};
        }
    }
    std::vector<bool> in(n, false);
    for (auto x : c.subset) {
        if (x >= n) return {false, "subset point outside the action"};
        in[x] = true;
    }
    for (const auto& B : c.blocks) {
        for (auto x : B) {
            if (in[x] != in[B[0]]) return {false, "subset is not a union of blocks"};
        }
    }
    // Enumerate the group from scratch and look for a nontrivial stabilizing element.
    std::set<Perm> seen{identity_perm(n)};
    std::vector<Perm> list{identity_perm(n)};
    for (std::size_t i = 0; i < list.size(); ++i) {
        for (const auto& g : c.generators) {
            Perm p(n);
            for (std::size_t x = 0; x < n; ++x) p[x] = g[list[i][x]];
            if (seen.insert(p).second) {
                list.push_back(p);
                if (list.size() > 1000000) return {false, "group too large to verify"};
            }
        }
    }
    const Perm id = identity_perm(n);
    for (const auto& p : list) {
        if (p == id) continue;
        bool fixes = true;
        for (std::size_t x = 0; x < n && fixes; ++x) fixes = in[x] == in[p[x]];
        if (fixes) return {false, "setwise stabilizer is nontrivial: " + to_cycles(p)};
    }
    return {true, {}};
}

namespace {

struct Outcome {
    bool trivial = false;
    bool simple = false;
    BlockSystem blocks;
};

std::vector<PointSet> exhaustive_representatives(const PermAction& A) {
    const std::size_t n = A.degree();
    const std::uint64_t total = std::uint64_t{1} << n;
    std::vector<bool> visited(total, false);
    std::vector<PointSet> reps;
    const auto& G = A.group();
    for (std::uint64_t m = 0; m < total; ++m) {
        if (visited[m]) continue;
        reps.emplace_back(n, m);
        for (std::uint32_t g = 0; g < G.order(); ++g) {
            const auto& p = A.image(g);
            std::uint64_t image = 0;
            for (std::size_t x = 0; x < n; ++x) {
                if (m >> x & 1) image |= std::uint64_t{1} << p[x];
            }
            visited[image] = true;
        }
    }
    return reps;
}

}  // namespace

SearchReport search_counterexamples(const std::vector<GroupPtr>& catalog, const SearchLimits& limits) {
    if (limits.exhaustive_degree > 24) throw CapExceeded("exhaustive subset enumeration is limited to degree 24");
    SearchReport report;
    for (std::size_t gi = 0; gi < catalog.size(); ++gi) {
        const auto& group = catalog[gi];
        const auto actions = transitive_actions(group, true, limits.subgroup_cap);
        for (std::size_t ai = 0; ai < actions.size(); ++ai) {
            const auto& A = actions[ai].action;
            ActionRecord rec;
            rec.group = group->name().empty() ? "G" + std::to_string(gi) : group->name();
            rec.group_order = group->order();
            rec.action_index = ai;
            rec.degree = A.degree();
            rec.stabilizer_order = actions[ai].stabilizer.count();

            std::vector<PointSet> subsets;
            if (A.degree() <= limits.exhaustive_degree) {
                rec.regime = "exhaustive";
                subsets = exhaustive_representatives(A);
            } else {
                rec.regime = "sampled";
                std::seed_seq seq{limits.seed, static_cast<std::uint64_t>(gi), static_cast<std::uint64_t>(ai)};
                std::mt19937_64 rng(seq);
                std::bernoulli_distribution coin(0.5);
                for (std::size_t s = 0; s < limits.sample_size; ++s) {
                    PointSet U(A.degree());
                    for (std::size_t x = 0; x < A.degree(); ++x) U[x] = coin(rng);
                    subsets.push_back(std::move(U));
                }
            }

            std::vector<Outcome> outcomes(subsets.size());
            auto work = [&](std::size_t from, std::size_t to) {
                for (std::size_t i = from; i < to; ++i) {
                    auto& o = outcomes[i];
                    o.trivial = trivial_setwise_stabilizer(A, subsets[i]);
                    o.blocks = block_system_generated(A, subsets[i]);
                    o.simple = o.blocks.singletons();
                }
            };
            const std::size_t threads = std::max<std::size_t>(1, std::min<std::size_t>(limits.threads, subsets.size()));
            if (threads == 1) {
                work(0, subsets.size());
            } else {
                std::vector<std::thread> pool;
                const std::size_t chunk = (subsets.size() + threads - 1) / threads;
                for (std::size_t t = 0; t < threads; ++t) {
                    const std::size_t from = std::min(subsets.size(), t * chunk);
                    const std::size_t to = std::min(subsets.size(), from + chunk);
                    pool.emplace_back(work, from, to);
                }
                for (auto& th : pool) th.join();
            }

            rec.subsets = subsets.size();
            for (std::size_t i = 0; i < subsets.size(); ++i) {
                const auto& o = outcomes[i];
                rec.trivial_stabilizer += o.trivial;
                rec.simple += o.simple;
                if (o.trivial && !o.simple) {
                    ++rec.counterexamples;
                    report.counterexamples.push_back(
                        {rec.group, A.degree(), A.generator_images(), members(subsets[i]), o.blocks.blocks()});
                }
            }
            report.actions.push_back(std::move(rec));
        }
    }
    return report;
}

void write_search_jsonl(std::ostream& out, const SearchReport& report) {
    using json = nlohmann::ordered_json;
    out << json{{"banner", kOpenQuestionBanner}}.dump() << '\n';
    for (const auto& r : report.actions) {
        json j;
        j["kind"] = "action";
        j["group"] = r.group;
        j["group_order"] = r.group_order;
        j["action"] = r.action_index;
        j["degree"] = r.degree;
        j["stabilizer_order"] = r.stabilizer_order;
        j["regime"] = r.regime;
        j["subsets"] = r.subsets;
        j["trivial_stabilizer"] = r.trivial_stabilizer;
        j["simple"] = r.simple;
        j["counterexamples"] = r.counterexamples;
        out << j.dump() << '\n';
    }
    for (const auto& c : report.counterexamples) {
        json j;
        j["kind"] = "counterexample";
        j["group"] = c.group;
        j["degree"] = c.degree;
        j["subset"] = c.subset;
        json gens = json::array();
        for (const auto& g : c.generators) gens.push_back(to_cycles(g));
        j["certificate"] = {{"generators", gens}, {"blocks", c.blocks}, {"verified", verify_certificate(c).ok}};
        out << j.dump() << '\n';
    }
}

}  // namespace kronrec::gset
