#pragma once

// Finite groups acting on finite sets: block systems generated by a subset,
// simple subsets, and recovery of a transitive action from the set of group
// elements that move a base point into a subset.

#include <boost/dynamic_bitset.hpp>

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace kronrec::gset {

using Perm = std::vector<std::uint32_t>;
/// Subset of the points of an action.
using PointSet = boost::dynamic_bitset<>;
/// Subset of the element table of a group.
using ElementSet = boost::dynamic_bitset<>;

/// (p * q)(x) = p(q(x))
Perm compose(const Perm& p, const Perm& q);
Perm inverse(const Perm& p);
Perm identity_perm(std::size_t n);
bool is_permutation(const Perm& p);

/// Cycle notation with 0-based points, e.g. "(0 1 2)(3 4)" or "(0,1)"; "()" is the identity.
Perm parse_cycles(const std::string& text, std::size_t degree);
std::string to_cycles(const Perm& p);

inline constexpr std::size_t kDefaultOrderCap = 5040;

class FiniteGroup {
public:
    /// Breadth-first closure of the generators. Throws CapExceeded above cap.
    static std::shared_ptr<const FiniteGroup> generate(std::vector<Perm> generators,
                                                       std::size_t cap = kDefaultOrderCap, std::string name = {});

    const std::string& name() const { return name_; }
    std::size_t order() const { return elements_.size(); }
    std::size_t degree() const { return degree_; }
    /// Element 0 is the identity.
    const Perm& element(std::uint32_t i) const { return elements_[i]; }
    const std::vector<Perm>& generators() const { return generators_; }
    std::uint32_t generator_index(std::size_t k) const { return generator_index_[k]; }
    std::uint32_t multiply(std::uint32_t a, std::uint32_t b) const;
    std::uint32_t inverse(std::uint32_t a) const { return inverse_[a]; }
    std::optional<std::uint32_t> index_of(const Perm& p) const;

    /// For i > 0: element(i) = generators()[parent_generator(i)] * element(parent(i)).
    std::uint32_t parent(std::uint32_t i) const { return parent_[i]; }
    std::uint32_t parent_generator(std::uint32_t i) const { return parent_gen_[i]; }

    /// Subgroup generated by the given elements.
    ElementSet closure(const std::vector<std::uint32_t>& elements) const;
    bool same_as(const FiniteGroup& other) const;

private:
    FiniteGroup() = default;

    std::string name_;
    std::size_t degree_ = 0;
    std::vector<Perm> generators_;
    std::vector<Perm> elements_;
    std::map<Perm, std::uint32_t> index_;
    std::vector<std::uint32_t> parent_, parent_gen_, inverse_, generator_index_;
    std::vector<std::uint32_t> table_;
};

using GroupPtr = std::shared_ptr<const FiniteGroup>;

class PermAction {
public:
    /// Extends the images of the group generators to every element. Throws
    /// ShapeError if they do not define a homomorphism.
    PermAction(GroupPtr group, const std::vector<Perm>& generator_images);
    /// The group acting on the points it permutes.
    static PermAction natural(GroupPtr group);

    const FiniteGroup& group() const { return *group_; }
    const GroupPtr& group_ptr() const { return group_; }
    std::size_t degree() const { return degree_; }
    std::uint32_t act(std::uint32_t g, std::uint32_t x) const { return images_[g][x]; }
    const Perm& image(std::uint32_t g) const { return images_[g]; }
    std::vector<Perm> generator_images() const;
    bool transitive() const { return transitive_; }

    PointSet translate(std::uint32_t g, const PointSet& U) const;
    ElementSet point_stabilizer(std::uint32_t x) const;
    /// transversal()[y] moves point 0 to y.
    std::vector<std::uint32_t> transversal(std::uint32_t base) const;

private:
    GroupPtr group_;
    std::size_t degree_ = 0;
    std::vector<Perm> images_;
    bool transitive_ = false;
};

/// Generates the group and returns its natural action.
PermAction enumerate_group(const std::vector<Perm>& generators, std::size_t cap = kDefaultOrderCap);

/// Left action on the cosets gH; point 0 is H itself.
PermAction coset_action(const GroupPtr& group, const ElementSet& subgroup);

/// Every subgroup, sorted by descending order then element bits. Throws
/// CapExceeded when the group order exceeds cap.
std::vector<ElementSet> subgroups(const FiniteGroup& group, std::size_t cap = 24);

struct TransitiveAction {
    PermAction action;
    /// Stabilizer of point 0.
    ElementSet stabilizer;
};

/// Coset action for each subgroup (one per conjugacy class if requested),
/// sorted by degree.
std::vector<TransitiveAction> transitive_actions(const GroupPtr& group, bool up_to_conjugacy,
                                                 std::size_t subgroup_cap = 24);

/// {g : gU = U} as element indices, identity first.
std::vector<std::uint32_t> setwise_stabilizer(const PermAction& A, const PointSet& U);

struct BlockSystem {
    /// Block id of every point; ids numbered by first appearance.
    std::vector<std::uint32_t> block_of;
    std::size_t count = 0;

    std::vector<std::vector<std::uint32_t>> blocks() const;
    bool singletons() const { return count == block_of.size(); }
    bool operator==(const BlockSystem&) const = default;
};

/// Partition plus invariance under every group generator.
bool is_block_system(const PermAction& A, const BlockSystem& B);
bool is_union_of_blocks(const BlockSystem& B, const PointSet& U);

/// x ~ y iff x and y lie in the same translates gU.
BlockSystem block_system_generated(const PermAction& A, const PointSet& U);
bool is_simple(const PermAction& A, const PointSet& U);

/// {g : g x0 in U}
ElementSet return_subset(const PermAction& A, std::uint32_t x0, const PointSet& U);

struct ReconstructedAction {
    PermAction action;
    /// Block containing the identity.
    std::uint32_t base_point = 0;
    /// Blocks of the left-regular action generated by S.
    BlockSystem blocks;
};

/// The group acting on the blocks of its left-regular action generated by S.
ReconstructedAction reconstruct_from_return_subset(const GroupPtr& group, const ElementSet& S);

/// Equivariant bijection phi with phi(x1) = x2, or nullopt.
std::optional<Perm> actions_isomorphic(const PermAction& A1, std::uint32_t x1, const PermAction& A2,
                                       std::uint32_t x2);
/// Equivariant bijection with any base point in A2.
std::optional<Perm> actions_isomorphic(const PermAction& A1, const PermAction& A2);

/// C_n, D_n (order 2n, on n points), S_n, A_n, Q8 (regular, on 8 points).
GroupPtr catalog_group(const std::string& name, std::size_t cap = kDefaultOrderCap);
/// Comma separated names; "C_2..C_12" expands a range.
std::vector<GroupPtr> parse_catalog(const std::string& text, std::size_t cap = kDefaultOrderCap);
/// Generators separated by ';', e.g. "(0 1 2 3); (0 2)". Degree is the largest point + 1.
GroupPtr group_from_generators(const std::string& text, std::size_t cap = kDefaultOrderCap, std::string name = {});

struct SearchLimits {
    /// Subsets are enumerated exhaustively up to this degree, sampled above.
    std::size_t exhaustive_degree = 16;
    std::size_t sample_size = 4096;
    std::uint64_t seed = 0;
    std::size_t subgroup_cap = 24;
    unsigned threads = 1;
};

struct Certificate {
    std::string group;
    std::size_t degree = 0;
    /// Images of the group generators in the action.
    std::vector<Perm> generators;
    std::vector<std::uint32_t> subset;
    std::vector<std::vector<std::uint32_t>> blocks;
};

struct CertificateCheck {
    bool ok = false;
    std::string reason;
};

/// Rechecks a certificate from its own data: a nontrivial invariant partition,
/// the subset a union of blocks, and a trivial setwise stabilizer.
CertificateCheck verify_certificate(const Certificate& c);

struct ActionRecord {
    std::string group;
    std::size_t group_order = 0;
    std::size_t action_index = 0;
    std::size_t degree = 0;
    std::size_t stabilizer_order = 0;
    /// "exhaustive" (one subset per G-orbit) or "sampled".
    std::string regime;
    std::size_t subsets = 0;
    std::size_t trivial_stabilizer = 0;
    std::size_t simple = 0;
    std::size_t counterexamples = 0;
};

struct SearchReport {
    std::vector<ActionRecord> actions;
    std::vector<Certificate> counterexamples;
};

extern const char* const kOpenQuestionBanner;

/// Looks for subsets with trivial setwise stabilizer that are not simple.
SearchReport search_counterexamples(const std::vector<GroupPtr>& catalog, const SearchLimits& limits = {});

/// Banner line, one line per action, one line per counterexample with a "certificate" field.
void write_search_jsonl(std::ostream& out, const SearchReport& report);

PointSet point_set(std::size_t n, const std::vector<std::uint32_t>& points);
std::vector<std::uint32_t> members(const boost::dynamic_bitset<>& s);

}  // namespace kronrec::gset
