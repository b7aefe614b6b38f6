#pragma once

#include "finwb/densities.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace finwb {

// Shared context for the product-lifting constructions: the coupling, its
// conditionals, and the completed product algebra with its positive atoms.
struct ProdContext {
    SkewProduct r;
    Disintegration dis;
    SigmaAlg chat;                // completed product algebra
    Bits nullzone = 0;            // union of the null product atoms
    std::vector<Bits> pos_atoms;  // positive product atoms, ascending
    FinMeasure rmeas;             // the coupling over (ground, chat)
};

ProdContext make_context(const SkewProduct& r, const Disintegration& dis);

// Membership in the ideal of sets whose y-sections are conditionally null off
// a Y-measurable null set. `bad_y` collects the failing columns, `cover`
// their Y-atom hull; membership means the hull has Q-measure zero.
struct NilReport {
    bool nil = false;
    Bits bad_y = 0;
    Bits cover = 0;
    Rat cover_mass = 0;
};

NilReport is_nil(const ProdContext& ctx, Bits e);

// Splits E = W △ N with W product-measurable and N in the section-null
// ideal, when possible; otherwise reports a witness Y-atom whose sections
// cannot be aligned.
struct NilDecomp {
    bool ok = false;
    Bits w = 0;
    Bits bad_atom_b = 0;
};

NilDecomp nil_member_decompose(const ProdContext& ctx, Bits e);

// Value of the extension of a product lifting across the section-null ideal:
// E = W △ N maps to the value at W. Throws if E is not decomposable.
Bits extend_lifting_nil(const ProdContext& ctx, const LowerDensity& pi1, Bits e);

// Minimal members of the family of null sets with 𝔠-measurable columns and
// Y-measurable rows; together they generate the same σ-algebra.
std::vector<Bits> pzero_blocks(const ProdContext& ctx, const SigmaAlg& c);

// Density on the completed product built stage by stage over σ(𝔠_γ⊗𝔅 ∪ 𝔓),
// where 𝔓 is the section-measurable null family above: each stage extends by
// one generator rectangle with product-side envelopes, then renormalizes
// every y-section through the per-y density τ_y. Values stay inside
// σ(𝔠⊗𝔅 ∪ 𝔓), sections are τ_y-fixed for every y, rows are Y-measurable.
struct PhiResult {
    LowerDensity phi;            // over (product ground, chat)
    EquiFamily family;           // per-y densities with coupled envelopes
    std::vector<Bits> pzero;     // minimal section-measurable null blocks
    SigmaAlg codomain;           // σ(𝔠⊗𝔅 ∪ 𝔓): values are unions of its atoms
};

PhiResult build_phi(const ProdContext& ctx, const SigmaAlg& c,
                    const std::vector<Bits>& gens,
                    EnvelopeChoice choice = EnvelopeChoice::minimal);

// Saturation: enlarges the density so that on every column the images of a
// set and its complement jointly exhaust the conditional mass. Classes over a
// Q-null column collapse, per conditionally positive 𝔠-atom, to one shared
// positive product atom.
struct PsiResult {
    LowerDensity psi;
    std::vector<std::pair<int, Bits>> changes;  // (y, collapsed class)
};

PsiResult saturate_density(const ProdContext& ctx, const PhiResult& phi);

// The lifting π with [π(E)]^y = σ_y([ψ(E)]^y), where σ_y refines τ_y to a
// lifting; every section of every value is a fixed point of its σ_y.
struct SplitLifting {
    LowerDensity pi;                    // lifting over (product ground, chat)
    std::vector<LowerDensity> sigma_y;  // per-y lifting on the completion of 𝔠
};

SplitLifting build_split_lifting(const ProdContext& ctx, const PsiResult& psi,
                                 const PhiResult& phires,
                                 TieBreak tb = TieBreak::lowest);

// Section-wise modification Ẽ with Ẽ^y = σ_y(E^y): measurable, and equal to
// π(E) outside a null cylinder X×N.
struct SectionModReport {
    Bits etilde = 0;
    bool measurable = false;
    Bits exceptional_cover = 0;  // Y-atom hull of columns where Ẽ^y ≠ [π(E)]^y
    Rat cover_mass = 0;
};

SectionModReport section_modification(const ProdContext& ctx,
                                      const SplitLifting& split, Bits e);

// Brute-force search over all per-point class assignments: counts the
// liftings of the completed product whose every section family is realizable
// by per-column liftings, and reports whether the constructed one is found.
struct SplitOracleReport {
    long long valid = 0;
    long long total = 0;
    bool constructed_found = false;
};

SplitOracleReport split_lifting_oracle(const ProdContext& ctx,
                                       const SplitLifting& split);

}  // namespace finwb
