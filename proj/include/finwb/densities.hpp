#pragma once

#include "finwb/product.hpp"

#include <string>
#include <utility>
#include <vector>

namespace finwb {

// A lower density on a sub-σ-algebra `domain` of a complete finite space
// (the ambient algebra is expected to be complete: its null atoms are
// singletons), stored by its true degrees of freedom: a per-point class G_x.
// Points of positive domain atoms are forced to carry their own atom; points
// of null atoms carry an arbitrary positive domain-measurable class. The set
// function is
//   δ(E) = {x : (G_x ∩ support) ⊆ E},
// which extends canonically to arbitrary subsets of the ground set.
struct LowerDensity {
    FinMeasure m;        // complete ambient measure (point weights)
    SigmaAlg domain;
    std::vector<Bits> assign;

    Bits support() const;          // positive-weight points
    Bits apply(Bits e) const;
};

void validate(const LowerDensity& d);

// True iff every class is a single positive domain atom (mod null); such an
// assignment is exactly a lifting.
bool is_lifting(const LowerDensity& d);

// Exhaustive set-function oracle for the density axioms (and the complement
// law when `complement` is set); enumerates all measurable pairs.
bool density_axioms_ok(const LowerDensity& d, bool complement,
                       std::string* why = nullptr);

// σ(null sets): points of null ambient atoms shattered, the rest one block.
SigmaAlg null_set_algebra(const FinMeasure& m);

// The only density on σ(null sets): ∅ on null sets, everything otherwise.
LowerDensity initial_density(const FinMeasure& m);

// One-generator extension: δ on 𝔠 (with every null point 𝔠-measurable — this
// containment is essential and enforced), M a new set, M1 ⊇ M and M2 ⊇ M^c
// 𝔠-envelopes. Returns the extension to σ(𝔠 ∪ {M}); asserts restriction
// coherence and independence of the (G, H) representation.
LowerDensity extend_density_L3(const LowerDensity& delta, Bits M, Bits M1,
                               Bits M2);

// Evaluates the limit construction over an increasing list of stages at B:
// ⋂_k ⋃_n ⋂_{m≥n} τ_m({E(χ_B | stage m) > 1−1/k}), with k swept far enough
// to stabilize (beyond the reciprocal of the smallest positive gap).
Bits limit_density_e20(const std::vector<LowerDensity>& stages,
                       const FinMeasure& m, Bits B);

struct ChainStep {
    Bits gen = 0;
    bool skipped = false;   // generator already measurable at its stage
    Bits env1 = 0, env2 = 0;
};

struct ChainState {
    std::vector<ChainStep> steps;
    std::vector<LowerDensity> stages;   // after each retained generator
};

// Runs the whole recursion over the generator list: the initial density on
// σ(null sets), then one extension per retained generator with recorded
// envelopes.
std::pair<LowerDensity, ChainState> build_admissible(
    const FinMeasure& m, const std::vector<Bits>& gens,
    EnvelopeChoice choice = EnvelopeChoice::minimal);

enum class TieBreak { lowest, highest };

// Shrinks every class to one positive atom (deterministic tie-break),
// yielding a lifting that dominates the density.
LowerDensity lift_from_density(const LowerDensity& delta,
                               TieBreak tb = TieBreak::lowest);

// Per-y densities built along the same generator order and envelope rule,
// each on the completion of (X, 𝔠, S_y): stage algebras grow from
// σ(S_y-null 𝔠-sets) by the same generators for every y.
struct EquiFamily {
    std::vector<LowerDensity> tau_y;
    std::vector<ChainState> traces;
};

EquiFamily equi_admissible_family(const SkewProduct& r, const Disintegration& dis,
                                  const SigmaAlg& c, const std::vector<Bits>& gens,
                                  EnvelopeChoice choice = EnvelopeChoice::minimal);

}  // namespace finwb
