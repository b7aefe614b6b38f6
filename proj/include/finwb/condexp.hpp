#pragma once

#include "finwb/product.hpp"

#include <string>
#include <vector>

namespace finwb {

// A function constant on the atoms of its algebra.
struct RandVar {
    int ground = 0;
    std::vector<Rat> values;
    SigmaAlg algebra;
};

void validate(const RandVar& f);

// What a conditional expectation returns on zero-measure atoms, where any
// version is as good as any other.
struct VersionPolicy {
    enum class NullAtom { zero, inherit } mode = NullAtom::zero;
};

// Block averages: on each positive sub-atom the m-weighted mean of f; on null
// sub-atoms 0, or the unweighted mean in inherit mode. The defining identity
// ∫_C result dm = ∫_C f dm holds exactly for every sub-measurable C.
RandVar cond_expect(const RandVar& f, const SigmaAlg& sub, const FinMeasure& m,
                    const VersionPolicy& policy = {});

struct T1Report {
    bool ok = false;
    RandVar g;                       // conditional over the product space
    Bits exceptional_y = 0;          // y where the section property fails
    Rat exceptional_mass = 0;        // Q-mass of its Y-measurable cover
    std::vector<Bits> disagree;      // per y, where g^y differs pointwise
    std::string witness;

    // successor-step intermediates (filled by successor_step_check only)
    std::vector<Rat> f1, f2;
    std::vector<std::vector<Rat>> f1y, f2y;
    std::vector<Bits> A_y;
};

// Checks that g = E(f | 𝔠⊗𝔅) sections as the per-y conditional E(f^y | 𝔠)
// under each S_y: off a Q-null set of y, g^y is 𝔠-measurable mod S_y-null and
// integrates like f^y over every 𝔠-set. f is given per product point and must
// be measurable for the completed coupling.
T1Report t1_check(const SkewProduct& r, const Disintegration& dis,
                  const SigmaAlg& c, const std::vector<Rat>& f,
                  const VersionPolicy& policy = {});

// One refinement step 𝔠_β → σ(𝔠_β ∪ {D}): materializes the two-sided
// decompositions of the conditional on each side of D, verifies the exchange
// identities relating the two stages (each exact mod the appropriate null
// sets), the support identity for A_y = {E(χ_D | 𝔠_β) ≠ 0 under S_y}, and the
// section property at the refined stage.
T1Report successor_step_check(const SkewProduct& r, const Disintegration& dis,
                              const SigmaAlg& c_beta, Bits D,
                              const std::vector<Rat>& f,
                              const VersionPolicy& policy = {});

// Tower property along an increasing chain plus stabilization of the
// conditional sequence; exact identities under the zero policy.
bool martingale_limit_check(const std::vector<SigmaAlg>& chain,
                            const FinMeasure& m, const RandVar& f);

}  // namespace finwb
