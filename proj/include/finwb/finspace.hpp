#pragma once

#include "finwb/bits.hpp"
#include "finwb/rat.hpp"

#include <vector>

namespace finwb {

// Default cap on ground-set sizes so power-set enumeration stays feasible for
// the oracles. Overridable through the FINWB_GROUND_CAP environment variable.
int ground_cap();

// A σ-algebra over points 0..ground-1, represented by its atom partition.
// Blocks are pairwise disjoint, cover the ground and are sorted by least
// member; a set is measurable iff it is a union of blocks.
struct SigmaAlg {
    int ground = 0;
    std::vector<Bits> atoms;

    Bits full() const { return full_mask(ground); }
    // Atom containing point x.
    Bits atom_of(int x) const;
};

SigmaAlg discrete_algebra(int ground);
SigmaAlg trivial_algebra(int ground);

void validate(const SigmaAlg& alg);

// Coarsest σ-algebra making every input set measurable (iterated refinement).
SigmaAlg sigma_generate(int ground, const std::vector<Bits>& sets);

bool is_measurable(const SigmaAlg& alg, Bits e);

// True iff every atom of `sub` is a union of atoms of `fine`.
bool is_subalgebra(const SigmaAlg& sub, const SigmaAlg& fine);

bool same_algebra(const SigmaAlg& a, const SigmaAlg& b);

// All measurable sets of alg (2^atoms of them), in atom-subset-mask order.
std::vector<Bits> measurable_sets(const SigmaAlg& alg);

// An exact probability measure given by point weights; `algebra` is the
// σ-algebra of events it is considered on.
struct FinMeasure {
    int ground = 0;
    SigmaAlg algebra;
    std::vector<Rat> weights;

    // Sum of point weights over e. Equals the measure for measurable e.
    Rat mass(Bits e) const;
};

void validate(const FinMeasure& m);

// Union of the null atoms of m.algebra. Subsets of this zone are exactly the
// null sets of the completion.
Bits null_zone(const FinMeasure& m);

// Inner/outer measure of an arbitrary set relative to a sub-σ-algebra.
Rat inner_measure(const FinMeasure& m, const SigmaAlg& sub, Bits a);
Rat outer_measure(const FinMeasure& m, const SigmaAlg& sub, Bits a);

enum class EnvelopeChoice {
    minimal,  // union of sub-atoms meeting a (canonical)
    maximal,  // minimal cover plus every null sub-atom
};

Bits envelope(const FinMeasure& m, const SigmaAlg& sub, Bits a,
              EnvelopeChoice choice = EnvelopeChoice::minimal);

// Measure-space completion at atom granularity: positive atoms of m.algebra
// stay whole, points of null atoms become singletons. Zero-weight points
// inside positive atoms are NOT freed — they are not null in the completion.
SigmaAlg measure_completion_algebra(const FinMeasure& m);

struct CompleteSpace {
    FinMeasure base;
    SigmaAlg completed;  // positive atoms of base plus shattered null points
};

CompleteSpace completion(const FinMeasure& m);

}  // namespace finwb
