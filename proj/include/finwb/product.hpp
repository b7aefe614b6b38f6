#pragma once

#include "finwb/finspace.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace finwb {

// Product of two finite measurable spaces. Pair (x, y) is the product point
// x*ny + y; the product algebra's atoms are exactly (X-atom)×(Y-atom).
struct ProductSpace {
    int nx = 0, ny = 0;
    SigmaAlg xalg;
    SigmaAlg yalg;
    SigmaAlg product_algebra;

    int ground() const { return nx * ny; }
    int pidx(int x, int y) const { return x * ny + y; }
};

ProductSpace make_product_space(const SigmaAlg& xalg, const SigmaAlg& yalg);

// Rectangle a×b as a product mask.
Bits rect(const ProductSpace& ps, Bits a, Bits b);
// Sections: e^y ⊆ X and e_x ⊆ Y.
Bits section_y(const ProductSpace& ps, Bits e, int y);
Bits section_x(const ProductSpace& ps, Bits e, int x);

// A coupling of P and Q: a measure on the product algebra with exact
// marginals. Weights live on pairs; only events of the product algebra (and
// its completion) are ever measured.
struct SkewProduct {
    ProductSpace space;
    FinMeasure P;
    FinMeasure Q;
    std::vector<Rat> weights;  // per pair, row-major in (x, y)

    Rat mass(Bits e) const;
    // The coupling viewed as a plain measure over the product ground set.
    FinMeasure as_measure() const;
};

void validate(const SkewProduct& r);

// North-west-corner rule on seeded random orderings of the two point sets;
// always a vertex of the transport polytope, deterministic per seed.
SkewProduct skew_product_generate(const FinMeasure& P, const FinMeasure& Q,
                                  std::uint64_t seed);

// The independent coupling w(x,y) = P({x})·Q({y}).
SkewProduct independent_product(const FinMeasure& P, const FinMeasure& Q);

// One conditional measure on X per y point, all on a common X-algebra here.
struct Disintegration {
    std::vector<SigmaAlg> algebra_y;
    std::vector<FinMeasure> measure_y;
};

// Conditions the coupling on the Y-atom containing y (for Q-positive atoms);
// on Q-null atoms the conditional defaults to P. Coincides with section
// renormalization R(A×{y})/Q({y}) whenever the Y-algebra is discrete, and
// keeps y ↦ S_y(A) exactly Y-measurable.
Disintegration disintegrate(const SkewProduct& r);

void validate(const SkewProduct& r, const Disintegration& dis);

// Completion of the coupling as a measure on the product algebra: positive
// product atoms stay whole, points of null product atoms are shattered.
Bits product_null_zone(const SkewProduct& r);
SigmaAlg completed_product_algebra(const SkewProduct& r);

struct FubiniReport {
    bool ok = false;
    std::string witness;
};

// Verifies ∫ f dR = Σ_y Q({y}) Σ_x S_y({x}) f(x,y) exactly; f must be
// constant on product atoms (with completed=true: on positive product atoms),
// otherwise an input error names two points of one atom with distinct values.
// In completed mode additionally certifies that sections of the null zone are
// conditionally null outside a Q-null set of y.
FubiniReport fubini_check(const SkewProduct& r, const Disintegration& dis,
                          const std::vector<Rat>& f, bool completed);

// A sub-algebra 𝔠 of the X-algebra such that every X-measurable set contains
// a 𝔠-measurable subset of equal measure under P and under every conditional:
// atoms carrying a point positive somewhere are kept, the rest merge into one
// block.
SigmaAlg make_inner_regular_subalgebra(const SkewProduct& r,
                                       const Disintegration& dis,
                                       std::uint64_t seed);

struct InnerRegularityCert {
    bool ok = false;
    Bits bad_set = 0;   // X-measurable witness when not ok
    int bad_y = -1;     // measure index (-1 = P) where the witness fails
};

InnerRegularityCert check_inner_regular(const SkewProduct& r,
                                        const Disintegration& dis,
                                        const SigmaAlg& c);

}  // namespace finwb
