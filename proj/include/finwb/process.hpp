#pragma once

#include "finwb/prodlift.hpp"

#include <vector>

namespace finwb {

// A family of observations indexed by the Y points, stored as one rational
// matrix over the product grid: value at (x, y) is the y-th observation at x.
// Unless flagged `raw`, every section x ↦ value(x, y) must be X-measurable.
struct Process {
    int nx = 0, ny = 0;
    std::vector<Rat> values;  // row-major in (x, y)
    bool raw = false;

    Rat& at(int x, int y) { return values[size_t(x * ny + y)]; }
    const Rat& at(int x, int y) const { return values[size_t(x * ny + y)]; }
};

Process make_process(int nx, int ny, std::vector<Rat> values, bool raw = false);

// Shape check; for non-raw input additionally requires every section to be
// constant on the X-atoms.
void validate(const Process& p, const ProductSpace& ps);

// Lowest y whose section is not constant on some X-atom, -1 when none.
int first_raw_section(const Process& p, const SigmaAlg& xalg);

// Lowest y whose section is not constant on some conditionally positive
// X-atom (measurability w.r.t. the completion carried by that column's
// conditional), -1 when none. Such a section obstructs any version.
int first_incoherent_section(const Process& p, const ProductSpace& ps,
                             const Disintegration& dis);

// Same values on every column up to a conditionally null set (all y).
bool equivalent(const Process& a, const Process& b, const Disintegration& dis);

// Joint measurability w.r.t. the completed coupling: constant on every
// positive product atom.
bool is_measurable_process(const Process& p, const SkewProduct& r);

// Measurability w.r.t. the extension across the section-null ideal: some
// product-measurable matrix agrees with the process off a set whose columns
// are conditionally null outside a Q-null set. Decided cell by cell: over
// each (X-atom, positive Y-atom) the conditionally supported values must be
// constant.
struct NilMeasReport {
    bool ok = false;
    Bits bad_atom_a = 0;  // X-atom of the first incoherent cell
    Bits bad_atom_b = 0;  // positive Y-atom of the first incoherent cell
    Rat obstruction = 0;  // Q-mass of the hull of all incoherent cells
};

NilMeasReport is_nil_measurable(const Process& p, const SkewProduct& r,
                                const Disintegration& dis);

// Pushes a matrix through the extended lifting level set by level set; the
// level sets must decompose across the section-null ideal.
Process lift_process(const ProdContext& ctx, const LowerDensity& pi,
                     const Process& p);

struct ModificationReport {
    bool has_version = false;
    Process theta;                  // the measurable version when found
    int bad_section_y = -1;         // incoherent-section witness
    Bits obstruction_a = 0;         // incoherent cell witness otherwise
    Bits obstruction_b = 0;
    std::vector<Bits> omega;        // decomposition pieces used
    std::vector<Bits> exceptional;  // per piece: Y-hull of repaired columns
};

// Builds an equivalent measurable version through the splitting lifting, or
// reports why none exists. `force_split` exercises the two-piece assembly
// over a decomposition of the grid.
ModificationReport measurable_version(const Process& p, const ProdContext& ctx,
                                      const SplitLifting& split,
                                      bool force_split = false);

}  // namespace finwb
