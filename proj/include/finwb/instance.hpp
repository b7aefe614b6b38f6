#pragma once

#include "finwb/product.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace finwb {

// Knobs for the seeded instance generator. Rates are probabilities in [0, 1];
// sizes are capped by the ground-set cap (and 64 product points overall).
struct InstanceSpec {
    int size_x = 3;
    int size_y = 2;
    double null_rate = 0.0;      // chance of zeroing a marginal point weight
    double coarse_b_rate = 0.0;  // chance of merging a Y-point into its left
                                 // neighbour's block
    int extra_gens = 0;          // redundant generators appended to the list
    std::uint64_t seed = 1;
};

void validate(const InstanceSpec& spec);

// A fully materialized workbench instance: the coupling (with its marginals),
// its conditionals, the inner-regular subalgebra, and the generator sequence
// driving the density constructions.
struct Instance {
    InstanceSpec spec;
    SkewProduct r;
    Disintegration dis;
    SigmaAlg c;
    std::vector<Bits> gens;
};

// Deterministic per seed: identical spec gives identical bytes on every run.
Instance generate_instance(const InstanceSpec& spec);

// Textual (JSON) form: rationals as "num/den" strings, sets as sorted index
// arrays, partitions as arrays of arrays. serialize/parse round-trips
// byte-exactly.
std::string serialize(const Instance& inst);
Instance parse_instance(const std::string& text);

}  // namespace finwb
