#pragma once

#include <bit>
#include <cstdint>
#include <vector>

namespace finwb {

// Sets over a ground of at most 64 points, encoded as bit masks.
using Bits = std::uint64_t;

inline Bits full_mask(int n) { return n >= 64 ? ~Bits(0) : (Bits(1) << n) - 1; }
inline bool subset(Bits a, Bits b) { return (a & ~b) == 0; }
inline int popcount(Bits a) { return std::popcount(a); }
inline bool test_bit(Bits a, int i) { return (a >> i) & 1; }
inline int lowest_bit(Bits a) { return std::countr_zero(a); }
inline int highest_bit(Bits a) { return 63 - std::countl_zero(a); }

inline std::vector<int> bit_indices(Bits a) {
    std::vector<int> out;
    while (a) {
        int i = std::countr_zero(a);
        out.push_back(i);
        a &= a - 1;
    }
    return out;
}

}  // namespace finwb
