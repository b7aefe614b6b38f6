#include "finwb/finspace.hpp"

#include <algorithm>
#include <cstdlib>
#include <map>
#include <stdexcept>
#include <string>

namespace finwb {

int ground_cap() {
    static int cap = [] {
        if (const char* env = std::getenv("FINWB_GROUND_CAP")) {
            int v = std::atoi(env);
            if (v >= 1 && v <= 64) return v;
        }
        return 16;
    }();
    return cap;
}

Bits SigmaAlg::atom_of(int x) const {
    for (Bits a : atoms)
        if (test_bit(a, x)) return a;
    throw std::logic_error("point outside every atom");
}

SigmaAlg discrete_algebra(int ground) {
    SigmaAlg alg{ground, {}};
    for (int i = 0; i < ground; ++i) alg.atoms.push_back(Bits(1) << i);
    return alg;
}

SigmaAlg trivial_algebra(int ground) {
    return SigmaAlg{ground, {full_mask(ground)}};
}

void validate(const SigmaAlg& alg) {
    if (alg.ground < 1) throw std::invalid_argument("ground set must be nonempty");
    Bits seen = 0;
    for (Bits a : alg.atoms) {
        if (a == 0) throw std::invalid_argument("empty atom");
        if (a & seen) throw std::invalid_argument("atoms not disjoint");
        seen |= a;
    }
    if (seen != full_mask(alg.ground))
        throw std::invalid_argument("atoms do not cover the ground set");
    for (size_t i = 1; i < alg.atoms.size(); ++i)
        if (lowest_bit(alg.atoms[i - 1]) > lowest_bit(alg.atoms[i]))
            throw std::invalid_argument("atoms not sorted by least member");
}

SigmaAlg sigma_generate(int ground, const std::vector<Bits>& sets) {
    Bits full = full_mask(ground);
    for (Bits s : sets)
        if (!subset(s, full))
            throw std::invalid_argument("generator set not contained in ground");
    // Signature of a point = membership pattern across generators; atoms are
    // the signature classes, ordered by least member (ascending point scan).
    std::vector<Bits> atoms;
    std::map<std::vector<bool>, size_t> index;
    for (int x = 0; x < ground; ++x) {
        std::vector<bool> sig;
        sig.reserve(sets.size());
        for (Bits s : sets) sig.push_back(test_bit(s, x));
        auto [it, fresh] = index.emplace(std::move(sig), atoms.size());
        if (fresh) atoms.push_back(0);
        atoms[it->second] |= Bits(1) << x;
    }
    return SigmaAlg{ground, std::move(atoms)};
}

bool is_measurable(const SigmaAlg& alg, Bits e) {
    for (Bits a : alg.atoms) {
        Bits i = a & e;
        if (i != 0 && i != a) return false;
    }
    return true;
}

bool is_subalgebra(const SigmaAlg& sub, const SigmaAlg& fine) {
    if (sub.ground != fine.ground) return false;
    for (Bits a : sub.atoms)
        if (!is_measurable(fine, a)) return false;
    return true;
}

bool same_algebra(const SigmaAlg& a, const SigmaAlg& b) {
    return a.ground == b.ground && a.atoms == b.atoms;
}

std::vector<Bits> measurable_sets(const SigmaAlg& alg) {
    size_t n = alg.atoms.size();
    if (n > 20) throw std::invalid_argument("algebra too large to enumerate");
    std::vector<Bits> out(size_t(1) << n, 0);
    for (size_t m = 0; m < out.size(); ++m)
        for (size_t i = 0; i < n; ++i)
            if ((m >> i) & 1) out[m] |= alg.atoms[i];
    return out;
}

Rat FinMeasure::mass(Bits e) const {
    Rat s = 0;
    for (int i : bit_indices(e)) s += weights[size_t(i)];
    return s;
}

void validate(const FinMeasure& m) {
    validate(m.algebra);
    if (m.algebra.ground != m.ground || int(m.weights.size()) != m.ground)
        throw std::invalid_argument("measure shape mismatch");
    Rat s = 0;
    for (const Rat& w : m.weights) {
        if (w < 0) throw std::invalid_argument("negative point weight");
        s += w;
    }
    if (s != 1) throw std::invalid_argument("weights do not sum to 1");
}

Bits null_zone(const FinMeasure& m) {
    Bits z = 0;
    for (Bits a : m.algebra.atoms)
        if (m.mass(a) == 0) z |= a;
    return z;
}

static void require_subalgebra(const FinMeasure& m, const SigmaAlg& sub) {
    if (!is_subalgebra(sub, m.algebra))
        throw std::invalid_argument("not a sub-σ-algebra of the measure's algebra");
}

Rat inner_measure(const FinMeasure& m, const SigmaAlg& sub, Bits a) {
    require_subalgebra(m, sub);
    Rat s = 0;
    for (Bits b : sub.atoms)
        if (subset(b, a)) s += m.mass(b);
    return s;
}

Rat outer_measure(const FinMeasure& m, const SigmaAlg& sub, Bits a) {
    require_subalgebra(m, sub);
    Rat s = 0;
    for (Bits b : sub.atoms)
        if (b & a) s += m.mass(b);
    return s;
}

Bits envelope(const FinMeasure& m, const SigmaAlg& sub, Bits a, EnvelopeChoice choice) {
    require_subalgebra(m, sub);
    Bits e = 0;
    for (Bits b : sub.atoms) {
        if (b & a)
            e |= b;
        else if (choice == EnvelopeChoice::maximal && m.mass(b) == 0)
            e |= b;
    }
    return e;
}

SigmaAlg measure_completion_algebra(const FinMeasure& m) {
    SigmaAlg out{m.ground, {}};
    for (Bits a : m.algebra.atoms) {
        if (m.mass(a) > 0)
            out.atoms.push_back(a);
        else
            for (int x : bit_indices(a)) out.atoms.push_back(Bits(1) << x);
    }
    std::sort(out.atoms.begin(), out.atoms.end(),
              [](Bits a, Bits b) { return lowest_bit(a) < lowest_bit(b); });
    return out;
}

CompleteSpace completion(const FinMeasure& m) {
    // Null points are shattered into singletons; what remains of each atom
    // (its positive-weight part) stays one block.
    Bits nulls = 0;
    for (int x = 0; x < m.ground; ++x)
        if (m.weights[size_t(x)] == 0) nulls |= Bits(1) << x;
    SigmaAlg completed{m.ground, {}};
    for (int x = 0; x < m.ground; ++x) {
        if (test_bit(nulls, x)) {
            completed.atoms.push_back(Bits(1) << x);
        } else {
            Bits a = m.algebra.atom_of(x) & ~nulls;
            if (lowest_bit(a) == x) completed.atoms.push_back(a);
        }
    }
    std::sort(completed.atoms.begin(), completed.atoms.end(),
              [](Bits a, Bits b) { return lowest_bit(a) < lowest_bit(b); });
    FinMeasure ext{m.ground, completed, m.weights};
    return CompleteSpace{std::move(ext), completed};
}

}  // namespace finwb
