#include "finwb/densities.hpp"

#include "finwb/condexp.hpp"

#include <stdexcept>

namespace finwb {

namespace {

Bits support_of(const FinMeasure& m) {
    Bits s = 0;
    for (int x = 0; x < m.ground; ++x)
        if (m.weights[size_t(x)] > 0) s |= Bits(1) << x;
    return s;
}

}  // namespace

Bits LowerDensity::support() const { return support_of(m); }

Bits LowerDensity::apply(Bits e) const {
    Bits supp = support();
    Bits out = 0;
    for (int x = 0; x < m.ground; ++x)
        if (subset(assign[size_t(x)] & supp, e)) out |= Bits(1) << x;
    return out;
}

void validate(const LowerDensity& d) {
    validate(d.m);
    validate(d.domain);
    if (!is_subalgebra(d.domain, d.m.algebra))
        throw std::invalid_argument("density domain not below the ambient algebra");
    if (int(d.assign.size()) != d.m.ground)
        throw std::invalid_argument("density assignment shape mismatch");
    Bits supp = support_of(d.m);
    for (int x = 0; x < d.m.ground; ++x) {
        Bits g = d.assign[size_t(x)];
        if (!is_measurable(d.domain, g))
            throw std::invalid_argument("class not domain-measurable");
        if ((g & supp) == 0)
            throw std::invalid_argument("class has measure zero");
        Bits a = d.domain.atom_of(x);
        if (d.m.mass(a) > 0 && ((g ^ a) & supp) != 0)
            throw std::invalid_argument(
                "point of a positive atom must carry its own atom");
    }
}

bool is_lifting(const LowerDensity& d) {
    Bits supp = support_of(d.m);
    for (Bits g : d.assign) {
        bool single = false;
        for (Bits a : d.domain.atoms)
            if (d.m.mass(a) > 0 && ((g ^ a) & supp) == 0) single = true;
        if (!single) return false;
    }
    return true;
}

bool density_axioms_ok(const LowerDensity& d, bool complement, std::string* why) {
    auto fail = [&](const std::string& w) {
        if (why) *why = w;
        return false;
    };
    Bits full = full_mask(d.m.ground);
    if (d.apply(0) != 0) return fail("empty set has nonempty image");
    if (d.apply(full) != full) return fail("full set not fixed");
    auto sets = measurable_sets(d.domain);
    Bits supp = support_of(d.m);
    size_t stride = sets.size() > 4096 ? sets.size() / 4096 + 1 : 1;
    for (size_t i = 0; i < sets.size(); i += stride) {
        Bits a = sets[i];
        Bits da = d.apply(a);
        if (((da ^ a) & supp) != 0) return fail("image differs on a positive set");
        if (complement && d.apply(full & ~a) != (full & ~da))
            return fail("complement law fails");
        for (size_t j = 0; j < sets.size(); j += stride) {
            Bits b = sets[j];
            if (d.apply(a & b) != (da & d.apply(b)))
                return fail("multiplicativity fails");
            if (((a ^ b) & supp) == 0 && da != d.apply(b))
                return fail("not constant on an a.e. class");
        }
    }
    return true;
}

SigmaAlg null_set_algebra(const FinMeasure& m) {
    // Null sets of the completion are the subsets of the null-atom zone;
    // zero-weight points inside positive atoms are not null sets.
    Bits zone = null_zone(m);
    Bits rest = full_mask(m.ground) & ~zone;
    SigmaAlg alg{m.ground, {}};
    for (int x = 0; x < m.ground; ++x) {
        if (test_bit(zone, x))
            alg.atoms.push_back(Bits(1) << x);
        else if (lowest_bit(rest) == x)
            alg.atoms.push_back(rest);
    }
    std::sort(alg.atoms.begin(), alg.atoms.end(),
              [](Bits a, Bits b) { return lowest_bit(a) < lowest_bit(b); });
    return alg;
}

LowerDensity initial_density(const FinMeasure& m) {
    Bits rest = full_mask(m.ground) & ~null_zone(m);
    if (rest == 0) throw std::invalid_argument("measure without support");
    LowerDensity d{m, null_set_algebra(m),
                   std::vector<Bits>(size_t(m.ground), rest)};
    return d;
}

namespace {

// Every null ambient atom must be measurable at the current stage; without
// this the extension formula can fail to be well defined across
// representations.
void require_null_sets_measurable(const LowerDensity& delta) {
    for (Bits a : delta.m.algebra.atoms)
        if (delta.m.mass(a) == 0 && !is_measurable(delta.domain, a))
            throw std::invalid_argument(
                "null sets not contained in the stage algebra (essential "
                "precondition)");
}

struct L3Eval {
    const LowerDensity* delta;
    Bits full, M, Mc, M1, M2;

    Bits value_rep(Bits G, Bits H) const {
        Bits p1 = delta->apply((G & M1) | (H & full & ~M1));
        Bits p2 = delta->apply((H & M2) | (G & full & ~M2));
        return (M & p1) | (Mc & p2);
    }

    // Canonical representation of a σ(𝔠∪{M})-measurable set.
    void canonical(Bits E, Bits* G, Bits* H) const {
        *G = *H = 0;
        for (Bits a : delta->domain.atoms) {
            if ((a & M) != 0 && subset(a & M, E)) *G |= a;
            if ((a & Mc) != 0 && subset(a & Mc, E)) *H |= a;
        }
    }

    Bits value(Bits E) const {
        Bits G, H;
        canonical(E, &G, &H);
        return value_rep(G, H);
    }
};

}  // namespace

LowerDensity extend_density_L3(const LowerDensity& delta, Bits M, Bits M1,
                               Bits M2) {
    const FinMeasure& m = delta.m;
    Bits full = full_mask(m.ground);
    if (!is_measurable(m.algebra, M))
        throw std::invalid_argument("new set not ambient-measurable");
    require_null_sets_measurable(delta);
    if (is_measurable(delta.domain, M)) return delta;  // extension of nothing

    Bits Mc = full & ~M;
    auto check_env = [&](Bits cover, Bits a, const char* which) {
        if (!subset(a, cover) || !is_measurable(delta.domain, cover) ||
            inner_measure(m, delta.domain, cover & ~a) != 0)
            throw std::invalid_argument(std::string("invalid envelope ") + which);
    };
    check_env(M1, M, "of the set");
    check_env(M2, Mc, "of the complement");

    std::vector<Bits> gens(delta.domain.atoms);
    gens.push_back(M);
    SigmaAlg ndom = sigma_generate(m.ground, gens);
    L3Eval ev{&delta, full, M, Mc, M1, M2};

    // Restriction coherence: the extension agrees with the input stage.
    for (Bits e : measurable_sets(delta.domain))
        if (ev.value(e) != delta.apply(e))
            throw std::logic_error("extension does not restrict to its input");

    // Representation independence across all (G, H) decompositions.
    std::vector<Bits> freeG, freeH;
    for (Bits a : delta.domain.atoms) {
        if ((a & M) == 0) freeG.push_back(a);
        if ((a & Mc) == 0) freeH.push_back(a);
    }
    auto nsets = measurable_sets(ndom);
    size_t nfree = freeG.size() + freeH.size();
    for (Bits e : nsets) {
        Bits G, H;
        ev.canonical(e, &G, &H);
        Bits base = ev.value_rep(G, H);
        if (nfree <= 8 && nsets.size() <= 256) {
            for (Bits mask = 0; mask < (Bits(1) << nfree); ++mask) {
                Bits g = G, h = H;
                for (size_t i = 0; i < freeG.size(); ++i)
                    if (test_bit(mask, int(i))) g ^= freeG[i];
                for (size_t i = 0; i < freeH.size(); ++i)
                    if (test_bit(mask, int(freeG.size() + i))) h ^= freeH[i];
                if (ev.value_rep(g, h) != base)
                    throw std::logic_error("representation-dependent extension");
            }
        } else {
            for (Bits a : freeG)
                if (ev.value_rep(G ^ a, H) != base)
                    throw std::logic_error("representation-dependent extension");
            for (Bits a : freeH)
                if (ev.value_rep(G, H ^ a) != base)
                    throw std::logic_error("representation-dependent extension");
        }
    }

    // Recover the per-point classes of the extended density.
    Bits supp = support_of(m);
    LowerDensity out{m, ndom, std::vector<Bits>(size_t(m.ground), 0)};
    for (int x = 0; x < m.ground; ++x) {
        Bits a = ndom.atom_of(x);
        if (m.mass(a) > 0) {
            out.assign[size_t(x)] = a;
            continue;
        }
        Bits g = full;
        for (Bits e : nsets)
            if (test_bit(ev.value(e), x)) g &= e;
        if ((g & supp) == 0 || !is_measurable(ndom, g))
            throw std::logic_error("extracted class invalid");
        for (Bits e : nsets)
            if (test_bit(ev.value(e), x) != subset(g & supp, e))
                throw std::logic_error("extension filter not principal");
        out.assign[size_t(x)] = g;
    }
    validate(out);
    return out;
}

Bits limit_density_e20(const std::vector<LowerDensity>& stages,
                       const FinMeasure& m, Bits B) {
    if (stages.empty()) throw std::invalid_argument("no stages");
    for (size_t i = 1; i < stages.size(); ++i)
        if (!is_subalgebra(stages[i - 1].domain, stages[i].domain))
            throw std::invalid_argument("stages not increasing");
    if (!is_measurable(stages.back().domain, B))
        throw std::invalid_argument("set not measurable at the final stage");

    size_t n = stages.size();
    std::vector<std::vector<Rat>> ev(n);
    RandVar chi{m.ground, std::vector<Rat>(size_t(m.ground), Rat(0)),
                stages.back().domain};
    for (int x : bit_indices(B)) chi.values[size_t(x)] = 1;
    Int kmax = 2;
    for (size_t s = 0; s < n; ++s) {
        ev[s] = cond_expect(chi, stages[s].domain, m).values;
        for (const Rat& v : ev[s])
            if (v < 1 && v >= 0) {
                // need 1 - 1/k > v eventually, i.e. k > 1/(1-v)
                Rat inv = 1 / (Rat(1) - v);
                Int need = numerator(inv) / denominator(inv) + 2;
                if (need > kmax) kmax = need;
            }
    }

    Bits full = full_mask(m.ground);
    Bits result = full;
    for (Int k = 1; k <= kmax; ++k) {
        Rat thr = Rat(1) - Rat(1, k);
        Bits un = 0;
        for (size_t nn = 0; nn < n; ++nn) {
            Bits in = full;
            for (size_t mm = nn; mm < n; ++mm) {
                Bits lvl = 0;
                for (int x = 0; x < m.ground; ++x)
                    if (ev[mm][size_t(x)] > thr) lvl |= Bits(1) << x;
                in &= stages[mm].apply(lvl);
            }
            un |= in;
        }
        result &= un;
    }
    return result;
}

std::pair<LowerDensity, ChainState> build_admissible(const FinMeasure& m,
                                                     const std::vector<Bits>& gens,
                                                     EnvelopeChoice choice) {
    LowerDensity tau = initial_density(m);
    ChainState trace;
    Bits full = full_mask(m.ground);
    for (Bits g : gens) {
        ChainStep step;
        step.gen = g;
        if (is_measurable(tau.domain, g)) {
            step.skipped = true;
            trace.steps.push_back(step);
            continue;
        }
        step.env1 = envelope(m, tau.domain, g, choice);
        step.env2 = envelope(m, tau.domain, full & ~g, choice);
        tau = extend_density_L3(tau, g, step.env1, step.env2);
        trace.steps.push_back(step);
        trace.stages.push_back(tau);
    }
    return {tau, trace};
}

LowerDensity lift_from_density(const LowerDensity& delta, TieBreak tb) {
    Bits supp = support_of(delta.m);
    LowerDensity out = delta;
    for (int x = 0; x < delta.m.ground; ++x) {
        Bits g = delta.assign[size_t(x)];
        Bits pick = 0;
        for (Bits a : delta.domain.atoms) {
            if (delta.m.mass(a) == 0) continue;
            if ((a & ~g & supp) != 0) continue;  // not inside the class
            if (pick == 0 || (tb == TieBreak::highest))
                pick = a;
            if (tb == TieBreak::lowest && pick != 0) break;
        }
        if (pick == 0) throw std::logic_error("class without a positive atom");
        out.assign[size_t(x)] = pick;
    }
    validate(out);
    return out;
}

EquiFamily equi_admissible_family(const SkewProduct& r, const Disintegration& dis,
                                  const SigmaAlg& c, const std::vector<Bits>& gens,
                                  EnvelopeChoice choice) {
    if (!is_subalgebra(c, r.space.xalg))
        throw std::invalid_argument("target algebra not below the X algebra");
    for (const SigmaAlg& ay : dis.algebra_y)
        if (!is_subalgebra(c, ay))
            throw std::invalid_argument("target algebra not below a section algebra");
    if (!same_algebra(sigma_generate(r.space.nx, gens), c))
        throw std::invalid_argument("generators do not generate the target algebra");

    EquiFamily fam;
    for (int y = 0; y < r.space.ny; ++y) {
        // Ambient: the completion of (X, 𝔠, S_y) — S_y-null 𝔠-atoms shatter
        // into singletons, zero-weight points of positive atoms stay bound.
        FinMeasure base{r.space.nx, c, dis.measure_y[size_t(y)].weights};
        FinMeasure my{base.ground, measure_completion_algebra(base), base.weights};
        auto [tau, trace] = build_admissible(my, gens, choice);
        fam.tau_y.push_back(std::move(tau));
        fam.traces.push_back(std::move(trace));
    }
    return fam;
}

}  // namespace finwb
