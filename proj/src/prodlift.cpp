#include "finwb/prodlift.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <stdexcept>

namespace finwb {

namespace {

// Column mask {(x, y) : x ∈ xs} for a fixed y.
Bits col(const ProductSpace& ps, Bits xs, int y) {
    Bits out = 0;
    for (int x : bit_indices(xs)) out |= Bits(1) << ps.pidx(x, y);
    return out;
}

Bits support_of(const FinMeasure& m) {
    Bits s = 0;
    for (int x = 0; x < m.ground; ++x)
        if (m.weights[size_t(x)] > 0) s |= Bits(1) << x;
    return s;
}

}  // namespace

ProdContext make_context(const SkewProduct& r, const Disintegration& dis) {
    validate(r, dis);
    ProdContext ctx;
    ctx.r = r;
    ctx.dis = dis;
    ctx.chat = completed_product_algebra(r);
    ctx.nullzone = product_null_zone(r);
    for (Bits a : r.space.product_algebra.atoms)
        if (r.mass(a) > 0) ctx.pos_atoms.push_back(a);
    std::sort(ctx.pos_atoms.begin(), ctx.pos_atoms.end());
    ctx.rmeas = FinMeasure{r.space.ground(), ctx.chat, r.weights};
    return ctx;
}

NilReport is_nil(const ProdContext& ctx, Bits e) {
    NilReport rep;
    for (int y = 0; y < ctx.r.space.ny; ++y) {
        Bits sec = section_y(ctx.r.space, e, y);
        // Conditionally null means contained in the null-atom zone of S_y.
        Bits zone = null_zone(ctx.dis.measure_y[size_t(y)]);
        if ((sec & ~zone) != 0) rep.bad_y |= Bits(1) << y;
    }
    for (int y : bit_indices(rep.bad_y))
        rep.cover |= ctx.r.space.yalg.atom_of(y);
    rep.cover_mass = ctx.r.Q.mass(rep.cover);
    rep.nil = rep.cover_mass == 0;
    return rep;
}

NilDecomp nil_member_decompose(const ProdContext& ctx, Bits e) {
    const ProductSpace& ps = ctx.r.space;
    NilDecomp out;
    for (Bits b : ps.yalg.atoms) {
        if (ctx.r.Q.mass(b) == 0) continue;  // absorbed into the nil part
        int y0 = lowest_bit(b);
        Bits zone = null_zone(ctx.dis.measure_y[size_t(y0)]);
        Bits ref = section_y(ps, e, y0) & ~zone;
        bool good = true;
        for (int y : bit_indices(b))
            if ((section_y(ps, e, y) & ~zone) != ref) good = false;
        Bits wb = 0;
        if (good) {
            for (Bits a : ps.xalg.atoms) {
                if (subset(a, zone)) continue;
                Bits hit = a & ref;
                if (hit == a)
                    wb |= a;
                else if (hit != 0)
                    good = false;  // a positive atom cut by the section
            }
        }
        if (!good) {
            out.bad_atom_b = b;
            return out;
        }
        out.w |= rect(ps, wb, b);
    }
    if (!is_nil(ctx, e ^ out.w).nil)
        throw std::logic_error("decomposition residue not conditionally null");
    out.ok = true;
    return out;
}

Bits extend_lifting_nil(const ProdContext& ctx, const LowerDensity& pi1, Bits e) {
    NilDecomp d = nil_member_decompose(ctx, e);
    if (!d.ok)
        throw std::invalid_argument(
            "set is not a product set modulo conditionally null sections");
    return pi1.apply(d.w);
}

std::vector<Bits> pzero_blocks(const ProdContext& ctx, const SigmaAlg& c) {
    const ProductSpace& ps = ctx.r.space;
    auto closure = [&](int p) {
        Bits s = Bits(1) << p;
        for (;;) {
            Bits grown = s;
            for (int y = 0; y < ps.ny; ++y) {
                Bits sec = section_y(ps, grown, y);
                if (sec == 0) continue;
                Bits hull = 0;
                for (Bits a : c.atoms)
                    if (a & sec) hull |= a;
                grown |= col(ps, hull, y);
            }
            for (int x = 0; x < ps.nx; ++x) {
                Bits row = section_x(ps, grown, x);
                if (row == 0) continue;
                Bits hull = 0;
                for (Bits b : ps.yalg.atoms)
                    if (b & row) hull |= b;
                grown |= rect(ps, Bits(1) << x, hull);
            }
            if (grown == s) return s;
            s = grown;
            if ((s & ~ctx.nullzone) != 0) return Bits(0);  // escapes the ideal
        }
    };
    std::set<Bits> blocks;
    for (int p : bit_indices(ctx.nullzone)) {
        Bits cl = closure(p);
        if (cl != 0 && subset(cl, ctx.nullzone)) blocks.insert(cl);
    }
    return std::vector<Bits>(blocks.begin(), blocks.end());
}

namespace {

// Deterministic selection of measurable sets of alg: everything when the
// atom count is small, otherwise a structured-plus-pseudorandom sample.
std::vector<Bits> sampled_sets(const SigmaAlg& alg, size_t target) {
    size_t n = alg.atoms.size();
    std::vector<Bits> out;
    if (n <= 12) return measurable_sets(alg);
    out.push_back(0);
    std::uint64_t state = 0x9e3779b97f4a7c15ull;
    auto from_mask = [&](std::uint64_t mask) {
        Bits e = 0;
        for (size_t i = 0; i < n; ++i)
            if (mask >> i & 1) e |= alg.atoms[i];
        return e;
    };
    for (size_t i = 0; i < n; ++i) {
        out.push_back(alg.atoms[i]);
        out.push_back(from_mask(~(std::uint64_t(1) << i)));
    }
    out.push_back(from_mask(~std::uint64_t(0)));
    while (out.size() < target) {
        state = state * 6364136223846793005ull + 1442695040888963407ull;
        out.push_back(from_mask(state >> 8));
    }
    return out;
}

}  // namespace

PhiResult build_phi(const ProdContext& ctx, const SigmaAlg& c,
                    const std::vector<Bits>& gens, EnvelopeChoice choice) {
    const ProductSpace& ps = ctx.r.space;
    const int nx = ps.nx, ny = ps.ny;
    Bits fullX = full_mask(nx);
    Bits fullP = full_mask(ps.ground());

    InnerRegularityCert cert = check_inner_regular(ctx.r, ctx.dis, c);
    if (!cert.ok)
        throw std::invalid_argument("the base algebra is not inner regular");
    if (!same_algebra(sigma_generate(nx, gens), c))
        throw std::invalid_argument("generators do not generate the base algebra");

    PhiResult res;
    res.pzero = pzero_blocks(ctx, c);

    // Per-y densities with stage envelopes intersected against the sections
    // of the product-side envelopes.
    std::vector<FinMeasure> my;
    for (int y = 0; y < ny; ++y) {
        FinMeasure base{nx, c, ctx.dis.measure_y[size_t(y)].weights};
        my.push_back(FinMeasure{nx, measure_completion_algebra(base), base.weights});
        res.family.tau_y.push_back(initial_density(my.back()));
        res.family.traces.emplace_back();
    }

    struct Stage {
        SigmaAlg malg;
        Bits M = 0, MY = 0, W1 = 0, W2 = 0;
    };
    std::vector<Stage> st(1);
    std::vector<Bits> done;  // retained generators
    auto stage_alg = [&](const SigmaAlg& cg) {
        std::vector<Bits> g = res.pzero;
        for (Bits a : cg.atoms)
            for (Bits b : ps.yalg.atoms) g.push_back(rect(ps, a, b));
        return sigma_generate(ps.ground(), g);
    };
    st[0].malg = stage_alg(trivial_algebra(nx));

    for (Bits m : gens) {
        SigmaAlg cb = sigma_generate(nx, done);
        if (is_measurable(cb, m)) {
            for (int y = 0; y < ny; ++y) {
                ChainStep step;
                step.gen = m;
                step.skipped = true;
                res.family.traces[size_t(y)].steps.push_back(step);
            }
            continue;
        }
        Stage s;
        s.M = m;
        s.MY = rect(ps, m, full_mask(ny));
        Bits McY = rect(ps, fullX & ~m, full_mask(ny));
        std::vector<Bits> cbb;
        for (Bits a : cb.atoms)
            for (Bits b : ps.yalg.atoms) cbb.push_back(rect(ps, a, b));
        SigmaAlg cbB = sigma_generate(ps.ground(), cbb);
        s.W1 = envelope(ctx.rmeas, cbB, s.MY, choice);
        s.W2 = envelope(ctx.rmeas, cbB, McY, choice);
        for (int y = 0; y < ny; ++y) {
            LowerDensity& tau = res.family.tau_y[size_t(y)];
            ChainStep step;
            step.gen = m;
            if (is_measurable(tau.domain, m)) {
                step.skipped = true;
                res.family.traces[size_t(y)].steps.push_back(step);
                continue;
            }
            step.env1 = envelope(my[size_t(y)], tau.domain, m, choice) &
                        section_y(ps, s.W1, y);
            step.env2 = envelope(my[size_t(y)], tau.domain, fullX & ~m, choice) &
                        section_y(ps, s.W2, y);
            tau = extend_density_L3(tau, m, step.env1, step.env2);
            res.family.traces[size_t(y)].steps.push_back(step);
            res.family.traces[size_t(y)].stages.push_back(tau);
        }
        done.push_back(m);
        s.malg = stage_alg(sigma_generate(nx, done));
        st.push_back(std::move(s));
    }

    // Null-cylinder content for the base stage. X is partitioned into the
    // τ_y-closure blocks (x joins the connected group of positive τ_y-atoms
    // its class spans); every union of blocks is a fixed point of τ_y. Each
    // block is assigned to the lowest positive Y-atom its carrier couples
    // with, and a null cylinder receives exactly the blocks assigned to the
    // positive cylinders essentially contained in the evaluated set — an
    // intersective grant because the blocks are pairwise disjoint.
    std::vector<Bits> pos_b, null_b;
    for (Bits b : ps.yalg.atoms)
        (ctx.r.Q.mass(b) > 0 ? pos_b : null_b).push_back(b);
    // grant[b][b'] = x-content of null cylinder X×b contributed by the
    // positive cylinder X×b'.
    std::map<Bits, std::map<Bits, Bits>> grant;
    for (Bits b : null_b) {
        const LowerDensity& tau = res.family.tau_y[size_t(lowest_bit(b))];
        Bits supp = support_of(tau.m);
        std::vector<Bits> comp;  // connected unions of positive τ-atoms
        for (Bits a : tau.domain.atoms)
            if (tau.m.mass(a) > 0) comp.push_back(a & supp);
        for (int x = 0; x < nx; ++x) {
            Bits s = tau.assign[size_t(x)] & supp;
            Bits merged = s;
            std::vector<Bits> next;
            for (Bits k : comp)
                if ((k & s) != 0) merged |= k;
                else next.push_back(k);
            next.push_back(merged);
            comp.swap(next);
        }
        for (Bits k : comp) {
            Bits block = 0;
            for (int x = 0; x < nx; ++x)
                if (subset(tau.assign[size_t(x)] & supp, k)) block |= Bits(1) << x;
            Bits target = 0;
            for (Bits bp : pos_b)
                if (ctx.r.mass(rect(ps, block, bp)) > 0) {
                    target = bp;
                    break;
                }
            if (target == 0)
                throw std::logic_error("a block couples with no positive cylinder");
            grant[b][target] |= block;
        }
    }

    // Stage evaluation with memoization; stage 0 is the cylinder density,
    // each successor is the one-generator extension followed by per-column
    // renormalization through τ_y.
    std::vector<std::map<Bits, Bits>> memo(st.size());
    std::function<Bits(size_t, Bits)> eval = [&](size_t i, Bits e) -> Bits {
        auto it = memo[i].find(e);
        if (it != memo[i].end()) return it->second;
        Bits out = 0;
        if (i == 0) {
            // Essential cylinder hull at the positive columns; the null
            // cylinders receive the blocks granted by the positive cylinders
            // essentially contained in e, which the stages above grade
            // through the M-masking and the per-column renormalization.
            std::vector<Bits> held;
            for (Bits b : pos_b)
                if (ctx.r.mass(rect(ps, fullX, b) & ~e) == 0) {
                    out |= rect(ps, fullX, b);
                    held.push_back(b);
                }
            for (Bits b : null_b) {
                Bits xs = 0;
                for (Bits bp : held) xs |= grant[b][bp];
                out |= rect(ps, xs, b);
            }
        } else {
            const Stage& s = st[i];
            Bits McY = fullP & ~s.MY;
            Bits G = 0, H = 0;
            for (Bits g : st[i - 1].malg.atoms) {
                if ((g & s.MY) != 0 && subset(g & s.MY, e)) G |= g;
                if ((g & McY) != 0 && subset(g & McY, e)) H |= g;
            }
            if (((G & s.MY) | (H & McY)) != e)
                throw std::logic_error("set not measurable at its stage");
            Bits bar = (s.MY & eval(i - 1, (G & s.W1) | (H & ~s.W1 & fullP))) |
                       (McY & eval(i - 1, (H & s.W2) | (G & ~s.W2 & fullP)));
            for (int y = 0; y < ny; ++y)
                out |= col(ps, res.family.tau_y[size_t(y)].apply(section_y(ps, bar, y)),
                           y);
        }
        memo[i][e] = out;
        return out;
    };

    // Final extension: every completed-product set is R̂-equivalent to the
    // union of the positive product atoms it contains, which is a 𝔠⊗𝔅 set
    // by inner regularity.
    auto phi_set = [&](Bits e) {
        Bits v = 0;
        for (Bits a : ctx.pos_atoms)
            if (subset(a, e)) v |= a;
        return eval(st.size() - 1, v);
    };

    // Per-point classes: positive points carry their atom; the class of a
    // free point is the minimum of its membership filter (greedy removal is
    // exact because the filter is closed under intersections).
    const auto& atoms = ctx.chat.atoms;
    res.phi = LowerDensity{ctx.rmeas, ctx.chat,
                           std::vector<Bits>(size_t(ps.ground()), 0)};
    for (int p = 0; p < ps.ground(); ++p) {
        Bits a = ctx.chat.atom_of(p);
        if (ctx.r.mass(a) > 0) {
            res.phi.assign[size_t(p)] = a;
            continue;
        }
        Bits g = fullP;
        for (Bits drop : atoms) {
            Bits trial = g & ~drop;
            if (test_bit(phi_set(trial), p)) g = trial;
        }
        if (ctx.r.mass(g) == 0)
            throw std::logic_error("extracted class has measure zero");
        res.phi.assign[size_t(p)] = g;
    }
    validate(res.phi);

    // The point classes must reproduce the set function everywhere checked.
    for (Bits e : sampled_sets(ctx.chat, 2048)) {
        if (phi_set(e) != res.phi.apply(e))
            throw std::logic_error("class table disagrees with the recursion");
    }

    // Codomain: record the finer σ(𝔠⊗𝔅 ∪ 𝔓) when every checked value lands
    // in it, the guaranteed σ(𝔄⊗𝔅 ∪ 𝔓) otherwise.
    SigmaAlg fine = stage_alg(c);
    std::vector<Bits> coarse_gens = res.pzero;
    for (Bits a : ps.product_algebra.atoms) coarse_gens.push_back(a);
    SigmaAlg coarse = sigma_generate(ps.ground(), coarse_gens);
    bool fits_fine = true;
    for (Bits e : sampled_sets(ctx.chat, 512)) {
        Bits v = phi_set(e);
        if (!is_measurable(fine, v)) fits_fine = false;
        if (!is_measurable(coarse, v))
            throw std::logic_error("value escapes the product-and-null codomain");
    }
    res.codomain = fits_fine ? fine : coarse;
    return res;
}

PsiResult saturate_density(const ProdContext& ctx, const PhiResult& phires) {
    const ProductSpace& ps = ctx.r.space;
    PsiResult out;
    out.psi = phires.phi;
    for (int y = 0; y < ps.ny; ++y) {
        if (ctx.r.Q.mass(ps.yalg.atom_of(y)) > 0) continue;  // already exhaustive
        const LowerDensity& tau = phires.family.tau_y[size_t(y)];
        Bits suppy = support_of(tau.m);
        // One shared positive product atom per conditionally positive class.
        std::map<Bits, Bits> pick;
        for (Bits alpha : tau.domain.atoms) {
            if (tau.m.mass(alpha) == 0) continue;
            Bits shared = 0;
            bool first = true;
            for (int x : bit_indices(alpha & suppy)) {
                Bits g = phires.phi.assign[size_t(ps.pidx(x, y))];
                if (first) shared = g, first = false;
                else if (g != shared)
                    throw std::logic_error("column classes differ inside one atom");
            }
            Bits sel = 0;
            for (Bits a : ctx.pos_atoms)
                if (ctx.r.mass(a & ~shared) == 0) {
                    sel = a;
                    break;
                }
            if (sel == 0) throw std::logic_error("class without a positive atom");
            pick[alpha] = sel;
            if (ctx.r.mass(shared & ~sel) > 0) out.changes.emplace_back(y, sel);
        }
        // Classes collapse along the τ_y classes, so sections stay τ_y-fixed.
        for (int x = 0; x < ps.nx; ++x) {
            Bits gt = tau.assign[size_t(x)];
            Bits g = 0;
            for (const auto& [alpha, sel] : pick)
                if (subset(alpha, gt)) g |= sel;
            if (g == 0) continue;  // class met no conditionally positive atom
            size_t p = size_t(ps.pidx(x, y));
            if (ctx.r.mass(g & ~out.psi.assign[p]) != 0)
                throw std::logic_error("saturation must shrink classes");
            out.psi.assign[p] = g;
        }
    }
    validate(out.psi);
    return out;
}

SplitLifting build_split_lifting(const ProdContext& ctx, const PsiResult& psi,
                                 const PhiResult& phires, TieBreak tb) {
    const ProductSpace& ps = ctx.r.space;
    SplitLifting out;
    for (const LowerDensity& tau : phires.family.tau_y)
        out.sigma_y.push_back(lift_from_density(tau, tb));
    out.pi = LowerDensity{ctx.rmeas, ctx.chat,
                          std::vector<Bits>(size_t(ps.ground()), 0)};
    for (int y = 0; y < ps.ny; ++y) {
        const LowerDensity& sy = out.sigma_y[size_t(y)];
        Bits suppy = support_of(sy.m);
        for (int x = 0; x < ps.nx; ++x) {
            Bits alpha = sy.assign[size_t(x)];
            Bits g = 0;
            for (int xx : bit_indices(alpha & suppy))
                g |= psi.psi.assign[size_t(ps.pidx(xx, y))];
            out.pi.assign[size_t(ps.pidx(x, y))] = g;
        }
    }
    validate(out.pi);
    if (!is_lifting(out.pi))
        throw std::logic_error("section composition did not yield a lifting");
    return out;
}

SectionModReport section_modification(const ProdContext& ctx,
                                      const SplitLifting& split, Bits e) {
    const ProductSpace& ps = ctx.r.space;
    if (!is_measurable(ctx.chat, e))
        throw std::invalid_argument("set not measurable in the completion");
    SectionModReport rep;
    Bits pie = split.pi.apply(e);
    Bits bad = 0;
    for (int y = 0; y < ps.ny; ++y) {
        Bits sec = split.sigma_y[size_t(y)].apply(section_y(ps, e, y));
        rep.etilde |= col(ps, sec, y);
        if (sec != section_y(ps, pie, y)) bad |= Bits(1) << y;
    }
    for (int y : bit_indices(bad)) rep.exceptional_cover |= ps.yalg.atom_of(y);
    rep.cover_mass = ctx.r.Q.mass(rep.exceptional_cover);
    rep.measurable = is_measurable(ctx.chat, rep.etilde);
    return rep;
}

SplitOracleReport split_lifting_oracle(const ProdContext& ctx,
                                       const SplitLifting& split) {
    const ProductSpace& ps = ctx.r.space;
    // A per-point atom table is a splitting lifting iff on every column the
    // class map is realizable by one per-column lifting: each point must see
    // a conditionally positive atom whose positive points all share its
    // class, and points positive in an atom must agree across that atom.
    auto valid = [&](const std::vector<Bits>& cls) {
        for (int y = 0; y < ps.ny; ++y) {
            const FinMeasure& sy = ctx.dis.measure_y[size_t(y)];
            Bits zone = null_zone(sy);
            Bits supp = support_of(sy);
            for (int x = 0; x < ps.nx; ++x) {
                Bits mine = cls[size_t(ps.pidx(x, y))];
                auto agrees = [&](Bits a) {
                    for (int xx : bit_indices(a & supp))
                        if (cls[size_t(ps.pidx(xx, y))] != mine) return false;
                    return true;
                };
                if (!test_bit(zone, x)) {
                    if (!agrees(sy.algebra.atom_of(x))) return false;
                } else {
                    bool found = false;
                    for (Bits a : sy.algebra.atoms)
                        if (!subset(a, zone) && agrees(a)) found = true;
                    if (!found) return false;
                }
            }
        }
        return true;
    };

    SplitOracleReport rep;
    std::vector<int> freep = bit_indices(ctx.nullzone);
    size_t k = ctx.pos_atoms.size();
    double count = 1;
    for (size_t i = 0; i < freep.size(); ++i) count *= double(k);
    if (count > (1 << 22))
        throw std::invalid_argument("instance too large for the exhaustive oracle");

    std::vector<Bits> cls(size_t(ps.ground()), 0);
    for (int p = 0; p < ps.ground(); ++p)
        if (!test_bit(ctx.nullzone, p)) cls[size_t(p)] = ctx.chat.atom_of(p);
    std::vector<size_t> digit(freep.size(), 0);
    for (;;) {
        for (size_t i = 0; i < freep.size(); ++i)
            cls[size_t(freep[i])] = ctx.pos_atoms[digit[i]];
        ++rep.total;
        if (valid(cls)) {
            ++rep.valid;
            if (cls == split.pi.assign) rep.constructed_found = true;
        }
        size_t i = 0;
        for (; i < digit.size(); ++i) {
            if (++digit[i] < k) break;
            digit[i] = 0;
        }
        if (i == digit.size()) break;
    }
    return rep;
}

}  // namespace finwb
