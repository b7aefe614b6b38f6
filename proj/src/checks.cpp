#include "finwb/checks.hpp"

#include "finwb/condexp.hpp"
#include "finwb/process.hpp"
#include "finwb/prodlift.hpp"

#include <chrono>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace finwb {

namespace {

// Shared per-instance state; the lifting pipeline is built on first use.
struct Rig {
    const Instance& inst;
    ProdContext ctx;
    PhiResult phi;
    PsiResult psi;
    SplitLifting split;
    bool built = false;

    explicit Rig(const Instance& i) : inst(i) {}
    void build() {
        if (built) return;
        ctx = make_context(inst.r, inst.dis);
        phi = build_phi(ctx, inst.c, inst.gens);
        psi = saturate_density(ctx, phi);
        split = build_split_lifting(ctx, psi, phi);
        built = true;
    }
};

std::string num(Bits b) { return std::to_string(b); }

void fail(CheckResult& res, const std::string& witness) {
    res.pass = false;
    res.notes.push_back("witness=" + witness);
}

// All measurable sets when the algebra is small, a seeded sample otherwise.
std::vector<Bits> sampled_sets(const SigmaAlg& alg, std::mt19937_64& rng,
                               int cap) {
    if (int(alg.atoms.size()) <= 12) return measurable_sets(alg);
    std::vector<Bits> out{0, alg.full()};
    for (int i = 2; i < cap; ++i) {
        Bits e = 0;
        for (Bits a : alg.atoms)
            if (rng() % 2) e |= a;
        out.push_back(e);
    }
    return out;
}

std::vector<Rat> random_product_function(const ProductSpace& ps,
                                         std::mt19937_64& rng) {
    std::vector<Rat> f(size_t(ps.ground()), Rat(0));
    for (Bits a : ps.product_algebra.atoms) {
        Rat v = Rat(int(rng() % 5), 1 + int(rng() % 3));
        for (int q : bit_indices(a)) f[size_t(q)] = v;
    }
    return f;
}

SigmaAlg random_subalgebra(const SigmaAlg& alg, std::mt19937_64& rng) {
    std::vector<Bits> blocks(2, 0);
    for (Bits a : alg.atoms) blocks[rng() % 2] |= a;
    std::vector<Bits> gens;
    for (Bits b : blocks)
        if (b != 0) gens.push_back(b);
    return sigma_generate(alg.ground, gens);
}

CheckResult check_fubini(Rig& rg, std::mt19937_64& rng) {
    CheckResult res{"fubini"};
    const SkewProduct& r = rg.inst.r;
    const ProductSpace& ps = r.space;
    // Exactness of the raw data first: total mass, marginals, conditional
    // probabilities, and Y-measurable conditional dependence.
    if (r.mass(full_mask(ps.ground())) != 1) fail(res, "total mass not 1");
    for (int x = 0; x < ps.nx && res.pass; ++x)
        if (r.mass(rect(ps, Bits(1) << x, ps.yalg.full())) !=
            r.P.weights[size_t(x)])
            fail(res, "x-marginal x=" + std::to_string(x));
    for (int y = 0; y < ps.ny && res.pass; ++y)
        if (r.mass(rect(ps, ps.xalg.full(), Bits(1) << y)) !=
            r.Q.weights[size_t(y)])
            fail(res, "y-marginal y=" + std::to_string(y));
    for (int y = 0; y < ps.ny && res.pass; ++y)
        if (rg.inst.dis.measure_y[size_t(y)].mass(ps.xalg.full()) != 1)
            fail(res, "conditional mass y=" + std::to_string(y));
    for (Bits b : ps.yalg.atoms) {
        if (!res.pass || r.Q.mass(b) == 0) continue;
        auto ys = bit_indices(b);
        for (Bits a : ps.xalg.atoms)
            for (size_t k = 1; k < ys.size() && res.pass; ++k)
                if (rg.inst.dis.measure_y[size_t(ys[k])].mass(a) !=
                    rg.inst.dis.measure_y[size_t(ys[0])].mass(a))
                    fail(res, "conditional not Y-measurable atom=" + num(a) +
                                  " y=" + std::to_string(ys[k]));
    }
    if (!res.pass) return res;
    auto sets = sampled_sets(ps.product_algebra, rng, 4096);
    for (Bits e : sets) {
        Rat rhs = 0;
        for (int y = 0; y < ps.ny; ++y)
            rhs += r.Q.weights[size_t(y)] *
                   rg.inst.dis.measure_y[size_t(y)].mass(section_y(ps, e, y));
        if (r.mass(e) != rhs) {
            fail(res, "set=" + num(e));
            break;
        }
    }
    res.notes.push_back("sets=" + std::to_string(sets.size()));
    for (int t = 0; t < 3 && res.pass; ++t) {
        auto f = random_product_function(ps, rng);
        auto rep = fubini_check(r, rg.inst.dis, f, t == 2);
        if (!rep.ok) fail(res, "integrand " + std::to_string(t) + ": " + rep.witness);
    }
    return res;
}

CheckResult check_t1(Rig& rg, std::mt19937_64& rng) {
    CheckResult res{"t1"};
    const SkewProduct& r = rg.inst.r;
    int funcs = 0, algs = 0;
    for (int a = 0; a < 3 && res.pass; ++a) {
        SigmaAlg c = random_subalgebra(r.space.xalg, rng);
        ++algs;
        for (int t = 0; t < 5 && res.pass; ++t) {
            auto f = random_product_function(r.space, rng);
            ++funcs;
            auto rep = t1_check(r, rg.inst.dis, c, f);
            if (!rep.ok) fail(res, "conditional: " + rep.witness);
            Bits d = 0;
            for (int tries = 0; tries < 16 && is_measurable(c, d); ++tries) {
                d = 0;
                for (Bits atom : r.space.xalg.atoms)
                    if (rng() % 2) d |= atom;
            }
            if (is_measurable(c, d)) continue;  // c already refines everything
            auto step = successor_step_check(r, rg.inst.dis, c, d, f);
            if (!step.ok)
                fail(res, "refinement d=" + num(d) + ": " + step.witness);
        }
    }
    res.notes.push_back("functions=" + std::to_string(funcs));
    res.notes.push_back("subalgebras=" + std::to_string(algs));
    return res;
}

std::vector<LowerDensity> admissible_chain(const Instance& inst,
                                           std::mt19937_64& rng,
                                           std::string* why) {
    const FinMeasure& m = inst.r.P;
    std::vector<Bits> gens;
    for (int g = 0; g < 3; ++g) gens.push_back(rng() & full_mask(m.ground));
    auto [tail, chain] = build_admissible(m, gens);
    (void)tail;
    std::vector<LowerDensity> stages{initial_density(m)};
    stages.insert(stages.end(), chain.stages.begin(), chain.stages.end());
    if (why) {
        int skipped = 0;
        for (const auto& s : chain.steps) skipped += s.skipped;
        *why = "generators=" + std::to_string(gens.size()) +
               " skipped=" + std::to_string(skipped);
    }
    return stages;
}

CheckResult check_l3(Rig& rg, std::mt19937_64& rng) {
    CheckResult res{"l3"};
    std::string trace;
    auto stages = admissible_chain(rg.inst, rng, &trace);
    for (size_t i = 0; i < stages.size() && res.pass; ++i) {
        std::string why;
        validate(stages[i]);
        if (!density_axioms_ok(stages[i], false, &why)) {
            fail(res, "stage " + std::to_string(i) + ": " + why);
            break;
        }
        if (i + 1 < stages.size())
            for (Bits e : measurable_sets(stages[i].domain))
                if (stages[i + 1].apply(e) != stages[i].apply(e)) {
                    fail(res, "restriction stage=" + std::to_string(i) +
                                  " set=" + num(e));
                    break;
                }
    }
    res.notes.push_back("stages=" + std::to_string(stages.size()));
    res.notes.push_back(trace);
    return res;
}

CheckResult check_e20(Rig& rg, std::mt19937_64& rng) {
    CheckResult res{"e20"};
    auto stages = admissible_chain(rg.inst, rng, nullptr);
    while (stages.size() < 4) stages.push_back(stages.back());
    const LowerDensity& tail = stages.back();
    for (Bits b : measurable_sets(tail.domain))
        if (limit_density_e20(stages, rg.inst.r.P, b) != tail.apply(b)) {
            fail(res, "set=" + num(b));
            break;
        }
    res.notes.push_back("stages=" + std::to_string(stages.size()));
    res.notes.push_back(
        "sets=" + std::to_string(measurable_sets(tail.domain).size()));
    return res;
}

CheckResult check_t2(Rig& rg, std::mt19937_64& rng) {
    CheckResult res{"t2"};
    rg.build();
    const ProductSpace& ps = rg.inst.r.space;
    const LowerDensity& phi = rg.phi.phi;
    SigmaAlg bhat = measure_completion_algebra(rg.inst.r.Q);
    auto sets = sampled_sets(rg.ctx.chat, rng, 512);
    if (phi.apply(0) != 0 ||
        phi.apply(full_mask(ps.ground())) != full_mask(ps.ground()))
        fail(res, "boundary values");
    for (Bits e : sets) {
        if (!res.pass) break;
        Bits v = phi.apply(e);
        if (rg.ctx.rmeas.mass(e ^ v) != 0) {
            fail(res, "identity set=" + num(e));
            break;
        }
        if (!is_measurable(rg.phi.codomain, v)) {
            fail(res, "codomain set=" + num(e));
            break;
        }
        Bits n = rng() & rg.ctx.nullzone;
        if (phi.apply(e ^ n) != v) {
            fail(res, "invariance set=" + num(e) + " null=" + num(n));
            break;
        }
        for (int y = 0; y < ps.ny; ++y) {
            Bits s = section_y(ps, v, y);
            if (rg.phi.family.tau_y[size_t(y)].apply(s) != s) {
                fail(res, "section set=" + num(e) + " y=" + std::to_string(y));
                break;
            }
        }
        for (int x = 0; x < ps.nx && res.pass; ++x)
            if (!is_measurable(bhat, section_x(ps, v, x))) {
                fail(res, "row set=" + num(e) + " x=" + std::to_string(x));
                break;
            }
    }
    size_t pcap = std::min<size_t>(sets.size(), 40);
    for (size_t i = 0; i < pcap && res.pass; ++i)
        for (size_t j = i + 1; j < pcap; ++j) {
            Bits a = phi.apply(sets[i]), b = phi.apply(sets[j]);
            if (subset(sets[i], sets[j]) && !subset(a, b)) {
                fail(res, "monotone " + num(sets[i]) + "," + num(sets[j]));
                break;
            }
            if (phi.apply(sets[i] & sets[j]) != (a & b)) {
                fail(res, "meet " + num(sets[i]) + "," + num(sets[j]));
                break;
            }
        }
    res.notes.push_back("sets=" + std::to_string(sets.size()));
    return res;
}

CheckResult check_p3(Rig& rg, std::mt19937_64& rng) {
    CheckResult res{"p3"};
    rg.build();
    const ProductSpace& ps = rg.inst.r.space;
    Bits fullp = full_mask(ps.ground());
    auto sets = sampled_sets(rg.ctx.chat, rng, 512);
    for (Bits e : sets) {
        Bits v = rg.psi.psi.apply(e);
        if (!subset(rg.phi.phi.apply(e), v)) {
            fail(res, "enlargement set=" + num(e));
            break;
        }
        if (rg.ctx.rmeas.mass(e ^ v) != 0) {
            fail(res, "identity set=" + num(e));
            break;
        }
        Bits vc = rg.psi.psi.apply(fullp & ~e);
        if ((v & vc) != 0) {
            fail(res, "disjointness set=" + num(e));
            break;
        }
        bool done = false;
        for (int y = 0; y < ps.ny && !done; ++y) {
            const FinMeasure& sy = rg.inst.dis.measure_y[size_t(y)];
            Bits joint =
                section_y(ps, v, y) | section_y(ps, vc, y) | null_zone(sy);
            if (sy.mass(ps.xalg.full() & ~joint) != 0) {
                fail(res, "exhaustion set=" + num(e) + " y=" + std::to_string(y));
                done = true;
            }
        }
        if (!res.pass) break;
    }
    res.notes.push_back("sets=" + std::to_string(sets.size()));
    res.notes.push_back("collapses=" + std::to_string(rg.psi.changes.size()));
    return res;
}

CheckResult check_t3(Rig& rg, std::mt19937_64& rng) {
    CheckResult res{"t3"};
    rg.build();
    const ProductSpace& ps = rg.inst.r.space;
    Bits fullp = full_mask(ps.ground());
    if (!is_lifting(rg.split.pi)) fail(res, "pi is not a lifting");
    for (size_t y = 0; y < rg.split.sigma_y.size() && res.pass; ++y)
        if (!is_lifting(rg.split.sigma_y[y]))
            fail(res, "sigma y=" + std::to_string(y));
    auto sets = sampled_sets(rg.ctx.chat, rng, 512);
    for (Bits e : sets) {
        if (!res.pass) break;
        Bits v = rg.split.pi.apply(e);
        if (rg.split.pi.apply(fullp & ~e) != (fullp & ~v)) {
            fail(res, "complement set=" + num(e));
            break;
        }
        if (rg.ctx.rmeas.mass(e ^ v) != 0) {
            fail(res, "identity set=" + num(e));
            break;
        }
        for (int y = 0; y < ps.ny; ++y) {
            Bits s = section_y(ps, v, y);
            if (rg.split.sigma_y[size_t(y)].apply(s) != s) {
                fail(res, "splitting set=" + num(e) + " y=" + std::to_string(y));
                break;
            }
        }
    }
    res.notes.push_back("sets=" + std::to_string(sets.size()));
    return res;
}

CheckResult check_c1(Rig& rg, std::mt19937_64& rng) {
    CheckResult res{"c1"};
    rg.build();
    auto sets = sampled_sets(rg.ctx.chat, rng, 256);
    Bits worst = 0;
    for (Bits e : sets) {
        auto mod = section_modification(rg.ctx, rg.split, e);
        if (!mod.measurable) {
            fail(res, "modification not measurable set=" + num(e));
            break;
        }
        if (mod.cover_mass != 0) {
            fail(res, "positive exceptional cover set=" + num(e));
            break;
        }
        worst |= mod.exceptional_cover;
    }
    res.notes.push_back("sets=" + std::to_string(sets.size()));
    res.notes.push_back("exceptional_hull=" + num(worst));
    return res;
}

CheckResult check_t4(Rig& rg, std::mt19937_64& rng) {
    CheckResult res{"t4"};
    rg.build();
    const ProductSpace& ps = rg.inst.r.space;
    auto sets = sampled_sets(rg.ctx.chat, rng, 128);
    int members = 0;
    for (Bits w : sets) {
        // Perturb by a member of the section-null ideal: free columns over
        // Q-null Y-atoms, conditionally null X-zones elsewhere.
        Bits n = 0;
        for (int y = 0; y < ps.ny; ++y) {
            Bits allowed =
                rg.inst.r.Q.mass(ps.yalg.atom_of(y)) == 0
                    ? ps.xalg.full()
                    : null_zone(rg.inst.dis.measure_y[size_t(y)]);
            for (int x : bit_indices(allowed))
                if (rng() % 2) n |= Bits(1) << ps.pidx(x, y);
        }
        if (!is_nil(rg.ctx, n).nil) {
            fail(res, "constructed perturbation escapes the ideal n=" + num(n));
            break;
        }
        Bits e = w ^ n;
        auto dec = nil_member_decompose(rg.ctx, e);
        if (!dec.ok) {
            fail(res, "no decomposition set=" + num(e));
            break;
        }
        // Well-definedness across decompositions: the measurable parts of any
        // two splittings of e carry the same mass.
        if (rg.ctx.rmeas.mass(dec.w ^ w) != 0) {
            fail(res, "mass shifts across decompositions set=" + num(e));
            break;
        }
        Bits pe = extend_lifting_nil(rg.ctx, rg.split.pi, e);
        if (!is_nil(rg.ctx, e ^ pe).nil) {
            fail(res, "image differs beyond the ideal set=" + num(e));
            break;
        }
        if (pe != rg.split.pi.apply(dec.w)) {
            fail(res, "extension disagrees with the lifting set=" + num(e));
            break;
        }
        ++members;
    }
    res.notes.push_back("sets=" + std::to_string(members));
    return res;
}

CheckResult check_process(Rig& rg, std::mt19937_64& rng) {
    CheckResult res{"process"};
    rg.build();
    const ProductSpace& ps = rg.inst.r.space;
    int versions = 0, rejections = 0;
    for (int t = 0; t < 4 && res.pass; ++t) {
        Process p = make_process(ps.nx, ps.ny,
                                 std::vector<Rat>(size_t(ps.ground()), Rat(0)));
        for (Bits a : ps.xalg.atoms)
            for (int y = 0; y < ps.ny; ++y) {
                Rat v = int(rng() % 3);
                for (int x : bit_indices(a)) p.at(x, y) = v;
            }
        auto nil = is_nil_measurable(p, rg.inst.r, rg.inst.dis);
        auto rep = measurable_version(p, rg.ctx, rg.split, t % 2 == 1);
        if (rep.has_version != nil.ok) {
            fail(res, "verdict mismatch trial=" + std::to_string(t));
            break;
        }
        if (rep.has_version) {
            ++versions;
            if (!is_measurable_process(rep.theta, rg.inst.r))
                fail(res, "version not measurable trial=" + std::to_string(t));
            else if (!equivalent(p, rep.theta, rg.inst.dis))
                fail(res, "version not equivalent trial=" + std::to_string(t));
        } else {
            ++rejections;
            if (nil.obstruction <= 0)
                fail(res, "rejection without witness trial=" + std::to_string(t));
        }
    }
    res.notes.push_back("versions=" + std::to_string(versions));
    res.notes.push_back("rejections=" + std::to_string(rejections));
    return res;
}

std::string rate_text(double rate) {
    Rat r(std::llround(rate * 1e6), 1000000);
    return rat_str(r);
}

}  // namespace

const std::vector<std::string>& all_checks() {
    static const std::vector<std::string> names{
        "fubini", "t1", "l3", "e20", "t2", "p3", "t3", "c1", "t4", "process"};
    return names;
}

std::vector<CheckResult> run_checks(const Instance& inst,
                                    const std::vector<std::string>& names,
                                    bool trace) {
    Rig rg(inst);
    std::vector<CheckResult> out;
    for (const std::string& name : names) {
        bool known = false;
        for (const std::string& k : all_checks()) known |= k == name;
        if (!known) throw std::invalid_argument("unknown check: " + name);
        std::mt19937_64 rng(inst.spec.seed ^ 0x9e3779b97f4a7c15ull);
        CheckResult res;
        try {
        if (name == "fubini")
            res = check_fubini(rg, rng);
        else if (name == "t1")
            res = check_t1(rg, rng);
        else if (name == "l3")
            res = check_l3(rg, rng);
        else if (name == "e20")
            res = check_e20(rg, rng);
        else if (name == "t2")
            res = check_t2(rg, rng);
        else if (name == "p3")
            res = check_p3(rg, rng);
        else if (name == "t3")
            res = check_t3(rg, rng);
        else if (name == "c1")
            res = check_c1(rg, rng);
        else if (name == "t4")
            res = check_t4(rg, rng);
        else if (name == "process")
            res = check_process(rg, rng);
        } catch (const std::exception& e) {
            res.name = name;
            fail(res, std::string("construction aborted: ") + e.what());
        }
        if (!trace) {
            // Keep only pass/fail and witnesses; drop volume notes.
            std::vector<std::string> kept;
            for (const std::string& note : res.notes)
                if (note.rfind("witness=", 0) == 0) kept.push_back(note);
            res.notes = std::move(kept);
        }
        out.push_back(std::move(res));
    }
    return out;
}

bool CampaignReport::all_pass() const { return failures() == 0; }

int CampaignReport::failures() const {
    int n = 0;
    for (const auto& entry : entries)
        for (const auto& res : entry.results) n += !res.pass;
    return n;
}

CampaignReport campaign(const InstanceSpec& base, int count,
                        const std::vector<std::string>& names, int jobs,
                        bool trace) {
    if (count < 1) throw std::invalid_argument("count must be positive");
    auto t0 = std::chrono::steady_clock::now();
    CampaignReport rep;
    rep.entries.resize(size_t(count));
    jobs = std::max(1, std::min(jobs, 8));
    auto worker = [&](int offset) {
        for (int i = offset; i < count; i += jobs) {
            InstanceSpec spec = base;
            spec.seed = base.seed + std::uint64_t(i);
            Instance inst = generate_instance(spec);
            rep.entries[size_t(i)] = {spec, run_checks(inst, names, trace)};
        }
    };
    if (jobs == 1) {
        worker(0);
    } else {
        std::vector<std::thread> pool;
        for (int j = 0; j < jobs; ++j) pool.emplace_back(worker, j);
        for (auto& th : pool) th.join();
    }
    auto t1 = std::chrono::steady_clock::now();
    rep.elapsed_ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count();
    return rep;
}

std::string render_report(const CampaignReport& rep, bool timing) {
    std::ostringstream out;
    out << "report format=finwb-report-1 instances=" << rep.entries.size()
        << "\n";
    int run = 0, passed = 0;
    for (const auto& entry : rep.entries) {
        out << "instance seed=" << entry.spec.seed
            << " size_x=" << entry.spec.size_x
            << " size_y=" << entry.spec.size_y
            << " null_rate=" << rate_text(entry.spec.null_rate)
            << " coarse_b_rate=" << rate_text(entry.spec.coarse_b_rate)
            << "\n";
        for (const auto& res : entry.results) {
            ++run;
            passed += res.pass;
            out << "check seed=" << entry.spec.seed << " name=" << res.name
                << " pass=" << (res.pass ? "true" : "false");
            for (const std::string& note : res.notes) out << " " << note;
            out << "\n";
        }
    }
    out << "summary checks=" << run << " passed=" << passed
        << " failed=" << (run - passed) << "\n";
    if (timing) out << "# elapsed_ms=" << rep.elapsed_ms << "\n";
    return out.str();
}

}  // namespace finwb
