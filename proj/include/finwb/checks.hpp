#pragma once

#include "finwb/instance.hpp"

#include <string>
#include <vector>

namespace finwb {

// One verification record: key=value detail fragments, a witness note on
// failure.
struct CheckResult {
    std::string name;
    bool pass = true;
    std::vector<std::string> notes;
};

// The available checks, in canonical order: fubini, t1, l3, e20, t2, p3, t3,
// c1, t4, process.
const std::vector<std::string>& all_checks();

// Runs the named checks on one instance; unknown names throw. Shared
// construction state (the full density/lifting pipeline) is built once.
std::vector<CheckResult> run_checks(const Instance& inst,
                                    const std::vector<std::string>& names,
                                    bool trace);

struct CampaignReport {
    struct Entry {
        InstanceSpec spec;
        std::vector<CheckResult> results;
    };
    std::vector<Entry> entries;
    long long elapsed_ms = 0;

    bool all_pass() const;
    int failures() const;
};

// `count` seeded instances starting at base.seed, each through the named
// checks; the aggregate is identical for every parallelism degree.
CampaignReport campaign(const InstanceSpec& base, int count,
                        const std::vector<std::string>& names, int jobs,
                        bool trace);

// Structured text: one record per line, machine-parseable key=value fields.
// Timing lines are comments (prefixed '#') so payloads diff cleanly.
std::string render_report(const CampaignReport& rep, bool timing);

}  // namespace finwb
