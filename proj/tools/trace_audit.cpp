// Scans step traces and verifies that every acting AV flagged in a collision
// pair received a vehicle-level reward below the bound on that step.

#include <filesystem>
#include <iostream>
#include <vector>

#include "platoon/experiment.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: trace_audit <trace.jsonl | run-dir>... [--bound B]\n";
        return 2;
    }
    double bound = -180.0;
    std::vector<fs::path> traces;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--bound" && i + 1 < argc) {
            bound = std::stod(argv[++i]);
            continue;
        }
        fs::path p(arg);
        if (fs::is_directory(p)) {
            for (const auto& entry : fs::recursive_directory_iterator(p)) {
                if (entry.path().filename() == "trace.jsonl") traces.push_back(entry.path());
            }
        } else {
            traces.push_back(p);
        }
    }
    if (traces.empty()) {
        std::cerr << "no trace files found\n";
        return 2;
    }

    long total_steps = 0;
    long total_collision_steps = 0;
    long total_violations = 0;
    try {
        for (const auto& trace : traces) {
            const platoon::AuditResult result = platoon::audit_trace(trace, bound);
            total_steps += result.steps_checked;
            total_collision_steps += result.collision_av_steps;
            total_violations += static_cast<long>(result.violations.size());
            for (const auto& v : result.violations) std::cout << "VIOLATION " << v << "\n";
            std::cout << trace.string() << ": " << result.steps_checked << " steps, "
                      << result.collision_av_steps << " AV collision steps, "
                      << result.violations.size() << " violations\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    std::cout << "total: " << total_steps << " steps, " << total_collision_steps
              << " AV collision steps, " << total_violations << " violations\n";
    return total_violations == 0 ? 0 : 1;
}
