#pragma once

#include <string>
#include <vector>

#include "pfl/run_spec.hpp"

namespace pfl {

// Everything a run needs after config resolution: one task per user, the
// initial iterate, and per-user held-out samples for dataset families.
struct Workbench {
    std::vector<ModelPtr> models;
    std::vector<std::vector<Sample>> test_sets;
    SyntheticFederation synth;
    bool analytic = false;
    Vec w0;
};

Workbench build_workbench(const RunSpec& spec);

// mean over users of the loss after one adaptation step of size alpha on the
// user's own data; analytic tasks are scored with the exact oracle, dataset
// tasks on their held-out samples
double mean_post_personalization_loss(const Workbench& bench, const Vec& w_final,
                                      const RunSpec& spec, std::uint64_t eval_seed);

struct CompareRow {
    std::string label;
    double mean = 0.0;
    double half_ci = 0.0;  // 95%, normal approximation over seeds
    std::vector<double> per_seed;
};

std::string compare_table(const std::vector<CompareRow>& rows);

std::vector<CompareRow> run_comparison(const RunSpec& spec);

// subcommand entry points; throw ConfigError / DataError / NumericError
void run_train(const RunSpec& spec);
void run_diagnose(const RunSpec& spec);
void run_partition(const RunSpec& spec);
void run_compare(const RunSpec& spec);

}  // namespace pfl
