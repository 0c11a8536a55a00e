#include "pfl/runner.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "pfl/artifacts.hpp"
#include "pfl/diagnostics.hpp"
#include "pfl/errors.hpp"
#include "pfl/idx_io.hpp"
#include "pfl/mlp_elu.hpp"

namespace pfl {

namespace {

using nlohmann::json;

std::string iso_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::vector<std::vector<int>> pools_by_class(const std::vector<int>& labels, int classes) {
    std::vector<std::vector<int>> pools(static_cast<std::size_t>(classes));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int y = labels[i];
        if (y < 0 || y >= classes)
            throw DataError("label " + std::to_string(y) + " outside 0.." +
                            std::to_string(classes - 1));
        pools[static_cast<std::size_t>(y)].push_back(static_cast<int>(i));
    }
    return pools;
}

std::vector<std::vector<Sample>> partitioned_samples(const std::vector<Sample>& all,
                                                     const PartitionSpec& part,
                                                     RngStream& rng) {
    std::vector<int> labels;
    labels.reserve(all.size());
    for (const Sample& s : all) labels.push_back(s.label);
    const auto pools = pools_by_class(labels, 10);
    const auto assignment = partition_dataset(pools, part, rng);
    std::vector<std::vector<Sample>> out(assignment.size());
    for (std::size_t u = 0; u < assignment.size(); ++u)
        for (int id : assignment[u]) out[u].push_back(all[static_cast<std::size_t>(id)]);
    return out;
}

}  // namespace

Workbench build_workbench(const RunSpec& spec) {
    Workbench bench;
    if (spec.family == TaskFamily::Quadratic) {
        RngStream init = RngPath{spec.fed.seed, 0, 0, 0}.stream(Purpose::Init);
        bench.synth = make_synthetic_federation(spec.fed.n, spec.dim, spec.synth, init);
        bench.models = bench.synth.as_models();
        bench.analytic = true;
        bench.w0 = zeros(static_cast<std::size_t>(spec.dim));
        return bench;
    }

    namespace fs = std::filesystem;
    const auto train = load_idx_dataset((fs::path(spec.data_dir) / "train-images-idx3-ubyte").string(),
                                        (fs::path(spec.data_dir) / "train-labels-idx1-ubyte").string());
    const auto test = load_idx_dataset((fs::path(spec.data_dir) / "t10k-images-idx3-ubyte").string(),
                                       (fs::path(spec.data_dir) / "t10k-labels-idx1-ubyte").string());
    RngStream train_rng = RngPath{spec.fed.seed, 0, 0, 0}.stream(Purpose::Partition);
    RngStream test_rng = RngPath{spec.fed.seed, 0, 1, 0}.stream(Purpose::Partition);
    const auto train_split = partitioned_samples(train, spec.partition, train_rng);
    bench.test_sets = partitioned_samples(test, spec.partition, test_rng);

    const int in_width = static_cast<int>(train.front().x.size());
    std::vector<int> widths{in_width};
    if (spec.family == TaskFamily::MlpMnistSubset)
        for (int h : spec.hidden_widths) widths.push_back(h);
    widths.push_back(10);

    for (const auto& user_samples : train_split)
        bench.models.push_back(std::make_shared<MlpEluModel>(widths, user_samples));

    auto* first = dynamic_cast<MlpEluModel*>(bench.models.front().get());
    RngStream init = RngPath{spec.fed.seed, 0, 0, 0}.stream(Purpose::Init);
    bench.w0 = first->init_weights(init);
    return bench;
}

double mean_post_personalization_loss(const Workbench& bench, const Vec& w_final,
                                      const RunSpec& spec, std::uint64_t eval_seed) {
    const double alpha = spec.fed.estimator.alpha;
    double total = 0.0;
    for (std::size_t i = 0; i < bench.models.size(); ++i) {
        RngStream rng = RngPath{eval_seed, 0, i, 0}.stream(Purpose::Trial);
        const Batch adapt =
            draw_batch(*bench.models[i], static_cast<std::size_t>(spec.personalization_batch),
                       rng);
        const Vec wp = personalize(*bench.models[i], w_final, alpha, adapt);
        if (bench.analytic) {
            total += bench.models[i]->exact_loss(wp);
        } else {
            Batch test;
            test.samples = bench.test_sets[i];
            total += batch_loss(*bench.models[i], wp, test);
        }
    }
    return total / static_cast<double>(bench.models.size());
}

std::vector<CompareRow> run_comparison(const RunSpec& spec) {
    struct Variant {
        std::string label;
        Algorithm algo;
        EstimatorKind kind;
    };
    const std::vector<Variant> variants = {
        {"fedavg+one-step", Algorithm::FedAvg, EstimatorKind::Stochastic},
        {"per-fedavg-fo", Algorithm::PerFedAvg, EstimatorKind::FO},
        {"per-fedavg-hf", Algorithm::PerFedAvg, EstimatorKind::HF},
    };
    std::vector<CompareRow> rows;
    for (const Variant& v : variants) {
        CompareRow row;
        row.label = v.label;
        for (int s = 0; s < spec.eval_seeds; ++s) {
            RunSpec rs = spec;
            rs.fed.seed = spec.fed.seed + static_cast<std::uint64_t>(s);
            rs.fed.algorithm = v.algo;
            rs.fed.estimator.kind = v.kind;
            const Workbench bench = build_workbench(rs);
            const TrainingResult res = run_training(bench.models, rs.fed, bench.w0);
            row.per_seed.push_back(mean_post_personalization_loss(
                bench, res.final_model, rs, rs.fed.seed ^ 0x5eedULL));
        }
        const double S = static_cast<double>(row.per_seed.size());
        double mean = 0.0;
        for (double x : row.per_seed) mean += x / S;
        row.mean = mean;
        if (row.per_seed.size() > 1) {
            double var = 0.0;
            for (double x : row.per_seed) var += (x - mean) * (x - mean) / (S - 1.0);
            row.half_ci = 1.959963984540054 * std::sqrt(var / S);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string compare_table(const std::vector<CompareRow>& rows) {
    std::ostringstream out;
    out << "algorithm            mean post-personalization loss (95% CI)\n";
    for (const CompareRow& r : rows) {
        char line[128];
        std::snprintf(line, sizeof(line), "%-20s %.6f +/- %.6f\n", r.label.c_str(), r.mean,
                      r.half_ci);
        out << line;
    }
    return out.str();
}

void run_train(const RunSpec& spec) {
    const std::string started = iso_now();
    const auto t0 = std::chrono::steady_clock::now();

    const Workbench bench = build_workbench(spec);
    const TrainingResult res = run_training(bench.models, spec.fed, bench.w0);

    namespace fs = std::filesystem;
    fs::create_directories(spec.out_dir);
    write_rounds_jsonl((fs::path(spec.out_dir) / "rounds.jsonl").string(), res.rounds);
    write_model_blob((fs::path(spec.out_dir) / "final_model.bin").string(), res.final_model);
    write_text_atomic((fs::path(spec.out_dir) / "run_spec.txt").string(), spec.serialize());

    json summary;
    summary["rounds"] = spec.fed.rounds;
    summary["n"] = spec.fed.n;
    summary["algorithm"] = spec.fed.algorithm == Algorithm::PerFedAvg ? "perfedavg" : "fedavg";
    if (bench.analytic) {
        const Vec g = average_meta_grad(bench.models, res.final_model,
                                        spec.fed.estimator.alpha);
        summary["final_grad_norm_sq"] = dot(g, g);
        summary["final_loss"] =
            average_meta_loss(bench.models, res.final_model, spec.fed.estimator.alpha);
    }
    write_text_atomic((fs::path(spec.out_dir) / "summary.json").string(), summary.dump(2));

    const auto t1 = std::chrono::steady_clock::now();
    json meta;
    meta["started_at"] = started;
    meta["finished_at"] = iso_now();
    meta["duration_seconds"] = std::chrono::duration<double>(t1 - t0).count();
    write_text_atomic((fs::path(spec.out_dir) / "run_meta.json").string(), meta.dump(2));

    std::cout << "trained " << spec.fed.rounds << " rounds, model dim "
              << res.final_model.size();
    if (summary.contains("final_grad_norm_sq"))
        std::cout << ", final |grad F|^2 = " << summary["final_grad_norm_sq"].get<double>();
    std::cout << '\n';
}

void run_diagnose(const RunSpec& spec) {
    if (spec.family != TaskFamily::Quadratic)
        throw ConfigError("diagnose requires the quadratic family");
    const Workbench bench = build_workbench(spec);
    const MetaEstimator& est = spec.fed.estimator;
    const double R = spec.synth.domain_radius;

    ConstantSet c;
    c.L = bench.synth.max_L();
    c.B = bench.synth.max_B(R);
    c.rho = 0.0;
    c.sigma_G = bench.synth.tasks.front()->constants().sigma_G;
    c.sigma_H = bench.synth.tasks.front()->constants().sigma_H;
    c.gamma_G = std::sqrt(bench.synth.gamma_G2(R));
    c.gamma_H = std::sqrt(bench.synth.gamma_H2());
    c.alpha = est.alpha;
    c.beta = spec.fed.beta;
    c.tau = spec.fed.tau;
    c.rounds = spec.fed.rounds;
    c.n = spec.fed.n;
    c.r = spec.fed.r;
    c.D = est.batch_d;
    c.D1 = est.batch_d1;
    c.D2 = est.batch_d2;
    c.delta = est.delta > 0.0 ? est.delta : 1e-3;

    std::vector<BoundReport> reports;
    RngStream probe_rng = RngPath{spec.fed.seed, 0, 0, 0}.stream(Purpose::Probe);
    reports.push_back(check_smoothness(bench.models, c, std::min(200, spec.diag_trials),
                                       probe_rng));

    std::vector<Vec> probes;
    const double per_coord = R / std::sqrt(static_cast<double>(spec.dim));
    for (int i = 0; i < 100; ++i) {
        Vec w(static_cast<std::size_t>(spec.dim));
        for (double& x : w) x = per_coord * (2.0 * probe_rng.uniform() - 1.0);
        probes.push_back(std::move(w));
    }
    reports.push_back(check_gamma_F(bench.models, c, probes));

    if (est.kind != EstimatorKind::Exact) {
        const auto [bias, mse] = check_estimator_moments(
            *bench.models.front(), est, probes.front(), spec.diag_trials, c,
            spec.fed.seed ^ 0xd1a6ULL);
        reports.push_back(bias);
        reports.push_back(mse);
    }

    json out;
    out["bounds"] = json::parse(bounds_json(reports));
    if (spec.synth.convex) {
        try {
            const Vec wstar = minimize_F_closed_form(bench.synth.tasks, est.alpha);
            const double gap = average_meta_loss(bench.models, bench.w0, est.alpha) -
                               average_meta_loss(bench.models, wstar, est.alpha);
            out["stationarity_rhs"] = theorem_rhs(c, gap);
        } catch (const std::invalid_argument&) {
            out["stationarity_rhs_skipped"] = "beta exceeds 1/(10 tau L_F)";
        }
    }

    namespace fs = std::filesystem;
    fs::create_directories(spec.out_dir);
    write_text_atomic((fs::path(spec.out_dir) / "diagnostics.json").string(), out.dump(2));
    std::cout << bound_table(reports);
}

void run_partition(const RunSpec& spec) {
    const auto counts = partition_counts(spec.partition);

    std::vector<std::vector<int>> pools;
    if (!spec.data_dir.empty()) {
        namespace fs = std::filesystem;
        const auto labels =
            read_idx_labels((fs::path(spec.data_dir) / "train-labels-idx1-ubyte").string());
        pools = pools_by_class(labels, 10);
    } else {
        // no dataset: sequential ids, pools sized exactly to the demand
        std::vector<int> demand(10, 0);
        for (const auto& row : counts)
            for (int cls = 0; cls < 10; ++cls) demand[static_cast<std::size_t>(cls)] += row[static_cast<std::size_t>(cls)];
        pools.resize(10);
        int next_id = 0;
        for (int cls = 0; cls < 10; ++cls)
            for (int j = 0; j < demand[static_cast<std::size_t>(cls)]; ++j)
                pools[static_cast<std::size_t>(cls)].push_back(next_id++);
    }

    RngStream rng = RngPath{spec.fed.seed, 0, 0, 0}.stream(Purpose::Partition);
    const auto assignment = partition_dataset(pools, spec.partition, rng);

    // label PMF per user, from the counts matrix
    std::vector<DiscreteDistribution> dists;
    for (const auto& row : counts) {
        DiscreteDistribution d;
        double total = 0.0;
        for (int cls = 0; cls < 10; ++cls) total += row[static_cast<std::size_t>(cls)];
        for (int cls = 0; cls < 10; ++cls) {
            if (row[static_cast<std::size_t>(cls)] == 0) continue;
            d.points.push_back({static_cast<double>(cls)});
            d.mass.push_back(row[static_cast<std::size_t>(cls)] / total);
        }
        dists.push_back(std::move(d));
    }
    const DiscreteDistribution avg = average_distribution(dists);

    SimilarityReport rep;
    for (const auto& d : dists) {
        rep.tv.push_back(tv_distance(d, avg));
        rep.w1.push_back(wasserstein1(d, avg));
    }
    // bounds in normalized units (B = L = L_Z = rho_Z = 1)
    std::tie(rep.tv_bound_G2, rep.tv_bound_H2) = tv_gamma_bound(dists, 1.0, 1.0);
    std::tie(rep.w1_bound_G2, rep.w1_bound_H2) = w1_gamma_bound(dists, 1.0, 1.0);

    namespace fs = std::filesystem;
    fs::create_directories(spec.out_dir);
    write_text_atomic((fs::path(spec.out_dir) / "partition.csv").string(),
                      partition_csv(assignment));
    write_text_atomic((fs::path(spec.out_dir) / "similarity.json").string(), rep.to_json());
    std::cout << "partitioned " << spec.partition.n << " users, a = " << spec.partition.a
              << (spec.partition.diff_hetero ? " (diff-hetero)" : "") << '\n';
}

void run_compare(const RunSpec& spec) {
    const auto rows = run_comparison(spec);
    const std::string table = compare_table(rows);

    json out = json::array();
    for (const CompareRow& r : rows) {
        json j;
        j["algorithm"] = r.label;
        j["mean_loss"] = r.mean;
        j["ci95_half_width"] = r.half_ci;
        j["per_seed"] = r.per_seed;
        out.push_back(std::move(j));
    }
    namespace fs = std::filesystem;
    fs::create_directories(spec.out_dir);
    write_text_atomic((fs::path(spec.out_dir) / "summary.txt").string(), table);
    write_text_atomic((fs::path(spec.out_dir) / "summary.json").string(), out.dump(2));
    std::cout << table;
}

}  // namespace pfl
