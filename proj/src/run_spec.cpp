#include "pfl/run_spec.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "pfl/errors.hpp"

namespace pfl {

const char* family_name(TaskFamily f) {
    switch (f) {
        case TaskFamily::Quadratic: return "quadratic";
        case TaskFamily::Logistic: return "logistic";
        case TaskFamily::MlpMnistSubset: return "mlp-mnist-subset";
    }
    return "?";
}

void RunSpec::validate() const {
    fed.validate();
    fed.estimator.validate(declared_L);
    if (dim < 1) throw ConfigError("dim: must be >= 1");
    if (diag_trials < 1) throw ConfigError("diag_trials: must be >= 1");
    if (personalization_batch < 1) throw ConfigError("personalization_batch: must be >= 1");
    if (eval_seeds < 1) throw ConfigError("eval_seeds: must be >= 1");
    if (family == TaskFamily::MlpMnistSubset || family == TaskFamily::Logistic) {
        if (data_dir.empty()) throw ConfigError("data_dir: required for dataset families");
        partition.validate();
        if (partition.n != fed.n)
            throw ConfigError("partition n: must equal federation n");
    }
    if (!(synth.domain_radius > 0.0)) throw ConfigError("domain_radius: must be > 0");
}

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

[[noreturn]] void fail(int line, const std::string& msg) {
    throw ConfigError("line " + std::to_string(line) + ": " + msg);
}

double parse_double(const std::string& v, int line) {
    try {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size()) fail(line, "trailing characters after number '" + v + "'");
        return x;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        fail(line, "expected a number, got '" + v + "'");
    }
}

long parse_int(const std::string& v, int line) {
    long x = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc() || p != v.data() + v.size())
        fail(line, "expected an integer, got '" + v + "'");
    return x;
}

bool parse_bool(const std::string& v, int line) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    fail(line, "expected true/false, got '" + v + "'");
}

std::vector<int> parse_int_list(const std::string& v, int line) {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) fail(line, "empty entry in list '" + v + "'");
        out.push_back(static_cast<int>(parse_int(item, line)));
    }
    return out;
}

}  // namespace

RunSpec default_spec(Profile profile) {
    RunSpec s;
    s.synth.hess_spread = 0.2;
    s.synth.grad_spread = 0.5;
    s.synth.convex = true;
    s.synth.grad_noise_std = 0.1;
    s.fed.estimator.kind = EstimatorKind::Stochastic;
    s.fed.estimator.alpha = 0.1;
    apply_profile(s, profile);
    return s;
}

void apply_profile(RunSpec& spec, Profile profile) {
    if (profile == Profile::Paper) {
        spec.fed.n = 50;
        spec.fed.r = 0.2;
        spec.fed.tau = 10;
        spec.fed.rounds = 1000;
        spec.fed.beta = 0.001;
        spec.fed.estimator.batch_d = 40;
        spec.fed.estimator.batch_d1 = 40;
        spec.fed.estimator.batch_d2 = 40;
        spec.partition.n = 50;
        spec.partition.a = 20;
    } else {
        spec.fed.n = 10;
        spec.fed.r = 0.5;
        spec.fed.tau = 4;
        spec.fed.rounds = 100;
        spec.fed.beta = 0.01;
        spec.fed.estimator.batch_d = 10;
        spec.fed.estimator.batch_d1 = 10;
        spec.fed.estimator.batch_d2 = 10;
        spec.partition.n = 10;
        spec.partition.a = 20;
    }
}

RunSpec parse_run_spec_text(const std::string& text, Profile profile) {
    RunSpec s = default_spec(profile);
    std::istringstream in(text);
    std::string raw;
    std::string section;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        std::string l = trim(raw);
        if (l.empty() || l[0] == '#') continue;
        if (l.front() == '[') {
            if (l.back() != ']') fail(line, "unterminated section header");
            section = trim(l.substr(1, l.size() - 2));
            if (section != "task" && section != "federation" && section != "estimator" &&
                section != "diagnostics" && section != "output")
                fail(line, "unknown section [" + section + "]");
            continue;
        }
        const auto eq = l.find('=');
        if (eq == std::string::npos) fail(line, "expected key = value");
        const std::string key = trim(l.substr(0, eq));
        const std::string val = trim(l.substr(eq + 1));
        if (key.empty()) fail(line, "empty key");
        if (section.empty()) fail(line, "key '" + key + "' outside any section");

        if (section == "task") {
            if (key == "family") {
                if (val == "quadratic") s.family = TaskFamily::Quadratic;
                else if (val == "logistic") s.family = TaskFamily::Logistic;
                else if (val == "mlp-mnist-subset") s.family = TaskFamily::MlpMnistSubset;
                else fail(line, "unknown family '" + val + "'");
            } else if (key == "dim") s.dim = static_cast<int>(parse_int(val, line));
            else if (key == "hess_spread") s.synth.hess_spread = parse_double(val, line);
            else if (key == "grad_spread") s.synth.grad_spread = parse_double(val, line);
            else if (key == "convex") s.synth.convex = parse_bool(val, line);
            else if (key == "base_scale") s.synth.base_scale = parse_double(val, line);
            else if (key == "grad_noise_std") s.synth.grad_noise_std = parse_double(val, line);
            else if (key == "hess_noise_std") s.synth.hess_noise_std = parse_double(val, line);
            else if (key == "domain_radius") s.synth.domain_radius = parse_double(val, line);
            else if (key == "hidden_widths") s.hidden_widths = parse_int_list(val, line);
            else if (key == "data_dir") s.data_dir = val;
            else if (key == "partition_a") s.partition.a = static_cast<int>(parse_int(val, line));
            else if (key == "diff_hetero") s.partition.diff_hetero = parse_bool(val, line);
            else fail(line, "unknown key '" + key + "' in [task]");
        } else if (section == "federation") {
            if (key == "n") { s.fed.n = static_cast<int>(parse_int(val, line)); s.partition.n = s.fed.n; }
            else if (key == "r") s.fed.r = parse_double(val, line);
            else if (key == "tau") s.fed.tau = static_cast<int>(parse_int(val, line));
            else if (key == "rounds") s.fed.rounds = static_cast<int>(parse_int(val, line));
            else if (key == "beta") s.fed.beta = parse_double(val, line);
            else if (key == "schedule") {
                if (val == "constant") s.fed.schedule = BetaSchedule::Constant;
                else if (val == "diminishing") s.fed.schedule = BetaSchedule::Diminishing;
                else fail(line, "unknown schedule '" + val + "'");
            } else if (key == "algorithm") {
                if (val == "perfedavg") s.fed.algorithm = Algorithm::PerFedAvg;
                else if (val == "fedavg") s.fed.algorithm = Algorithm::FedAvg;
                else fail(line, "unknown algorithm '" + val + "'");
            } else if (key == "seed") s.fed.seed = static_cast<std::uint64_t>(parse_int(val, line));
            else if (key == "workers") s.fed.workers = static_cast<int>(parse_int(val, line));
            else if (key == "trace_all_clients") s.fed.trace_all_clients = parse_bool(val, line);
            else if (key == "record_stationarity") s.fed.record_stationarity = parse_bool(val, line);
            else if (key == "smoothness_L_F") s.fed.L_F = parse_double(val, line);
            else fail(line, "unknown key '" + key + "' in [federation]");
        } else if (section == "estimator") {
            if (key == "kind") {
                if (val == "exact") s.fed.estimator.kind = EstimatorKind::Exact;
                else if (val == "stochastic") s.fed.estimator.kind = EstimatorKind::Stochastic;
                else if (val == "fo") s.fed.estimator.kind = EstimatorKind::FO;
                else if (val == "hf") s.fed.estimator.kind = EstimatorKind::HF;
                else fail(line, "unknown estimator kind '" + val + "'");
            } else if (key == "alpha") s.fed.estimator.alpha = parse_double(val, line);
            else if (key == "batch_d") s.fed.estimator.batch_d = static_cast<int>(parse_int(val, line));
            else if (key == "batch_d1") s.fed.estimator.batch_d1 = static_cast<int>(parse_int(val, line));
            else if (key == "batch_d2") s.fed.estimator.batch_d2 = static_cast<int>(parse_int(val, line));
            else if (key == "delta") s.fed.estimator.delta = parse_double(val, line);
            else if (key == "declared_L") s.declared_L = parse_double(val, line);
            else fail(line, "unknown key '" + key + "' in [estimator]");
        } else if (section == "diagnostics") {
            if (key == "bounds") s.diag_bounds = parse_bool(val, line);
            else if (key == "trials") s.diag_trials = static_cast<int>(parse_int(val, line));
            else fail(line, "unknown key '" + key + "' in [diagnostics]");
        } else {  // output
            if (key == "out_dir") s.out_dir = val;
            else if (key == "personalization_batch")
                s.personalization_batch = static_cast<int>(parse_int(val, line));
            else if (key == "eval_seeds") s.eval_seeds = static_cast<int>(parse_int(val, line));
            else fail(line, "unknown key '" + key + "' in [output]");
        }
    }
    if (s.declared_L > 0.0 && s.fed.estimator.alpha * s.declared_L > 1.0 + 1e-12)
        throw ConfigError("alpha: alpha L <= 1 required (alpha = " +
                          std::to_string(s.fed.estimator.alpha) +
                          ", L = " + std::to_string(s.declared_L) + ")");
    s.validate();
    return s;
}

RunSpec parse_run_spec_file(const std::string& path, Profile profile) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_run_spec_text(buf.str(), profile);
}

std::string RunSpec::serialize() const {
    std::ostringstream out;
    out.precision(17);
    out << "[task]\n";
    out << "family = " << family_name(family) << '\n';
    out << "dim = " << dim << '\n';
    out << "hess_spread = " << synth.hess_spread << '\n';
    out << "grad_spread = " << synth.grad_spread << '\n';
    out << "convex = " << (synth.convex ? "true" : "false") << '\n';
    out << "base_scale = " << synth.base_scale << '\n';
    out << "grad_noise_std = " << synth.grad_noise_std << '\n';
    out << "hess_noise_std = " << synth.hess_noise_std << '\n';
    out << "domain_radius = " << synth.domain_radius << '\n';
    if (!hidden_widths.empty()) {
        out << "hidden_widths = ";
        for (std::size_t i = 0; i < hidden_widths.size(); ++i)
            out << (i ? "," : "") << hidden_widths[i];
        out << '\n';
    }
    if (!data_dir.empty()) out << "data_dir = " << data_dir << '\n';
    out << "partition_a = " << partition.a << '\n';
    out << "diff_hetero = " << (partition.diff_hetero ? "true" : "false") << '\n';

    out << "\n[federation]\n";
    out << "n = " << fed.n << '\n';
    out << "r = " << fed.r << '\n';
    out << "tau = " << fed.tau << '\n';
    out << "rounds = " << fed.rounds << '\n';
    out << "beta = " << fed.beta << '\n';
    out << "schedule = "
        << (fed.schedule == BetaSchedule::Constant ? "constant" : "diminishing") << '\n';
    out << "algorithm = "
        << (fed.algorithm == Algorithm::PerFedAvg ? "perfedavg" : "fedavg") << '\n';
    out << "seed = " << fed.seed << '\n';
    out << "workers = " << fed.workers << '\n';
    out << "trace_all_clients = " << (fed.trace_all_clients ? "true" : "false") << '\n';
    out << "record_stationarity = " << (fed.record_stationarity ? "true" : "false") << '\n';
    if (fed.L_F) out << "smoothness_L_F = " << *fed.L_F << '\n';

    out << "\n[estimator]\n";
    out << "kind = " << estimator_name(fed.estimator.kind) << '\n';
    out << "alpha = " << fed.estimator.alpha << '\n';
    out << "batch_d = " << fed.estimator.batch_d << '\n';
    out << "batch_d1 = " << fed.estimator.batch_d1 << '\n';
    out << "batch_d2 = " << fed.estimator.batch_d2 << '\n';
    out << "delta = " << fed.estimator.delta << '\n';
    if (declared_L > 0.0) out << "declared_L = " << declared_L << '\n';

    out << "\n[diagnostics]\n";
    out << "bounds = " << (diag_bounds ? "true" : "false") << '\n';
    out << "trials = " << diag_trials << '\n';

    out << "\n[output]\n";
    out << "out_dir = " << out_dir << '\n';
    out << "personalization_batch = " << personalization_batch << '\n';
    out << "eval_seeds = " << eval_seeds << '\n';
    return out.str();
}

}  // namespace pfl
