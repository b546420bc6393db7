#include "reslab/experiment.hpp"

#include "reslab/dynamics.hpp"
#include "reslab/feshbach.hpp"
#include "reslab/io.hpp"
#include "reslab/parallel.hpp"
#include "reslab/resolvent.hpp"
#include "reslab/rg.hpp"
#include "reslab/selfcheck.hpp"
#include "reslab/spectral.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <map>
#include <set>

namespace reslab::experiment {

using nlohmann::json;

namespace {

enum class PType { Number, OptNumber, NumberList, Int, String, Complex, OptComplex, Bool };

struct Param {
    std::string name;
    PType type;
    json def;
};

json cjson(double re, double im) { return json{{"re", re}, {"im", im}}; }

const std::map<std::string, std::vector<Param>>& schema() {
    static const std::map<std::string, std::vector<Param>> s = [] {
        const json theta = cjson(0.0, 0.3);
        std::map<std::string, std::vector<Param>> m;
        m["spectrum"] = {{"g", PType::Number, 0.0},
                         {"theta", PType::Complex, cjson(0.0, 0.0)},
                         {"sigma", PType::OptNumber, nullptr},
                         {"part", PType::String, "full"}};
        m["resonance-track"] = {{"g_list", PType::NumberList, json::array({0.01, 0.02, 0.05})},
                                {"theta", PType::Complex, theta},
                                {"j", PType::Int, 1},
                                {"sigma", PType::OptNumber, nullptr}};
        m["theta-report"] = {{"g", PType::Number, 0.05},
                             {"theta_im_list", PType::NumberList, json::array({0.2, 0.3, 0.4})},
                             {"j", PType::Int, 1},
                             {"sigma", PType::OptNumber, nullptr}};
        m["fgr"] = {{"j", PType::Int, 1}, {"pv_nodes", PType::Int, 400}};
        m["survival"] = {{"g", PType::Number, 0.05},
                         {"j", PType::Int, 1},
                         {"theta", PType::Complex, theta},
                         {"time_points", PType::Int, 200},
                         {"t_max_factor", PType::Number, 2.0},
                         {"krylov", PType::Bool, false}};
        m["metastability"] = {{"g_list", PType::NumberList, json::array({0.08, 0.04, 0.02})},
                              {"j", PType::Int, 1},
                              {"theta", PType::Complex, theta},
                              {"filter_constant", PType::Number, 2.0},
                              {"time_points", PType::Int, 200},
                              {"t_max_factor", PType::Number, 2.0}};
        const std::vector<Param> scan = {{"g", PType::Number, 0.05},
                                         {"j", PType::Int, 1},
                                         {"theta", PType::Complex, theta},
                                         {"vector", PType::String, "psi_j"},
                                         {"seed", PType::Int, 1},
                                         {"phi1", PType::Number, 1.4},
                                         {"phi2", PType::Number, 3.5},
                                         {"sigma_schedule", PType::String, "fixed"},
                                         {"sigma", PType::Number, 0.1}};
        m["resolvent-scan"] = scan;
        m["pole-fit"] = scan;
        m["ir-gap"] = {{"g", PType::Number, 0.05},
                       {"j", PType::Int, 1},
                       {"theta", PType::Complex, theta},
                       {"sigma_list", PType::NumberList, json::array({0.05, 0.1, 0.2, 0.4})}};
        m["decimate"] = {{"g", PType::Number, 0.05},
                         {"j", PType::Int, 1},
                         {"theta", PType::Complex, theta},
                         {"sigma", PType::Number, 0.2},
                         {"rho0", PType::Number, 0.2},
                         {"z", PType::OptComplex, nullptr},
                         {"ez_root", PType::Bool, true}};
        m["selfcheck"] = {};
        return m;
    }();
    return s;
}

double finite_number(const json& v, const std::string& path) {
    if (!v.is_number()) throw ValidationError(path + ": expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ValidationError(path + ": must be finite");
    return d;
}

json check_complex(const json& v, const std::string& path) {
    if (!v.is_object()) throw ValidationError(path + ": expected {\"re\": .., \"im\": ..}");
    for (auto it = v.begin(); it != v.end(); ++it)
        if (it.key() != "re" && it.key() != "im") throw ValidationError(path + "." + it.key() + ": unknown key");
    const double re = v.contains("re") ? finite_number(v.at("re"), path + ".re") : 0.0;
    const double im = v.contains("im") ? finite_number(v.at("im"), path + ".im") : 0.0;
    return cjson(re, im);
}

json check_value(const Param& p, const json& v, const std::string& path) {
    switch (p.type) {
    case PType::Number: return finite_number(v, path);
    case PType::OptNumber: return v.is_null() ? json(nullptr) : json(finite_number(v, path));
    case PType::NumberList: {
        if (!v.is_array() || v.empty()) throw ValidationError(path + ": expected a non-empty array of numbers");
        json out = json::array();
        for (std::size_t i = 0; i < v.size(); ++i)
            out.push_back(finite_number(v[i], path + "[" + std::to_string(i) + "]"));
        return out;
    }
    case PType::Int:
        if (!v.is_number_integer() || v.get<long>() < 0) throw ValidationError(path + ": expected an integer >= 0");
        return v.get<long>();
    case PType::String:
        if (!v.is_string()) throw ValidationError(path + ": expected a string");
        return v;
    case PType::Complex: return check_complex(v, path);
    case PType::OptComplex: return v.is_null() ? json(nullptr) : check_complex(v, path);
    case PType::Bool:
        if (!v.is_boolean()) throw ValidationError(path + ": expected true or false");
        return v;
    }
    return v;
}

cplx as_cplx(const json& v) { return {v.at("re").get<double>(), v.at("im").get<double>()}; }

std::vector<double> as_list(const json& v) { return v.get<std::vector<double>>(); }

// Cross-field checks that need the model.
void check_semantics(const ExperimentConfig& c) {
    const json& p = c.parameters;
    const std::string& e = c.experiment;
    if (p.contains("j") && p["j"].get<std::size_t>() >= c.model.particle.size())
        throw ValidationError("parameters.j: level index out of range");
    auto nonneg = [&](const char* key) {
        if (p.contains(key) && p[key].is_number() && p[key].get<double>() < 0.0)
            throw ValidationError(std::string("parameters.") + key + ": must be >= 0");
    };
    nonneg("g");
    nonneg("sigma");
    nonneg("rho0");
    for (const char* key : {"g_list", "sigma_list", "theta_im_list"})
        if (p.contains(key))
            for (double v : p[key].get<std::vector<double>>())
                if (v < 0.0) throw ValidationError(std::string("parameters.") + key + ": entries must be >= 0");
    if (p.contains("theta")) {
        const cplx th = as_cplx(p["theta"]);
        if (std::abs(th) >= model::kThetaRadius)
            throw ValidationError("parameters.theta: |theta| must be below " + std::to_string(model::kThetaRadius));
        const bool needs_complex = e == "resonance-track" || e == "survival" || e == "metastability" ||
                                   e == "ir-gap" || e == "decimate" ||
                                   ((e == "resolvent-scan" || e == "pole-fit") && p["g"].get<double>() > 0.0);
        if (needs_complex && !(th.imag() > 0.0)) throw ValidationError("parameters.theta.im: must be > 0");
    }
    if (e == "spectrum") {
        const std::string part = p["part"];
        if (part != "full" && part != "cutoff" && part != "below")
            throw ValidationError("parameters.part: expected full|cutoff|below");
        if (part != "full" && p["sigma"].is_null()) throw ValidationError("parameters.sigma: required for this part");
    }
    if (e == "resolvent-scan" || e == "pole-fit") {
        const std::string v = p["vector"];
        if (v != "psi_j" && v != "soft" && v != "random")
            throw ValidationError("parameters.vector: expected psi_j|soft|random");
        resolvent::sigma_schedule_from_string(p["sigma_schedule"]);
    }
    if (e == "survival" || e == "metastability") {
        if (p["time_points"].get<long>() < 3) throw ValidationError("parameters.time_points: must be >= 3");
        if (!(p["t_max_factor"].get<double>() > 0.0)) throw ValidationError("parameters.t_max_factor: must be > 0");
    }
    if (e == "fgr" && p["pv_nodes"].get<long>() < 2) throw ValidationError("parameters.pv_nodes: must be >= 2");
}

} // namespace

const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> n;
        for (const auto& [k, v] : schema()) n.push_back(k);
        return n;
    }();
    return names;
}

ExperimentConfig parse_config(const json& doc) {
    if (!doc.is_object()) throw ValidationError("config: expected an object at the top level");
    for (auto it = doc.begin(); it != doc.end(); ++it)
        if (it.key() != "model" && it.key() != "experiment" && it.key() != "parameters" && it.key() != "output_dir")
            throw ValidationError(it.key() + ": unknown key");
    ExperimentConfig c;
    if (!doc.contains("experiment") || !doc.at("experiment").is_string())
        throw ValidationError("experiment: missing or not a string");
    c.experiment = doc.at("experiment").get<std::string>();
    const auto found = schema().find(c.experiment);
    if (found == schema().end()) {
        std::string list;
        for (const auto& n : experiment_names()) list += (list.empty() ? "" : "|") + n;
        throw ValidationError("experiment: unknown experiment '" + c.experiment + "' (expected " + list + ")");
    }
    c.model = doc.contains("model") ? model::model_spec_from_json(doc.at("model"), "model") : model::default_spec();
    if (doc.contains("output_dir")) {
        if (!doc.at("output_dir").is_string()) throw ValidationError("output_dir: expected a string");
        c.output_dir = doc.at("output_dir").get<std::string>();
    }
    const json given = doc.contains("parameters") ? doc.at("parameters") : json::object();
    if (!given.is_object()) throw ValidationError("parameters: expected an object");
    std::set<std::string> known;
    for (const auto& p : found->second) known.insert(p.name);
    for (auto it = given.begin(); it != given.end(); ++it)
        if (!known.count(it.key()))
            throw ValidationError("parameters." + it.key() + ": unknown key for experiment '" + c.experiment + "'");
    c.parameters = json::object();
    for (const auto& p : found->second) {
        const std::string path = "parameters." + p.name;
        c.parameters[p.name] = given.contains(p.name) ? check_value(p, given.at(p.name), path) : p.def;
    }
    check_semantics(c);
    return c;
}

ExperimentConfig parse_config_file(const std::filesystem::path& path) {
    const std::string text = io::read_file(path);
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError("config: " + path.string() + " is not valid JSON (" + e.what() + ")");
    }
    return parse_config(doc);
}

json to_json(const ExperimentConfig& c) {
    return json{{"model", model::to_json(c.model)},
                {"experiment", c.experiment},
                {"parameters", c.parameters},
                {"output_dir", c.output_dir}};
}

std::string canonical_dump(const ExperimentConfig& c) {
    // Output location does not change results, so it is left out of the hashed form.
    json doc = to_json(c);
    doc.erase("output_dir");
    return doc.dump();
}

std::string config_hash(const ExperimentConfig& c) { return io::sha256_hex(canonical_dump(c)); }

// ---------------------------------------------------------------------------

namespace {

class Writer {
public:
    Writer(std::filesystem::path dir, RunRecord& record) : dir_(std::move(dir)), record_(record) {}

    void text(const std::string& name, const std::string& contents) {
        io::write_atomic(dir_ / name, contents);
        record_.outputs.push_back({name, io::sha256_hex(contents)});
    }

    void csv(const std::string& name, const std::vector<std::string>& header,
             const std::vector<std::vector<std::string>>& rows) {
        io::CsvTable t(header);
        for (const auto& r : rows) t.add_row(r);
        text(name, t.str());
    }

private:
    std::filesystem::path dir_;
    RunRecord& record_;
};

using io::format_double;

void run_spectrum(const ExperimentConfig& c, const model::ModelPtr& m, Writer& w, json& res) {
    const json& p = c.parameters;
    const std::string part_name = p["part"];
    const model::Part part = part_name == "full" ? model::Part::Full
                             : part_name == "cutoff" ? model::Part::Cutoff
                                                     : model::Part::BelowInteraction;
    std::optional<double> sigma;
    if (!p["sigma"].is_null()) sigma = p["sigma"].get<double>();
    const auto h = model::build_hamiltonian(m, as_cplx(p["theta"]), p["g"], sigma, part);
    const auto spec = spectral::dense_spectrum(h.matrix);
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < spec.size(); ++i)
        rows.push_back({std::to_string(i), format_double(spec[i].value.real()), format_double(spec[i].value.imag())});
    w.csv("spectrum.csv", {"index", "lambda_re", "lambda_im"}, rows);
    res["eigenvalue_count"] = spec.size();
    res["dimension"] = h.matrix.dim();
}

void run_track(const ExperimentConfig& c, const model::ModelPtr& m, Writer& w, json& res) {
    const json& p = c.parameters;
    std::vector<double> path = as_list(p["g_list"]);
    std::sort(path.begin(), path.end());
    path.erase(std::unique(path.begin(), path.end()), path.end());
    if (path.front() != 0.0) path.insert(path.begin(), 0.0);
    std::optional<double> sigma;
    if (!p["sigma"].is_null()) sigma = p["sigma"].get<double>();
    const auto est = spectral::track_resonance(m, as_cplx(p["theta"]), path, p["j"], sigma);
    std::vector<std::vector<std::string>> rows;
    for (const auto& e : est) rows.push_back(spectral::estimate_csv_row(e));
    w.csv("resonance.csv", spectral::estimate_csv_header(), rows);
    res["g"] = est.back().g;
    res["lambda_re"] = est.back().value.real();
    res["lambda_im"] = est.back().value.imag();
    res["residual"] = est.back().residual;
}

void run_theta_report(const ExperimentConfig& c, const model::ModelPtr& m, Writer& w, json& res) {
    const json& p = c.parameters;
    std::vector<cplx> thetas;
    for (double im : as_list(p["theta_im_list"])) thetas.emplace_back(0.0, im);
    std::optional<double> sigma;
    if (!p["sigma"].is_null()) sigma = p["sigma"].get<double>();
    const auto rep = spectral::theta_report(m, p["g"], thetas, p["j"], sigma);
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < rep.thetas.size(); ++i) {
        const cplx cut = rep.cutoff.empty() ? cplx(NAN, NAN) : rep.cutoff[i];
        rows.push_back({format_double(rep.thetas[i].real()), format_double(rep.thetas[i].imag()),
                        format_double(rep.full[i].real()), format_double(rep.full[i].imag()),
                        format_double(cut.real()), format_double(cut.imag()), format_double(rep.string_angle[i])});
    }
    w.csv("theta_report.csv",
          {"theta_re", "theta_im", "lambda_full_re", "lambda_full_im", "lambda_cut_re", "lambda_cut_im",
           "string_angle"},
          rows);
    res["spread_full"] = rep.spread_full;
    res["spread_cutoff"] = rep.spread_cutoff;
}

void run_fgr(const ExperimentConfig& c, Writer& w, json& res) {
    const json& p = c.parameters;
    feshbach::QuadratureOptions q;
    q.pv_nodes = p["pv_nodes"];
    const auto f = feshbach::fgr(c.model, p["j"], q);
    w.csv("fgr_channels.csv", feshbach::channel_csv_header(), feshbach::channel_csv_rows(f));
    res["z_od_re"] = f.z_od.real();
    res["z_od_im"] = f.z_od.imag();
    res["z_d"] = f.z_d;
    res["stable"] = f.stable;
}

void run_survival(const ExperimentConfig& c, const model::ModelPtr& m, Writer& w, json& res) {
    const json& p = c.parameters;
    const double g = p["g"];
    const std::size_t j = p["j"];
    const cplx lambda = g == 0.0 ? cplx(c.model.particle.levels[j]) : spectral::resonance_at(m, as_cplx(p["theta"]), g, j).value;
    const double gamma = -lambda.imag();
    const auto times = dynamics::survival_time_grid(gamma > 0.0 ? gamma : 0.01, p["time_points"].get<std::size_t>(),
                                                    p["t_max_factor"]);
    dynamics::PropagationOptions opts;
    opts.force_krylov = p["krylov"];
    const auto h = model::build_hamiltonian(m, 0.0, g);
    const auto trace = dynamics::propagate_survival(h.matrix, m->unperturbed_state(j), times, lambda, opts);
    w.csv("trace.csv", dynamics::trace_csv_header(), dynamics::trace_csv_rows(trace));
    double env = 0.0;
    for (std::size_t k = 0; k < times.size(); ++k)
        if (gamma > 0.0 && times[k] * gamma >= 0.2 && times[k] * gamma <= 1.0)
            env = std::max(env, std::abs(std::abs(trace.amplitude[k]) * std::exp(gamma * times[k]) - 1.0));
    res["lambda_re"] = lambda.real();
    res["lambda_im"] = lambda.imag();
    res["gamma"] = gamma;
    res["sup_deviation"] = trace.sup_deviation();
    res["envelope_error"] = env;
    res["krylov"] = trace.krylov;
}

void run_metastability(const ExperimentConfig& c, const model::ModelPtr& m, Writer& w, json& res, int jobs) {
    const json& p = c.parameters;
    dynamics::MetastabilityOptions opts;
    opts.theta = as_cplx(p["theta"]);
    opts.filter_constant = p["filter_constant"];
    opts.time_points = p["time_points"];
    opts.t_max_factor = p["t_max_factor"];
    opts.jobs = jobs;
    const auto rep = dynamics::metastability_report(m, p["j"], as_list(p["g_list"]), opts);
    w.csv("metastability.csv", dynamics::report_csv_header(), dynamics::report_csv_rows(rep));
    for (std::size_t i = 0; i < rep.rows.size(); ++i)
        w.csv("trace_" + std::to_string(i) + ".csv", dynamics::trace_csv_header(),
              dynamics::trace_csv_rows(rep.rows[i].trace));
    bool decreasing = true, resolvable = true;
    double env = 0.0;
    for (std::size_t i = 0; i < rep.rows.size(); ++i) {
        if (i > 0 && !(rep.rows[i].sup_error < rep.rows[i - 1].sup_error)) decreasing = false;
        resolvable = resolvable && rep.rows[i].resolvable;
        env = std::max(env, rep.rows[i].envelope_error);
    }
    res["alpha_hat"] = rep.alpha_hat;
    res["alpha_predicted"] = rep.alpha_predicted;
    res["error_decreasing"] = decreasing;
    res["all_resolvable"] = resolvable;
    res["max_envelope_error"] = env;
}

resolvent::ScanResult scan(const ExperimentConfig& c, const model::ModelPtr& m, int jobs) {
    const json& p = c.parameters;
    const std::size_t j = p["j"];
    const std::string kind = p["vector"];
    const resolvent::TestVector v = kind == "psi_j"  ? resolvent::unperturbed_vector(*m, j)
                                    : kind == "soft" ? resolvent::soft_vector(*m, j)
                                                     : resolvent::random_vector(*m, p["seed"].get<std::uint64_t>());
    resolvent::ContinuationDomain dom;
    dom.phi1 = p["phi1"];
    dom.phi2 = p["phi2"];
    resolvent::make_domain(cplx(0.0, -1.0), dom.phi1, dom.phi2);  // validates the angles
    resolvent::ScanOptions opts;
    opts.schedule = resolvent::sigma_schedule_from_string(p["sigma_schedule"]);
    opts.sigma = p["sigma"];
    opts.jobs = jobs;
    return resolvent::continuation_scan(m, j, p["g"], as_cplx(p["theta"]), v, dom, opts);
}

void run_scan(const ExperimentConfig& c, const model::ModelPtr& m, Writer& w, json& res, int jobs, bool fit) {
    const auto r = scan(c, m, jobs);
    w.csv("scan.csv", resolvent::scan_csv_header(), resolvent::scan_csv_rows(r));
    double max_cond = 0.0;
    for (const auto& s : r.samples)
        if (s.wedge_ok) max_cond = std::max(max_cond, s.cond_estimate);
    res["center_re"] = r.center.real();
    res["center_im"] = r.center.imag();
    res["n_samples"] = r.samples.size();
    res["skipped"] = r.skipped;
    res["max_cond"] = max_cond;
    if (!fit) return;
    std::vector<std::pair<cplx, cplx>> data;
    for (const auto& s : r.samples)
        if (s.wedge_ok) data.emplace_back(s.z, s.value);
    const auto pf = resolvent::pole_fit(data, r.center);
    const double beta_predicted = resolvent::predicted_beta(c.model.form.mu);
    const json summary{{"p_re", pf.p.real()},       {"p_im", pf.p.imag()},
                       {"beta_hat", pf.fitted_beta}, {"beta_predicted", beta_predicted},
                       {"C_hat", pf.fitted_C},       {"n_samples", pf.n_samples}};
    w.text("fit.json", summary.dump(2) + "\n");
    res["p_re"] = pf.p.real();
    res["p_im"] = pf.p.imag();
    res["beta_hat"] = pf.fitted_beta;
    res["beta_band"] = pf.beta_band;
    res["beta_predicted"] = beta_predicted;
    res["C_hat"] = pf.fitted_C;
    res["jackknife_spread"] = pf.jackknife_spread;
    res["degenerate"] = pf.degenerate;
}

void run_ir_gap(const ExperimentConfig& c, const model::ModelPtr& m, Writer& w, json& res, int jobs) {
    const json& p = c.parameters;
    const auto r = rg::ir_gap_experiment(m, as_cplx(p["theta"]), p["g"], p["j"], as_list(p["sigma_list"]), jobs);
    w.csv("ir_gap.csv", rg::ir_gap_csv_header(), rg::ir_gap_csv_rows(r));
    res["slope"] = r.slope;
    res["predicted_slope"] = r.predicted_slope;
    res["monotone"] = r.monotone;
}

void run_decimate(const ExperimentConfig& c, const model::ModelPtr& m, Writer& w, json& res) {
    const json& p = c.parameters;
    const cplx theta = as_cplx(p["theta"]);
    const double g = p["g"], sigma = p["sigma"], rho0 = p["rho0"];
    const std::size_t j = p["j"];
    const auto d = p["z"].is_null() ? rg::decimate_at_cutoff_resonance(m, theta, g, sigma, rho0, j)
                                    : rg::decimate(m, theta, g, as_cplx(p["z"]), sigma, rho0, j);
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < d.field_energies.size(); ++i)
        rows.push_back({format_double(d.field_energies[i]), format_double(d.t_diag[static_cast<long>(i)].real()),
                        format_double(d.t_diag[static_cast<long>(i)].imag())});
    w.csv("decimate.csv", {"field_energy", "T_diag_re", "T_diag_im"}, rows);
    res["sigma"] = d.sigma;
    res["rho0"] = d.rho;
    res["dimension"] = d.h_eff.rows();
    res["z_re"] = d.z.real();
    res["z_im"] = d.z.imag();
    res["lambda_cut_re"] = d.lambda_cut.real();
    res["lambda_cut_im"] = d.lambda_cut.imag();
    res["e_z_re"] = d.e_z.real();
    res["e_z_im"] = d.e_z.imag();
    res["delta_e_z_abs"] = std::abs(d.e_z - (d.lambda_cut - d.z));
    res["w_norm"] = d.w_norm;
    if (p["ez_root"].get<bool>()) {
        const auto root = rg::ez_root(m, theta, g, sigma, rho0, j);
        res["lambda1_re"] = root.lambda1.real();
        res["lambda1_im"] = root.lambda1.imag();
    }
}

bool run_selfcheck(Writer& w, json& res) {
    const auto checks = selfcheck::run_all();
    std::vector<std::vector<std::string>> rows;
    int failures = 0;
    for (const auto& ch : checks) {
        rows.push_back({ch.name, format_double(ch.value), format_double(ch.tolerance), ch.passed ? "1" : "0"});
        if (!ch.passed) ++failures;
    }
    w.csv("selfcheck.csv", {"check", "value", "tolerance", "pass"}, rows);
    res["checks"] = checks.size();
    res["failures"] = failures;
    res["passed"] = failures == 0;
    return failures == 0;
}

} // namespace

RunRecord run(const ExperimentConfig& config, const RunOptions& options) {
    const auto start = std::chrono::steady_clock::now();
    RunRecord rec;
    rec.config_hash = config_hash(config);
    rec.experiment = config.experiment;
    rec.output_dir = options.output_dir ? *options.output_dir : std::filesystem::path(config.output_dir);
    Writer w(rec.output_dir, rec);
    json res = json::object();
    const int jobs = std::max(1, options.jobs);
    const std::string& e = config.experiment;

    if (e == "selfcheck" || e == "fgr") {
        if (e == "selfcheck") rec.passed = run_selfcheck(w, res);
        else run_fgr(config, w, res);
    } else {
        const auto m = model::make_model(config.model);
        if (e == "spectrum") run_spectrum(config, m, w, res);
        else if (e == "resonance-track") run_track(config, m, w, res);
        else if (e == "theta-report") run_theta_report(config, m, w, res);
        else if (e == "survival") run_survival(config, m, w, res);
        else if (e == "metastability") run_metastability(config, m, w, res, jobs);
        else if (e == "resolvent-scan") run_scan(config, m, w, res, jobs, false);
        else if (e == "pole-fit") run_scan(config, m, w, res, jobs, true);
        else if (e == "ir-gap") run_ir_gap(config, m, w, res, jobs);
        else if (e == "decimate") run_decimate(config, m, w, res);
        else throw ValidationError("experiment: unknown experiment '" + e + "'");
    }
    rec.results = res;

    w.text("config.json", to_json(config).dump(2) + "\n");
    const json summary{{"config_hash", rec.config_hash},
                       {"artifact_version", rec.artifact_version},
                       {"experiment", e},
                       {"results", res}};
    w.text("summary.json", summary.dump(2) + "\n");

    rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    json outputs = json::array();
    for (const auto& o : rec.outputs) outputs.push_back({{"path", o.path}, {"sha256", o.sha256}});
    const json record{{"config_hash", rec.config_hash},
                      {"artifact_version", rec.artifact_version},
                      {"wall_time", rec.wall_time},
                      {"outputs", outputs}};
    io::write_atomic(rec.output_dir / "run_record.json", record.dump(2) + "\n");
    return rec;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        if (ch == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

std::string shortest(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

std::string csv_cell(const json& v) {
    if (v.is_boolean()) return v.get<bool>() ? "1" : "0";
    if (v.is_number_integer()) return std::to_string(v.get<long>());
    if (v.is_number()) return io::format_double(v.get<double>());
    if (v.is_null()) return "nan";
    std::string s = v.is_string() ? v.get<std::string>() : v.dump();
    std::replace(s.begin(), s.end(), ',', ';');
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

} // namespace

ExperimentConfig with_axis_value(const ExperimentConfig& config, const std::string& axis, double value) {
    if (axis.empty()) throw ValidationError("sweep: empty axis name");
    json doc = to_json(config);
    std::vector<std::string> parts = split(axis, '.');
    json* node = &doc["parameters"];
    std::string shown = "parameters";
    if (parts.front() == "model") {
        node = &doc["model"];
        shown = "model";
        parts.erase(parts.begin());
        if (parts.empty()) throw ValidationError("sweep: axis 'model' needs a key path");
    }
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        if (!node->is_object() || !node->contains(parts[i]))
            throw ValidationError("sweep: axis '" + axis + "' does not name a parameter");
        node = &(*node)[parts[i]];
        shown += "." + parts[i];
    }
    const std::string& key = parts.back();
    if (node->is_object() && node->contains(key) && (*node)[key].is_number()) {
        if ((*node)[key].is_number_integer()) {
            if (value != std::round(value)) throw ValidationError("sweep: axis '" + axis + "' takes integer values");
            (*node)[key] = static_cast<long>(std::llround(value));
        } else {
            (*node)[key] = value;
        }
    } else if (node->is_object() && node->contains(key) && (*node)[key].is_null()) {
        (*node)[key] = value;
    } else if (node->is_object() && node->contains(key + "_list") && (*node)[key + "_list"].is_array()) {
        (*node)[key + "_list"] = json::array({value});
    } else {
        throw ValidationError("sweep: axis '" + axis + "' does not name a scalar parameter of " + shown);
    }
    return parse_config(doc);
}

std::vector<SweepEntry> sweep(const ExperimentConfig& config, const std::string& axis,
                              const std::vector<double>& values, const RunOptions& options) {
    if (values.empty()) throw ValidationError("sweep: no values given");
    // Validate every value before running any of them.
    std::vector<ExperimentConfig> configs;
    for (double v : values) configs.push_back(with_axis_value(config, axis, v));

    const std::filesystem::path base = options.output_dir ? *options.output_dir : std::filesystem::path(config.output_dir);
    std::vector<SweepEntry> entries(values.size());
    parallel_for(values.size(), options.jobs, [&](std::size_t i) {
        SweepEntry& e = entries[i];
        e.value = shortest(values[i]);
        RunOptions sub;
        sub.jobs = 1;
        sub.output_dir = base / (axis + "_" + e.value);
        try {
            e.record = run(configs[i], sub);
            e.status = "ok";
        } catch (const ValidationError& ex) {
            e.status = "validation";
            e.message = ex.what();
        } catch (const NumericalError& ex) {
            e.status = "numerical";
            e.message = ex.what();
        } catch (const std::exception& ex) {
            e.status = "error";
            e.message = ex.what();
        }
        if (e.status != "ok") e.record.config_hash = config_hash(configs[i]);
    });

    std::set<std::string> keys;
    for (const auto& e : entries)
        for (auto it = e.record.results.begin(); it != e.record.results.end(); ++it) keys.insert(it.key());
    std::vector<std::string> header{"axis", "value", "status", "config_hash"};
    header.insert(header.end(), keys.begin(), keys.end());
    header.push_back("message");
    io::CsvTable t(header);
    for (const auto& e : entries) {
        std::vector<std::string> row{axis, e.value, e.status, e.record.config_hash};
        for (const auto& k : keys)
            row.push_back(e.record.results.is_object() && e.record.results.contains(k) ? csv_cell(e.record.results[k])
                                                                                      : "");
        row.push_back(csv_cell(e.message));
        t.add_row(row);
    }
    io::write_atomic(base / "sweep.csv", t.str());
    return entries;
}

} // namespace reslab::experiment
