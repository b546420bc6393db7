#include "reslab/dynamics.hpp"
#include "reslab/experiment.hpp"
#include "reslab/feshbach.hpp"
#include "reslab/resolvent.hpp"
#include "reslab/rg.hpp"
#include "reslab/selfcheck.hpp"
#include "reslab/spectral.hpp"

#include <pybind11/complex.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace reslab;

namespace {

// Model specs cross the boundary as JSON text; the python side wraps them in dicts.
model::ModelPtr model_from(const std::string& spec_json) {
    return model::make_model(model::model_spec_from_json(nlohmann::json::parse(spec_json)));
}

py::dict estimate_dict(const spectral::ResonanceEstimate& e) {
    py::dict d;
    d["value"] = e.value;
    d["residual"] = e.residual;
    d["overlap"] = e.overlap;
    d["method"] = spectral::to_string(e.method);
    d["g"] = e.g;
    return d;
}

} // namespace

PYBIND11_MODULE(_reslab, m) {
    m.doc() = "Resonances of finite-level systems coupled to a truncated boson field";

    static py::exception<ValidationError> validation(m, "ValidationError", PyExc_ValueError);
    static py::exception<NumericalError> numerical(m, "NumericalError", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const ValidationError& e) {
            PyErr_SetString(validation.ptr(), e.what());
        } catch (const NumericalError& e) {
            PyErr_SetString(numerical.ptr(), e.what());
        }
    });

    m.attr("__version__") = experiment::kArtifactVersion;

    m.def("default_spec_json", [] { return model::to_json(model::default_spec()).dump(); });
    m.def("default_qed_spec_json", [] { return model::to_json(model::default_qed_spec()).dump(); });
    m.def("dimension", [](const std::string& spec) { return model_from(spec)->dim(); }, py::arg("spec"));

    m.def(
        "track_resonance",
        [](const std::string& spec, std::vector<double> g_path, std::size_t j, cplx theta, std::optional<double> sigma) {
            const auto est = spectral::track_resonance(model_from(spec), theta, g_path, j, sigma);
            py::list out;
            for (const auto& e : est) out.append(estimate_dict(e));
            return out;
        },
        py::arg("spec"), py::arg("g_path"), py::arg("j") = 1, py::arg("theta") = cplx(0.0, 0.3),
        py::arg("sigma") = py::none());

    m.def(
        "fgr",
        [](const std::string& spec, std::size_t j) {
            const auto c = feshbach::fgr(model::model_spec_from_json(nlohmann::json::parse(spec)), j);
            py::dict d;
            d["z_od"] = c.z_od;
            d["z_d"] = c.z_d;
            d["stable"] = c.stable;
            return d;
        },
        py::arg("spec"), py::arg("j") = 1);

    m.def(
        "survival",
        [](const std::string& spec, double g, std::size_t j, std::vector<double> times) {
            const auto md = model_from(spec);
            const auto h = model::build_hamiltonian(md, 0.0, g);
            return dynamics::propagate_survival(h.matrix, md->unperturbed_state(j), times,
                                                md->spec().particle.levels[j])
                .amplitude;
        },
        py::arg("spec"), py::arg("g"), py::arg("j"), py::arg("times"));

    m.def(
        "resolvent_element",
        [](const std::string& spec, double g, cplx theta, cplx z, std::size_t j) {
            const auto md = model_from(spec);
            const auto h = model::build_hamiltonian(md, theta, g);
            const auto v = resolvent::unperturbed_vector(*md, j);
            return resolvent::resolvent_element(h.matrix, v.at(*md, std::conj(theta)), v.at(*md, theta), z).value;
        },
        py::arg("spec"), py::arg("g"), py::arg("theta"), py::arg("z"), py::arg("j") = 1);

    m.def(
        "pole_fit",
        [](std::vector<cplx> z, std::vector<cplx> f, cplx lambda) {
            if (z.size() != f.size()) throw ValidationError("pole_fit: z and f differ in length");
            std::vector<std::pair<cplx, cplx>> data;
            for (std::size_t i = 0; i < z.size(); ++i) data.emplace_back(z[i], f[i]);
            const auto r = resolvent::pole_fit(data, lambda);
            py::dict d;
            d["p"] = r.p;
            d["beta"] = r.fitted_beta;
            d["beta_band"] = r.beta_band;
            d["C"] = r.fitted_C;
            d["degenerate"] = r.degenerate;
            return d;
        },
        py::arg("z"), py::arg("f"), py::arg("lam"));

    m.def(
        "continuation_domain",
        [](cplx center, double phi1, double phi2) { return resolvent::make_domain(center, phi1, phi2).samples; },
        py::arg("center"), py::arg("phi1") = 1.4, py::arg("phi2") = 3.5);

    m.def(
        "decimate",
        [](const std::string& spec, double g, double sigma, double rho0, std::size_t j, cplx theta) {
            const auto d = rg::decimate_at_cutoff_resonance(model_from(spec), theta, g, sigma, rho0, j);
            py::dict out;
            out["e_z"] = d.e_z;
            out["w_norm"] = d.w_norm;
            out["lambda_cut"] = d.lambda_cut;
            out["dim"] = d.h_eff.rows();
            return out;
        },
        py::arg("spec"), py::arg("g"), py::arg("sigma"), py::arg("rho0"), py::arg("j") = 1,
        py::arg("theta") = cplx(0.0, 0.3));

    m.def("experiment_names", [] { return experiment::experiment_names(); });
    m.def(
        "config_hash",
        [](const std::string& config) { return experiment::config_hash(experiment::parse_config(nlohmann::json::parse(config))); },
        py::arg("config"));
    m.def(
        "run",
        [](const std::string& config, const std::string& out, int jobs) {
            experiment::RunOptions o;
            o.jobs = jobs;
            o.output_dir = out;
            const auto rec = [&] {
                py::gil_scoped_release release;
                return experiment::run(experiment::parse_config(nlohmann::json::parse(config)), o);
            }();
            py::dict d;
            d["config_hash"] = rec.config_hash;
            d["results"] = rec.results.dump();
            d["passed"] = rec.passed;
            py::list files;
            for (const auto& f : rec.outputs) files.append(f.path);
            d["outputs"] = files;
            return d;
        },
        py::arg("config"), py::arg("out"), py::arg("jobs") = 1);

    m.def("selfcheck", [] {
        py::list out;
        for (const auto& r : selfcheck::run_all()) out.append(py::make_tuple(r.name, r.passed, r.value, r.tolerance));
        return out;
    });
}
