#include <pybind11/complex.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "molwg/budget.hpp"
#include "molwg/config.hpp"
#include "molwg/coupling.hpp"
#include "molwg/error.hpp"
#include "molwg/modesolver.hpp"
#include "molwg/photostats.hpp"
#include "molwg/quantity.hpp"
#include "molwg/runner.hpp"
#include "molwg/stratified.hpp"

namespace py = pybind11;
using namespace molwg;

namespace {

template <class F>
std::string render(F&& f) {
  std::ostringstream os;
  f(os);
  return os.str();
}

py::array_t<std::uint64_t> as_array(const std::vector<std::uint64_t>& v) {
  return py::array_t<std::uint64_t>(static_cast<py::ssize_t>(v.size()), v.data());
}

py::array_t<std::complex<double>> field_array(const modes::ModeField& m) {
  py::array_t<std::complex<double>> out({m.grid.ny, m.grid.nx, std::size_t{3}});
  auto a = out.mutable_unchecked<3>();
  for (std::size_t j = 0; j < m.grid.ny; ++j)
    for (std::size_t i = 0; i < m.grid.nx; ++i)
      for (std::size_t c = 0; c < 3; ++c) a(j, i, c) = m.at(i, j)[c];
  return out;
}

void bind_stratified(py::module_& m) {
  using namespace stratified;
  py::enum_<Polarization>(m, "Polarization").value("TE", Polarization::TE).value("TM", Polarization::TM);
  py::enum_<Side>(m, "Side").value("AboveSource", Side::AboveSource).value("BelowSource", Side::BelowSource);
  py::enum_<Hemisphere>(m, "Hemisphere").value("Up", Hemisphere::Up).value("Down", Hemisphere::Down);

  py::class_<Layer>(m, "Layer")
      .def(py::init([](double n, double t) { return Layer{n, t}; }), py::arg("index"),
           py::arg("thickness_nm") = std::numeric_limits<double>::infinity())
      .def_readwrite("index", &Layer::index)
      .def_readwrite("thickness_nm", &Layer::thickness_nm);

  py::class_<LayerStack>(m, "LayerStack")
      .def(py::init<std::vector<Layer>>())
      .def_static("make", &LayerStack::make, py::arg("top_index"), py::arg("interior"), py::arg("bottom_index"))
      .def_static("uniform", &LayerStack::uniform, py::arg("n"), py::arg("thickness_nm") = 1000.0)
      .def("__len__", &LayerStack::size)
      .def("index", &LayerStack::index)
      .def("thickness", &LayerStack::thickness)
      .def("flipped", &LayerStack::flipped)
      .def("scaled", &LayerStack::scaled);

  py::class_<DipoleSource>(m, "DipoleSource")
      .def(py::init<>())
      .def(py::init([](double wl, std::size_t layer, double depth, std::array<double, 3> o) {
             return DipoleSource{wl, layer, depth, o};
           }),
           py::arg("wavelength_nm"), py::arg("layer"), py::arg("depth_nm"), py::arg("orientation"))
      .def_readwrite("wavelength_nm", &DipoleSource::wavelength_nm)
      .def_readwrite("layer", &DipoleSource::layer)
      .def_readwrite("depth_nm", &DipoleSource::depth_nm)
      .def_readwrite("orientation", &DipoleSource::orientation);

  py::class_<Options>(m, "Options")
      .def(py::init<>())
      .def_readwrite("rel_tol", &Options::rel_tol)
      .def_readwrite("light_line_margin", &Options::light_line_margin)
      .def_readwrite("contour_depth", &Options::contour_depth)
      .def_readwrite("theta_step_deg", &Options::theta_step_deg)
      .def_readwrite("phi_step_deg", &Options::phi_step_deg);

  py::class_<RadiationPattern>(m, "RadiationPattern")
      .def_readonly("hemisphere", &RadiationPattern::hemisphere)
      .def_readonly("n_theta", &RadiationPattern::n_theta)
      .def_readonly("n_phi", &RadiationPattern::n_phi)
      .def_property_readonly("power_per_sr",
                             [](const RadiationPattern& p) {
                               py::array_t<double> a({p.n_theta, p.n_phi});
                               std::copy(p.power_per_sr.begin(), p.power_per_sr.end(), a.mutable_data());
                               return a;
                             })
      .def("integrate", &RadiationPattern::integrate);

  py::class_<PowerBudget>(m, "PowerBudget")
      .def_readonly("up", &PowerBudget::up)
      .def_readonly("down", &PowerBudget::down)
      .def_readonly("guided", &PowerBudget::guided)
      .def_readonly("total", &PowerBudget::total)
      .def("residual", &PowerBudget::residual);

  const auto o = py::arg("options") = Options{};
  m.def("validate", &validate);
  m.def("power_per_sr", &power_per_sr, py::arg("stack"), py::arg("dipole"), py::arg("hemisphere"),
        py::arg("theta"), py::arg("phi"));
  m.def("radiation_pattern", &radiation_pattern, py::arg("stack"), py::arg("dipole"), o);
  m.def("hemisphere_power", &hemisphere_power, py::arg("stack"), py::arg("dipole"), py::arg("hemisphere"),
        py::arg("max_theta"), o);
  m.def("relative_decay_rate", &relative_decay_rate, py::arg("stack"), py::arg("dipole"), o);
  m.def("guided_power", &guided_power, py::arg("stack"), py::arg("dipole"), o);
  m.def("collection_efficiency", &collection_efficiency, py::arg("stack"), py::arg("dipole"),
        py::arg("numerical_aperture"), o, py::arg("side") = Hemisphere::Up);
  m.def("power_budget", &power_budget, py::arg("stack"), py::arg("dipole"), o);
}

void bind_modes(py::module_& m) {
  using namespace modes;
  py::enum_<Family>(m, "Family").value("QuasiTE", Family::QuasiTE).value("QuasiTM", Family::QuasiTM);

  py::class_<RidgeGeometry>(m, "RidgeGeometry")
      .def(py::init<>())
      .def_readwrite("ridge_width_nm", &RidgeGeometry::ridge_width_nm)
      .def_readwrite("ridge_thickness_nm", &RidgeGeometry::ridge_thickness_nm)
      .def_readwrite("film_thickness_nm", &RidgeGeometry::film_thickness_nm)
      .def_readwrite("n_substrate", &RidgeGeometry::n_substrate)
      .def_readwrite("n_core", &RidgeGeometry::n_core)
      .def_readwrite("n_film", &RidgeGeometry::n_film)
      .def_readwrite("n_cover", &RidgeGeometry::n_cover)
      .def_readwrite("margin_side_nm", &RidgeGeometry::margin_side_nm)
      .def_readwrite("margin_bottom_nm", &RidgeGeometry::margin_bottom_nm)
      .def_readwrite("margin_top_nm", &RidgeGeometry::margin_top_nm);

  py::class_<CrossSection>(m, "CrossSection")
      .def_static("ridge", &CrossSection::ridge)
      .def("index_at", &CrossSection::index_at)
      .def("max_index", &CrossSection::max_index)
      .def_property_readonly("bounds", [](const CrossSection& c) {
        return py::make_tuple(c.x0(), c.x1(), c.y0(), c.y1());
      });

  py::class_<SolverOptions>(m, "SolverOptions")
      .def(py::init<>())
      .def_readwrite("dx_nm", &SolverOptions::dx_nm)
      .def_readwrite("dy_nm", &SolverOptions::dy_nm)
      .def_readwrite("family", &SolverOptions::family)
      .def_readwrite("tolerance", &SolverOptions::tolerance)
      .def_readwrite("max_restarts", &SolverOptions::max_restarts)
      .def_readwrite("krylov_dim", &SolverOptions::krylov_dim)
      .def_readwrite("confinement", &SolverOptions::confinement);

  py::class_<ModeField, std::shared_ptr<ModeField>>(m, "ModeField")
      .def_readonly("n_eff", &ModeField::n_eff)
      .def_readonly("n_g", &ModeField::n_g)
      .def_readonly("wavelength_nm", &ModeField::wavelength_nm)
      .def_readonly("family", &ModeField::family)
      .def_readonly("boundary_ratio", &ModeField::boundary_ratio)
      .def_property_readonly("x_nm", [](const ModeField& f) {
        py::array_t<double> a(static_cast<py::ssize_t>(f.grid.nx));
        for (std::size_t i = 0; i < f.grid.nx; ++i) a.mutable_at(i) = f.grid.x(i);
        return a;
      })
      .def_property_readonly("y_nm", [](const ModeField& f) {
        py::array_t<double> a(static_cast<py::ssize_t>(f.grid.ny));
        for (std::size_t j = 0; j < f.grid.ny; ++j) a.mutable_at(j) = f.grid.y(j);
        return a;
      })
      .def_property_readonly("field", &field_array, "Complex (Ex, Ey, Ez) with shape (ny, nx, 3).");

  m.def("solve_modes", &solve_modes, py::arg("cross_section"), py::arg("wavelength_nm"),
        py::arg("max_modes"), py::arg("options") = SolverOptions{});
  m.def("guided_threshold", &guided_threshold, py::arg("cross_section"), py::arg("wavelength_nm"),
        py::arg("options") = SolverOptions{});
  m.def("group_index", &group_index, py::arg("cross_section"), py::arg("wavelength_nm"), py::arg("delta_nm"),
        py::arg("options") = SolverOptions{});
  m.def("group_index_from", &group_index_from, py::arg("n_eff"), py::arg("wavelength_nm"), py::arg("delta_nm"));
  m.def("field_at", &field_at);
  m.def("effective_area", &effective_area, py::arg("mode"), py::arg("x"), py::arg("y"), py::arg("orientation"));
  m.def("energy_norm", &energy_norm);
  m.def("overlap", &overlap);
}

void bind_coupling(py::module_& m) {
  using namespace coupling;
  py::class_<CouplingResult>(m, "CouplingResult")
      .def_readonly("gamma_wg_rel", &CouplingResult::gamma_wg_rel)
      .def_readonly("gamma_free_rel", &CouplingResult::gamma_free_rel)
      .def_readonly("gamma_nr_rel", &CouplingResult::gamma_nr_rel)
      .def_readonly("beta", &CouplingResult::beta)
      .def_readonly("total_rate_rel", &CouplingResult::total_rate_rel);

  py::class_<DeviceModel>(m, "DeviceModel")
      .def(py::init<>())
      .def_readwrite("geometry", &DeviceModel::geometry)
      .def_readwrite("wavelength_nm", &DeviceModel::wavelength_nm)
      .def_readwrite("orientation", &DeviceModel::orientation)
      .def_readwrite("lateral_offset_nm", &DeviceModel::lateral_offset_nm)
      .def_readwrite("quantum_yield", &DeviceModel::quantum_yield)
      .def_readwrite("group_index_delta_nm", &DeviceModel::group_index_delta_nm)
      .def_readwrite("solver", &DeviceModel::solver)
      .def_readwrite("stack_options", &DeviceModel::stack_options);

  py::class_<MapCell>(m, "MapCell")
      .def_readonly("h_nm", &MapCell::h_nm)
      .def_readonly("dy_nm", &MapCell::dy_nm)
      .def_readonly("result", &MapCell::result)
      .def_readonly("error", &MapCell::error)
      .def("ok", &MapCell::ok);

  py::class_<TotalRateRatio>(m, "TotalRateRatio")
      .def_readonly("near_rel", &TotalRateRatio::near_rel)
      .def_readonly("far_rel", &TotalRateRatio::far_rel)
      .def_readonly("ratio", &TotalRateRatio::ratio)
      .def_readonly("within_band", &TotalRateRatio::within_band);

  m.def("ridge_stack", &ridge_stack);
  m.def("bare_stack", &bare_stack);
  m.def("film_dipole", &film_dipole, py::arg("geometry"), py::arg("dy_nm"), py::arg("orientation"),
        py::arg("wavelength_nm"));
  m.def("solve_fundamental", &solve_fundamental, py::arg("geometry"), py::arg("wavelength_nm"),
        py::arg("delta_nm"), py::arg("options"), py::call_guard<py::gil_scoped_release>());
  m.def("gamma_wg_relative", &gamma_wg_relative);
  m.def("evaluate", &evaluate, py::arg("model"), py::arg("mode"), py::arg("h_nm"), py::arg("dy_nm"));
  m.def("beta_map",
        [](const DeviceModel& model, const std::vector<double>& dy, const std::vector<double>& h, unsigned threads) {
          return beta_map(model, dy, h, threads);
        },
        py::arg("model"), py::arg("dy_values"), py::arg("h_values"), py::arg("threads") = 1,
        py::call_guard<py::gil_scoped_release>());
  m.def("total_rate_ratio", &total_rate_ratio, py::arg("model"), py::arg("mode"), py::arg("h_nm"),
        py::arg("dy_nm") = 10.0);
  m.def("map_csv", [](const std::vector<MapCell>& c) { return render([&](auto& os) { write_map_csv(os, c); }); });
}

photostats::TimestampStream make_stream(py::array_t<std::uint64_t, py::array::c_style | py::array::forcecast> t,
                                        std::uint64_t duration_ps, std::uint8_t detector) {
  photostats::TimestampStream s;
  s.detector_id = detector;
  s.timestamps_ps.assign(t.data(), t.data() + t.size());
  s.duration_ps = duration_ps;
  return s;
}

void bind_photostats(py::module_& m) {
  using namespace photostats;
  py::class_<EmitterParams>(m, "EmitterParams")
      .def(py::init<>())
      .def_readwrite("lifetime_ns", &EmitterParams::lifetime_ns)
      .def_readwrite("saturation", &EmitterParams::saturation)
      .def_readwrite("isc_yield", &EmitterParams::isc_yield)
      .def_readwrite("triplet_lifetime_ns", &EmitterParams::triplet_lifetime_ns)
      .def_readwrite("quantum_yield", &EmitterParams::quantum_yield)
      .def("validate", &EmitterParams::validate)
      .def("pump_rate", &EmitterParams::pump_rate)
      .def("expected_rate_hz", &EmitterParams::expected_rate_hz)
      .def("recovery_time_ns", &EmitterParams::recovery_time_ns);

  py::class_<TimestampStream>(m, "TimestampStream")
      .def(py::init(&make_stream), py::arg("timestamps_ps"), py::arg("duration_ps"), py::arg("detector_id") = 0)
      .def_readonly("detector_id", &TimestampStream::detector_id)
      .def_readonly("duration_ps", &TimestampStream::duration_ps)
      .def_readonly("metadata", &TimestampStream::metadata)
      .def_property_readonly("timestamps_ps", [](const TimestampStream& s) { return as_array(s.timestamps_ps); })
      .def("__len__", &TimestampStream::size)
      .def("rate_hz", &TimestampStream::rate_hz)
      .def("well_formed", &TimestampStream::well_formed);

  py::class_<G2Histogram>(m, "G2Histogram")
      .def_readonly("bin_width_ps", &G2Histogram::bin_width_ps)
      .def_readonly("window_ns", &G2Histogram::window_ns)
      .def_property_readonly("delays_ps", [](const G2Histogram& h) { return py::array(py::cast(h.delays_ps)); })
      .def_property_readonly("raw_coincidences", [](const G2Histogram& h) { return as_array(h.raw_coincidences); })
      .def_property_readonly("normalized", [](const G2Histogram& h) { return py::array(py::cast(h.normalized)); })
      .def_readonly("rate1_hz", &G2Histogram::rate1_hz)
      .def_readonly("rate2_hz", &G2Histogram::rate2_hz)
      .def_readonly("duration_ps", &G2Histogram::duration_ps)
      .def_readonly("warnings", &G2Histogram::warnings);

  py::class_<G2Fit>(m, "G2Fit")
      .def_readonly("g2_zero", &G2Fit::g2_zero)
      .def_readonly("b", &G2Fit::b)
      .def_readonly("T_ns", &G2Fit::T_ns)
      .def_readonly("sigma_g2_zero", &G2Fit::sigma_g2_zero)
      .def_readonly("sigma_b", &G2Fit::sigma_b)
      .def_readonly("sigma_T_ns", &G2Fit::sigma_T_ns)
      .def_readonly("reduced_chi2", &G2Fit::reduced_chi2)
      .def_readonly("iterations", &G2Fit::iterations);

  m.def("simulate_emitter",
        [](const EmitterParams& p, double duration_ns, std::uint64_t seed) {
          std::vector<std::string> warnings;
          auto s = simulate_emitter(p, duration_ns, seed, &warnings);
          return py::make_tuple(std::move(s), warnings);
        },
        py::arg("params"), py::arg("duration_ns"), py::arg("seed"),
        "Returns (stream, warnings).");
  m.def("apply_detection", &apply_detection, py::arg("stream"), py::arg("efficiency"), py::arg("background_hz"),
        py::arg("dead_time_ns"), py::arg("seed"));
  m.def("hbt_split", &hbt_split, py::arg("stream"), py::arg("seed"));
  m.def("g2_histogram", &g2_histogram, py::arg("s1"), py::arg("s2"), py::arg("bin_width_ps"),
        py::arg("window_ns"), py::arg("threads") = 1, py::call_guard<py::gil_scoped_release>());
  m.def("fit_g2", &fit_g2);
  m.def("on_chip_purity", &on_chip_purity, py::arg("g2_zero"), py::arg("signal_hz"), py::arg("background_hz"));
}

void bind_budget(py::module_& m) {
  using namespace budget;
  py::class_<EfficiencyBudget>(m, "EfficiencyBudget")
      .def(py::init<>())
      .def_readwrite("tau", &EfficiencyBudget::tau)
      .def_readwrite("QY", &EfficiencyBudget::QY)
      .def_readwrite("s", &EfficiencyBudget::s)
      .def_readwrite("eta_c", &EfficiencyBudget::eta_c)
      .def_readwrite("eta_opt", &EfficiencyBudget::eta_opt)
      .def_readwrite("eta_det", &EfficiencyBudget::eta_det)
      .def_readwrite("eta_f", &EfficiencyBudget::eta_f)
      .def_readwrite("S_c", &EfficiencyBudget::S_c)
      .def_readwrite("B", &EfficiencyBudget::B)
      .def_readwrite("g2_zero", &EfficiencyBudget::g2_zero)
      .def_readwrite("S_coupler_image", &EfficiencyBudget::S_coupler_image)
      .def_readwrite("S_free_image", &EfficiencyBudget::S_free_image)
      .def("validate", &EfficiencyBudget::validate)
      .def("to_json", [](const EfficiencyBudget& b) { return to_json(b); })
      .def_static("from_json", &budget_from_json);

  py::class_<SaturationProfile>(m, "SaturationProfile")
      .def(py::init<>())
      .def_readwrite("tau", &SaturationProfile::tau)
      .def_readwrite("QY", &SaturationProfile::QY)
      .def_readwrite("eta_c", &SaturationProfile::eta_c)
      .def_readwrite("beta", &SaturationProfile::beta)
      .def("validate", &SaturationProfile::validate);

  py::class_<CouplerModel>(m, "CouplerModel")
      .def(py::init<>())
      .def_readwrite("peak_efficiency", &CouplerModel::peak_efficiency)
      .def_readwrite("center_wavelength_nm", &CouplerModel::center_wavelength_nm)
      .def_readwrite("bandwidth_fwhm_nm", &CouplerModel::bandwidth_fwhm_nm)
      .def_readwrite("output_mode_fwhm_um", &CouplerModel::output_mode_fwhm_um);

  py::class_<ReportRow>(m, "ReportRow")
      .def_readonly("table", &ReportRow::table)
      .def_readonly("key", &ReportRow::key)
      .def_readonly("description", &ReportRow::description)
      .def_readonly("value", &ReportRow::value)
      .def_readonly("derived", &ReportRow::derived);

  py::class_<Report>(m, "Report")
      .def_readonly("rows", &Report::rows)
      .def_readonly("notes", &Report::notes)
      .def("row", &Report::row, py::return_value_policy::reference_internal)
      .def("csv", [](const Report& r) { return render([&](auto& os) { write_report_csv(os, r); }); })
      .def("text", [](const Report& r) { return render([&](auto& os) { write_report_text(os, r); }); });

  m.def("coupler_efficiency_from_throughput", &coupler_efficiency_from_throughput);
  m.def("coupler_response", &coupler_response);
  m.def("propagation_transmission", &propagation_transmission);
  m.def("beta_from_count_rate", &beta_from_count_rate);
  m.def("beta_from_images", &beta_from_images);
  m.def("saturation_on_chip_rate", &saturation_on_chip_rate);
  m.def("off_chip_brightness", &off_chip_brightness);
  m.def("expected_detected_rate", &expected_detected_rate);
  m.def("signal_fraction", &signal_fraction);
  m.def("build_report", &build_report);
}

void bind_cli(py::module_& m) {
  using namespace cli;
  py::class_<config::ExperimentConfig>(m, "ExperimentConfig")
      .def_readwrite("device_model", &config::ExperimentConfig::device_model)
      .def_readwrite("emitter", &config::ExperimentConfig::emitter)
      .def_readwrite("duration_ns", &config::ExperimentConfig::duration_ns)
      .def_readwrite("device", &config::ExperimentConfig::device)
      .def_readwrite("best_device", &config::ExperimentConfig::best_device)
      .def_readwrite("sweep_dy_nm", &config::ExperimentConfig::sweep_dy_nm)
      .def_readwrite("sweep_h_nm", &config::ExperimentConfig::sweep_h_nm)
      .def_readwrite("seeds", &config::ExperimentConfig::seeds)
      .def_readwrite("output_dir", &config::ExperimentConfig::output_dir)
      .def_readonly("warnings", &config::ExperimentConfig::warnings);

  m.def("parse_config", &config::parse_config, py::arg("path"), py::arg("strict") = false);
  m.def("parse_config_text", &config::parse_config_text, py::arg("text"), py::arg("strict") = false);

  py::class_<OutputRecord>(m, "OutputRecord")
      .def_readonly("path", &OutputRecord::path)
      .def_readonly("sha256", &OutputRecord::sha256);
  py::class_<RunManifest>(m, "RunManifest")
      .def_readonly("command", &RunManifest::command)
      .def_readonly("config_digest", &RunManifest::config_digest)
      .def_readonly("seeds", &RunManifest::seeds)
      .def_readonly("tool_version", &RunManifest::tool_version)
      .def_readonly("timestamp", &RunManifest::timestamp)
      .def_readonly("outputs", &RunManifest::outputs)
      .def("to_json", &RunManifest::to_json);
  py::class_<AuditReport>(m, "AuditReport")
      .def_readonly("manifests", &AuditReport::manifests)
      .def_readonly("outputs", &AuditReport::outputs)
      .def_readonly("problems", &AuditReport::problems)
      .def("ok", &AuditReport::ok);

  m.def("commands", &commands);
  m.def(
      "run_command",
      [](const std::string& command, const config::ExperimentConfig& cfg, const std::string& out_dir,
         const std::map<std::string, std::uint64_t>& seeds, unsigned threads) {
        RunOptions opt;
        opt.out_dir = out_dir;
        opt.seed_overrides = seeds;
        opt.threads = threads;
        std::vector<std::string> warnings;
        RunManifest man;
        {
          py::gil_scoped_release release;
          man = run_command(command, cfg, opt, &warnings);
        }
        return py::make_tuple(std::move(man), warnings);
      },
      py::arg("command"), py::arg("config"), py::arg("out_dir") = "",
      py::arg("seed_overrides") = std::map<std::string, std::uint64_t>{}, py::arg("threads") = 1,
      "Returns (manifest, warnings).");
  m.def("audit", &audit);
  m.def("sha256_hex", [](const py::bytes& b) { return sha256_hex(std::string(b)); });
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.attr("__version__") = cli::tool_version();

  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<StructuralError>(m, "StructuralError", PyExc_ValueError);
  py::register_exception<ConvergenceError>(m, "ConvergenceError", PyExc_RuntimeError);
  py::register_exception<FitError>(m, "FitError", PyExc_RuntimeError);
  py::register_exception<config::ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<cli::CommandError>(m, "CommandError", PyExc_RuntimeError);

  py::class_<Quantity>(m, "Quantity")
      .def(py::init<double, double, std::string>(), py::arg("value"), py::arg("sigma") = 0.0,
           py::arg("unit") = "")
      .def_readwrite("value", &Quantity::value)
      .def_readwrite("sigma", &Quantity::sigma)
      .def_readwrite("unit", &Quantity::unit)
      .def("relative", &Quantity::relative)
      .def("__repr__", [](const Quantity& q) {
        std::ostringstream os;
        os << "Quantity(" << q.value << " +- " << q.sigma << (q.unit.empty() ? "" : " " + q.unit) << ")";
        return os.str();
      });

  auto s = m.def_submodule("stratified", "Dipole emission in planar multilayers.");
  bind_stratified(s);
  auto md = m.def_submodule("modes", "Finite-difference ridge waveguide eigenmodes.");
  bind_modes(md);
  auto c = m.def_submodule("coupling", "Waveguide coupling factors and maps.");
  bind_coupling(c);
  auto p = m.def_submodule("photostats", "Photon statistics and correlation analysis.");
  bind_photostats(p);
  auto b = m.def_submodule("budget", "Efficiency budget algebra with uncertainties.");
  bind_budget(b);
  auto cl = m.def_submodule("cli", "Configuration, commands and output audits.");
  bind_cli(cl);
}
