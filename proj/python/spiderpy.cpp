// Python bindings for the main operations. Densities cross the boundary as
// numpy arrays: grid densities with shape (k, k, n_cells), spider densities (k, n_cells).

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "spider/error.hpp"
#include "spider/matrices.hpp"
#include "spider/pdmp.hpp"
#include "spider/semigroup.hpp"
#include "spider/spectral.hpp"
#include "spider/walsh.hpp"

namespace py = pybind11;
using namespace spider;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_array(const std::vector<double>& v, std::vector<py::ssize_t> shape)
{
    Array out(shape);
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

void from_array(std::vector<double>& dst, const Array& a, std::size_t expected, const char* what)
{
    if (static_cast<std::size_t>(a.size()) != expected) {
        throw ParameterError(std::string(what) + ": wrong number of values");
    }
    std::copy(a.data(), a.data() + a.size(), dst.begin());
}

BoundaryVector boundary_from(int k, const std::vector<double>& values)
{
    BoundaryVector b = BoundaryVector::zeros(k);
    if (values.size() != b.values.size()) {
        throw ParameterError("boundary vector needs k (k - 1) entries");
    }
    b.values = values;
    return b;
}

}  // namespace

PYBIND11_MODULE(spiderpy, m)
{
    m.doc() = "Scaled transport on copies of a star graph and its Walsh spider limit";

    py::register_exception<ParameterError>(m, "ParameterError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);

    py::class_<StarConfig>(m, "StarConfig")
        .def(py::init([](int k, const std::vector<double>& alpha) { return validate_star_config(k, alpha); }),
             py::arg("k"), py::arg("alpha"))
        .def_readonly("k", &StarConfig::k)
        .def_readonly("alpha", &StarConfig::alpha)
        .def_readonly("order", &StarConfig::order);

    py::class_<Grid>(m, "Grid")
        .def(py::init(&make_grid), py::arg("h"), py::arg("n_cells"))
        .def_static("for_length", &make_grid_for_length, py::arg("h"), py::arg("length"))
        .def_readonly("h", &Grid::h)
        .def_readonly("n_cells", &Grid::n_cells)
        .def_property_readonly("length", &Grid::length);

    py::class_<MatrixSet>(m, "MatrixSet")
        .def_readonly("P", &MatrixSet::P)
        .def_readonly("R", &MatrixSet::R)
        .def_readonly("Q", &MatrixSet::Q)
        .def("to_json", [](const MatrixSet& s, const StarConfig& c) { return matrix_set_to_json(s, c); });

    m.def("family", &make_family_matrix_set, py::arg("config"), py::arg("delta"), py::arg("gamma"),
          "Balanced matrices from the (delta, gamma) family with complete-graph Q.");
    m.def("gamma_min", &gamma_min, py::arg("k"), py::arg("delta"));
    m.def("check_balance", [](const MatrixSet& s, const StarConfig& c) { return check_balance(s.P, s.R, c); });
    m.def(
        "ergodic_limit", [](const Matrix& P) { return ergodic_projection(P, 1e-12, 1000000).Pi; }, py::arg("P"));

    py::class_<GridDensity>(m, "GridDensity")
        .def(py::init(&GridDensity::zeros), py::arg("config"), py::arg("grid"))
        .def_readonly("config", &GridDensity::config)
        .def_readonly("grid", &GridDensity::grid)
        .def_readwrite("leaked_mass", &GridDensity::leaked_mass)
        .def_property(
            "values",
            [](const GridDensity& d) {
                return to_array(d.values, {d.k(), d.k(), static_cast<py::ssize_t>(d.n_cells())});
            },
            [](GridDensity& d, const Array& a) { from_array(d.values, a, d.values.size(), "GridDensity.values"); })
        .def("mass", &GridDensity::mass)
        .def("total_mass", &GridDensity::total_mass);

    py::class_<SpiderDensity>(m, "SpiderDensity")
        .def(py::init(&SpiderDensity::zeros), py::arg("config"), py::arg("grid"))
        .def_readonly("config", &SpiderDensity::config)
        .def_readonly("grid", &SpiderDensity::grid)
        .def_readwrite("leaked_mass", &SpiderDensity::leaked_mass)
        .def_property(
            "values",
            [](const SpiderDensity& d) {
                return to_array(d.values, {d.k(), static_cast<py::ssize_t>(d.grid.n_cells)});
            },
            [](SpiderDensity& d, const Array& a) { from_array(d.values, a, d.values.size(), "SpiderDensity.values"); })
        .def("mass", &SpiderDensity::mass)
        .def("total_mass", &SpiderDensity::total_mass);

    m.def(
        "bump", [](const StarConfig& c, const Grid& g) { return discretize(bump_profile(c), c, g); },
        py::arg("config"), py::arg("grid"), "Unit-mass smooth spider density vanishing at the center.");

    m.def("transport", &transport_T, py::arg("phi"), py::arg("cells"), py::arg("mats"));
    m.def("scatter", &scatter_exp, py::arg("phi"), py::arg("s"), py::arg("mats"));
    m.def("project_P", &project_P, py::arg("phi"));
    m.def(
        "evolve",
        [](const GridDensity& phi, double t, double eps, const MatrixSet& mats, const std::string& scheme) {
            return evolve_Geps(phi, t, eps, mats, parse_scheme(scheme)).density;
        },
        py::arg("phi"), py::arg("t"), py::arg("eps"), py::arg("mats"), py::arg("scheme") = "strang");
    m.def("coarsen", &coarsen, py::arg("phi"), py::arg("factor"));
    m.def("l1_distance", py::overload_cast<const GridDensity&, const GridDensity&>(&l1_distance), py::arg("a"),
          py::arg("b"));

    m.def("spider_kernel", &spider_kernel, py::arg("t"), py::arg("x"), py::arg("j"), py::arg("y"), py::arg("m"),
          py::arg("config"));
    m.def("evolve_spider", &evolve_spider, py::arg("psi"), py::arg("t"));
    m.def("resolvent_spider", &resolvent_spider, py::arg("lam"), py::arg("psi"));
    m.def("embed_J", &embed_J, py::arg("psi"));
    m.def("restrict_Jinv", &restrict_Jinv, py::arg("phi"));

    m.def(
        "mu_nu",
        [](double lambda, double eps, const StarConfig& c) {
            const MuNu r = mu_nu(lambda, eps, c);
            return py::make_tuple(r.mu, r.nu);
        },
        py::arg("lam"), py::arg("eps"), py::arg("config"));
    m.def(
        "apply_F", [](const Matrix& b, const MatrixSet& mats) { return apply_F(b, mats).values; },
        py::arg("boundary"), py::arg("mats"), "Entries ordered by (i, j), i != j, row-major.");
    m.def(
        "solve_K",
        [](double lambda, double eps, const std::vector<double>& ups, const MatrixSet& mats, const StarConfig& c) {
            return solve_K(lambda, eps, boundary_from(c.k, ups), mats, c).E;
        },
        py::arg("lam"), py::arg("eps"), py::arg("upsilon"), py::arg("mats"), py::arg("config"),
        "Coefficient matrix E of the kernel function with F phi = upsilon.");

    m.def(
        "simulate",
        [](const GridDensity& init, double t, double eps, const MatrixSet& mats, std::uint64_t n,
           std::uint64_t seed, std::size_t bin_factor, unsigned threads) {
            const Grid bins = make_grid(init.grid.h * static_cast<double>(bin_factor), init.grid.n_cells / bin_factor);
            const DensitySampler sampler(init);
            py::gil_scoped_release release;
            return simulate(SimulationOptions{n, t, eps, seed, threads}, mats, sampler, bins, init.config)
                .to_density();
        },
        py::arg("init"), py::arg("t"), py::arg("eps"), py::arg("mats"), py::arg("n"), py::arg("seed"),
        py::arg("bin_factor") = 1, py::arg("threads") = 0,
        "Particle histogram as a density on bins of bin_factor grid cells.");
}
