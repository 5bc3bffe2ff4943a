#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "maxroam/errors.hpp"
#include "maxroam/experiment.hpp"
#include "maxroam/partition.hpp"
#include "maxroam/selection.hpp"
#include "maxroam/synth.hpp"
#include "maxroam/verify.hpp"

namespace py = pybind11;
using namespace maxroam;

namespace {

// nlohmann::json <-> Python objects through the json module.
py::object to_py(const nlohmann::json& j) {
    return py::module_::import("json").attr("loads")(j.dump());
}

nlohmann::json from_py(const py::object& o) {
    if (py::isinstance<py::str>(o)) return nlohmann::json::parse(o.cast<std::string>());
    return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

using Weights = py::array_t<double, py::array::c_style | py::array::forcecast>;

struct WeightArg {
    Weights array;
    WeightView view;
    const WeightView* ptr = nullptr;

    explicit WeightArg(const std::optional<Weights>& w) {
        if (!w) return;
        array = *w;
        if (array.ndim() != 2) throw std::invalid_argument("weights must be a 2-D array (channels x fan-in)");
        view = {{array.data(), static_cast<std::size_t>(array.size())},
                static_cast<std::size_t>(array.shape(0)),
                static_cast<std::size_t>(array.shape(1))};
        ptr = &view;
    }
};

std::vector<int> bits(std::span<const std::uint8_t> s) { return {s.begin(), s.end()}; }

}  // namespace

PYBIND11_MODULE(maxroam, m) {
    m.doc() = "Roaming task partitions: partition bookkeeping, selection, experiments and verification";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<InvariantViolation>(m, "InvariantViolation", PyExc_RuntimeError);

    py::class_<Selector>(m, "Selector")
        .def_static("uniform", [](std::uint64_t seed) { return Selector::uniform(make_stream(seed, "selection")); },
                    py::arg("seed") = 0)
        .def_static("cosine", &Selector::cosine)
        .def_property_readonly("kind", [](const Selector& s) { return std::string(to_string(s.kind())); })
        .def_property_readonly("zero_norm_events", &Selector::zero_norm_events);

    py::class_<LayerPartition>(m, "LayerPartition")
        .def_static("from_masks", &LayerPartition::from_masks, py::arg("masks"))
        .def_property_readonly("size", &LayerPartition::size)
        .def_property_readonly("tasks", &LayerPartition::tasks)
        .def_property_readonly("steps_done", &LayerPartition::steps_done)
        .def("mask", [](const LayerPartition& p, std::size_t t) { return bits(p.mask(t)); })
        .def("visited", [](const LayerPartition& p, std::size_t t) { return bits(p.visited(t)); })
        .def("active", &LayerPartition::active)
        .def("unvisited", &LayerPartition::unvisited)
        .def("active_count", &LayerPartition::active_count)
        .def("visited_count", &LayerPartition::visited_count)
        .def("swaps", &LayerPartition::swaps)
        .def("complete", py::overload_cast<>(&LayerPartition::complete, py::const_))
        .def("task_complete", py::overload_cast<std::size_t>(&LayerPartition::complete, py::const_))
        .def("uncovered_count", &LayerPartition::uncovered_count)
        .def(
            "apply_update_step",
            [](LayerPartition& p, std::size_t task, Selector& sel, std::optional<Weights> w) -> py::object {
                WeightArg arg(w);
                const auto out = p.apply_update_step(task, sel, arg.ptr);
                if (!out.swapped()) return py::none();
                return py::make_tuple(out.i_minus, out.i_plus);
            },
            py::arg("task"), py::arg("selector"), py::arg("weights") = py::none(),
            "Swap (i-, i+) for one task; None once the task has visited every channel.")
        .def(
            "advance",
            [](LayerPartition& p, Selector& sel, std::optional<Weights> w) {
                WeightArg arg(w);
                return p.advance(sel, arg.ptr);
            },
            py::arg("selector"), py::arg("weights") = py::none())
        .def("check_invariants", &LayerPartition::check_invariants)
        .def("overlap_matrix", [](const LayerPartition& p) { return overlap_matrix(p); })
        .def("to_json", [](const LayerPartition& p, std::size_t layer) { return to_py(p.to_json(layer)); },
             py::arg("layer") = 0)
        .def_static("from_json", [](const py::object& o) { return LayerPartition::from_json(from_py(o)); })
        .def("__eq__", [](const LayerPartition& a, const LayerPartition& b) { return a == b; });

    m.def(
        "init_partition",
        [](std::size_t size, std::size_t tasks, double sharing, std::uint64_t seed, const std::string& mode) {
            Rng rng = make_stream(seed, "partition");
            return init_partition(size, tasks, sharing, rng, parse_init_mode(mode));
        },
        py::arg("size"), py::arg("tasks"), py::arg("sharing"), py::arg("seed") = 0, py::arg("mode") = "bernoulli");

    m.def("update_ratio", &update_ratio, py::arg("partition"), py::arg("sharing"));
    m.def("visit_probability", &visit_probability, py::arg("sharing"), py::arg("ratio"));
    m.def("plan_steps", &plan_steps, py::arg("size"), py::arg("sharing"));
    m.def(
        "plan_duration",
        [](std::vector<LayerPartition> layers, double sharing, double delta) {
            return plan_duration(PartitionSet(std::move(layers)), sharing, delta);
        },
        py::arg("layers"), py::arg("sharing"), py::arg("delta"));
    m.def(
        "mean_overlap", [](std::vector<LayerPartition> layers) { return mean_overlap(PartitionSet(std::move(layers))); },
        py::arg("layers"));
    m.def("cosine_similarity", [](std::vector<double> u, std::vector<double> v) { return cosine_similarity(u, v); });

    m.def(
        "run_experiment",
        [](const py::object& config, std::optional<std::filesystem::path> out_dir) {
            const auto cfg = from_py(config).get<ExperimentConfig>();
            ExperimentSummary s;
            {
                py::gil_scoped_release release;
                s = run_experiment(cfg, out_dir);
            }
            auto j = s.to_json();
            j["metrics_csv"] = s.metrics_csv();
            return to_py(j);
        },
        py::arg("config"), py::arg("out_dir") = py::none(),
        "Train every seed of a config (dict or JSON string); returns the summary plus the metrics CSV text.");

    m.def(
        "sweep",
        [](const py::object& spec) {
            const auto s = from_py(spec).get<SweepSpec>();
            std::vector<SweepRow> rows;
            {
                py::gil_scoped_release release;
                rows = sweep(s);
            }
            return sweep_csv(rows);
        },
        py::arg("spec"), "Run a sweep file (dict or JSON string) and return the sweep CSV text.");

    m.def(
        "verify",
        [](std::size_t size, std::size_t tasks, std::vector<double> sharing, std::size_t runs, std::uint64_t seed) {
            VerifyParams vp;
            vp.size = size;
            vp.tasks = tasks;
            vp.sharing = std::move(sharing);
            vp.runs = runs;
            vp.seed = seed;
            VerifyReport r;
            {
                py::gil_scoped_release release;
                r = verify(vp);
            }
            return to_py(r.to_json());
        },
        py::arg("size") = 20, py::arg("tasks") = 3, py::arg("sharing") = std::vector<double>{0.3, 0.5, 0.7},
        py::arg("runs") = 10000, py::arg("seed") = 0);

    m.def(
        "generate",
        [](const py::object& spec) {
            const auto d = generate(from_py(spec).get<TaskFamilySpec>());
            auto batch = [](const TaskBatch& b) {
                py::array_t<double> x({b.inputs.rows, b.inputs.cols});
                std::copy(b.inputs.data.begin(), b.inputs.data.end(), x.mutable_data());
                return py::make_tuple(x, b.targets);
            };
            return py::dict(py::arg("train") = batch(d.train), py::arg("val") = batch(d.val),
                            py::arg("directions") = d.directions.data);
        },
        py::arg("spec"), "Synthetic task family: {'train': (x, targets), 'val': (x, targets), 'directions'}.");
}
