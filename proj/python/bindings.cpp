#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "eprnet/runner.hpp"

namespace py = pybind11;
using namespace eprnet;

namespace {

Scenario scenario_from(const std::optional<std::string>& yaml_text) {
  return yaml_text ? parse_scenario(*yaml_text) : default_scenario();
}

DistributionMap map_from(const py::object& spec) {
  if (py::isinstance<py::str>(spec)) return builtin_map(spec.cast<std::string>());
  return map_from_lines(std::nullopt, spec.cast<std::vector<std::string>>());
}

py::object to_python(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

}  // namespace

PYBIND11_MODULE(_eprnet, m) {
  m.doc() = "Entanglement distribution network simulator";

  static py::exception<FrameError> frame_error(m, "FrameError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const FrameError& e) {
      py::set_error(frame_error, (std::string(to_string(e.code())) + ": " + e.what()).c_str());
    }
  });

  m.def("builtin_maps", [] {
    std::vector<std::string> out;
    for (auto id : kBuiltinMaps) out.emplace_back(to_string(id));
    return out;
  });
  m.def("map_lines", [](const py::object& spec) { return map_to_lines(map_from(spec)); }, py::arg("map"));
  m.def(
      "validate_map",
      [](const std::vector<std::string>& lines) {
        std::vector<std::pair<std::string, std::string>> out;
        for (const auto& v : validate_map(map_from_lines(std::nullopt, lines)).violations)
          out.emplace_back(std::string(to_string(v.kind)), v.message);
        return out;
      },
      py::arg("lines"));
  m.def(
      "links",
      [](const py::object& spec) {
        const auto map = map_from(spec);
        require_valid(map);
        std::vector<std::string> out;
        for (const auto& l : links_of(map)) out.push_back(l.label());
        return out;
      },
      py::arg("map"));

  m.def("crc16", [](const py::bytes& b) {
    const std::string s = b;
    return crc16_ccitt_false({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
  });
  m.def(
      "encode_instruction",
      [](std::uint32_t sequence, const py::object& spec) {
        AMCInstruction in;
        in.sequence = sequence;
        if (py::isinstance<py::str>(spec)) {
          const auto id = parse_map_id(spec.cast<std::string>());
          if (!id) throw std::invalid_argument("unknown built-in map");
          in.payload = *id;
        } else {
          in.payload = map_from(spec);
        }
        const auto frame = encode_instruction(in);
        return py::bytes(reinterpret_cast<const char*>(frame.data()), frame.size());
      },
      py::arg("sequence"), py::arg("map"));
  m.def("decode_instruction", [](const py::bytes& b) {
    const std::string s = b;
    const auto in = decode_instruction({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
    py::dict d;
    d["sequence"] = in.sequence;
    d["builtin"] = std::holds_alternative<MapId>(in.payload)
                       ? py::object(py::str(std::string(to_string(std::get<MapId>(in.payload)))))
                       : py::object(py::none());
    d["lines"] = map_to_lines(in.resolve());
    return d;
  });

  m.def("default_scenario_yaml", [] { return scenario_to_yaml(default_scenario()); });
  m.def(
      "run_static",
      [](const std::string& map_id, double duration_s, std::uint64_t seed, std::optional<std::string> scenario) {
        const auto sc = scenario_from(scenario);
        py::gil_scoped_release release;
        auto table = run_static(map_id, sc, duration_s, seed);
        py::gil_scoped_acquire acquire;
        return to_python(table.to_json());
      },
      py::arg("map"), py::arg("duration_s"), py::arg("seed"), py::arg("scenario") = py::none());
  m.def(
      "run_dynamic",
      [](std::uint64_t seed, std::optional<std::string> scenario) {
        const auto sc = scenario_from(scenario);
        py::gil_scoped_release release;
        auto run = run_dynamic(sc, seed);
        py::gil_scoped_acquire acquire;
        return to_python(dynamic_summary_json(run, sc));
      },
      py::arg("seed"), py::arg("scenario") = py::none());

  m.def("exceeds_classical_limit", py::overload_cast<double>(&exceeds_classical_limit), py::arg("visibility"));
  m.def(
      "dynamic_range_db",
      [](const std::vector<double>& means) {
        const auto r = dynamic_range(means);
        return r.unbounded ? py::object(py::none()) : py::object(py::float_(r.db));
      },
      py::arg("segment_means"));
}
