#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "locsim/archive.hpp"
#include "locsim/campaign.hpp"
#include "locsim/errors.hpp"

#include "json.hpp"

namespace py = pybind11;
using namespace locsim;
using nlohmann::json;

namespace {

json json_from_py(const py::object& obj) {
    const std::string text =
        py::str(py::module_::import("json").attr("dumps")(obj)).cast<std::string>();
    return json::parse(text);
}

py::object py_from_json(const json& j) {
    return py::module_::import("json").attr("loads")(j.dump());
}

// Shared immutable dump sequence, the unit all attacks operate on.
struct PySequence {
    std::shared_ptr<const DumpSequence> seq;
};

SelectedSequence make_selection(const PySequence& s, std::vector<std::uint32_t> indices) {
    return SelectedSequence{s.seq, std::move(indices)};
}

py::dict greedy_trace_to_py(const GreedyTrace& t) {
    py::list steps;
    for (const auto& st : t.steps) {
        steps.append(py::make_tuple(st.n, st.remaining, st.recall));
    }
    py::dict d;
    d["steps"] = steps;
    d["final_candidates"] = t.final_candidates;
    return d;
}

py::dict stat_trace_to_py(const StatTrace& t) {
    py::list steps;
    for (const auto& st : t.steps) {
        py::list recall;
        for (bool b : st.recall) recall.append(b);
        steps.append(py::make_tuple(st.n, st.rank, st.strictly_better, recall));
    }
    py::dict d;
    d["steps"] = steps;
    return d;
}

std::vector<SuccessCriterion> criteria_from_py(const py::object& obj) {
    std::vector<SuccessCriterion> out;
    if (obj.is_none()) return out;
    for (const auto& item : json_from_py(obj)) out.push_back(criterion_from_json(item));
    return out;
}

py::list report_to_py(const AggregateReport& report) {
    py::list rows;
    for (const auto& r : report.rows) {
        py::dict d;
        d["game_label"] = r.game_label;
        d["encoding"] = r.encoding;
        d["logic"] = r.logic;
        d["mode"] = r.mode;
        d["n"] = r.n;
        d["samples"] = r.samples;
        d["p25"] = r.p25;
        d["p50"] = r.p50;
        d["p75"] = r.p75;
        d["mean_success_rate"] = r.mean_success_rate;
        d["criterion"] = r.criterion;
        rows.append(d);
    }
    return rows;
}

}  // namespace

PYBIND11_MODULE(_locsim, m) {
    m.doc() = "memory-dump resource localisation attack simulator";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DataError>(m, "DataError", PyExc_RuntimeError);

    py::class_<PySequence>(m, "DumpSequence")
        .def_property_readonly("game_label",
                               [](const PySequence& s) { return s.seq->game_label; })
        .def_property_readonly("word_count",
                               [](const PySequence& s) { return s.seq->word_count; })
        .def_property_readonly("dump_count",
                               [](const PySequence& s) { return s.seq->dumps.size(); })
        .def_property_readonly("encoding_kind",
                               [](const PySequence& s) {
                                   return s.seq->ground_truth.encoding.kind();
                               })
        .def_property_readonly("ground_truth_locations",
                               [](const PySequence& s) {
                                   return s.seq->ground_truth.locations;
                               })
        .def_property_readonly("on_screen_values",
                               [](const PySequence& s) {
                                   std::vector<std::uint64_t> v;
                                   for (const auto& d : s.seq->dumps)
                                       v.push_back(d.on_screen_value);
                                   return v;
                               })
        .def_property_readonly("timestamps_ms",
                               [](const PySequence& s) {
                                   std::vector<std::uint64_t> v;
                                   for (const auto& d : s.seq->dumps)
                                       v.push_back(d.timestamp_ms);
                                   return v;
                               })
        .def("words",
             [](const PySequence& s, std::uint32_t ordinal) {
                 if (ordinal >= s.seq->dumps.size())
                     throw DataError("dump ordinal out of range");
                 return s.seq->dumps[ordinal].words;
             },
             py::arg("ordinal"))
        .def("validate", [](const PySequence& s) { return validate_sequence(*s.seq); });

    m.def("zeta", [](WordValue x) { return zeta(x); }, py::arg("x"),
          "position of the least significant zero bit");
    m.def("chi", [](WordValue p) { return chi(p); }, py::arg("p"), "p ^ (p + 1)");

    m.def("encode",
          [](const py::dict& spec, std::uint64_t value, std::uint64_t seed) {
              const auto enc = encoding_from_json(json_from_py(spec));
              auto st = make_encoder_state(enc, seed);
              return encode(enc, st, value);
          },
          py::arg("spec"), py::arg("value"), py::arg("seed") = 0);
    m.def("decode",
          [](const py::dict& spec, const std::vector<WordValue>& words, std::uint64_t seed) {
              const auto enc = encoding_from_json(json_from_py(spec));
              auto st = make_encoder_state(enc, seed);
              return decode(enc, st, words);
          },
          py::arg("spec"), py::arg("words"), py::arg("seed") = 0);

    m.def("simulate",
          [](const py::dict& config) {
              return PySequence{std::make_shared<const DumpSequence>(
                  simulate(sim_config_from_json(json_from_py(config))))};
          },
          py::arg("config"), "run the synthetic game and collect its dump sequence");
    m.def("schedule_events",
          [](const py::dict& config) {
              const auto trace = schedule(sim_config_from_json(json_from_py(config)));
              py::list out;
              for (const auto& ev : trace.events) {
                  const char* kind = ev.kind == SimEvent::Kind::FrameRead ? "frame_read"
                                     : ev.kind == SimEvent::Kind::ResourceWrite
                                         ? "resource_write"
                                         : "take_dump";
                  out.append(py::make_tuple(ev.timestamp_ms, kind, ev.new_value));
              }
              return out;
          },
          py::arg("config"));

    m.def("write_archive",
          [](const PySequence& s, const std::string& path) { write_archive(*s.seq, path); },
          py::arg("sequence"), py::arg("path"));
    m.def("read_archive",
          [](const std::string& path) {
              return PySequence{std::make_shared<const DumpSequence>(read_archive(path))};
          },
          py::arg("path"));

    m.def("conforms",
          [](const py::dict& policy, const PySequence& s,
             const std::vector<std::uint32_t>& indices) {
              return conforms(policy_from_json(json_from_py(policy)), *s.seq, indices);
          },
          py::arg("policy"), py::arg("sequence"), py::arg("indices"));
    m.def("count_conforming",
          [](const PySequence& s, const py::dict& policy, std::uint32_t n) {
              const auto total =
                  count_conforming(*s.seq, policy_from_json(json_from_py(policy)), n);
              return static_cast<double>(total);
          },
          py::arg("sequence"), py::arg("policy"), py::arg("n"));
    m.def("enumerate_subsequences",
          [](const PySequence& s, const py::dict& policy, std::uint32_t n, std::uint64_t cap,
             std::uint64_t seed) {
              std::vector<std::vector<std::uint32_t>> out;
              for (auto& sel : enumerate_subsequences(
                       s.seq, policy_from_json(json_from_py(policy)), n, cap, seed)) {
                  out.push_back(std::move(sel.indices));
              }
              return out;
          },
          py::arg("sequence"), py::arg("policy"), py::arg("n"), py::arg("cap") = 1000,
          py::arg("seed") = 0);

    m.def("greedy_attack",
          [](const PySequence& s, const std::vector<std::uint32_t>& indices,
             const std::string& logic, bool record_final_candidates) {
              AttackOptions opt;
              opt.record_final_candidates = record_final_candidates;
              return greedy_trace_to_py(
                  greedy_attack(make_selection(s, indices), logic_from_name(logic), opt));
          },
          py::arg("sequence"), py::arg("indices"), py::arg("logic"),
          py::arg("record_final_candidates") = false);
    m.def("statistical_attack",
          [](const PySequence& s, const std::vector<std::uint32_t>& indices,
             const std::string& logic, const py::object& criteria) {
              return stat_trace_to_py(statistical_attack(
                  make_selection(s, indices), logic_from_name(logic),
                  criteria_from_py(criteria)));
          },
          py::arg("sequence"), py::arg("indices"), py::arg("logic"),
          py::arg("criteria") = py::none());

    m.def("percentile",
          [](std::vector<double> samples, double q) { return percentile(std::move(samples), q); },
          py::arg("samples"), py::arg("q"));

    m.def("run_attack_cell",
          [](const PySequence& s, const py::dict& attack, std::uint32_t n, std::uint64_t seed,
             unsigned threads) {
              json aj = json_from_py(attack);
              AttackSpec spec;
              spec.logic = logic_from_name(aj.at("logic").get<std::string>());
              spec.mode = aj.value("mode", "greedy");
              spec.policy = policy_from_json(aj.at("policy"));
              spec.n_min = spec.n_max = n;
              spec.cap = aj.value("cap", std::uint64_t{1000});
              if (aj.contains("criteria")) {
                  for (const auto& c : aj.at("criteria"))
                      spec.criteria.push_back(criterion_from_json(c));
              }
              const auto result = run_attack_cell(s.seq, spec, n, seed, threads);
              py::dict out;
              out["trace_count"] = result.records.size();
              out["rows"] = report_to_py(result.report);
              return out;
          },
          py::arg("sequence"), py::arg("attack"), py::arg("n"), py::arg("seed") = 0,
          py::arg("threads") = 1);

    m.def("run_campaign",
          [](const py::dict& config, const std::string& out_dir) {
              const auto outcome =
                  run_campaign(campaign_config_from_json(json_from_py(config)), out_dir);
              py::dict out;
              out["rows"] = report_to_py(outcome.report);
              out["warnings"] = outcome.warnings;
              out["every_cell_produced"] = outcome.every_cell_produced;
              return out;
          },
          py::arg("config"), py::arg("out_dir"));

    m.def("sim_config_defaults", [] {
        SimConfig c;
        return py_from_json(sim_config_to_json(c));
    });
}
