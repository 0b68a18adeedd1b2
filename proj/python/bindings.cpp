// Copyright 2026 The Glimpse Authors
// SPDX-License-Identifier: Apache-2.0

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "glimpse/io.hpp"

namespace py = pybind11;
using namespace glimpse;

namespace {

// pybind11 holders cannot be pointers to const; the module never mutates a
// backend through this handle.
using Backend = std::shared_ptr<LanguageModel>;

py::object to_python(const json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

json from_python(const py::object& o) {
  return json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

DecodeConfig config_from(const py::object& o) {
  if (o.is_none()) return {};
  if (py::isinstance<DecodeConfig>(o)) return o.cast<DecodeConfig>();
  return decode_config_from_json(from_python(o));
}

}  // namespace

PYBIND11_MODULE(_glimpse, m) {
  m.doc() = "Parallel rationale decoding: exact prefix plus approximate window";

  auto error = py::register_exception<Error>(m, "GlimpseError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ContractViolation>(m, "ContractViolation", error.ptr());
  py::register_exception<CacheMismatch>(m, "CacheMismatch", error.ptr());
  py::register_exception<CapacityError>(m, "CapacityError", error.ptr());

  py::class_<BackendSpec>(m, "BackendSpec")
      .def_readonly("vocab_size", &BackendSpec::vocab_size)
      .def_readonly("pad_id", &BackendSpec::pad_id)
      .def_readonly("eos_id", &BackendSpec::eos_id)
      .def_readonly("supports_cache", &BackendSpec::supports_cache)
      .def_readonly("supports_attention", &BackendSpec::supports_attention)
      .def("to_dict", [](const BackendSpec& s) { return to_python(to_json(s)); });

  py::class_<LanguageModel, Backend>(m, "Backend")
      .def_property_readonly("name", &LanguageModel::name)
      .def_property_readonly("spec", &LanguageModel::spec, py::return_value_policy::copy)
      .def(
          "forward",
          [](const LanguageModel& lm, const TokenSeq& context, std::size_t block_len) {
            return lm.forward(context, block_len).rows;
          },
          py::arg("context"), py::arg("block_len") = 1,
          "Score rows for the last block_len positions of context.");

  m.def(
      "make_backend",
      [](const py::object& config, const std::filesystem::path& base_dir) {
        return std::const_pointer_cast<LanguageModel>(
            make_backend(from_python(config), base_dir));
      },
      py::arg("config"), py::arg("base_dir") = std::filesystem::path("."),
      "Backend from a dict such as {'kind': 'counting', 'modulus': 10}.");

  py::class_<DecodeConfig>(m, "DecodeConfig")
      .def(py::init<>())
      .def(py::init([](const py::dict& d) { return decode_config_from_json(from_python(d)); }))
      .def_readwrite("window_len", &DecodeConfig::window_len)
      .def_readwrite("skip", &DecodeConfig::skip)
      .def_readwrite("max_new_tokens", &DecodeConfig::max_new_tokens)
      .def_readwrite("iteration_cap", &DecodeConfig::iteration_cap)
      .def_readwrite("probe_threshold", &DecodeConfig::probe_threshold)
      .def_readwrite("repetition_penalty", &DecodeConfig::repetition_penalty)
      .def_readwrite("answer_trigger", &DecodeConfig::answer_trigger)
      .def_readwrite("answer_max_tokens", &DecodeConfig::answer_max_tokens)
      .def_readwrite("use_cache", &DecodeConfig::use_cache)
      .def("validate", &DecodeConfig::validate)
      .def("to_dict", [](const DecodeConfig& c) { return to_python(to_json(c)); });

  py::class_<DecodeResult>(m, "DecodeResult")
      .def_readonly("prompt", &DecodeResult::prompt)
      .def_readonly("exact_rationale", &DecodeResult::exact_rationale)
      .def_readonly("approximate_tail", &DecodeResult::approximate_tail)
      .def_readonly("answer", &DecodeResult::answer)
      .def_readonly("eos_reached", &DecodeResult::eos_reached)
      .def_property_readonly("iterations", &DecodeResult::iterations)
      .def_property_readonly("stop_reason",
                             [](const DecodeResult& r) {
                               return std::string(stop_reason_name(r.stop.reason));
                             })
      .def_property_readonly("commits",
                             [](const DecodeResult& r) {
                               std::vector<std::size_t> out;
                               for (const auto& it : r.trace.iterations) {
                                 out.push_back(it.committed.size());
                               }
                               return out;
                             })
      .def("to_dict", [](const DecodeResult& r) { return to_python(result_json(r)); })
      .def("trace_jsonl", [](const DecodeResult& r) { return trace_jsonl(r); });

  m.def(
      "run_rationale",
      [](const TokenSeq& prompt, const LanguageModel& b, const py::object& config) {
        return run_rationale(prompt, b, config_from(config));
      },
      py::arg("prompt"), py::arg("backend"), py::arg("config") = py::none());
  m.def(
      "fastcot",
      [](const TokenSeq& prompt, const LanguageModel& b, const py::object& config) {
        return fastcot(prompt, b, config_from(config));
      },
      py::arg("prompt"), py::arg("backend"), py::arg("config") = py::none());
  m.def(
      "ar_baseline",
      [](const TokenSeq& prompt, const LanguageModel& b, const py::object& config) {
        return ar_baseline(prompt, b, config_from(config));
      },
      py::arg("prompt"), py::arg("backend"), py::arg("config") = py::none());
  m.def(
      "truncated_cot",
      [](const TokenSeq& prompt, const LanguageModel& b, std::size_t budget,
         const py::object& config) {
        return truncated_cot(prompt, b, config_from(config), budget);
      },
      py::arg("prompt"), py::arg("backend"), py::arg("budget"), py::arg("config") = py::none());

  m.def(
      "verify",
      [](const TokenSeq& old_window, const TokenSeq& predictions, bool skip, Token pad) {
        const auto o = verify(old_window, predictions, skip, pad);
        return py::make_tuple(o.committed, o.match_len, o.next_window);
      },
      py::arg("old_window"), py::arg("predictions"), py::arg("skip") = true,
      py::arg("pad") = 0, "Returns (committed, match_len, next_window).");

  m.def(
      "hit_report",
      [](const DecodeResult& fc, const DecodeResult& ar) {
        json j = to_json(hit_report(fc, ar));
        return to_python(j);
      },
      py::arg("fastcot"), py::arg("ar"));
  m.def(
      "iteration_savings",
      [](const DecodeResult& fc, const DecodeResult& ar) {
        return to_python(to_json(iteration_savings(fc, ar)));
      },
      py::arg("fastcot"), py::arg("ar"));

  m.def(
      "corrupt",
      [](const TokenSeq& rationale, double keep_ratio, std::uint64_t seed, Token pad) {
        return corrupt(rationale, keep_ratio, seed, pad);
      },
      py::arg("rationale"), py::arg("keep_ratio"), py::arg("seed"),
        py::arg("pad") = 0);
  m.def("encode_bytes", &encode_bytes, py::arg("text"));
  m.def(
      "decode_bytes",
      [](const TokenSeq& tokens, Token pad, Token eos) { return decode_bytes(tokens, pad, eos); },
      py::arg("tokens"), py::arg("pad_id") = 0, py::arg("eos_id") = 4);
  m.def("config_digest", [](const py::object& o) { return config_digest(from_python(o)); });
}
