// SPDX-License-Identifier: Apache-2.0
// Python bindings for the numerics, LSTM, sparse-state, trace and simulator
// layers. Batched states are exchanged as (lanes, d_h) float64 arrays.
#include "zss/accel_sim.hpp"
#include "zss/lstm.hpp"
#include "zss/numerics.hpp"
#include "zss/sparse_state.hpp"
#include "zss/trace_io.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>

namespace py = pybind11;
using namespace zss;

namespace {

using Array2 = py::array_t<double, py::array::c_style | py::array::forcecast>;

BatchedState to_batched(const Array2& a) {
  if (a.ndim() == 1) {
    const auto d_h = static_cast<int>(a.shape(0));
    return BatchedState(d_h, 1, std::vector<double>(a.data(), a.data() + d_h));
  }
  if (a.ndim() != 2) throw std::invalid_argument("state must be 1-D or (lanes, d_h)");
  const auto lanes = static_cast<int>(a.shape(0));
  const auto d_h = static_cast<int>(a.shape(1));
  return BatchedState(d_h, lanes, std::vector<double>(a.data(), a.data() + a.size()));
}

Array2 from_batched(const BatchedState& s) {
  Array2 out({static_cast<py::ssize_t>(s.lanes), static_cast<py::ssize_t>(s.d_h)});
  std::copy(s.values.begin(), s.values.end(), out.mutable_data());
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "zero-state-skipping LSTM core";

  py::register_exception<TraceFormatError>(m, "TraceFormatError", PyExc_ValueError);

  // numerics
  m.def(
      "quantize",
      [](std::vector<double> values, int bits, std::optional<double> scale) {
        const auto q = quantize(RealTensor::vector(std::move(values)), bits,
                                scale ? ScalePolicy::kFixed : ScalePolicy::kPerTensorMax,
                                scale.value_or(0.0));
        return py::make_tuple(std::vector<int>(q.data.begin(), q.data.end()), q.scale);
      },
      py::arg("values"), py::arg("bits") = 8, py::arg("scale") = py::none(),
      "Returns (codes, scale). Per-tensor max scaling unless a fixed scale is given.");
  m.def(
      "dequantize",
      [](const std::vector<int>& codes, double scale) {
        QuantizedTensor q;
        q.data.assign(codes.begin(), codes.end());
        q.scale = scale;
        q.shape = {codes.size()};
        return dequantize(q).data;
      },
      py::arg("codes"), py::arg("scale"));
  m.def("sigmoid", py::vectorize(static_cast<double (*)(double)>(&zss::sigmoid)));

  // lstm
  m.attr("GATE_ORDER") = std::string(kGateOrder);
  py::class_<LstmParams>(m, "LstmParams")
      .def(py::init([](int d_x, int d_h) { return LstmParams::zeros(d_x, d_h); }),
           py::arg("d_x"), py::arg("d_h"))
      .def_readonly("d_x", &LstmParams::d_x)
      .def_readonly("d_h", &LstmParams::d_h)
      .def_readwrite("w_h", &LstmParams::w_h)
      .def_readwrite("w_x", &LstmParams::w_x)
      .def_readwrite("b", &LstmParams::b)
      .def("validate", &LstmParams::validate);

  m.def(
      "prune_state", [](const Vector& h, double t) { return prune_state(h, t); },
      py::arg("h"), py::arg("threshold"));
  m.def(
      "lstm_step",
      [](const LstmParams& p, const Vector& x, const Vector& h, const Vector& c,
         std::optional<double> threshold) {
        const LstmState s{h, c};
        const StepResult r = threshold
                                 ? lstm_step_pruned(p, x, s, PruneConfig{*threshold, true})
                                 : lstm_step_dense(p, x, s);
        return py::make_tuple(r.state.h, r.state.c, r.pruned_h);
      },
      py::arg("params"), py::arg("x"), py::arg("h"), py::arg("c"),
      py::arg("threshold") = py::none(),
      "One step; returns (h, c, consumed_h). With a threshold the consumed state is pruned.");

  // sparse state
  py::class_<SparseStateVector>(m, "SparseStateVector")
      .def_readonly("original_length", &SparseStateVector::original_length)
      .def_readonly("lanes", &SparseStateVector::lanes)
      .def_readonly("counter_width", &SparseStateVector::counter_width)
      .def_readonly("offsets", &SparseStateVector::offsets)
      .def_readonly("group_values", &SparseStateVector::group_values)
      .def("group_count", &SparseStateVector::group_count)
      .def("compute_group_count", &SparseStateVector::compute_group_count)
      .def("escape_group_count", &SparseStateVector::escape_group_count)
      .def("active_positions", &SparseStateVector::active_positions);
  m.def(
      "encode", [](const Array2& s, int width) { return encode(to_batched(s), width); },
      py::arg("state"), py::arg("counter_width") = kDefaultCounterWidth);
  m.def(
      "decode", [](const SparseStateVector& sv) { return from_batched(decode(sv)); },
      py::arg("sparse"));
  m.def(
      "effective_sparsity", [](const Array2& s) { return effective_sparsity(to_batched(s)); },
      py::arg("state"), "Percentage of positions that are zero in every lane.");

  // traces
  py::class_<StateTrace>(m, "StateTrace")
      .def(py::init<>())
      .def_readwrite("d_h", &StateTrace::d_h)
      .def_readwrite("lanes", &StateTrace::lanes)
      .def_readwrite("counter_width", &StateTrace::counter_width)
      .def_readwrite("scale", &StateTrace::scale)
      .def_readwrite("steps", &StateTrace::steps);
  m.def(
      "read_trace", [](const std::filesystem::path& p) { return read_trace(p); }, py::arg("path"));
  m.def(
      "write_trace",
      [](const std::filesystem::path& p, const StateTrace& t) { write_trace(p, t); },
      py::arg("path"), py::arg("trace"));

  // simulator
  py::enum_<InputMode>(m, "InputMode")
      .value("ONE_HOT", InputMode::kOneHotLookup)
      .value("DENSE", InputMode::kDenseVector);
  py::enum_<ExecutionMode>(m, "ExecutionMode")
      .value("DENSE", ExecutionMode::kDense)
      .value("SPARSE", ExecutionMode::kSparse);

  py::class_<AcceleratorConfig>(m, "AcceleratorConfig")
      .def(py::init<>())
      .def_readwrite("tiles", &AcceleratorConfig::tiles)
      .def_readwrite("pes_per_tile", &AcceleratorConfig::pes_per_tile)
      .def_readwrite("frequency_hz", &AcceleratorConfig::frequency_hz)
      .def_readwrite("weights_per_cycle", &AcceleratorConfig::weights_per_cycle)
      .def_readwrite("inputs_per_cycle", &AcceleratorConfig::inputs_per_cycle)
      .def_readwrite("scratch_depth", &AcceleratorConfig::scratch_depth)
      .def_readwrite("scratch_width_bits", &AcceleratorConfig::scratch_width_bits)
      .def_readwrite("weight_bits", &AcceleratorConfig::weight_bits)
      .def_readwrite("activation_bits", &AcceleratorConfig::activation_bits)
      .def_readwrite("offchip_bandwidth_bps", &AcceleratorConfig::offchip_bandwidth_bps)
      .def_readwrite("peak_gops_per_watt", &AcceleratorConfig::peak_gops_per_watt)
      .def("total_pes", &AcceleratorConfig::total_pes)
      .def("peak_gops", &AcceleratorConfig::peak_gops)
      .def("validate", &AcceleratorConfig::validate);

  py::class_<WorkloadSpec>(m, "WorkloadSpec")
      .def(py::init([](int d_x, int d_h, InputMode mode, int batch,
                       std::vector<SparseStateVector> trace) {
             return WorkloadSpec{d_x, d_h, mode, batch, std::move(trace), true};
           }),
           py::arg("d_x"), py::arg("d_h"), py::arg("input_mode") = InputMode::kOneHotLookup,
           py::arg("batch") = 1, py::arg("trace") = std::vector<SparseStateVector>{})
      .def_readwrite("d_x", &WorkloadSpec::d_x)
      .def_readwrite("d_h", &WorkloadSpec::d_h)
      .def_readwrite("input_mode", &WorkloadSpec::input_mode)
      .def_readwrite("batch", &WorkloadSpec::batch)
      .def_readwrite("trace", &WorkloadSpec::trace);

  py::class_<SimReport>(m, "SimReport")
      .def_readonly("cycles", &SimReport::cycles)
      .def_readonly("ops_nominal", &SimReport::ops_nominal)
      .def_readonly("ops_executed", &SimReport::ops_executed)
      .def_readonly("skipped_positions", &SimReport::skipped_positions)
      .def_readonly("time_s", &SimReport::time_s)
      .def_readonly("gops", &SimReport::gops)
      .def_readonly("gops_per_watt", &SimReport::gops_per_watt)
      .def_readonly("power_w", &SimReport::power_w)
      .def_readonly("steps", &SimReport::steps)
      .def_readonly("lanes", &SimReport::lanes)
      .def_readonly("macs", &SimReport::macs)
      .def_readonly("mac_utilization", &SimReport::mac_utilization);

  m.def("simulate_workload", &simulate_workload, py::arg("config"), py::arg("workload"),
        py::arg("mode") = ExecutionMode::kSparse);
  m.def(
      "simulate_matvec",
      [](const AcceleratorConfig& cfg, int rows, const Array2& state, ExecutionMode mode) {
        return simulate_matvec(cfg, rows, to_batched(state), mode);
      },
      py::arg("config"), py::arg("rows"), py::arg("state"),
      py::arg("mode") = ExecutionMode::kSparse);
  m.def("analytic_speedup", &analytic_speedup, py::arg("workload"), py::arg("sparsity"));
  m.def(
      "count_nominal_ops",
      [](int d_x, int d_h, InputMode mode) { return count_nominal_ops(d_x, d_h, mode); },
      py::arg("d_x"), py::arg("d_h"), py::arg("input_mode") = InputMode::kOneHotLookup,
      "Dense-equivalent operations of one step for one lane.");
}
