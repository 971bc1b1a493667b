//===-- capi.cpp - extern "C" shared-library surface -------------------------===//
//
// Part of the Sluice project, under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//

#include "sluice/sluice.h"

#include "ir/json_io.hpp"
#include "pipeline/driver.hpp"
#include "pipeline/report.hpp"
#include "support/error.hpp"
#include "xform/util.hpp"

#include <cstdlib>
#include <cstring>
#include <map>
#include <memory>
#include <string>

using namespace sluice;

struct sluice_program {
  ir::Program prog;
};

struct sluice_artifacts {
  std::map<sluice_artifact_kind, std::string> items;
};

namespace {

char *dupString(const std::string &s) {
  char *out = static_cast<char *>(std::malloc(s.size() + 1));
  if (out)
    std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void setError(char **error, const std::string &message) {
  if (error)
    *error = dupString(message);
}

sluice_status statusOf(const Error &e) {
  switch (e.kind()) {
  case ErrorKind::Parse:
  case ErrorKind::Validation:
    return SLUICE_ERR_PARSE;
  case ErrorKind::Unresolvable:
    return SLUICE_ERR_UNRESOLVABLE;
  case ErrorKind::Budget:
    return SLUICE_ERR_BUDGET;
  case ErrorKind::Timeout:
    return SLUICE_ERR_TIMEOUT;
  case ErrorKind::Internal:
    return SLUICE_ERR_INTERNAL;
  }
  return SLUICE_ERR_INTERNAL;
}

template <typename Fn>
sluice_status guarded(char **error, Fn &&fn) {
  try {
    fn();
    return SLUICE_OK;
  } catch (const Error &e) {
    setError(error, e.what());
    return statusOf(e);
  } catch (const std::exception &e) {
    setError(error, e.what());
    return SLUICE_ERR_INTERNAL;
  }
}

pipeline::PipelineOptions toPipelineOptions(const sluice_options *o,
                                            char **error,
                                            sluice_status &status) {
  pipeline::PipelineOptions opts;
  status = SLUICE_OK;
  if (!o)
    return opts;
  opts.scheduler.nThreshold = o->threshold;
  opts.scheduler.maxParallel = o->max_parallel;
  opts.scheduler.budget = {o->budget_dsp, o->budget_bram18k, o->budget_ff,
                           o->budget_lut};
  opts.scheduler.maxUpIters = o->max_up_iters;
  opts.scheduler.enableDownscale = o->enable_downscale != 0;
  opts.hbmChannels = o->hbm_channels;
  opts.buffers.fifoDepth = o->fifo_depth;
  opts.maxCycles = o->max_cycles;
  opts.mode = o->int_mode ? ir::NumericMode::ExactInt
                          : ir::NumericMode::Float64;
  opts.collectEvents = o->collect_trace != 0;
  if (o->stop_after) {
    auto stage = pipeline::stageFromName(o->stop_after);
    if (!stage) {
      setError(error, std::string("unknown stage '") + o->stop_after + "'");
      status = SLUICE_ERR_VALIDATION;
      return opts;
    }
    opts.stopAfter = *stage;
  }
  if (o->cost_table_json)
    opts.costs = perf::parseCostTable(o->cost_table_json);
  if (o->device_json)
    opts.scheduler.budget = perf::parseDevice(o->device_json);
  return opts;
}

} // namespace

extern "C" {

void sluice_options_init(sluice_options *opts) {
  if (!opts)
    return;
  *opts = sluice_options{};
  opts->threshold = 2.0;
  opts->max_parallel = 64;
  auto dev = perf::ResourceVector::deviceDefaults();
  opts->budget_dsp = dev.dsp;
  opts->budget_bram18k = dev.bram18k;
  opts->budget_ff = dev.ff;
  opts->budget_lut = dev.lut;
  opts->max_up_iters = 10;
  opts->enable_downscale = 1;
  opts->hbm_channels = 1;
  opts->fifo_depth = 2;
  opts->max_cycles = 0;
  opts->int_mode = 0;
  opts->collect_trace = 0;
  opts->stop_after = nullptr;
  opts->cost_table_json = nullptr;
  opts->device_json = nullptr;
  opts->sim_buffers = nullptr;
}

const char *sluice_version(void) { return "0.1.0"; }

sluice_status sluice_program_parse(const char *json_text, sluice_program **out,
                                   char **error) {
  if (!json_text || !out) {
    setError(error, "null argument");
    return SLUICE_ERR_VALIDATION;
  }
  *out = nullptr;
  return guarded(error, [&] {
    auto prog = ir::parseProgram(json_text);
    *out = new sluice_program{std::move(prog)};
  });
}

sluice_status sluice_program_serialize(const sluice_program *prog,
                                       char **out) {
  if (!prog || !out)
    return SLUICE_ERR_VALIDATION;
  return guarded(nullptr, [&] {
    *out = dupString(ir::serializeProgram(prog->prog));
  });
}

void sluice_program_free(sluice_program *prog) { delete prog; }

sluice_status sluice_random_inputs(const sluice_program *prog, uint64_t seed,
                                   int int_mode, char **out) {
  if (!prog || !out)
    return SLUICE_ERR_VALIDATION;
  return guarded(nullptr, [&] {
    auto tensors = ir::randomInputs(prog->prog, seed,
                                    int_mode ? ir::NumericMode::ExactInt
                                             : ir::NumericMode::Float64);
    *out = dupString(ir::serializeTensors(tensors));
  });
}

sluice_status sluice_analyze(const sluice_program *prog, char **report_json,
                             char **error) {
  if (!prog || !report_json) {
    setError(error, "null argument");
    return SLUICE_ERR_VALIDATION;
  }
  return guarded(error, [&] {
    auto g = ir::buildDataflowGraph(prog->prog);
    auto coarse = analysis::detectCoarseViolations(g);
    auto fine = analysis::detectFineViolations(g);
    *report_json = dupString(
        pipeline::violationReportJson(prog->prog.name, coarse, fine));
  });
}

sluice_status sluice_optimize(const sluice_program *prog,
                              const sluice_options *opts,
                              const char *inputs_json, sluice_artifacts **out,
                              char **error) {
  if (!prog || !out) {
    setError(error, "null argument");
    return SLUICE_ERR_VALIDATION;
  }
  *out = nullptr;
  sluice_status optStatus = SLUICE_OK;
  auto popts = toPipelineOptions(opts, error, optStatus);
  if (optStatus != SLUICE_OK)
    return optStatus;
  return guarded(error, [&] {
    std::optional<ir::TensorMap> inputs;
    if (inputs_json)
      inputs = ir::parseTensors(inputs_json, prog->prog);
    auto res = pipeline::runPipeline(prog->prog, popts,
                                     inputs ? &*inputs : nullptr);

    auto arts = std::make_unique<sluice_artifacts>();
    arts->items[SLUICE_ARTIFACT_PROGRAM] =
        ir::serializeProgram(res.graph.prog);
    arts->items[SLUICE_ARTIFACT_VIOLATIONS] = pipeline::violationReportJson(
        prog->prog.name, res.initialCoarse, res.initialFine);
    arts->items[SLUICE_ARTIFACT_TRANSFORMS] =
        pipeline::transformLogJson(res.log);
    arts->items[SLUICE_ARTIFACT_BUFFERS] =
        pipeline::buffersJson(res.graph, res.transferPlan);
    arts->items[SLUICE_ARTIFACT_DSE] =
        pipeline::dseReportJson(res.dse, res.schedule);
    arts->items[SLUICE_ARTIFACT_REPORT] = pipeline::aggregateReportJson(res);
    if (res.simResult) {
      arts->items[SLUICE_ARTIFACT_SIM] =
          pipeline::simResultJson(*res.simResult);
      if (popts.collectEvents) {
        arts->items[SLUICE_ARTIFACT_TRACE] =
            pipeline::traceJsonLines(*res.simResult);
        arts->items[SLUICE_ARTIFACT_OCCUPANCY] =
            pipeline::occupancyCsv(*res.simResult);
      }
    }
    *out = arts.release();
  });
}

sluice_status sluice_simulate(const sluice_program *prog,
                              const sluice_options *opts,
                              const char *inputs_json, sluice_artifacts **out,
                              char **error) {
  if (!prog || !out || !inputs_json) {
    setError(error, "null argument");
    return SLUICE_ERR_VALIDATION;
  }
  *out = nullptr;
  return guarded(error, [&] {
    auto g = ir::buildDataflowGraph(prog->prog);

    ir::BufferKind kind = ir::BufferKind::Fifo;
    std::int64_t depth = opts && opts->fifo_depth > 0 ? opts->fifo_depth : 2;
    if (opts && opts->sim_buffers) {
      std::string k = opts->sim_buffers;
      if (k == "pingpong")
        kind = ir::BufferKind::PingPong;
      else if (k == "sequential")
        kind = ir::BufferKind::Sequential;
      else if (k != "fifo")
        fail(ErrorKind::Validation, "unknown buffer kind '" + k + "'");
    }
    for (auto &e : g.edges) {
      ir::BufferSpec spec;
      spec.kind = kind;
      spec.depth = depth;
      spec.widthBits = g.prog.findArray(e.array)->elemBits;
      if (kind == ir::BufferKind::PingPong) {
        const ir::TaskNode *prod = g.prog.findNode(e.producer);
        auto w = analysis::accessSummary(*prod, e.array,
                                         analysis::AccessMode::Write);
        auto sites = xform::findSites(*prod, e.array, ir::StmtKind::Store);
        std::int64_t outerTrip =
            (!sites.empty() && !sites[0].chain.empty())
                ? sites[0].chain[0]->tripCount()
                : 1;
        spec.blockElems = std::max<std::int64_t>(
            1, w.count / std::max<std::int64_t>(1, outerTrip));
      }
      e.spec = spec;
    }

    auto inputs = ir::parseTensors(inputs_json, prog->prog);
    sim::SimOptions so;
    so.maxCycles = opts ? opts->max_cycles : 0;
    so.mode = (opts && opts->int_mode) ? ir::NumericMode::ExactInt
                                       : ir::NumericMode::Float64;
    so.collectEvents = opts && opts->collect_trace;
    perf::CostTable costs = (opts && opts->cost_table_json)
                                ? perf::parseCostTable(opts->cost_table_json)
                                : perf::CostTable::defaults();
    auto result = sim::simulate(g, {}, inputs, costs, so);

    auto arts = std::make_unique<sluice_artifacts>();
    arts->items[SLUICE_ARTIFACT_SIM] = pipeline::simResultJson(result);
    if (so.collectEvents) {
      arts->items[SLUICE_ARTIFACT_TRACE] = pipeline::traceJsonLines(result);
      arts->items[SLUICE_ARTIFACT_OCCUPANCY] = pipeline::occupancyCsv(result);
    }
    *out = arts.release();
  });
}

const char *sluice_artifacts_get(const sluice_artifacts *arts,
                                 sluice_artifact_kind kind) {
  if (!arts)
    return nullptr;
  auto it = arts->items.find(kind);
  return it == arts->items.end() ? nullptr : it->second.c_str();
}

void sluice_artifacts_free(sluice_artifacts *arts) { delete arts; }

void sluice_string_free(char *str) { std::free(str); }

} // extern "C"
