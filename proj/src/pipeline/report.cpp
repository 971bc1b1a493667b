//===-- report.cpp - Machine-readable artifact emission ---------------------===//
//
// Part of the Sluice project, under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//

#include "pipeline/report.hpp"

#include <json.hpp>

namespace sluice::pipeline {

using nlohmann::ordered_json;

namespace {

ordered_json orderSigJson(
    const std::vector<std::pair<std::string, std::int64_t>> &sig) {
  ordered_json arr = ordered_json::array();
  for (const auto &[var, trip] : sig) {
    ordered_json e;
    e["var"] = var;
    e["trip"] = trip;
    arr.push_back(std::move(e));
  }
  return arr;
}

ordered_json fineJson(const analysis::FineViolation &v) {
  ordered_json j;
  j["array"] = v.array;
  j["producer"] = v.producer;
  j["consumer"] = v.consumer;
  j["kind"] = analysis::fineKindName(v.kind);
  j["write_count"] = v.writeCount;
  j["read_count"] = v.readCount;
  j["producer_order"] = orderSigJson(v.producerOrder);
  j["consumer_order"] = orderSigJson(v.consumerOrder);
  j["confirmed"] = v.confirmed;
  return j;
}

ordered_json resourcesJson(const perf::ResourceVector &r) {
  ordered_json j;
  j["dsp"] = r.dsp;
  j["bram18k"] = r.bram18k;
  j["ff"] = r.ff;
  j["lut"] = r.lut;
  return j;
}

ordered_json edgeJson(const ir::BufferEdge &e) {
  ordered_json j;
  j["array"] = e.array;
  j["producer"] = e.producer;
  j["consumer"] = e.consumer;
  j["state"] = ir::edgeStateName(e.state);
  if (!e.stateReason.empty())
    j["reason"] = e.stateReason;
  if (e.spec) {
    j["kind"] = ir::bufferKindName(e.spec->kind);
    j["width_bits"] = e.spec->widthBits;
    if (e.spec->kind == ir::BufferKind::Fifo)
      j["depth"] = e.spec->depth;
    if (e.spec->kind == ir::BufferKind::PingPong)
      j["block_elems"] = e.spec->blockElems;
  }
  return j;
}

double fifoPercentage(const ir::DataflowGraph &g) {
  if (g.edges.empty())
    return 1.0;
  std::int64_t fifo = 0;
  for (const auto &e : g.edges)
    if (e.spec && e.spec->kind == ir::BufferKind::Fifo)
      ++fifo;
  return static_cast<double>(fifo) / static_cast<double>(g.edges.size());
}

ordered_json scheduleJson(const perf::ScheduleMap &s) {
  ordered_json nodes = ordered_json::object();
  for (const auto &[name, ns] : s.nodes) {
    ordered_json nj;
    nj["degree"] = ns.degree;
    nj["pipelined"] = ns.pipelined;
    ordered_json loops = ordered_json::array();
    for (const auto &[path, ls] : ns.loops) {
      ordered_json lj;
      lj["path"] = path;
      lj["tile"] = ls.tile;
      lj["unroll"] = ls.unroll;
      lj["pipelined"] = ls.pipelined;
      loops.push_back(std::move(lj));
    }
    nj["loops"] = std::move(loops);
    ordered_json parts = ordered_json::object();
    for (const auto &[array, f] : ns.partitions)
      parts[array] = f;
    nj["partitions"] = std::move(parts);
    nodes[name] = std::move(nj);
  }
  return nodes;
}

} // namespace

std::string violationReportJson(
    const std::string &programName,
    const std::vector<analysis::CoarseViolation> &coarse,
    const std::vector<analysis::FineViolation> &fine) {
  ordered_json root;
  root["program"] = programName;
  root["coarse"] = ordered_json::array();
  for (const auto &v : coarse) {
    ordered_json j;
    j["array"] = v.array;
    j["pattern"] = analysis::coarsePatternName(v.pattern);
    j["writers"] = v.writers;
    j["readers"] = v.readers;
    root["coarse"].push_back(std::move(j));
  }
  root["fine"] = ordered_json::array();
  for (const auto &v : fine)
    root["fine"].push_back(fineJson(v));
  return root.dump(2) + "\n";
}

std::string transformLogJson(const TransformLog &log) {
  ordered_json root;
  root["entries"] = ordered_json::array();
  for (const auto &e : log) {
    ordered_json j;
    j["pass"] = e.pass;
    j["action"] = e.action;
    if (!e.array.empty())
      j["array"] = e.array;
    if (!e.producer.empty())
      j["producer"] = e.producer;
    if (!e.consumer.empty())
      j["consumer"] = e.consumer;
    if (!e.detail.empty())
      j["detail"] = e.detail;
    for (const auto &[k, v] : e.metrics)
      j[k] = v;
    root["entries"].push_back(std::move(j));
  }
  return root.dump(2) + "\n";
}

std::string buffersJson(const ir::DataflowGraph &g,
                        const mem::TransferPlan &plan) {
  ordered_json root;
  root["edges"] = ordered_json::array();
  for (const auto &e : g.edges)
    root["edges"].push_back(edgeJson(e));
  root["fifo_percentage"] = fifoPercentage(g);
  ordered_json tp;
  tp["channels"] = plan.channels;
  tp["assignments"] = ordered_json::array();
  for (const auto &[array, ch] : plan.assignment) {
    ordered_json a;
    a["array"] = array;
    a["channel"] = ch;
    tp["assignments"].push_back(std::move(a));
  }
  tp["channel_bytes"] = plan.channelBytes;
  tp["bursts"] = ordered_json::array();
  for (const auto &b : plan.bursts) {
    ordered_json j;
    j["array"] = b.array;
    j["offset"] = b.offsetBytes;
    j["length"] = b.lengthBytes;
    j["channel"] = b.channel;
    tp["bursts"].push_back(std::move(j));
  }
  root["transfer_plan"] = std::move(tp);
  return root.dump(2) + "\n";
}

std::string dseReportJson(const sched::DseReport &report,
                          const perf::ScheduleMap &schedule) {
  ordered_json root;
  root["stages"] = ordered_json::array();
  for (const auto &s : report.stages) {
    ordered_json j;
    j["name"] = s.name;
    j["graph_latency"] = s.graphLatency;
    j["resources"] = resourcesJson(s.resources);
    ordered_json d = ordered_json::object();
    for (const auto &[n, deg] : s.degrees)
      d[n] = deg;
    j["degrees"] = std::move(d);
    root["stages"].push_back(std::move(j));
  }
  root["fifo_percentage"] = report.fifoPercentage;
  root["wall_ms"] = report.wallMs;
  root["schedule"] = scheduleJson(schedule);
  return root.dump(2) + "\n";
}

std::string simResultJson(const sim::SimResult &r) {
  ordered_json root;
  root["outcome"] =
      r.outcome == sim::SimResult::Outcome::Completed ? "completed"
                                                      : "deadlock";
  root["total_cycles"] = r.totalCycles;
  if (r.outcome == sim::SimResult::Outcome::Deadlock) {
    ordered_json d;
    d["cycle"] = r.deadlockCycle;
    d["blocked"] = ordered_json::array();
    for (const auto &b : r.blocked) {
      ordered_json bj;
      bj["node"] = b.node;
      bj["array"] = b.array;
      bj["op"] = b.isRead ? "read" : "write";
      bj["partner_finished"] = b.partnerFinished;
      d["blocked"].push_back(std::move(bj));
    }
    root["deadlock"] = std::move(d);
  } else {
    ordered_json out = ordered_json::object();
    for (const auto &[name, t] : r.outputs)
      out[name] = t.data;
    root["outputs"] = std::move(out);
  }
  ordered_json act = ordered_json::object();
  for (const auto &[n, fl] : r.nodeActivity) {
    ordered_json a;
    a["first"] = fl.first;
    a["last"] = fl.second;
    act[n] = std::move(a);
  }
  root["node_activity"] = std::move(act);
  return root.dump(2) + "\n";
}

std::string traceJsonLines(const sim::SimResult &r) {
  std::string out;
  for (const auto &e : r.events) {
    ordered_json j;
    j["cycle"] = e.cycle;
    j["node"] = e.node;
    j["event"] = e.event;
    if (!e.channel.empty())
      j["channel"] = e.channel;
    out += j.dump() + "\n";
  }
  return out;
}

std::string occupancyCsv(const sim::SimResult &r) {
  std::string out = "cycle,channel,occupancy\n";
  for (const auto &[channel, trace] : r.occupancy)
    for (const auto &[cycle, occ] : trace)
      out += std::to_string(cycle) + "," + channel + "," +
             std::to_string(occ) + "\n";
  return out;
}

std::string aggregateReportJson(const PipelineResult &res) {
  ordered_json root;
  root["program"] = res.graph.prog.name;

  ordered_json found;
  found["coarse"] = res.initialCoarse.size();
  found["fine"] = res.initialFine.size();
  root["violations_found"] = std::move(found);

  std::map<std::string, std::int64_t> actions;
  for (const auto &e : res.log)
    ++actions[e.pass + ":" + e.action];
  ordered_json fixed = ordered_json::object();
  for (const auto &[k, v] : actions)
    fixed[k] = v;
  root["transformations"] = std::move(fixed);

  root["edges"] = ordered_json::array();
  for (const auto &e : res.graph.edges)
    root["edges"].push_back(edgeJson(e));
  root["fifo_percentage"] = fifoPercentage(res.graph);

  ordered_json downgrades = ordered_json::array();
  for (const auto &e : res.log) {
    if (e.action != "downgrade")
      continue;
    ordered_json j;
    j["pass"] = e.pass;
    j["array"] = e.array;
    if (!e.producer.empty())
      j["producer"] = e.producer;
    if (!e.consumer.empty())
      j["consumer"] = e.consumer;
    j["reason"] = e.detail;
    downgrades.push_back(std::move(j));
  }
  root["downgrades"] = std::move(downgrades);

  root["stages"] = ordered_json::array();
  for (const auto &s : res.dse.stages) {
    ordered_json j;
    j["name"] = s.name;
    j["graph_latency"] = s.graphLatency;
    j["resources"] = resourcesJson(s.resources);
    root["stages"].push_back(std::move(j));
  }
  if (res.simResult)
    root["simulated_cycles"] = res.simResult->totalCycles;
  root["compile_ms"] = res.compileMs;
  return root.dump(2) + "\n";
}

} // namespace sluice::pipeline
