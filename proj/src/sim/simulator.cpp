//===-- simulator.cpp - Discrete-event dataflow simulator -------------------===//
//
// Part of the Sluice project, under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//

#include "sim/simulator.hpp"

#include "support/error.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace sluice::sim {

using namespace ir;
using perf::CostTable;
using perf::NodeSchedule;
using perf::ScheduleMap;

namespace {

//===----------------------------------------------------------------------===//
// Channels
//===----------------------------------------------------------------------===//

struct Channel {
  std::string key;
  std::string array;
  std::string producer;
  std::string consumer;
  BufferSpec spec;
  bool producerDone = false;

  // FIFO state
  std::deque<double> fifo;

  // Ping-pong state: values stay addressable within the two live banks.
  std::map<std::int64_t, std::int64_t> blockOfAddr; // flat addr -> block id
  std::map<std::int64_t, double> store;
  std::int64_t writesSeen = 0;
  std::int64_t completedBlocks = 0; // blocks fully written
  std::int64_t oldestBlock = 0;     // start of the two-bank window

  // Sequential state shares `store`.

  std::int64_t occupancy() const {
    if (spec.kind == BufferKind::Fifo)
      return static_cast<std::int64_t>(fifo.size());
    return completedBlocks - oldestBlock;
  }
};

//===----------------------------------------------------------------------===//
// Per-node micro-op traces
//===----------------------------------------------------------------------===//

enum class OpKindM {
  ChanRead,   // blocking read (value from channel)
  ChanWrite,  // blocking write
  LocalRead,  // node-private or external array
  LocalWrite,
  Compute,
  Delay, // pure delay (pipeline depth charge)
};

struct MicroOp {
  OpKindM kind;
  const Stmt *stmt = nullptr;
  std::int64_t addr = 0;   // flat address for array ops
  int channel = -1;        // channel index for ChanRead/ChanWrite
  std::int64_t delay = 0;  // cycles charged after completing this op
};

struct NodeProcess {
  std::string name;
  std::vector<MicroOp> trace;
  size_t cursor = 0;
  std::int64_t readyCycle = 0;
  std::map<std::string, double> values;
  std::int64_t firstActivity = -1;
  std::int64_t lastActivity = -1;
  bool blocked = false;
  int blockedChannel = -1;
  bool blockedOnRead = true;

  bool done() const { return cursor >= trace.size(); }
};

struct TraceBuilder {
  const Program &prog;
  const NodeSchedule &sched;
  const CostTable &costs;
  const std::set<std::string> &fifoArrays;
  // array -> channel routing for this node
  std::map<std::string, int> readChannel;
  std::map<std::string, std::vector<int>> writeChannels;
  const std::map<std::string, const ArrayDecl *> &decls;

  std::vector<MicroOp> trace;

  // Pipelined-region bookkeeping.
  bool inPipeline = false;
  std::int64_t ii = 1;
  std::int64_t unroll = 1;
  std::int64_t iterInSlot = 0;

  void run(const TaskNode &node) {
    VarEnv env;
    LoopPath path;
    exec(node.body, env, path);
    flushSlot();
  }

  void flushSlot() {
    if (inPipeline && iterInSlot > 0 && !trace.empty()) {
      trace.back().delay += ii;
      iterInSlot = 0;
    }
  }

  void endIteration() {
    if (!inPipeline)
      return;
    if (++iterInSlot >= unroll) {
      if (!trace.empty())
        trace.back().delay += ii;
      else
        trace.push_back({OpKindM::Delay, nullptr, 0, -1, ii});
      iterInSlot = 0;
    }
  }

  void exec(const std::vector<BodyElem> &body, VarEnv &env, LoopPath &path) {
    bool leafBlock = std::none_of(body.begin(), body.end(),
                                  [](const BodyElem &e) { return e.isLoop(); });
    for (int i = 0; i < static_cast<int>(body.size()); ++i) {
      const BodyElem &e = body[i];
      if (e.isLoop()) {
        const Loop &l = e.loop();
        path.push_back(i);
        auto it = sched.loops.find(path);
        bool pipelineHere =
            !inPipeline && it != sched.loops.end() && it->second.pipelined;
        if (pipelineHere) {
          auto params =
              perf::pipelineParams(l, path, sched, costs, fifoArrays);
          inPipeline = true;
          ii = std::max<std::int64_t>(1, params.ii);
          unroll = totalUnroll(l, path);
          iterInSlot = 0;
          if (params.depth > 0)
            trace.push_back({OpKindM::Delay, nullptr, 0, -1, params.depth});
        }
        for (std::int64_t v = l.lower; v < l.upper; v += l.step) {
          env[l.var] = v;
          exec(l.children, env, path);
        }
        env.erase(l.var);
        if (pipelineHere) {
          flushSlot();
          inPipeline = false;
          ii = 1;
          unroll = 1;
        }
        path.pop_back();
      } else {
        emitStmt(e.stmt(), env);
      }
    }
    if (leafBlock && !body.empty())
      endIteration();
  }

  // Product of unroll factors within the pipelined subtree.
  std::int64_t totalUnroll(const Loop &l, const LoopPath &path) {
    std::int64_t u = std::max<std::int64_t>(1, sched.unrollAt(path));
    LoopPath p = path;
    std::function<void(const std::vector<BodyElem> &)> walk =
        [&](const std::vector<BodyElem> &body) {
          for (int i = 0; i < static_cast<int>(body.size()); ++i) {
            if (!body[i].isLoop())
              continue;
            p.push_back(i);
            u *= std::max<std::int64_t>(1, sched.unrollAt(p));
            walk(body[i].loop().children);
            p.pop_back();
          }
        };
    walk(l.children);
    return u;
  }

  void emitStmt(const Stmt &s, const VarEnv &env) {
    if (s.guard && !s.guard->holds(env))
      return;
    MicroOp op;
    op.stmt = &s;
    op.delay = inPipeline ? 0 : opCost(s);
    switch (s.kind) {
    case StmtKind::Load: {
      std::int64_t addr = flatten(s, env);
      auto it = readChannel.find(s.array);
      if (it != readChannel.end()) {
        op.kind = OpKindM::ChanRead;
        op.channel = it->second;
      } else {
        op.kind = OpKindM::LocalRead;
      }
      op.addr = addr;
      trace.push_back(op);
      break;
    }
    case StmtKind::Store: {
      std::int64_t addr = flatten(s, env);
      op.addr = addr;
      auto it = writeChannels.find(s.array);
      if (it != writeChannels.end()) {
        // A write lands on every channel this node produces for the array;
        // the shadow copy stays readable for read-modify-write bodies.
        for (int ch : it->second) {
          MicroOp w = op;
          w.kind = OpKindM::ChanWrite;
          w.channel = ch;
          w.delay = 0;
          trace.push_back(w);
        }
        MicroOp shadow = op;
        shadow.kind = OpKindM::LocalWrite;
        trace.push_back(shadow);
      } else {
        op.kind = OpKindM::LocalWrite;
        trace.push_back(op);
      }
      break;
    }
    case StmtKind::Compute:
      op.kind = OpKindM::Compute;
      trace.push_back(op);
      break;
    }
  }

  std::int64_t opCost(const Stmt &s) const {
    if (s.kind == StmtKind::Compute)
      return costs.of(s.op).latency;
    return costs.memLatency;
  }

  std::int64_t flatten(const Stmt &s, const VarEnv &env) const {
    const ArrayDecl *decl = decls.at(s.array);
    std::int64_t flat = 0;
    for (size_t d = 0; d < s.index.size(); ++d) {
      std::int64_t v = s.index[d].eval(env);
      if (v < 0 || v >= decl->shape[d])
        fail(ErrorKind::Internal,
             "simulation: index out of bounds on '" + s.array + "'");
      flat = flat * decl->shape[d] + v;
    }
    return flat;
  }
};

} // namespace

//===----------------------------------------------------------------------===//
// simulate
//===----------------------------------------------------------------------===//

SimResult simulate(const DataflowGraph &g, const ScheduleMap &scheds,
                   const TensorMap &inputs, const CostTable &costs,
                   const SimOptions &opts) {
  std::map<std::string, const ArrayDecl *> decls;
  for (const auto &a : g.prog.arrays)
    decls[a.name] = &a;

  // Channels, one per edge.
  std::vector<Channel> channels;
  for (const auto &e : g.edges) {
    Channel c;
    c.key = e.key();
    c.array = e.array;
    c.producer = e.producer;
    c.consumer = e.consumer;
    c.spec = e.spec.value_or(BufferSpec{});
    channels.push_back(std::move(c));
  }

  auto fifoArrays = perf::fifoArraysOf(g);

  // Per-node storage (externals + private internals + write shadows).
  std::map<std::string, Tensor> local;
  auto localTensor = [&](const std::string &array) -> Tensor & {
    auto it = local.find(array);
    if (it != local.end())
      return it->second;
    Tensor t = Tensor::zeros(decls.at(array)->shape);
    auto in = inputs.find(array);
    if (in != inputs.end()) {
      t = in->second;
      t.markAllWritten();
    }
    return local.emplace(array, std::move(t)).first->second;
  };
  for (const auto &name : externalInputs(g.prog)) {
    if (!inputs.count(name))
      fail(ErrorKind::Validation,
           "missing input tensor for external array '" + name + "'");
    localTensor(name);
  }

  // Build per-node traces.
  std::vector<NodeProcess> procs;
  for (const auto &node : g.prog.nodes) {
    TraceBuilder tb{g.prog,      scheds.of(node.name), costs, fifoArrays, {},
                    {},          decls,                {},    false,
                    1,           1,                    0};
    for (size_t ci = 0; ci < channels.size(); ++ci) {
      if (channels[ci].consumer == node.name &&
          !tb.readChannel.count(channels[ci].array))
        tb.readChannel[channels[ci].array] = static_cast<int>(ci);
      if (channels[ci].producer == node.name)
        tb.writeChannels[channels[ci].array].push_back(static_cast<int>(ci));
    }
    tb.run(node);
    NodeProcess p;
    p.name = node.name;
    p.trace = std::move(tb.trace);
    procs.push_back(std::move(p));
  }

  std::int64_t maxCycles = opts.maxCycles;
  if (maxCycles <= 0) {
    std::int64_t est = perf::estimateGraphLatency(g, scheds, costs);
    maxCycles = 100 * std::max<std::int64_t>(est, 1000);
  }

  SimResult result;
  auto recordOcc = [&](const Channel &c, std::int64_t cycle) {
    auto &trace = result.occupancy[c.key];
    std::int64_t occ = c.occupancy();
    if (trace.empty() || trace.back().second != occ)
      trace.emplace_back(cycle, occ);
  };
  for (size_t ci = 0; ci < channels.size(); ++ci)
    recordOcc(channels[ci], 0);

  auto event = [&](std::int64_t cycle, const std::string &node,
                   const char *what, const std::string &chan) {
    if (opts.collectEvents)
      result.events.push_back({cycle, node, what, chan});
  };

  std::int64_t cycle = 0;
  std::int64_t lastActivityCycle = 0;

  auto markDone = [&](NodeProcess &p) {
    for (auto &c : channels)
      if (c.producer == p.name)
        c.producerDone = true;
  };

  while (true) {
    bool allDone = true;
    bool progress = false;

    for (auto &p : procs) {
      if (p.done())
        continue;
      allDone = false;
      if (p.readyCycle > cycle)
        continue;
      p.blocked = false;

      // Drain as many ops as possible this cycle until a delay or a block.
      while (!p.done()) {
        MicroOp &op = p.trace[p.cursor];
        bool complete = false;
        switch (op.kind) {
        case OpKindM::Delay:
          complete = true;
          break;
        case OpKindM::Compute: {
          std::vector<double> args;
          for (const auto &o : op.stmt->operands)
            args.push_back(o.isConst ? o.constant : p.values[o.value]);
          p.values[op.stmt->result] = applyOp(op.stmt->op, args, opts.mode);
          complete = true;
          break;
        }
        case OpKindM::LocalRead: {
          Tensor &t = localTensor(op.stmt->array);
          p.values[op.stmt->result] = t.at(op.addr);
          complete = true;
          break;
        }
        case OpKindM::LocalWrite: {
          Tensor &t = localTensor(op.stmt->array);
          const Operand &o = op.stmt->operands[0];
          t.set(op.addr, o.isConst ? o.constant : p.values[o.value]);
          complete = true;
          break;
        }
        case OpKindM::ChanRead: {
          Channel &c = channels[op.channel];
          if (c.spec.kind == BufferKind::Fifo) {
            if (c.fifo.empty()) {
              p.blocked = true;
              p.blockedChannel = op.channel;
              p.blockedOnRead = true;
              event(cycle, p.name, "block_read", c.key);
            } else {
              p.values[op.stmt->result] = c.fifo.front();
              c.fifo.pop_front();
              recordOcc(c, cycle);
              event(cycle, p.name, "read", c.key);
              complete = true;
            }
          } else if (c.spec.kind == BufferKind::PingPong) {
            auto bit = c.blockOfAddr.find(op.addr);
            std::int64_t blk =
                bit == c.blockOfAddr.end() ? c.completedBlocks : bit->second;
            if (bit != c.blockOfAddr.end() && blk < c.oldestBlock)
              fail(ErrorKind::Internal,
                   "ping-pong random access to a retired block on '" +
                       c.key + "'");
            if (bit == c.blockOfAddr.end() || blk >= c.completedBlocks) {
              p.blocked = true; // block not yet complete
              p.blockedChannel = op.channel;
              p.blockedOnRead = true;
              event(cycle, p.name, "block_read", c.key);
            } else {
              if (blk > c.oldestBlock + 1) {
                c.oldestBlock = blk - 1; // retire the oldest bank
                recordOcc(c, cycle);
              }
              p.values[op.stmt->result] = c.store[op.addr];
              event(cycle, p.name, "read", c.key);
              complete = true;
            }
          } else { // Sequential
            if (!c.producerDone) {
              p.blocked = true;
              p.blockedChannel = op.channel;
              p.blockedOnRead = true;
              event(cycle, p.name, "block_read", c.key);
            } else {
              p.values[op.stmt->result] = c.store[op.addr];
              complete = true;
            }
          }
          break;
        }
        case OpKindM::ChanWrite: {
          Channel &c = channels[op.channel];
          const Operand &o = op.stmt->operands[0];
          double val = o.isConst ? o.constant : p.values[o.value];
          if (c.spec.kind == BufferKind::Fifo) {
            if (static_cast<std::int64_t>(c.fifo.size()) >= c.spec.depth) {
              p.blocked = true;
              p.blockedChannel = op.channel;
              p.blockedOnRead = false;
              event(cycle, p.name, "block_write", c.key);
            } else {
              c.fifo.push_back(val);
              recordOcc(c, cycle);
              event(cycle, p.name, "write", c.key);
              complete = true;
            }
          } else if (c.spec.kind == BufferKind::PingPong) {
            std::int64_t blk = c.writesSeen / std::max<std::int64_t>(
                                                  1, c.spec.blockElems);
            if (blk > c.oldestBlock + 1) {
              p.blocked = true; // both banks still live
              p.blockedChannel = op.channel;
              p.blockedOnRead = false;
              event(cycle, p.name, "block_write", c.key);
            } else {
              c.store[op.addr] = val;
              if (!c.blockOfAddr.count(op.addr))
                c.blockOfAddr[op.addr] = blk;
              ++c.writesSeen;
              if (c.writesSeen % std::max<std::int64_t>(
                                     1, c.spec.blockElems) ==
                  0) {
                ++c.completedBlocks;
                recordOcc(c, cycle);
              }
              event(cycle, p.name, "write", c.key);
              complete = true;
            }
          } else { // Sequential: plain store, consumer gated on completion
            c.store[op.addr] = val;
            complete = true;
          }
          break;
        }
        }

        if (!complete)
          break;
        if (p.firstActivity < 0)
          p.firstActivity = cycle;
        progress = true;
        std::int64_t delay = p.trace[p.cursor].delay;
        ++p.cursor;
        p.lastActivity = cycle + delay; // pipeline drain counts
        lastActivityCycle = std::max(lastActivityCycle, p.lastActivity);
        if (p.done()) {
          markDone(p);
          event(cycle, p.name, "done", "");
          break;
        }
        if (delay > 0) {
          p.readyCycle = cycle + delay;
          break;
        }
      }
    }

    if (allDone) {
      result.outcome = SimResult::Outcome::Completed;
      result.totalCycles = lastActivityCycle;
      break;
    }

    if (!progress) {
      // Nothing advanced this cycle: either wait for a scheduled delay or
      // declare global quiescence.
      std::int64_t next = std::numeric_limits<std::int64_t>::max();
      for (const auto &p : procs)
        if (!p.done() && !p.blocked && p.readyCycle > cycle)
          next = std::min(next, p.readyCycle);
      if (next == std::numeric_limits<std::int64_t>::max()) {
        result.outcome = SimResult::Outcome::Deadlock;
        result.deadlockCycle = cycle;
        result.totalCycles = cycle;
        for (const auto &p : procs) {
          if (p.done() || !p.blocked)
            continue;
          const Channel &c = channels[p.blockedChannel];
          BlockedState b;
          b.node = p.name;
          b.array = c.array;
          b.producer = c.producer;
          b.consumer = c.consumer;
          b.isRead = p.blockedOnRead;
          bool partnerDone = true;
          const std::string &partner = p.blockedOnRead ? c.producer
                                                       : c.consumer;
          for (const auto &q : procs)
            if (q.name == partner)
              partnerDone = q.done();
          b.partnerFinished = partnerDone;
          result.blocked.push_back(std::move(b));
        }
        break;
      }
      cycle = next;
    } else {
      ++cycle;
    }

    if (cycle > maxCycles)
      fail(ErrorKind::Timeout,
           "simulation exceeded " + std::to_string(maxCycles) + " cycles");
  }

  for (auto &p : procs)
    if (p.firstActivity >= 0)
      result.nodeActivity[p.name] = {p.firstActivity, p.lastActivity};

  // External arrays after the run.
  for (const auto &a : g.prog.arrays) {
    if (a.placement != Placement::External)
      continue;
    auto it = local.find(a.name);
    if (it != local.end())
      result.outputs.emplace(a.name, it->second);
  }
  return result;
}

//===----------------------------------------------------------------------===//
// Deadlock diagnosis and reference comparison
//===----------------------------------------------------------------------===//

DeadlockInfo detectDeadlock(const SimResult &r) {
  if (r.outcome != SimResult::Outcome::Deadlock)
    fail(ErrorKind::Validation,
         "detectDeadlock called on a completed simulation");
  DeadlockInfo info;
  info.cycle = r.deadlockCycle;
  bool starved = false;
  std::map<std::string, std::set<std::string>> waits;
  for (const auto &b : r.blocked) {
    std::string waitee = b.isRead ? b.producer : b.consumer;
    info.waitsFor.emplace_back(b.node, waitee);
    waits[b.node].insert(waitee);
    if (b.isRead && b.partnerFinished)
      starved = true;
  }
  // A cycle among blocked nodes means mutual waiting; otherwise some reader
  // starves behind a finished or drained producer.
  std::function<bool(const std::string &, std::set<std::string> &)> reach =
      [&](const std::string &n, std::set<std::string> &seen) -> bool {
    if (!seen.insert(n).second)
      return true;
    for (const auto &m : waits[n])
      if (waits.count(m) && reach(m, seen))
        return true;
    seen.erase(n);
    return false;
  };
  bool cyclic = false;
  for (const auto &[n, _] : waits) {
    std::set<std::string> seen;
    if (reach(n, seen))
      cyclic = true;
  }
  info.classification = (cyclic && !starved)
                            ? DeadlockInfo::Kind::CyclicWait
                            : DeadlockInfo::Kind::StarvedReader;
  return info;
}

bool compareWithReference(const SimResult &r, const TensorMap &ref,
                          const std::vector<std::string> &outputArrays,
                          bool exact) {
  for (const auto &name : outputArrays) {
    auto sit = r.outputs.find(name);
    auto rit = ref.find(name);
    if (sit == r.outputs.end() || rit == ref.end())
      fail(ErrorKind::Validation, "missing output tensor '" + name + "'");
    if (sit->second.shape != rit->second.shape)
      fail(ErrorKind::Validation, "shape mismatch on '" + name + "'");
    for (size_t i = 0; i < sit->second.data.size(); ++i) {
      double a = sit->second.data[i];
      double b = rit->second.data[i];
      if (exact) {
        if (a != b)
          return false;
      } else {
        double denom = std::max({std::fabs(a), std::fabs(b), 1e-30});
        if (std::fabs(a - b) / denom > 1e-6)
          return false;
      }
    }
  }
  return true;
}

} // namespace sluice::sim
