#pragma once

// Discrete-event memory controller: per-bank queues with demand-over-DMA
// priority, a shared bus arbiter, a DMA engine issuing 64B bursts, and the
// core replay driver. One instance per simulation run; single-threaded.

#include <algorithm>
#include <array>
#include <cstdint>
#include <deque>
#include <queue>
#include <vector>

#include "migrant/devices.hpp"
#include "migrant/metrics.hpp"
#include "migrant/trace.hpp"
#include "migrant/types.hpp"

namespace migrant {

enum class Priority : std::uint8_t { Demand, Dma };

inline constexpr std::uint32_t kNoJob = ~0u;

struct Request {
    std::uint32_t device = 0;
    std::uint32_t bank = 0;
    Addr addr = 0;
    MemOp op = MemOp::Read;
    std::uint32_t subblock_bytes = 512;
    Priority prio = Priority::Demand;
    Cycle arrival = 0;
    Cycle ready_at = 0;
    Cycle start = 0;
    bool row_hit = false;
    // Owner bookkeeping, opaque to the controller.
    std::uint32_t owner = 0;
    std::uint64_t tag = 0;
    std::uint32_t job = kNoJob;
    std::uint8_t group = 0;
};

/// One logged bank service, kept only when access tracing is enabled.
struct AccessRecord {
    std::uint32_t device = 0;
    std::uint32_t bank = 0;
    std::uint64_t row = 0;
    Addr addr = 0;
    MemOp op = MemOp::Read;
    Priority prio = Priority::Demand;
    Cycle start = 0;
    Cycle device_cycles = 0;
    bool row_hit = false;
    EnergyPj pj = 0;
};

struct DmaBurst {
    std::uint32_t device = 0;
    Addr addr = 0;
    MemOp op = MemOp::Read;
    std::uint32_t subblock_bytes = 512;
    std::uint8_t group = 0;
};

/// Phases run in order; bursts within a phase are independent.
struct DmaJobSpec {
    std::vector<std::vector<DmaBurst>> phases;
    std::uint64_t tag = 0;
};

struct DmaJobInfo {
    Cycle start = 0;
    EnergyPj energy = 0;
    std::uint64_t tag = 0;
    std::uint32_t bursts = 0;
};

class MemoryClient {
public:
    virtual ~MemoryClient() = default;
    virtual void on_core_issue(std::uint32_t core, Cycle now) = 0;
    virtual void on_request_done(std::uint32_t id, const Request& r, Cycle now) = 0;
    virtual void on_request_admitted(std::uint32_t /*id*/, const Request& /*r*/, Cycle /*now*/) {}
    virtual void on_dma_group_done(std::uint32_t /*job*/, std::uint64_t /*tag*/, std::uint8_t /*group*/, Cycle /*now*/) {}
    virtual void on_dma_done(std::uint32_t /*job*/, const DmaJobInfo& /*info*/, Cycle /*now*/) {}
    virtual void on_timer(std::uint64_t /*tag*/, Cycle /*now*/) {}
};

struct SubmitResult {
    std::uint32_t id = 0;
    bool admitted = true;
};

struct DeviceCounters {
    std::uint64_t reads = 0;
    std::uint64_t writes = 0;
    std::uint64_t row_hits = 0;
    std::uint64_t backpressure_events = 0;
    std::uint64_t array_write_bytes = 0;     // PCM: 64B selective writes
    std::uint64_t subblock_write_bytes = 0;  // PCM: dirty sub-block writebacks
    std::uint64_t buffer_writeback_bytes = 0;
};

class MemorySystem {
public:
    explicit MemorySystem(MemoryClient& client, Cycle flush_cycles_per_burst = 2) : client_(client), flush_cycles_(flush_cycles_per_burst) {}

    std::uint32_t add_device(const DeviceGeometry& g) {
        g.validate();
        Device d;
        d.geom = g;
        for (std::uint32_t b = 0; b < g.num_banks; ++b) d.banks.emplace_back(b, g);
        devices_.push_back(std::move(d));
        counters_.emplace_back();
        return static_cast<std::uint32_t>(devices_.size() - 1);
    }

    const DeviceGeometry& geometry(std::uint32_t dev) const { return devices_[dev].geom; }
    std::vector<DeviceGeometry> geometries() const {
        std::vector<DeviceGeometry> out;
        for (const auto& d : devices_) out.push_back(d.geom);
        return out;
    }
    std::size_t num_devices() const { return devices_.size(); }
    const BankState& bank(std::uint32_t dev, std::uint32_t b) const { return devices_[dev].banks[b]; }

    void enable_access_trace(bool on) { trace_accesses_ = on; }
    const std::vector<AccessRecord>& access_trace() const { return access_trace_; }

    /// Queues a request. Demand requests beyond the bank's queue depth wait
    /// for admission (returned `admitted=false`); they are never dropped.
    SubmitResult submit(std::uint32_t dev, Addr addr, MemOp op, Priority prio, Cycle now, std::uint32_t owner, std::uint64_t tag,
                        std::uint32_t subblock_bytes = 512) {
        Request r;
        r.device = dev;
        r.addr = addr;
        r.bank = map_address(addr, devices_[dev].geom).bank;
        r.op = op;
        r.prio = prio;
        r.arrival = r.ready_at = now;
        r.owner = owner;
        r.tag = tag;
        r.subblock_bytes = subblock_bytes;
        return enqueue(r, now);
    }

    /// Starts a DMA job at `now`. Returns the job id.
    std::uint32_t start_dma(DmaJobSpec spec, Cycle now) {
        std::uint32_t id;
        if (!free_jobs_.empty()) {
            id = free_jobs_.back();
            free_jobs_.pop_back();
        } else {
            id = static_cast<std::uint32_t>(jobs_.size());
            jobs_.emplace_back();
        }
        auto& job = jobs_[id];
        job = Job{};
        job.spec = std::move(spec);
        job.info.start = now;
        job.info.tag = job.spec.tag;
        job.active = true;
        for (const auto& ph : job.spec.phases)
            for (const auto& b : ph) {
                ++job.group_remaining[b.group];
                ++job.info.bursts;
            }
        advance_job(id, now);
        return id;
    }

    void schedule_timer(Cycle at, std::uint64_t tag) { push(at, 1, 0, EvKind::Timer, 0, tag); }
    void schedule_core(std::uint32_t core, Cycle at) { push(at, 2, core, EvKind::CoreIssue, core, 0); }

    /// Runs until no events remain. Returns the time of the last event.
    Cycle run() {
        while (!events_.empty()) {
            const Event e = events_.top();
            events_.pop();
            now_ = e.time;
            switch (e.kind) {
                case EvKind::BankDone: on_bank_done(static_cast<std::uint32_t>(e.b)); break;
                case EvKind::BusDone: on_bus_done(static_cast<std::uint32_t>(e.b)); break;
                case EvKind::BankWake: try_start(e.a, static_cast<std::uint32_t>(e.b), now_); break;
                case EvKind::Timer: client_.on_timer(e.b, now_); break;
                case EvKind::CoreIssue: client_.on_core_issue(e.a, now_); break;
            }
        }
        return now_;
    }

    Cycle now() const { return now_; }

    // Accounting.
    EnergyLedger& ledger() { return ledger_; }
    const EnergyLedger& ledger() const { return ledger_; }
    AccessLog& log() { return log_; }
    const AccessLog& log() const { return log_; }
    WearMap& wear() { return wear_; }
    const WearMap& wear() const { return wear_; }
    const DeviceCounters& counters(std::uint32_t dev) const { return counters_[dev]; }

    Cycle busy_cycles(std::uint32_t dev) const {
        Cycle sum = 0;
        for (const auto& b : devices_[dev].banks) sum += b.busy_cycles();
        return sum;
    }

    void charge_fixed(FixedCharge f, const FixedCosts& costs, std::uint64_t n = 1) {
        log_.record(f, n);
        const EnergyPj e = static_cast<EnergyPj>(n) * costs.pj(f);
        (f == FixedCharge::SoftwareMigration ? ledger_.software : ledger_.sram_dynamic) += e;
    }

    std::size_t pending_requests() const { return live_requests_; }

private:
    enum class EvKind : std::uint8_t { BankDone, BusDone, BankWake, Timer, CoreIssue };

    struct Event {
        Cycle time;
        std::uint8_t klass;  // hardware < timers < core issues at equal time
        std::uint32_t order;
        std::uint64_t seq;
        EvKind kind;
        std::uint32_t a;
        std::uint64_t b;

        bool operator>(const Event& o) const {
            if (time != o.time) return time > o.time;
            if (klass != o.klass) return klass > o.klass;
            if (order != o.order) return order > o.order;
            return seq > o.seq;
        }
    };

    struct Device {
        DeviceGeometry geom;
        std::vector<BankState> banks;
    };

    struct Job {
        DmaJobSpec spec;
        std::size_t phase = 0;
        std::uint32_t phase_remaining = 0;
        std::array<std::uint32_t, 8> group_remaining{};
        DmaJobInfo info;
        bool active = false;
    };

    void push(Cycle at, std::uint8_t klass, std::uint32_t order, EvKind kind, std::uint32_t a, std::uint64_t b) {
        events_.push(Event{at, klass, order, seq_++, kind, a, b});
    }

    std::uint32_t alloc(const Request& r) {
        ++live_requests_;
        if (!free_requests_.empty()) {
            const auto id = free_requests_.back();
            free_requests_.pop_back();
            requests_[id] = r;
            return id;
        }
        requests_.push_back(r);
        return static_cast<std::uint32_t>(requests_.size() - 1);
    }

    void release(std::uint32_t id) {
        --live_requests_;
        free_requests_.push_back(id);
    }

    SubmitResult enqueue(const Request& r, Cycle now) {
        const auto id = alloc(r);
        auto& bank = devices_[r.device].banks[r.bank];
        SubmitResult out{id, true};
        if (r.prio == Priority::Demand) {
            if (bank.demand_queue.size() >= devices_[r.device].geom.queue_depth) {
                bank.admission_wait.push_back(id);
                ++counters_[r.device].backpressure_events;
                out.admitted = false;
            } else {
                bank.demand_queue.push_back(id);
            }
        } else {
            bank.dma_queue.push_back(id);
        }
        try_start(r.device, r.bank, now);
        return out;
    }

    void try_start(std::uint32_t dev, std::uint32_t b, Cycle now) {
        auto& bank = devices_[dev].banks[b];
        if (bank.active || bank.busy_until() > now) return;
        std::uint32_t id;
        if (!bank.demand_queue.empty()) {
            id = bank.demand_queue.front();
            bank.demand_queue.pop_front();
            if (!bank.admission_wait.empty()) {
                const auto w = bank.admission_wait.front();
                bank.admission_wait.pop_front();
                bank.demand_queue.push_back(w);
                client_.on_request_admitted(w, requests_[w], now);
            }
        } else if (!bank.dma_queue.empty()) {
            const auto front = bank.dma_queue.front();
            if (requests_[front].ready_at > now) {
                push(requests_[front].ready_at, 0, 0, EvKind::BankWake, dev, b);
                return;
            }
            id = front;
            bank.dma_queue.pop_front();
        } else {
            return;
        }
        bank.active = true;
        auto& r = requests_[id];
        r.start = now;
        if (r.op == MemOp::Read) {
            push(now + serve(id, now), 0, 0, EvKind::BankDone, dev, id);
        } else {
            request_bus(id, now);  // data moves to the device first
        }
    }

    /// Device phase of request `id` beginning at `start`; returns device cycles.
    Cycle serve(std::uint32_t id, Cycle start) {
        auto& r = requests_[id];
        auto& dev = devices_[r.device];
        auto& bank = dev.banks[r.bank];
        auto& ctr = counters_[r.device];
        const auto svc = bank.serve(dev.geom, r.op, r.addr, start, r.subblock_bytes);
        r.row_hit = svc.row_hit;
        EnergyPj pj = 0;
        for (std::uint32_t i = 0; i < svc.num_charges; ++i) {
            const auto& c = svc.charges[i];
            log_.record(r.device, c);
            pj += c.pj;
        }
        (dev.geom.is_pcm ? ledger_.pcm_dynamic : ledger_.dram_dynamic) += pj;
        if (r.job != kNoJob) jobs_[r.job].info.energy += pj;

        (r.op == MemOp::Read ? ctr.reads : ctr.writes) += 1;
        ctr.row_hits += svc.row_hit;
        if (dev.geom.is_pcm) {
            if (dev.geom.buffered_writes && r.op != MemOp::WriteSubblock) {
                for (Addr a : svc.written_back) wear_.record(a);
                ctr.buffer_writeback_bytes += svc.written_back.size() * kBlockBytes;
            } else if (r.op == MemOp::Write64) {
                wear_.record(r.addr);
                ctr.array_write_bytes += kBlockBytes;
            } else if (r.op == MemOp::WriteSubblock) {
                wear_.record(r.addr);
                ctr.subblock_write_bytes += kBlockBytes;
            }
        }
        if (trace_accesses_)
            access_trace_.push_back({r.device, r.bank, map_address(r.addr, dev.geom).row, r.addr, r.op, r.prio, start, svc.device_cycles,
                                     svc.row_hit, pj});
        return svc.device_cycles;
    }

    void request_bus(std::uint32_t id, Cycle now) {
        (requests_[id].prio == Priority::Demand ? bus_demand_ : bus_dma_).push_back(id);
        if (!bus_active_) grant_bus(now);
    }

    void grant_bus(Cycle now) {
        std::uint32_t id;
        if (!bus_demand_.empty()) {
            id = bus_demand_.front();
            bus_demand_.pop_front();
        } else if (!bus_dma_.empty()) {
            id = bus_dma_.front();
            bus_dma_.pop_front();
        } else {
            return;
        }
        bus_active_ = true;
        const Cycle end = bus_.reserve(now, kBlockBytes);
        push(end, 0, 0, EvKind::BusDone, 0, id);
    }

    void on_bank_done(std::uint32_t id) {
        auto& r = requests_[id];
        const auto dev = r.device, b = r.bank;
        devices_[dev].banks[b].active = false;
        if (r.op == MemOp::Read) {
            request_bus(id, now_);
        } else {
            complete(id);
        }
        try_start(dev, b, now_);
    }

    void on_bus_done(std::uint32_t id) {
        bus_active_ = false;
        auto& r = requests_[id];
        if (r.op == MemOp::Read) {
            complete(id);
        } else {
            push(now_ + serve(id, now_), 0, 0, EvKind::BankDone, r.device, id);
        }
        grant_bus(now_);
    }

    void complete(std::uint32_t id) {
        const Request r = requests_[id];
        release(id);
        if (r.job == kNoJob) {
            client_.on_request_done(id, r, now_);
            return;
        }
        auto& job = jobs_[r.job];
        if (--job.group_remaining[r.group] == 0) client_.on_dma_group_done(r.job, job.spec.tag, r.group, now_);
        if (--job.phase_remaining == 0) {
            ++job.phase;
            advance_job(r.job, now_);
        }
    }

    void advance_job(std::uint32_t id, Cycle now) {
        auto& job = jobs_[id];
        while (job.phase < job.spec.phases.size() && job.spec.phases[job.phase].empty()) ++job.phase;
        if (job.phase >= job.spec.phases.size()) {
            job.active = false;
            const auto info = job.info;
            free_jobs_.push_back(id);
            client_.on_dma_done(id, info, now);
            return;
        }
        const auto& bursts = job.spec.phases[job.phase];
        job.phase_remaining = static_cast<std::uint32_t>(bursts.size());
        // Each burst first probes the L2 for stale copies through one port.
        for (const auto& b : bursts) {
            probe_free_ = std::max(probe_free_, now) + flush_cycles_;
            Request r;
            r.device = b.device;
            r.addr = b.addr;
            r.bank = map_address(b.addr, devices_[b.device].geom).bank;
            r.op = b.op;
            r.subblock_bytes = b.subblock_bytes;
            r.prio = Priority::Dma;
            r.arrival = now;
            r.ready_at = probe_free_;
            r.job = id;
            r.group = b.group;
            enqueue(r, now);
        }
    }

    MemoryClient& client_;
    Cycle flush_cycles_;
    std::vector<Device> devices_;
    std::vector<DeviceCounters> counters_;
    BusState bus_;
    bool bus_active_ = false;
    std::deque<std::uint32_t> bus_demand_, bus_dma_;
    std::vector<Request> requests_;
    std::vector<std::uint32_t> free_requests_;
    std::size_t live_requests_ = 0;
    std::vector<Job> jobs_;
    std::vector<std::uint32_t> free_jobs_;
    Cycle probe_free_ = 0;
    std::priority_queue<Event, std::vector<Event>, std::greater<Event>> events_;
    std::uint64_t seq_ = 0;
    Cycle now_ = 0;
    EnergyLedger ledger_;
    AccessLog log_;
    WearMap wear_;
    bool trace_accesses_ = false;
    std::vector<AccessRecord> access_trace_;
};

// ---------------------------------------------------------------------------

/// Replays per-core record streams. A core issues its next record at
/// (trace timestamp + accumulated stall); `resume` ends the current
/// record's stall.
class CoreDriver {
public:
    void load(const Trace& trace) {
        const auto n = std::max<std::uint32_t>(1, num_cores_of(trace));
        cores_.assign(n, Core{});
        for (const auto& r : trace) cores_[r.core].records.push_back(r);
    }

    void start(MemorySystem& mem) {
        for (std::uint32_t c = 0; c < cores_.size(); ++c)
            if (!cores_[c].records.empty()) mem.schedule_core(c, cores_[c].records.front().timestamp);
    }

    const TraceRecord& begin_issue(std::uint32_t core, Cycle now) {
        auto& c = cores_[core];
        check_invariant(!c.in_flight, "core issued while stalled");
        c.in_flight = true;
        c.issue_time = now;
        return c.records[c.next];
    }

    void resume(MemorySystem& mem, std::uint32_t core, Cycle t) {
        auto& c = cores_[core];
        check_invariant(c.in_flight && t >= c.issue_time, "resume without an issued record");
        c.in_flight = false;
        c.stall += t - c.issue_time;
        ++c.next;
        if (c.next < c.records.size()) {
            mem.schedule_core(core, c.records[c.next].timestamp + c.stall);
        } else {
            c.finish = t;
        }
    }

    std::size_t num_cores() const { return cores_.size(); }
    Cycle finish(std::uint32_t core) const { return cores_[core].finish; }
    Cycle stall(std::uint32_t core) const { return cores_[core].stall; }
    bool all_done() const {
        for (const auto& c : cores_)
            if (c.next < c.records.size()) return false;
        return true;
    }

private:
    struct Core {
        std::vector<TraceRecord> records;
        std::size_t next = 0;
        Cycle stall = 0;
        Cycle issue_time = 0;
        Cycle finish = 0;
        bool in_flight = false;
    };
    std::vector<Core> cores_;
};

}  // namespace migrant
