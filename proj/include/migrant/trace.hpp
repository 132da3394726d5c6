#pragma once

// Post-L2 trace format: parsing, serialization, and synthetic generators.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "migrant/types.hpp"

namespace migrant {

enum class EventKind : std::uint8_t { ReadMiss, Writeback };

struct TraceRecord {
    Cycle timestamp = 0;
    std::uint32_t core = 0;
    EventKind kind = EventKind::ReadMiss;
    Addr addr = 0;

    static constexpr std::uint32_t size = kBlockBytes;

    friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

using Trace = std::vector<TraceRecord>;

enum class Generator : std::uint8_t { Zipf, Loop, Phased };

struct SyntheticSpec {
    Generator generator = Generator::Zipf;
    std::uint64_t footprint_pages = 1024;
    double zipf_exponent = 1.0;
    double write_fraction = 0.3;
    std::uint64_t records = 100000;
    double gap_cycles = 200.0;
    std::uint32_t num_cores = 1;
    std::uint64_t seed = 1;
    /// Phased only: number of disjoint working sets the footprint is split into.
    std::uint32_t phases = 4;
};

inline constexpr std::string_view generator_name(Generator g) {
    switch (g) {
        case Generator::Zipf: return "zipf";
        case Generator::Loop: return "loop";
        case Generator::Phased: return "phased";
    }
    return "?";
}

inline Generator parse_generator(std::string_view s) {
    if (s == "zipf") return Generator::Zipf;
    if (s == "loop") return Generator::Loop;
    if (s == "phased") return Generator::Phased;
    throw ConfigError("unknown generator '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Text format: "<timestamp> <core> <R|W> <hex addr>", '#' starts a comment line.

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
        std::size_t j = i;
        while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
        if (j > i) out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

template <typename T>
bool parse_uint(std::string_view s, T& out, int base = 10) {
    if (s.empty()) return false;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out, base);
    return ec == std::errc{} && p == s.data() + s.size();
}

[[noreturn]] inline void trace_fail(std::size_t line, const std::string& why) {
    throw TraceError("trace line " + std::to_string(line) + ": " + why);
}

}  // namespace detail

/// Parses the trace text format. Validates alignment, the address bound, and
/// per-core timestamp monotonicity. Records come back in file order.
inline Trace parse_trace(std::istream& in, Addr capacity_bytes) {
    Trace out;
    std::vector<Cycle> last_ts;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto body = detail::trim(line);
        if (body.empty() || body.front() == '#') continue;
        auto fields = detail::split_ws(body);
        if (fields.size() != 4) detail::trace_fail(lineno, "expected 4 fields, got " + std::to_string(fields.size()));

        TraceRecord r;
        if (!detail::parse_uint(fields[0], r.timestamp)) detail::trace_fail(lineno, "bad timestamp");
        if (!detail::parse_uint(fields[1], r.core)) detail::trace_fail(lineno, "bad core id");
        if (fields[2] == "R") {
            r.kind = EventKind::ReadMiss;
        } else if (fields[2] == "W") {
            r.kind = EventKind::Writeback;
        } else {
            detail::trace_fail(lineno, "kind must be R or W");
        }
        auto a = fields[3];
        if (a.size() > 2 && a[0] == '0' && (a[1] == 'x' || a[1] == 'X')) a.remove_prefix(2);
        if (!detail::parse_uint(a, r.addr, 16)) detail::trace_fail(lineno, "bad hex address");
        if (r.addr % kBlockBytes != 0) detail::trace_fail(lineno, "address not 64-byte aligned");
        if (r.addr >= capacity_bytes) detail::trace_fail(lineno, "address beyond PCM capacity");

        if (r.core >= last_ts.size()) last_ts.resize(r.core + 1, 0);
        if (r.timestamp < last_ts[r.core]) detail::trace_fail(lineno, "timestamp regression on core " + std::to_string(r.core));
        last_ts[r.core] = r.timestamp;
        out.push_back(r);
    }
    return out;
}

inline Trace parse_trace(std::string_view text, Addr capacity_bytes) {
    std::istringstream in{std::string(text)};
    return parse_trace(in, capacity_bytes);
}

inline void write_record(std::ostream& out, const TraceRecord& r) {
    char buf[64];
    const int n = std::snprintf(buf, sizeof buf, "%llu %u %c 0x%llx\n", static_cast<unsigned long long>(r.timestamp), r.core,
                                r.kind == EventKind::ReadMiss ? 'R' : 'W', static_cast<unsigned long long>(r.addr));
    out.write(buf, n);
}

inline void serialize_trace(std::ostream& out, const Trace& trace) {
    for (const auto& r : trace) write_record(out, r);
}

inline std::string serialize_trace(const Trace& trace) {
    std::ostringstream out;
    serialize_trace(out, trace);
    return out.str();
}

inline std::uint32_t num_cores_of(const Trace& trace) {
    std::uint32_t n = 0;
    for (const auto& r : trace) n = std::max(n, r.core + 1);
    return n;
}

// ---------------------------------------------------------------------------
// Synthetic generators.

namespace detail {

inline void validate(const SyntheticSpec& s) {
    if (s.footprint_pages == 0) throw ConfigError("footprint_pages must be >= 1");
    if (!(s.zipf_exponent >= 0.0)) throw ConfigError("zipf_exponent must be >= 0");
    if (!(s.write_fraction >= 0.0 && s.write_fraction <= 1.0)) throw ConfigError("write_fraction must be in [0,1]");
    if (!(s.gap_cycles >= 0.0)) throw ConfigError("gap_cycles must be >= 0");
    if (s.num_cores == 0) throw ConfigError("num_cores must be >= 1");
    if (s.generator == Generator::Phased && (s.phases == 0 || s.phases > s.footprint_pages))
        throw ConfigError("phases must be in [1, footprint_pages]");
}

/// Inverse-CDF sampler over ranks 0..n-1 with weight 1/(rank+1)^s.
class ZipfSampler {
public:
    ZipfSampler(std::uint64_t n, double exponent) : cdf_(n) {
        double acc = 0.0;
        for (std::uint64_t k = 0; k < n; ++k) {
            acc += 1.0 / std::pow(static_cast<double>(k + 1), exponent);
            cdf_[k] = acc;
        }
        for (auto& c : cdf_) c /= acc;
        cdf_.back() = 1.0;
    }

    std::uint64_t operator()(Rng& rng) const {
        const double u = rng.uniform();
        auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
        return static_cast<std::uint64_t>(std::min<std::ptrdiff_t>(it - cdf_.begin(), static_cast<std::ptrdiff_t>(cdf_.size()) - 1));
    }

private:
    std::vector<double> cdf_;
};

/// Assigns records round-robin to cores with exponential inter-event gaps,
/// then merges into global (timestamp, core) order.
template <typename PagePicker>
Trace build(const SyntheticSpec& s, PagePicker&& pick_page) {
    validate(s);
    Rng rng(s.seed);
    Trace out;
    out.reserve(s.records);
    std::vector<Cycle> clock(s.num_cores, 0);
    for (std::uint64_t i = 0; i < s.records; ++i) {
        const auto core = static_cast<std::uint32_t>(i % s.num_cores);
        const double u = rng.uniform();
        clock[core] += static_cast<Cycle>(-std::log1p(-u) * s.gap_cycles);
        const PageId page = pick_page(i, rng);
        const std::uint64_t block = rng.below(kBlocksPerPage);
        const bool write = rng.bernoulli(s.write_fraction);
        out.push_back({clock[core], core, write ? EventKind::Writeback : EventKind::ReadMiss, page * kPageBytes + block * kBlockBytes});
    }
    std::stable_sort(out.begin(), out.end(), [](const TraceRecord& a, const TraceRecord& b) {
        return a.timestamp != b.timestamp ? a.timestamp < b.timestamp : a.core < b.core;
    });
    return out;
}

}  // namespace detail

/// Page popularity Zipf(exponent) over the footprint; rank r maps to page r.
inline Trace gen_zipf(const SyntheticSpec& s) {
    detail::validate(s);
    detail::ZipfSampler zipf(s.footprint_pages, s.zipf_exponent);
    return detail::build(s, [&](std::uint64_t, Rng& rng) { return zipf(rng); });
}

/// Cycles through pages 0..footprint-1 in order, one record per page touch.
inline Trace gen_loop(const SyntheticSpec& s) {
    return detail::build(s, [&](std::uint64_t i, Rng&) { return i % s.footprint_pages; });
}

/// Splits records into `phases` equal runs; phase p draws Zipf-popular pages
/// from its own disjoint slice of the footprint.
inline Trace gen_phased(const SyntheticSpec& s) {
    detail::validate(s);
    const std::uint64_t per_phase = s.footprint_pages / s.phases;
    const std::uint64_t records_per_phase = std::max<std::uint64_t>(1, (s.records + s.phases - 1) / s.phases);
    detail::ZipfSampler zipf(per_phase, s.zipf_exponent);
    return detail::build(s, [&](std::uint64_t i, Rng& rng) {
        const std::uint64_t phase = std::min<std::uint64_t>(i / records_per_phase, s.phases - 1);
        return phase * per_phase + zipf(rng);
    });
}

inline Trace generate(const SyntheticSpec& s) {
    switch (s.generator) {
        case Generator::Zipf: return gen_zipf(s);
        case Generator::Loop: return gen_loop(s);
        case Generator::Phased: return gen_phased(s);
    }
    throw ConfigError("unknown generator");
}

}  // namespace migrant
