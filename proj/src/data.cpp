#include "battcap/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>
#include <unordered_map>

#include "battcap/error.hpp"
#include "battcap/format.hpp"
#include "battcap/rng.hpp"

namespace battcap {

namespace {

struct CsvRow {
    std::size_t line = 0;
    std::vector<std::string_view> cells;
};

std::vector<std::string_view> split_cells(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            cells.push_back(line.substr(start));
            break;
        }
        cells.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return cells;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

// Splits text into rows, checks the header, and skips blank lines.
std::vector<CsvRow> read_csv(std::string_view text, std::string_view expected_header) {
    std::vector<CsvRow> rows;
    std::size_t line_no = 0;
    bool header_seen = false;
    std::size_t pos = 0;
    // Tolerate a UTF-8 byte order mark.
    if (text.substr(0, 3) == "\xEF\xBB\xBF") pos = 3;
    while (pos < text.size()) {
        auto eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (trim(line).empty()) continue;
        if (!header_seen) {
            auto cells = split_cells(line);
            std::string joined;
            for (std::size_t i = 0; i < cells.size(); ++i) {
                if (i) joined += ',';
                joined += trim(cells[i]);
            }
            if (joined != expected_header) {
                throw Error("parse", "line " + std::to_string(line_no) + ": expected header '" +
                                         std::string(expected_header) + "'");
            }
            header_seen = true;
            continue;
        }
        CsvRow row{line_no, split_cells(line)};
        for (auto& c : row.cells) c = trim(c);
        rows.push_back(std::move(row));
    }
    if (!header_seen) throw Error("parse", "missing header '" + std::string(expected_header) + "'");
    return rows;
}

double parse_double(std::string_view cell, std::size_t line, std::string_view what) {
    double value = 0.0;
    if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
    const auto* end = cell.data() + cell.size();
    auto [ptr, ec] = std::from_chars(cell.data(), end, value);
    if (cell.empty() || ec != std::errc{} || ptr != end || !std::isfinite(value)) {
        throw Error("parse", "line " + std::to_string(line) + ": malformed " + std::string(what) +
                                 " '" + std::string(cell) + "'");
    }
    return value;
}

int parse_int(std::string_view cell, std::size_t line, std::string_view what) {
    int value = 0;
    const auto* end = cell.data() + cell.size();
    auto [ptr, ec] = std::from_chars(cell.data(), end, value);
    if (cell.empty() || ec != std::errc{} || ptr != end) {
        throw Error("parse", "line " + std::to_string(line) + ": malformed " + std::string(what) +
                                 " '" + std::string(cell) + "'");
    }
    return value;
}

void check_battery_id(std::string& current, std::string_view cell, std::size_t line) {
    if (cell.empty()) throw Error("parse", "line " + std::to_string(line) + ": empty battery_id");
    if (current.empty()) {
        current = std::string(cell);
    } else if (current != cell) {
        throw Error("schema", "line " + std::to_string(line) + ": battery_id '" + std::string(cell) +
                                  "' differs from '" + current + "'");
    }
}

}  // namespace

void validate_record(const CycleRecord& rec) {
    const std::string name = "cycle " + std::to_string(rec.cycle_index);
    if (rec.cycle_index < 1) throw Error("invariant", name + ": cycle index must be positive");
    if (rec.samples.size() < kMinSamplesPerCycle) {
        throw Error("invariant", name + ": " + std::to_string(rec.samples.size()) +
                                     " samples, at least " + std::to_string(kMinSamplesPerCycle) +
                                     " required");
    }
    double running_max = rec.samples.front().voltage_v;
    for (std::size_t i = 0; i < rec.samples.size(); ++i) {
        const auto& s = rec.samples[i];
        if (s.time_s < 0.0) throw Error("invariant", name + ": negative time");
        if (i > 0 && !(s.time_s > rec.samples[i - 1].time_s)) {
            throw Error("invariant", name + ": time not strictly increasing at t=" + format_number(s.time_s));
        }
        if (s.voltage_v < running_max - kMonotoneToleranceV) {
            throw Error("invariant", name + ": voltage drops more than 5 mV at t=" + format_number(s.time_s));
        }
        running_max = std::max(running_max, s.voltage_v);
    }
}

SampleTable parse_samples(std::string_view csv_text) {
    const auto rows = read_csv(csv_text, "battery_id,cycle,time_s,voltage_v");
    SampleTable table;
    std::unordered_map<int, std::size_t> slot;
    for (const auto& row : rows) {
        if (row.cells.size() != 4) {
            throw Error("parse", "line " + std::to_string(row.line) + ": expected 4 fields, got " +
                                     std::to_string(row.cells.size()));
        }
        check_battery_id(table.battery_id, row.cells[0], row.line);
        const int cycle = parse_int(row.cells[1], row.line, "cycle");
        const double t = parse_double(row.cells[2], row.line, "time_s");
        const double v = parse_double(row.cells[3], row.line, "voltage_v");
        auto [it, inserted] = slot.try_emplace(cycle, table.records.size());
        if (inserted) table.records.push_back(CycleRecord{cycle, {}, 0.0});
        auto& rec = table.records[it->second];
        if (!rec.samples.empty() && !(t > rec.samples.back().time_s)) {
            throw Error("invariant", "cycle " + std::to_string(cycle) + ": time not increasing at line " +
                                         std::to_string(row.line));
        }
        rec.samples.push_back({t, v});
    }
    for (const auto& rec : table.records) validate_record(rec);
    return table;
}

CapacityTable parse_capacity(std::string_view csv_text) {
    const auto rows = read_csv(csv_text, "battery_id,cycle,discharge_capacity_mah");
    CapacityTable table;
    for (const auto& row : rows) {
        if (row.cells.size() != 3) {
            throw Error("parse", "line " + std::to_string(row.line) + ": expected 3 fields, got " +
                                     std::to_string(row.cells.size()));
        }
        check_battery_id(table.battery_id, row.cells[0], row.line);
        const int cycle = parse_int(row.cells[1], row.line, "cycle");
        const double q = parse_double(row.cells[2], row.line, "discharge_capacity_mah");
        if (!(q > 0.0)) {
            throw Error("invariant", "line " + std::to_string(row.line) + ": non-positive capacity for cycle " +
                                         std::to_string(cycle));
        }
        if (!table.capacity_mah.emplace(cycle, q).second) {
            throw Error("invariant", "line " + std::to_string(row.line) + ": duplicate cycle " + std::to_string(cycle));
        }
    }
    return table;
}

Dataset assemble_dataset(const SampleTable& samples, const CapacityTable& capacities,
                         std::string_view battery_id, double nominal_capacity) {
    if (!(nominal_capacity > 0.0)) throw Error("invariant", "nominal capacity must be positive");
    for (const auto* id : {&samples.battery_id, &capacities.battery_id}) {
        if (!id->empty() && *id != battery_id) {
            throw Error("schema", "battery_id '" + *id + "' does not match '" + std::string(battery_id) + "'");
        }
    }
    Dataset ds{std::string(battery_id), nominal_capacity, samples.records};
    std::vector<int> orphans;
    for (auto& rec : ds.cycles) {
        auto it = capacities.capacity_mah.find(rec.cycle_index);
        if (it == capacities.capacity_mah.end()) {
            orphans.push_back(rec.cycle_index);
        } else {
            rec.discharge_capacity = it->second;
        }
    }
    if (!orphans.empty()) {
        std::string list;
        for (int c : orphans) list += (list.empty() ? "" : ",") + std::to_string(c);
        throw Error("schema", "missing capacity for cycle(s) " + list);
    }
    std::sort(ds.cycles.begin(), ds.cycles.end(),
              [](const CycleRecord& a, const CycleRecord& b) { return a.cycle_index < b.cycle_index; });
    for (std::size_t i = 1; i < ds.cycles.size(); ++i) {
        if (ds.cycles[i].cycle_index == ds.cycles[i - 1].cycle_index) {
            throw Error("invariant", "duplicate cycle " + std::to_string(ds.cycles[i].cycle_index));
        }
    }
    return ds;
}

namespace {

std::size_t train_count(std::size_t n_rows, double ratio) {
    if (n_rows < 3) throw Error("invariant", "split needs at least 3 rows, got " + std::to_string(n_rows));
    if (!(ratio > 0.0 && ratio < 1.0)) throw Error("invariant", "split ratio must lie in (0,1)");
    const auto n_train = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n_rows) + 0.5));
    if (n_train == 0 || n_train == n_rows) {
        throw Error("invariant", "split ratio leaves an empty partition for " + std::to_string(n_rows) + " rows");
    }
    return n_train;
}

}  // namespace

SplitDataset split_rows(std::size_t n_rows, double ratio, std::uint64_t seed) {
    const std::size_t n_train = train_count(n_rows, ratio);
    std::vector<std::size_t> perm(n_rows);
    for (std::size_t i = 0; i < n_rows; ++i) perm[i] = i;
    Rng rng(seed);
    rng.shuffle(perm);
    SplitDataset split;
    split.seed = seed;
    split.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
    return split;
}

SplitDataset split_rows_ordered(std::size_t n_rows, double ratio) {
    const std::size_t n_train = train_count(n_rows, ratio);
    SplitDataset split;
    for (std::size_t i = 0; i < n_rows; ++i) (i < n_train ? split.train : split.test).push_back(i);
    return split;
}

double synth_capacity(const SynthConfig& cfg, int cycle) {
    return cfg.q0 * (1.0 - cfg.fade_rate * std::pow(static_cast<double>(cycle), cfg.fade_power));
}

namespace {

// Shape of the synthetic charge curve. Durations are seconds at the start of
// life; only the plateau duration carries the capacity signal.
constexpr double kPreDuration = 1200.0;
constexpr double kPlateauDuration = 3800.0;
constexpr double kPostDuration = 1000.0;
constexpr double kLogIntervalS = 60.0;
constexpr double kLogDeltaV = 0.005;

struct CurveShape {
    double t_pre, t_plateau, t_post;
    double v_start, v_plateau_lo, v_plateau_hi, v_end;

    double total() const { return t_pre + t_plateau + t_post; }

    // Concave rise, near-flat plateau, convex rise to cut-off.
    double voltage(double t) const {
        if (t <= t_pre) {
            const double u = t / t_pre;
            return v_start + (v_plateau_lo - v_start) * (1.0 - (1.0 - u) * (1.0 - u));
        }
        t -= t_pre;
        if (t <= t_plateau) return v_plateau_lo + (v_plateau_hi - v_plateau_lo) * (t / t_plateau);
        t -= t_plateau;
        const double u = std::min(t / t_post, 1.0);
        return v_plateau_hi + (v_end - v_plateau_hi) * u * u;
    }
};

}  // namespace

Dataset synth_dataset(const SynthConfig& cfg) {
    if (cfg.n_cycles < 20) throw Error("invariant", "n_cycles must be at least 20");
    if (!(cfg.noise_sd >= 0.0)) throw Error("invariant", "noise_sd must be non-negative");
    if (!(cfg.q0 > 0.0)) throw Error("invariant", "q0 must be positive");
    if (!(cfg.fade_rate >= 0.0)) throw Error("invariant", "fade_rate must be non-negative");
    if (!(cfg.nominal_capacity > 0.0)) throw Error("invariant", "nominal capacity must be positive");
    for (int n = 1; n <= cfg.n_cycles; ++n) {
        if (!(synth_capacity(cfg, n) > 0.0)) {
            throw Error("invariant", "fade parameters give non-positive capacity at cycle " + std::to_string(n));
        }
    }

    Rng cap_rng(derive_seed(cfg.seed, "capacity"));
    Rng volt_rng(derive_seed(cfg.seed, "voltage"));
    // Capacity noise has the same relative size as the voltage sensor noise.
    const double cap_noise_sd = cfg.q0 * cfg.noise_sd / cfg.plateau_voltage;
    const double span = static_cast<double>(cfg.n_cycles - 1);

    Dataset ds{cfg.battery_id, cfg.nominal_capacity, {}};
    ds.cycles.reserve(static_cast<std::size_t>(cfg.n_cycles));
    for (int n = 1; n <= cfg.n_cycles; ++n) {
        double q = synth_capacity(cfg, n);
        if (cap_noise_sd > 0.0) q += cap_rng.normal(0.0, cap_noise_sd);
        q = std::max(q, 1e-6 * cfg.q0);

        const double age = static_cast<double>(n - 1) / span;
        CurveShape shape{
            kPreDuration * (1.0 + 0.01 * std::sin(2.0 * std::numbers::pi * n / 50.0)),
            kPlateauDuration * q / cfg.q0,
            kPostDuration * (1.0 - 0.15 * age),
            cfg.plateau_voltage - 0.40 + 0.03 * age,
            cfg.plateau_voltage - 0.03,
            cfg.plateau_voltage + 0.04,
            cfg.plateau_voltage + 0.25,
        };

        // Cycler-style logging: a sample every 60 s or every 5 mV, whichever
        // comes first, evaluated on a 1 s grid; the cut-off point is always kept.
        CycleRecord rec{n, {}, q};
        const double total = shape.total();
        double last_t = 0.0;
        double last_v = shape.voltage(0.0);
        rec.samples.push_back({0.0, last_v});
        for (double t = 1.0; t < total; t += 1.0) {
            const double v = shape.voltage(t);
            if (t - last_t >= kLogIntervalS || std::abs(v - last_v) >= kLogDeltaV) {
                rec.samples.push_back({t, v});
                last_t = t;
                last_v = v;
            }
        }
        rec.samples.push_back({total, shape.voltage(total)});
        if (cfg.noise_sd > 0.0) {
            for (auto& s : rec.samples) s.voltage_v += volt_rng.normal(0.0, cfg.noise_sd);
        }
        ds.cycles.push_back(std::move(rec));
    }
    return ds;
}

std::string samples_to_csv(const Dataset& ds) {
    std::string out = "battery_id,cycle,time_s,voltage_v\n";
    for (const auto& rec : ds.cycles) {
        const std::string prefix = ds.battery_id + "," + std::to_string(rec.cycle_index) + ",";
        for (const auto& s : rec.samples) {
            out += prefix;
            out += format_number(s.time_s);
            out += ',';
            out += format_number(s.voltage_v);
            out += '\n';
        }
    }
    return out;
}

std::string capacity_to_csv(const Dataset& ds) {
    std::string out = "battery_id,cycle,discharge_capacity_mah\n";
    for (const auto& rec : ds.cycles) {
        out += ds.battery_id + "," + std::to_string(rec.cycle_index) + "," +
               format_number(rec.discharge_capacity) + "\n";
    }
    return out;
}

}  // namespace battcap
