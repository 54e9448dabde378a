// kread: batch front end over the ksp library.
//
// Exit status: 0 when every requested check passes, 1 when a record fails,
// 2 on configuration errors, 3 on internal invariant breaches.

#include "ksp/hypothesis.hpp"
#include "ksp/invariant_finder.hpp"
#include "ksp/orbit_sim.hpp"
#include "ksp/read_operator.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

using namespace ksp;
using json = nlohmann::ordered_json;

namespace {

constexpr const char* kToolVersion = "0.3.0";

// Verification failed or could not complete (exit 1).
struct CheckFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path);
    out << text;
    if (!out) throw ConfigError("write failed: " + path);
}

json parse_json(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(what + ": " + e.what());
    }
}

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [k, v] : j.items()) {
        bool known = false;
        for (const char* key : keys) known = known || k == key;
        if (!known) throw ConfigError(where + ": unknown key '" + k + "'");
    }
}

Scalar rational_field(const json& j, const std::string& where) {
    if (j.is_string()) return parse_rational(j.get<std::string>());
    if (j.is_number_integer()) return Scalar(j.get<long>());
    throw ConfigError(where + " must be a rational string \"num/den\"");
}

SpaceSpec space_from_json(const json& j) {
    reject_unknown(j, {"kind", "p", "matrix"}, "space");
    SpaceSpec s;
    const std::string kind = j.value("kind", "lambda_p");
    if (kind == "lambda_p") s.kind = SpaceKind::LambdaP;
    else if (kind == "c0") s.kind = SpaceKind::C0;
    else throw ConfigError("space kind must be lambda_p or c0, got '" + kind + "'");
    if (j.contains("p")) s.p = rational_field(j["p"], "space p");
    if (!j.contains("matrix")) throw ConfigError("space needs a matrix");
    const json& m = j["matrix"];
    reject_unknown(m, {"builtin", "table", "stride", "base", "t_step", "alpha_step"}, "matrix");
    s.matrix.stride = m.value("stride", 1u);
    if (s.matrix.stride == 0) throw ConfigError("matrix stride must be positive");
    if (m.contains("table")) {
        if (m.contains("builtin")) throw ConfigError("matrix has both builtin and table");
        s.matrix.kind = MatrixKind::Table;
        for (const auto& row : m["table"]) {
            std::vector<Scalar> r;
            for (const auto& v : row) r.push_back(rational_field(v, "table entry"));
            s.matrix.table.push_back(std::move(r));
        }
    } else {
        const std::string b = m.value("builtin", "");
        static const std::map<std::string, MatrixKind> names = {{"s", MatrixKind::S},
                                                                {"entire", MatrixKind::Entire},
                                                                {"prime", MatrixKind::Prime},
                                                                {"power-series", MatrixKind::PowerSeries}};
        auto it = names.find(b);
        if (it == names.end()) throw ConfigError("unknown builtin matrix '" + b + "'");
        s.matrix.kind = it->second;
        if (m.contains("base")) s.matrix.base = rational_field(m["base"], "matrix base");
        s.matrix.t_step = m.value("t_step", 1ul);
        s.matrix.alpha_step = m.value("alpha_step", 1ul);
    }
    return s;
}

std::vector<unsigned> parse_list(const std::string& text, const std::string& what) {
    std::vector<unsigned> out;
    if (text.empty()) return out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            unsigned long v = std::stoul(item, &used);
            if (used != item.size()) throw std::invalid_argument(item);
            out.push_back(static_cast<unsigned>(v));
        } catch (const std::logic_error&) {
            throw ConfigError(what + ": bad entry '" + item + "'");
        }
    }
    return out;
}

// "N=2,3,3;R=1,1;relaxed"
ScheduleSpec parse_schedule(const std::string& text, const std::string& mu) {
    ScheduleSpec s;
    s.mu = parse_list(mu, "--mu");
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ';')) {
        if (part.empty()) continue;
        if (part == "relaxed") {
            s.relaxed = true;
            continue;
        }
        auto eq = part.find('=');
        if (eq == std::string::npos) throw ConfigError("--schedule: expected key=list, got '" + part + "'");
        const std::string key = part.substr(0, eq), val = part.substr(eq + 1);
        if (key == "N") s.N = parse_list(val, "--schedule N");
        else if (key == "R") s.R = parse_list(val, "--schedule R");
        else if (key == "mu") s.mu = parse_list(val, "--schedule mu");
        else throw ConfigError("--schedule: unknown key '" + key + "'");
    }
    return s;
}

// "3:1/2,0:1" in the given coordinates.
CoordVector parse_vector(const std::string& text) {
    CoordVector x;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        auto colon = item.find(':');
        if (colon == std::string::npos) throw ConfigError("vector entry '" + item + "' is not index:num/den");
        std::size_t idx;
        try {
            std::size_t used = 0;
            idx = std::stoul(item.substr(0, colon), &used);
            if (used != colon) throw std::invalid_argument(item);
        } catch (const std::logic_error&) {
            throw ConfigError("vector entry '" + item + "' has a bad index");
        }
        x[idx] = parse_rational(item.substr(colon + 1));
    }
    prune(x);
    return x;
}

json vector_json(const CoordVector& x) {
    json o = json::object();
    for (const auto& [j, v] : x) o[std::to_string(j)] = to_string(v);
    return o;
}

std::string log2_display(const Scalar& q) {
    if (q == 0) return "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", approx_log2(q));
    return buf;
}

struct Options {
    std::string space, out, format = "json", dump, x = "0:1", z = "0:1", coords = "e";
    std::string schedule, mu, method = "cor37", case_sel = "auto", op_file, op_builtin, cert;
    std::string eps = "1/2", C = "2", L = "2", threshold = "100", t1 = "6", a1 = "3";
    std::size_t window = 1000, N = 1, samples = 100, steps = 10, dim = 64, lo = 0, hi = 0;
    unsigned horizon = 1, inv_horizon = 20, J = 3, K = 3, M = 1, level = 1, depth = 2;
    std::vector<unsigned> stages, levels;
    std::uint64_t seed = 1;
    bool verify = false, log2 = false, failures_only = false;
};

struct Output {
    std::string command;
    json config = json::object();
    json window = nullptr;
    LedgerReport report;
    json data = json::object();
};

std::string render(const Output& o, const Options& opt) {
    LedgerReport rep = o.report;
    if (opt.failures_only) {
        const std::size_t before = rep.records.size();
        std::erase_if(rep.records, [](const Record& r) { return r.pass; });
        rep.elided_pass += before - rep.records.size();
    }
    rep.sort();
    const std::size_t pass = rep.pass_count(), fail = rep.fail_count();
    if (opt.format == "csv") {
        std::ostringstream os;
        os << "# tool_version: " << kToolVersion << "\n";
        os << "# command: " << o.command << "\n";
        os << "# config: " << o.config.dump() << "\n";
        os << "# window: " << o.window.dump() << "\n";
        os << "# summary: pass=" << pass << " fail=" << fail << "\n";
        for (const auto& [k, v] : rep.meta) os << "# meta " << k << ": " << v << "\n";
        if (!o.data.empty()) os << "# data: " << o.data.dump() << "\n";
        os << "cond,idx,lhs,rel,rhs,pass" << (opt.log2 ? ",lhs_log2_display_only,rhs_log2_display_only" : "")
           << "\n";
        for (const auto& r : rep.records) {
            os << r.cond << ",\"" << format_idx(r.idx) << "\"," << to_string(r.lhs) << "," << rel_symbol(r.rel) << ","
               << to_string(r.rhs) << "," << (r.pass ? "true" : "false");
            if (opt.log2) os << "," << log2_display(r.lhs) << "," << log2_display(r.rhs);
            os << "\n";
        }
        return os.str();
    }
    json j;
    j["tool_version"] = kToolVersion;
    j["command"] = o.command;
    j["config"] = o.config;
    j["window"] = o.window;
    j["summary"] = {{"pass", pass}, {"fail", fail}, {"elided_pass", rep.elided_pass}};
    json meta = json::object();
    for (const auto& [k, v] : rep.meta) meta[k] = v;
    j["meta"] = meta;
    json recs = json::array();
    for (const auto& r : rep.records) {
        json e;
        e["cond"] = r.cond;
        e["idx"] = r.idx;
        e["lhs"] = to_string(r.lhs);
        e["rel"] = rel_symbol(r.rel);
        e["rhs"] = to_string(r.rhs);
        e["pass"] = r.pass;
        if (!r.note.empty()) e["note"] = r.note;
        if (opt.log2) {
            e["lhs_log2_display_only"] = log2_display(r.lhs);
            e["rhs_log2_display_only"] = log2_display(r.rhs);
        }
        recs.push_back(std::move(e));
    }
    j["records"] = std::move(recs);
    j["data"] = o.data;
    return j.dump(1) + "\n";
}

// ---------------------------------------------------------------- spaces

struct LoadedSpace {
    json raw;
    KotheSpace space;
};

LoadedSpace load_space(const Options& opt) {
    if (opt.space.empty()) throw ConfigError("--space is required");
    json raw = parse_json(read_file(opt.space), opt.space);
    SpaceSpec spec = space_from_json(raw);
    return {raw, KotheSpace(spec)};
}

json base_config(const Options& opt) {
    json c = json::object();
    c["space"] = opt.space;
    c["format"] = opt.format;
    return c;
}

// ---------------------------------------------------------------- constructions

ReadParameters parameters(const Options& opt) {
    return make_parameters(opt.horizon, parse_schedule(opt.schedule, opt.mu), Integer(opt.t1), Integer(opt.a1));
}

json schedule_json(const Options& opt) {
    ScheduleSpec s = parse_schedule(opt.schedule, opt.mu);
    return {{"horizon", opt.horizon}, {"t1", opt.t1},   {"a1", opt.a1},
            {"mu", s.mu},             {"N", s.N},       {"R", s.R},
            {"relaxed", s.relaxed}};
}

struct LoadedConstruction {
    json space_raw, schedule;
    std::optional<Construction> cons;
};

LoadedConstruction load_construction(const Options& opt) {
    LoadedConstruction lc;
    if (!opt.dump.empty()) {
        json d = parse_json(read_file(opt.dump), opt.dump);
        reject_unknown(d, {"format", "space", "schedule", "alpha"}, "construction dump");
        if (d.value("format", "") != "kread-construction-1") throw ConfigError("unknown construction dump format");
        lc.space_raw = d["space"];
        lc.schedule = d["schedule"];
        const json& s = lc.schedule;
        reject_unknown(s, {"horizon", "t1", "a1", "mu", "N", "R", "relaxed"}, "dump schedule");
        ScheduleSpec sch;
        sch.mu = s.value("mu", std::vector<unsigned>{});
        sch.N = s.value("N", std::vector<unsigned>{});
        sch.R = s.value("R", std::vector<unsigned>{});
        sch.relaxed = s.value("relaxed", false);
        ReadParameters p = make_parameters(s.value("horizon", 1u), sch, Integer(s.value("t1", std::string("6"))),
                                           Integer(s.value("a1", std::string("3"))));
        std::vector<Scalar> alpha;
        for (const auto& a : d["alpha"]) alpha.push_back(rational_field(a, "alpha"));
        lc.cons.emplace(replay_construction(KotheSpace(space_from_json(lc.space_raw)), p, {}, alpha));
        return lc;
    }
    LoadedSpace ls = load_space(opt);
    lc.space_raw = ls.raw;
    lc.schedule = schedule_json(opt);
    lc.cons.emplace(build_construction(ls.space, parameters(opt)));
    return lc;
}

json construction_config(const Options& opt) {
    json c = base_config(opt);
    if (!opt.dump.empty()) c["dump"] = opt.dump;
    else c["schedule"] = schedule_json(opt);
    return c;
}

json construction_data(const Construction& cons) {
    return {{"space", cons.space().describe()},
            {"dimension", cons.dimension()},
            {"completed_stages", cons.completed_stages()},
            {"restarts", cons.restarts()}};
}

CoordVector to_u(const Construction& cons, const CoordVector& x, const std::string& coords) {
    for (const auto& kv : x)
        if (kv.first >= cons.dimension()) throw ConfigError("vector index " + std::to_string(kv.first) +
                                                            " outside the truncation");
    if (coords == "u") return x;
    return cons.basis().from_e(x);
}

// ---------------------------------------------------------------- commands

Output cmd_check_norm(const Options& opt) {
    LoadedSpace ls = load_space(opt);
    Output o;
    o.command = "space check-norm";
    o.config = base_config(opt);
    unsigned j_max = opt.J;
    std::size_t n_max = opt.window;
    const SpaceSpec& sp = ls.space.spec();
    if (sp.matrix.kind == MatrixKind::Table) {
        j_max = std::min<unsigned>(j_max, static_cast<unsigned>(sp.matrix.table.size() / sp.matrix.stride));
        for (const auto& row : sp.matrix.table)
            if (!row.empty()) n_max = std::min(n_max, row.size() - 1);
    }
    o.config["levels"] = opt.J;
    o.window = {{"j_max", j_max}, {"n_max", n_max}};
    NormScanResult r = continuous_norm_scan(ls.space, j_max, n_max);
    if (r.level) {
        o.data["verdict"] = "norm-at-level-" + std::to_string(*r.level);
        o.data["level"] = *r.level;
    } else {
        o.data["verdict"] = "none-on-window";
    }
    return o;
}

Output cmd_cor34(const Options& opt) {
    LoadedSpace ls = load_space(opt);
    Output o;
    o.command = "hypo cor34";
    o.config = base_config(opt);
    o.config["J"] = opt.J;
    o.config["C"] = opt.C;
    o.config["L"] = opt.L;
    o.config["N"] = opt.N;
    o.window = {{"n_max", opt.window}};
    const Scalar C = parse_rational(opt.C), L = parse_rational(opt.L);
    json found = json::object();
    for (unsigned j = 1; j <= opt.J; ++j) {
        auto n = check_cor34(ls.space, j, C, L, opt.N, opt.window);
        if (n) {
            found[std::to_string(j)] = *n;
            o.report.add("C3.4", {j, static_cast<long long>(*n)}, ls.space.ratio_R(j, *n), Rel::GE, L);
        } else {
            o.report.add("C3.4", {j}, Scalar(0), Rel::GE, L, "no index in the window");
        }
    }
    o.data["n"] = found;
    return o;
}

Output cmd_cor37(const Options& opt) {
    LoadedSpace ls = load_space(opt);
    Output o;
    o.command = "hypo cor37";
    o.config = base_config(opt);
    o.config["J"] = opt.J;
    o.config["threshold"] = opt.threshold;
    o.window = {{"j_max", opt.J}, {"n_max", opt.window}};
    o.report = check_cor37(ls.space, opt.J, opt.window, parse_rational(opt.threshold));
    return o;
}

Output cmd_cor314(const Options& opt) {
    LoadedSpace ls = load_space(opt);
    Output o;
    o.command = "hypo cor314";
    o.config = base_config(opt);
    o.config["J"] = opt.J;
    o.config["C"] = opt.C;
    o.window = {{"n_max", opt.window}};
    const Scalar C = parse_rational(opt.C);
    json sets = json::object();
    for (unsigned j = 1; j <= opt.J; ++j) {
        auto idx = check_cor314(ls.space, j, C, opt.window);
        sets[std::to_string(j)] = {{"count", idx.size()},
                                   {"first", idx.empty() ? json(nullptr) : json(idx.front())},
                                   {"last", idx.empty() ? json(nullptr) : json(idx.back())}};
        o.report.add("C3.14", {j}, Scalar(static_cast<long>(idx.size())), Rel::GE, Scalar(1));
    }
    o.data["index_sets"] = sets;
    return o;
}

Output cmd_family(const Options& opt) {
    LoadedSpace ls = load_space(opt);
    Output o;
    o.command = "family select";
    o.config = base_config(opt);
    SelectionParams p;
    p.eps = parse_rational(opt.eps);
    p.C = parse_rational(opt.C);
    p.M = opt.M;
    p.N = opt.N;
    p.K = opt.K;
    p.J = opt.J;
    o.config["method"] = opt.method;
    o.config["eps"] = to_string(p.eps);
    o.config["C"] = to_string(p.C);
    o.config["M"] = p.M;
    o.config["N"] = p.N;
    o.config["K"] = p.K;
    o.config["J"] = p.J;
    o.config["verify"] = opt.verify;
    o.window = {{"n_max", opt.window}};
    SelectionFamily fam;
    if (opt.method == "cor34") fam = select_family_cor34(ls.space, p, opt.window);
    else if (opt.method == "cor37") fam = select_family_cor37(ls.space, p, opt.window);
    else throw ConfigError("--method must be cor34 or cor37");
    json entries = json::array();
    for (unsigned j = 1; j <= p.J; ++j)
        for (unsigned m = 1; m <= p.M; ++m) {
            const FamilyEntry& e = fam.at(j, m);
            entries.push_back({{"j", j}, {"m", m}, {"n", e.n}, {"alpha", to_string(e.alpha)}});
        }
    o.data["family"] = entries;
    json notes = json::object();
    for (const auto& [k, v] : fam.notes) notes[k] = v;
    o.data["notes"] = notes;
    if (opt.verify) o.report = verify_theorem33(ls.space, fam);
    return o;
}

Output cmd_read_build(const Options& opt) {
    LoadedConstruction lc = load_construction(opt);
    const Construction& cons = *lc.cons;
    Output o;
    o.command = "read build";
    o.config = construction_config(opt);
    o.window = {{"dimension", cons.dimension()}};
    LedgerOptions lo;
    lo.keep_passing = !opt.failures_only;
    o.report = verify_ledger(cons, lo);
    o.data = construction_data(cons);
    if (!opt.cert.empty()) {
        json alpha = json::array();
        for (std::size_t j = 0; j < cons.dimension(); ++j) alpha.push_back(to_string(cons.basis().alpha[j]));
        json d;
        d["format"] = "kread-construction-1";
        d["space"] = lc.space_raw;
        d["schedule"] = lc.schedule;
        d["alpha"] = std::move(alpha);
        write_file(opt.cert, d.dump(1) + "\n");
        o.data["dump"] = opt.cert;
    }
    return o;
}

Output cmd_read_ledger(const Options& opt) {
    LoadedConstruction lc = load_construction(opt);
    const Construction& cons = *lc.cons;
    Output o;
    o.command = "read ledger";
    o.config = construction_config(opt);
    o.window = {{"dimension", cons.dimension()}};
    LedgerOptions lo;
    lo.keep_passing = !opt.failures_only;
    o.report = verify_ledger(cons, lo);
    o.data = construction_data(cons);
    return o;
}

Output cmd_orbit(const Options& opt, const std::string& what) {
    LoadedConstruction lc = load_construction(opt);
    const Construction& cons = *lc.cons;
    Output o;
    o.command = "orbit " + what;
    o.config = construction_config(opt);
    o.window = {{"dimension", cons.dimension()}};
    o.data = construction_data(cons);
    if (what == "trace") {
        o.config["x"] = opt.x;
        o.config["z"] = opt.z;
        o.config["coords"] = opt.coords;
        o.config["steps"] = opt.steps;
        o.config["levels"] = opt.levels;
        auto steps = orbit(cons, to_u(cons, parse_vector(opt.x), opt.coords), opt.steps, opt.levels,
                           to_u(cons, parse_vector(opt.z), opt.coords));
        json rows = json::array();
        for (const auto& s : steps) {
            json vals = json::array();
            for (const auto& v : s.values) vals.push_back(to_string(v));
            rows.push_back({{"i", s.i}, {"support", s.x.size()}, {"values", vals}});
        }
        o.data["trace"] = rows;
    } else if (what == "continuity") {
        o.config["N"] = opt.level;
        o.config["samples"] = opt.samples;
        o.config["seed"] = opt.seed;
        const std::size_t hi = opt.hi ? opt.hi : cons.dimension();
        o.window = {{"lo", opt.lo}, {"hi", hi}};
        o.report = continuity_check(cons, opt.level, opt.lo, hi, opt.samples, opt.seed);
    } else if (what == "capture") {
        o.config["x"] = opt.x;
        o.config["coords"] = opt.coords;
        o.config["stages"] = opt.stages;
        auto rows = capture_check(cons, to_u(cons, parse_vector(opt.x), opt.coords), opt.stages);
        json out = json::array();
        for (const auto& r : rows) {
            json e = {{"n", r.n}, {"available", r.available}};
            if (r.available) {
                e["p1_y"] = to_string(r.p1_y);
                e["p1_tau"] = to_string(r.p1_tau);
                e["member"] = r.member;
                o.report.add("K_n", {r.n}, Scalar(r.member ? 1 : 0), Rel::EQ, Scalar(1));
            }
            out.push_back(std::move(e));
        }
        o.data["capture"] = out;
    } else if (what == "tail") {
        o.config["samples"] = opt.samples;
        o.config["seed"] = opt.seed;
        o.report = tail_battery(cons, opt.samples, opt.seed);
    } else if (what == "witness") {
        o.config["x"] = opt.x;
        o.config["z"] = opt.z;
        o.config["coords"] = opt.coords;
        o.config["N"] = opt.level;
        auto res = witness(cons, to_u(cons, parse_vector(opt.x), opt.coords), to_u(cons, parse_vector(opt.z), opt.coords),
                           opt.level);
        o.data["diagnostics"] = res.diagnostics;
        if (!res.cert) {
            o.report.add("witness", {}, Scalar(0), Rel::EQ, Scalar(1), "no certificate");
            return o;
        }
        const WitnessCertificate& c = *res.cert;
        json cert;
        cert["stage"] = c.stage;
        cert["k"] = c.k;
        cert["l"] = c.l;
        cert["w"] = c.w;
        cert["power"] = to_string(c.power);
        json terms = json::array();
        for (const auto& t : c.terms) terms.push_back(to_string(t));
        cert["terms"] = terms;
        cert["total"] = to_string(c.total);
        cert["level"] = c.level;
        cert["S"] = c.S.str();
        cert["scale"] = to_string(c.scale);
        cert["tail_bounded"] = c.tail_bounded;
        cert["exact_N"] = to_string(c.exact_N);
        cert["exact_top"] = to_string(c.exact_top);
        o.report.add("witness.total", {c.stage}, c.total, Rel::LE, Scalar(10));
        if (c.exact_N >= 0) o.report.add("witness.exact", {c.stage}, c.exact_N, Rel::LE, c.total);
        else o.report.add("witness.exact", {c.stage}, Scalar(1), Rel::EQ, Scalar(0), "iterate left the truncation");
        if (!opt.cert.empty()) write_file(opt.cert, cert.dump(1) + "\n");
        o.data["certificate"] = std::move(cert);
    } else {
        throw InternalError("unknown orbit command " + what);
    }
    return o;
}

Output cmd_invariant(const Options& opt) {
    Output o;
    o.command = "invariant omega";
    o.config = {{"case", opt.case_sel}, {"horizon", opt.inv_horizon}, {"depth", opt.depth}, {"format", opt.format}};
    std::optional<OmegaOperator> op;
    if (!opt.op_file.empty()) {
        o.config["operator"] = opt.op_file;
        op.emplace(parse_omega_operator(read_file(opt.op_file), opt.dim));
    } else {
        o.config["builtin"] = opt.op_builtin;
        o.config["dim"] = opt.dim;
        if (opt.op_builtin == "forward") op.emplace(OmegaOperator::forward_shift(opt.dim));
        else if (opt.op_builtin == "backward") op.emplace(OmegaOperator::backward_shift(opt.dim));
        else if (opt.op_builtin == "zero") op.emplace(OmegaOperator::zero(opt.dim));
        else throw ConfigError("give --operator FILE or --builtin forward|backward|zero");
    }
    o.window = {{"dimension", op->dimension()}, {"horizon", opt.inv_horizon}};
    KernelChain ch = build_chain(*op, opt.depth);
    auto A = compute_Al(ch, *op, opt.inv_horizon);
    json table = json::array();
    for (const auto& a : A) table.push_back(a);
    o.data["group"] = ch.group;
    o.data["A"] = table;
    OmegaCase c = classify(A);
    o.data["classified"] = case_name(c);
    std::string want = opt.case_sel;
    if (want == "auto") want = c == OmegaCase::One ? "1" : c == OmegaCase::Two ? "2" : "none";
    if (want == "1") {
        auto w = case1_witness(ch, *op, opt.inv_horizon);
        if (!w) {
            o.report.add("case1", {}, Scalar(0), Rel::EQ, Scalar(1), "no case-1 witness at this horizon");
            return o;
        }
        o.report = w->report;
        o.data["witness_u"] = w->n;
        o.data["witness_e"] = ch.u[w->n];
    } else if (want == "2") {
        Case2Functional f = case2_functional(ch, *op, opt.inv_horizon);
        o.report = f.report;
        json alpha = json::array(), beta = json::array();
        for (const auto& a : f.alpha) alpha.push_back(to_string(a));
        for (const auto& b : f.beta) beta.push_back(to_string(b));
        o.data["alpha"] = alpha;
        o.data["beta"] = beta;
        o.data["l_m"] = f.l_m;
        o.data["x"] = vector_json(f.x);
        o.data["sweep_stabilized"] = f.sweep_stabilized;
        o.data["sweep_passes"] = f.sweep_passes;
    } else if (want == "none") {
        o.report.add("dichotomy", {}, Scalar(0), Rel::EQ, Scalar(1), "horizon insufficient to decide");
    } else {
        throw ConfigError("--case must be auto, 1 or 2");
    }
    return o;
}

int emit(const Output& o, const Options& opt) {
    const std::string text = render(o, opt);
    if (opt.out.empty()) std::cout << text;
    else write_file(opt.out, text);
    return o.report.fail_count() == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Exact experiments on Koethe sequence spaces and Read-type operators"};
    app.require_subcommand(1);
    Options opt;
    std::string command;

    auto common = [&](CLI::App* c) {
        c->add_option("--out", opt.out, "Report path (default stdout)");
        c->add_option("--format", opt.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
        c->add_flag("--log2", opt.log2, "Annotate magnitudes with display-only base-2 logarithms");
        c->add_flag("--failures-only", opt.failures_only, "Count passing records without listing them");
    };
    auto space_opt = [&](CLI::App* c, bool required) {
        auto* o = c->add_option("--space", opt.space, "Space spec file (JSON)");
        if (required) o->required();
    };
    auto construction_opts = [&](CLI::App* c, bool replay) {
        space_opt(c, false);
        if (replay) c->add_option("--dump", opt.dump, "Construction dump to replay instead of building");
        c->add_option("--horizon", opt.horizon, "Number of stages");
        c->add_option("--t1", opt.t1, "t_1");
        c->add_option("--a1", opt.a1, "a_1");
        c->add_option("--mu", opt.mu, "mu_n per stage, comma separated");
        c->add_option("--schedule", opt.schedule, "e.g. \"N=2,3,3;R=1,1;relaxed\"");
    };

    auto* space = app.add_subcommand("space", "Space checks");
    space->require_subcommand(1);
    auto* check_norm = space->add_subcommand("check-norm", "Smallest level whose seminorm is a norm on the window");
    space_opt(check_norm, true);
    check_norm->add_option("--window", opt.window, "Largest index n");
    check_norm->add_option("--J", opt.J, "Largest level");
    common(check_norm);
    check_norm->callback([&] { command = "check-norm"; });

    auto* hypo = app.add_subcommand("hypo", "Hypothesis window checks");
    hypo->require_subcommand(1);
    auto* cor34 = hypo->add_subcommand("cor34", "Kernel-gap witnesses n with bounded p_j/p_1 and large R_{j,n}");
    auto* cor37 = hypo->add_subcommand("cor37", "Ratio monotonicity and growth checks");
    auto* cor314 = hypo->add_subcommand("cor314", "Index sets with a_{j+1,n} > C a_{j,n}");
    for (auto* c : {cor34, cor37, cor314}) {
        space_opt(c, true);
        c->add_option("--window", opt.window, "Largest index n");
        c->add_option("--J", opt.J, "Largest level");
        common(c);
    }
    cor34->add_option("--C", opt.C, "Bound on p_j(e_n)/p_1(e_n)");
    cor34->add_option("--L", opt.L, "Required ratio R_{j,n}");
    cor34->add_option("--N", opt.N, "Search starts above N");
    cor37->add_option("--threshold", opt.threshold, "Growth proxy threshold");
    cor314->add_option("--C", opt.C, "Ratio threshold");
    cor34->callback([&] { command = "cor34"; });
    cor37->callback([&] { command = "cor37"; });
    cor314->callback([&] { command = "cor314"; });

    auto* family = app.add_subcommand("family", "Selection families");
    family->require_subcommand(1);
    auto* select = family->add_subcommand("select", "Select a family and optionally verify it");
    space_opt(select, true);
    select->add_option("--method", opt.method)->check(CLI::IsMember({"cor34", "cor37"}));
    select->add_option("--window", opt.window, "Largest index n");
    select->add_option("--eps", opt.eps);
    select->add_option("--C", opt.C);
    select->add_option("--M", opt.M);
    select->add_option("--N", opt.N);
    select->add_option("--K", opt.K);
    select->add_option("--J", opt.J);
    select->add_flag("--verify", opt.verify, "Run the family oracle");
    common(select);
    select->callback([&] { command = "family"; });

    auto* read = app.add_subcommand("read", "Read-type construction");
    read->require_subcommand(1);
    auto* build = read->add_subcommand("build", "Build, verify the ledger and optionally dump");
    construction_opts(build, false);
    build->add_option("--dump", opt.cert, "Write the construction dump here");
    common(build);
    build->callback([&] { command = "read-build"; });
    auto* ledger = read->add_subcommand("ledger", "Verify the ledger of a built or dumped construction");
    construction_opts(ledger, true);
    common(ledger);
    ledger->callback([&] { command = "read-ledger"; });

    auto* orb = app.add_subcommand("orbit", "Orbits over a construction");
    orb->require_subcommand(1);
    for (const char* name : {"trace", "continuity", "capture", "tail", "witness"}) {
        auto* c = orb->add_subcommand(name);
        construction_opts(c, true);
        common(c);
        std::string n = name;
        c->callback([&, n] { command = "orbit-" + n; });
        if (n == "trace" || n == "capture" || n == "witness") {
            c->add_option("--x", opt.x, "Vector as index:num/den,...");
            c->add_option("--coords", opt.coords, "e or u")->check(CLI::IsMember({"e", "u"}));
        }
        if (n == "trace" || n == "witness") c->add_option("--z", opt.z, "Target vector");
        if (n == "trace") {
            c->add_option("--steps", opt.steps);
            c->add_option("--levels", opt.levels)->delimiter(',');
        }
        if (n == "continuity" || n == "witness") c->add_option("--N", opt.level, "Seminorm level");
        if (n == "continuity") {
            c->add_option("--lo", opt.lo);
            c->add_option("--hi", opt.hi);
        }
        if (n == "continuity" || n == "tail") {
            c->add_option("--samples", opt.samples);
            c->add_option("--seed", opt.seed);
        }
        if (n == "capture") c->add_option("--stages", opt.stages)->delimiter(',');
        if (n == "witness") c->add_option("--cert", opt.cert, "Write the certificate JSON here");
    }

    auto* inv = app.add_subcommand("invariant", "Invariant subspaces on omega truncations");
    inv->require_subcommand(1);
    auto* omega = inv->add_subcommand("omega", "Kernel-chain dichotomy");
    omega->add_option("--operator", opt.op_file, "Row-sparse matrix file");
    omega->add_option("--builtin", opt.op_builtin)->check(CLI::IsMember({"forward", "backward", "zero"}));
    omega->add_option("--dim", opt.dim);
    omega->add_option("--horizon", opt.inv_horizon);
    omega->add_option("--depth", opt.depth);
    omega->add_option("--case", opt.case_sel)->check(CLI::IsMember({"auto", "1", "2"}));
    common(omega);
    omega->callback([&] { command = "invariant"; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        Output o;
        if (command == "check-norm") o = cmd_check_norm(opt);
        else if (command == "cor34") o = cmd_cor34(opt);
        else if (command == "cor37") o = cmd_cor37(opt);
        else if (command == "cor314") o = cmd_cor314(opt);
        else if (command == "family") o = cmd_family(opt);
        else if (command == "read-build") o = cmd_read_build(opt);
        else if (command == "read-ledger") o = cmd_read_ledger(opt);
        else if (command.rfind("orbit-", 0) == 0) o = cmd_orbit(opt, command.substr(6));
        else if (command == "invariant") o = cmd_invariant(opt);
        else throw InternalError("no command dispatched");
        return emit(o, opt);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const TruncationExit& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const InternalError& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    } catch (const ConstructionError& e) {
        std::cerr << "construction failed: " << e.what() << "\n";
        return 1;
    } catch (const WindowExhausted& e) {
        std::cerr << "window exhausted: " << e.what() << "\n";
        return 1;
    } catch (const HypothesisError& e) {
        std::cerr << "hypothesis not met: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
}
