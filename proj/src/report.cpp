#include "ksp/report.hpp"

#include <algorithm>
#include <cctype>

namespace ksp {

const char* rel_symbol(Rel r) {
    switch (r) {
        case Rel::LE: return "<=";
        case Rel::LT: return "<";
        case Rel::GE: return ">=";
        case Rel::GT: return ">";
        case Rel::EQ: return "==";
    }
    return "?";
}

bool holds(const Scalar& lhs, Rel r, const Scalar& rhs) {
    switch (r) {
        case Rel::LE: return lhs <= rhs;
        case Rel::LT: return lhs < rhs;
        case Rel::GE: return lhs >= rhs;
        case Rel::GT: return lhs > rhs;
        case Rel::EQ: return lhs == rhs;
    }
    return false;
}

Record& LedgerReport::add(std::string cond, std::vector<long long> idx, Scalar lhs, Rel rel,
                          Scalar rhs, std::string note) {
    Record rec;
    rec.cond = std::move(cond);
    rec.idx = std::move(idx);
    rec.pass = holds(lhs, rel, rhs);
    rec.lhs = std::move(lhs);
    rec.rel = rel;
    rec.rhs = std::move(rhs);
    rec.note = std::move(note);
    records.push_back(std::move(rec));
    return records.back();
}

void LedgerReport::merge(const LedgerReport& other) {
    records.insert(records.end(), other.records.begin(), other.records.end());
    elided_pass += other.elided_pass;
    for (const auto& kv : other.meta) set_meta(kv.first, kv.second);
}

void LedgerReport::set_meta(const std::string& key, const std::string& value) {
    for (auto& kv : meta)
        if (kv.first == key) {
            kv.second = value;
            return;
        }
    meta.emplace_back(key, value);
}

std::size_t LedgerReport::pass_count() const {
    return elided_pass + static_cast<std::size_t>(std::count_if(
                             records.begin(), records.end(), [](const Record& r) { return r.pass; }));
}

std::size_t LedgerReport::fail_count() const { return records.size() + elided_pass - pass_count(); }

std::vector<const Record*> LedgerReport::failures() const {
    std::vector<const Record*> out;
    for (const auto& r : records)
        if (!r.pass) out.push_back(&r);
    return out;
}

std::vector<const Record*> LedgerReport::by_cond(const std::string& cond) const {
    std::vector<const Record*> out;
    for (const auto& r : records)
        if (r.cond == cond) out.push_back(&r);
    return out;
}

namespace {

// Digit runs compare numerically so "4.9" sorts before "4.12".
bool natural_less(const std::string& a, const std::string& b) {
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (std::isdigit(static_cast<unsigned char>(a[i])) && std::isdigit(static_cast<unsigned char>(b[j]))) {
            std::size_t i2 = i, j2 = j;
            while (i2 < a.size() && std::isdigit(static_cast<unsigned char>(a[i2]))) ++i2;
            while (j2 < b.size() && std::isdigit(static_cast<unsigned char>(b[j2]))) ++j2;
            unsigned long long x = std::stoull(a.substr(i, i2 - i)), y = std::stoull(b.substr(j, j2 - j));
            if (x != y) return x < y;
            i = i2;
            j = j2;
        } else {
            if (a[i] != b[j]) return a[i] < b[j];
            ++i;
            ++j;
        }
    }
    return a.size() - i < b.size() - j;
}

}  // namespace

void LedgerReport::sort() {
    std::stable_sort(records.begin(), records.end(), [](const Record& a, const Record& b) {
        if (a.cond != b.cond) return natural_less(a.cond, b.cond);
        return a.idx < b.idx;
    });
}

std::string format_idx(const std::vector<long long>& idx) {
    std::string s = "(";
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(idx[i]);
    }
    return s + ")";
}

}  // namespace ksp
