#pragma once

#include "ksp/rational.hpp"

#include <string>
#include <utility>
#include <vector>

namespace ksp {

enum class Rel { LE, LT, GE, GT, EQ };

const char* rel_symbol(Rel r);
bool holds(const Scalar& lhs, Rel r, const Scalar& rhs);

struct Record {
    std::string cond;
    std::vector<long long> idx;
    Scalar lhs;
    Rel rel = Rel::LE;
    Scalar rhs;
    bool pass = false;
    std::string note;
};

struct LedgerReport {
    std::vector<Record> records;
    // Free-form key/value context (window, caps, chosen constants).
    std::vector<std::pair<std::string, std::string>> meta;
    // Passing records counted but not stored (large ledgers keep failures only).
    std::size_t elided_pass = 0;

    // Appends a record with pass computed exactly from lhs rel rhs.
    Record& add(std::string cond, std::vector<long long> idx, Scalar lhs, Rel rel, Scalar rhs,
                std::string note = {});
    void merge(const LedgerReport& other);
    void set_meta(const std::string& key, const std::string& value);

    std::size_t pass_count() const;
    std::size_t fail_count() const;
    bool all_pass() const { return fail_count() == 0; }
    std::vector<const Record*> failures() const;
    std::vector<const Record*> by_cond(const std::string& cond) const;
    // Records ordered by (cond, idx); ties keep insertion order.
    void sort();
};

std::string format_idx(const std::vector<long long>& idx);

}  // namespace ksp
