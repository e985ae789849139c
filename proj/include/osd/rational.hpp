#pragma once

// Exact rational arithmetic used everywhere in the simulator. All clock
// values, edge lengths, counters and costs are rationals; the only floating
// point in the project lives in reporting/statistics code.

#include <boost/multiprecision/cpp_int.hpp>

#include <optional>
#include <stdexcept>
#include <string>

namespace osd {

using BigInt = boost::multiprecision::cpp_int;
using Rat = boost::multiprecision::cpp_rational;

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline Rat pow2(long e) {
    if (e >= 0) return Rat(BigInt(1) << e);
    return Rat(BigInt(1), BigInt(1) << (-e));
}

// Largest integer i with 2^i <= x. Requires x > 0.
inline long floor_log2(const Rat& x) {
    if (x <= 0) throw std::invalid_argument("floor_log2: nonpositive argument");
    const BigInt num = boost::multiprecision::numerator(x);
    const BigInt den = boost::multiprecision::denominator(x);
    long i = static_cast<long>(boost::multiprecision::msb(num)) -
             static_cast<long>(boost::multiprecision::msb(den));
    // msb difference is within 1 of the true value; fix up.
    while (pow2(i + 1) <= x) ++i;
    while (pow2(i) > x) --i;
    return i;
}

inline bool is_power_of_two(const Rat& x) {
    if (x <= 0) return false;
    return pow2(floor_log2(x)) == x;
}

inline double to_double(const Rat& x) { return x.convert_to<double>(); }

// Accepts integers ("42", "-3"), finite decimals ("1.25"), and fractions
// ("3/17"). Fractions are needed because instance generators produce values
// with non-decimal denominators.
inline Rat rat_from_string(const std::string& s) {
    if (s.empty()) throw ParseError("empty number");
    auto slash = s.find('/');
    if (slash != std::string::npos) {
        try {
            BigInt num(s.substr(0, slash));
            BigInt den(s.substr(slash + 1));
            if (den == 0) throw ParseError("zero denominator: " + s);
            return Rat(num, den);
        } catch (const std::exception&) {
            throw ParseError("bad fraction: " + s);
        }
    }
    auto dot = s.find('.');
    try {
        if (dot == std::string::npos) return Rat(BigInt(s));
        std::string head = s.substr(0, dot);
        std::string tail = s.substr(dot + 1);
        if (tail.empty()) return Rat(BigInt(head));
        for (char c : tail)
            if (c < '0' || c > '9') throw ParseError("bad decimal: " + s);
        bool neg = !head.empty() && head[0] == '-';
        BigInt ipart = head.empty() || head == "-" ? BigInt(0) : BigInt(head);
        BigInt scale = 1;
        for (size_t i = 0; i < tail.size(); ++i) scale *= 10;
        BigInt frac(tail);
        BigInt num = boost::multiprecision::abs(ipart) * scale + frac;
        if (neg) num = -num;
        return Rat(num, scale);
    } catch (const ParseError&) {
        throw;
    } catch (const std::exception&) {
        throw ParseError("bad number: " + s);
    }
}

// Exact textual form: a finite decimal when the denominator is 2^a*5^b,
// otherwise "p/q". rat_from_string() round-trips either form.
inline std::string rat_to_string(const Rat& x) {
    BigInt num = boost::multiprecision::numerator(x);
    BigInt den = boost::multiprecision::denominator(x);
    if (den == 1) return num.str();
    BigInt d = den;
    int twos = 0, fives = 0;
    while (d % 2 == 0) { d /= 2; ++twos; }
    while (d % 5 == 0) { d /= 5; ++fives; }
    if (d != 1) return num.str() + "/" + den.str();
    // Scale to a power of ten.
    int digits = std::max(twos, fives);
    BigInt scale = 1;
    for (int i = 0; i < digits; ++i) scale *= 10;
    BigInt scaled = num * (scale / den);
    bool neg = scaled < 0;
    std::string s = boost::multiprecision::abs(scaled).str();
    if (static_cast<int>(s.size()) <= digits) s.insert(0, digits + 1 - s.size(), '0');
    s.insert(s.size() - digits, ".");
    return (neg ? "-" : "") + s;
}

}  // namespace osd
