#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qsim.hpp"

namespace stq {

struct ClassicalKey {
    std::vector<std::uint8_t> bytes;

    std::size_t bits() const { return bytes.size() * 8; }
    friend bool operator==(const ClassicalKey&, const ClassicalKey&) = default;
};

inline ClassicalKey random_key(std::size_t n_bytes, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> byte(0, 255);
    ClassicalKey k;
    for (std::size_t i = 0; i < n_bytes; ++i) k.bytes.push_back(static_cast<std::uint8_t>(byte(rng)));
    return k;
}

inline std::string to_hex(const ClassicalKey& k) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    for (auto b : k.bytes) {
        out += digits[b >> 4];
        out += digits[b & 15];
    }
    return out;
}

// ((m,m)) XOR sharing.

inline std::vector<ClassicalKey> xor_mm_split(const ClassicalKey& k, int m, std::mt19937_64& rng) {
    if (m < 1) throw std::invalid_argument("xor sharing needs m >= 1");
    std::vector<ClassicalKey> shares;
    ClassicalKey last = k;
    for (int i = 0; i + 1 < m; ++i) {
        shares.push_back(random_key(k.bytes.size(), rng));
        for (std::size_t b = 0; b < last.bytes.size(); ++b) last.bytes[b] ^= shares.back().bytes[b];
    }
    shares.push_back(std::move(last));
    return shares;
}

inline ClassicalKey xor_mm_reconstruct(const std::vector<std::optional<ClassicalKey>>& shares) {
    if (shares.empty()) throw std::invalid_argument("no shares");
    ClassicalKey out;
    for (std::size_t i = 0; i < shares.size(); ++i) {
        if (!shares[i]) throw std::runtime_error("missing share " + std::to_string(i + 1) + " of " + std::to_string(shares.size()));
        if (i == 0) out.bytes.assign(shares[i]->bytes.size(), 0);
        if (shares[i]->bytes.size() != out.bytes.size()) throw std::invalid_argument("share lengths differ");
        for (std::size_t b = 0; b < out.bytes.size(); ++b) out.bytes[b] ^= shares[i]->bytes[b];
    }
    return out;
}

inline ClassicalKey xor_mm_reconstruct(const std::vector<ClassicalKey>& shares) {
    return xor_mm_reconstruct(std::vector<std::optional<ClassicalKey>>(shares.begin(), shares.end()));
}

// Shamir sharing over a prime field, bytewise.

inline constexpr int kDefaultPrime = 257;

struct ShamirShare {
    int x = 0;
    std::vector<int> y;
};

namespace detail {

inline long mod(long a, long p) { return ((a % p) + p) % p; }

inline long pow_mod(long b, long e, long p) {
    long r = 1;
    b = mod(b, p);
    while (e > 0) {
        if (e & 1) r = r * b % p;
        b = b * b % p;
        e >>= 1;
    }
    return r;
}

inline long inv_mod(long a, long p) {
    if (mod(a, p) == 0) throw std::domain_error("no inverse");
    return pow_mod(a, p - 2, p);
}

inline bool is_prime(int p) {
    if (p < 2) return false;
    for (int q = 2; q * q <= p; ++q)
        if (p % q == 0) return false;
    return true;
}

}  // namespace detail

// Evaluates secret + c1 x + c2 x^2 + ... at x = 1..m.
inline std::vector<int> shamir_shares_of(int secret, const std::vector<int>& coeffs, int m, int prime) {
    std::vector<int> out;
    for (int x = 1; x <= m; ++x) {
        long acc = 0;
        for (std::size_t i = coeffs.size(); i-- > 0;) acc = (acc * x + coeffs[i]) % prime;
        acc = (acc * x + secret) % prime;
        out.push_back(static_cast<int>(acc));
    }
    return out;
}

inline std::vector<ShamirShare> shamir_split(const ClassicalKey& k, int m, int threshold, std::mt19937_64& rng,
                                             int prime = kDefaultPrime) {
    if (!detail::is_prime(prime)) throw std::invalid_argument("field size must be prime");
    if (threshold < 1 || threshold > m || m >= prime) throw std::invalid_argument("need 1 <= threshold <= m < field size");
    if (prime <= 255) throw std::invalid_argument("field too small for byte secrets");
    std::uniform_int_distribution<int> coef(0, prime - 1);
    std::vector<ShamirShare> shares(m);
    for (int i = 0; i < m; ++i) shares[i].x = i + 1;
    for (auto byte : k.bytes) {
        std::vector<int> c(threshold - 1);
        for (auto& x : c) x = coef(rng);
        const auto ys = shamir_shares_of(byte, c, m, prime);
        for (int i = 0; i < m; ++i) shares[i].y.push_back(ys[i]);
    }
    return shares;
}

inline int shamir_interpolate(const std::vector<std::pair<int, int>>& points, int prime) {
    long acc = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        long num = 1, den = 1;
        for (std::size_t j = 0; j < points.size(); ++j) {
            if (i == j) continue;
            num = num * detail::mod(-points[j].first, prime) % prime;
            den = den * detail::mod(points[i].first - points[j].first, prime) % prime;
        }
        acc = (acc + points[i].second * num % prime * detail::inv_mod(den, prime)) % prime;
    }
    return static_cast<int>(acc);
}

inline ClassicalKey shamir_reconstruct(const std::vector<ShamirShare>& shares, int threshold, int prime = kDefaultPrime) {
    if (static_cast<int>(shares.size()) < threshold)
        throw std::runtime_error("insufficient shares: have " + std::to_string(shares.size()) + ", need " +
                                 std::to_string(threshold));
    for (std::size_t i = 0; i < shares.size(); ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (shares[i].x == shares[j].x) throw std::invalid_argument("duplicate share index");
    ClassicalKey k;
    const std::size_t len = shares.front().y.size();
    for (std::size_t b = 0; b < len; ++b) {
        std::vector<std::pair<int, int>> pts;
        for (int i = 0; i < threshold; ++i) pts.emplace_back(shares[i].x, shares[i].y.at(b));
        const int v = shamir_interpolate(pts, prime);
        if (v > 255) throw std::runtime_error("shares are inconsistent");
        k.bytes.push_back(static_cast<std::uint8_t>(v));
    }
    return k;
}

// Quantum one-time pad: one Weyl pair (a,b) per slot.

struct QotpKey {
    int d = 2;
    std::vector<std::pair<int, int>> pairs;

    friend bool operator==(const QotpKey&, const QotpKey&) = default;
};

inline QotpKey random_qotp_key(int d, std::size_t slots, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> sym(0, d - 1);
    QotpKey k{d, {}};
    for (std::size_t i = 0; i < slots; ++i) {
        const int a = sym(rng);
        const int b = sym(rng);
        k.pairs.emplace_back(a, b);
    }
    return k;
}

// Bytes carry one symbol each, (a0, b0, a1, b1, ...).
inline QotpKey qotp_key_from_bytes(const ClassicalKey& k, int d) {
    if (k.bytes.size() % 2) throw std::invalid_argument("pad key needs an even number of symbols");
    QotpKey q{d, {}};
    for (std::size_t i = 0; i < k.bytes.size(); i += 2) {
        if (k.bytes[i] >= d || k.bytes[i + 1] >= d) throw std::invalid_argument("pad symbol out of range");
        q.pairs.emplace_back(k.bytes[i], k.bytes[i + 1]);
    }
    return q;
}

inline ClassicalKey qotp_key_to_bytes(const QotpKey& q) {
    ClassicalKey k;
    for (auto [a, b] : q.pairs) {
        k.bytes.push_back(static_cast<std::uint8_t>(a));
        k.bytes.push_back(static_cast<std::uint8_t>(b));
    }
    return k;
}

inline qsim::QState qotp_encrypt(const qsim::QState& s, const std::vector<std::string>& slots, const QotpKey& key) {
    if (key.pairs.size() != slots.size()) throw std::invalid_argument("key length does not match slot count");
    qsim::QState out = s;
    for (std::size_t i = 0; i < slots.size(); ++i) {
        if (s.reg().dim(slots[i]) != key.d) throw std::invalid_argument("key dimension does not match slot");
        out = qsim::apply(out, qsim::weyl(key.d, key.pairs[i].first, key.pairs[i].second), {slots[i]});
    }
    return out;
}

inline qsim::QState qotp_decrypt(const qsim::QState& s, const std::vector<std::string>& slots, const QotpKey& key) {
    if (key.pairs.size() != slots.size()) throw std::invalid_argument("key length does not match slot count");
    qsim::QState out = s;
    for (std::size_t i = 0; i < slots.size(); ++i)
        out = qsim::apply(out, qsim::weyl(key.d, key.pairs[i].first, key.pairs[i].second).adjoint(), {slots[i]});
    return out;
}

// Key-averaged ciphertext: (1/d^2) sum_{a,b} W rho W^dagger on each listed slot.
inline qsim::QState qotp_average(const qsim::QState& s, const std::vector<std::string>& slots) {
    qsim::QState acc = s.as_density();
    for (const auto& slot : slots) {
        const int d = acc.reg().dim(slot);
        qsim::Mat sum = qsim::Mat::Zero(acc.density_ref().rows(), acc.density_ref().cols());
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) sum += qsim::apply(acc, qsim::weyl(d, a, b), {slot}).density_ref();
        acc = qsim::QState::density(acc.reg(), sum / static_cast<double>(d * d));
    }
    return acc;
}

// ((2,3)) qutrit code: |i> -> (1/sqrt3) sum_j |j, j+i, j+2i>.

inline constexpr int kCode23Mult[3] = {0, 1, 2};

inline qsim::Mat code23_isometry() {
    qsim::Mat v = qsim::Mat::Zero(27, 3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            const int x1 = j, x2 = (j + i) % 3, x3 = (j + 2 * i) % 3;
            v(x1 * 9 + x2 * 3 + x3, i) = 1.0 / std::sqrt(3.0);
        }
    return v;
}

inline qsim::QState code23_encode(const qsim::QState& s, const std::string& slot, const std::vector<std::string>& shares) {
    if (s.reg().dim(slot) != 3) throw std::invalid_argument("the (2,3) code encodes a qutrit");
    if (shares.size() != 3) throw std::invalid_argument("the (2,3) code has three shares");
    return qsim::apply_isometry(s, slot, {{shares[0], 3}, {shares[1], 3}, {shares[2], 3}}, code23_isometry());
}

// Permutation on shares (p,q) (1-based): (x_p, x_q) -> (i, x_e) for the codeword
// labelled i whose third share is x_e. Afterwards slot p holds the secret and
// slots q and e hold |chi>.
inline qsim::Mat code23_decoder(int p, int q) {
    if (p < 1 || p > 3 || q < 1 || q > 3 || p == q) throw std::invalid_argument("decode needs two distinct shares in 1..3");
    const int e = 6 - p - q;
    qsim::Mat u = qsim::Mat::Zero(9, 9);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            const int xp = (j + kCode23Mult[p - 1] * i) % 3;
            const int xq = (j + kCode23Mult[q - 1] * i) % 3;
            const int xe = (j + kCode23Mult[e - 1] * i) % 3;
            u(i * 3 + xe, xp * 3 + xq) = 1.0;
        }
    return u;
}

inline qsim::QState code23_decode(const qsim::QState& s, const std::vector<std::string>& shares, std::pair<int, int> pair) {
    if (shares.size() != 3) throw std::invalid_argument("the (2,3) code has three shares");
    return qsim::apply(s, code23_decoder(pair.first, pair.second), {shares[pair.first - 1], shares[pair.second - 1]});
}

inline qsim::QState code23_decode(const qsim::QState& s, const std::vector<std::string>& shares, const std::vector<int>& pair) {
    if (pair.size() != 2) throw std::invalid_argument("decode needs a pair of shares");
    return code23_decode(s, shares, std::pair<int, int>{pair[0], pair[1]});
}

// Edge codes over the complete graph on n vertices.

enum class EdgeCodeMode { Trivial, Identity, Code23, Symbolic };

inline const char* to_string(EdgeCodeMode m) {
    switch (m) {
        case EdgeCodeMode::Trivial: return "trivial";
        case EdgeCodeMode::Identity: return "identity";
        case EdgeCodeMode::Code23: return "code23";
        case EdgeCodeMode::Symbolic: return "symbolic";
    }
    return "?";
}

enum class TokenKind { QuantumShare, ClassicalShare };

struct SymbolicToken {
    std::string id;
    TokenKind kind = TokenKind::QuantumShare;
    std::vector<std::vector<std::string>> reconstruction_sets;
};

struct EdgeCode {
    int n = 0;
    EdgeCodeMode mode = EdgeCodeMode::Identity;
    std::vector<std::pair<int, int>> edges;  // 1-based, lexicographic; share k belongs to edges[k]

    bool statevector() const { return mode != EdgeCodeMode::Symbolic; }
    std::size_t shares() const { return mode == EdgeCodeMode::Trivial ? 1 : edges.size(); }

    // Share indices (0-based) incident to vertex v (1-based).
    std::vector<int> star(int v) const {
        if (v < 1 || v > n) throw std::invalid_argument("vertex out of range");
        if (mode == EdgeCodeMode::Trivial) return {0};
        std::vector<int> out;
        for (std::size_t k = 0; k < edges.size(); ++k)
            if (edges[k].first == v || edges[k].second == v) out.push_back(static_cast<int>(k));
        return out;
    }

    std::vector<std::vector<int>> reconstruction_sets() const {
        std::vector<std::vector<int>> out;
        for (int v = 1; v <= n; ++v) out.push_back(star(v));
        return out;
    }

    bool reconstructs(const std::vector<int>& held) const {
        for (const auto& s : reconstruction_sets())
            if (std::all_of(s.begin(), s.end(), [&](int k) { return std::find(held.begin(), held.end(), k) != held.end(); }))
                return true;
        return false;
    }

    std::vector<SymbolicToken> symbolic_tokens(const std::vector<std::string>& share_ids) const {
        if (share_ids.size() != shares()) throw std::invalid_argument("share id count mismatch");
        std::vector<std::vector<std::string>> sets;
        for (const auto& s : reconstruction_sets()) {
            std::vector<std::string> names;
            for (int k : s) names.push_back(share_ids[k]);
            sets.push_back(names);
        }
        std::vector<SymbolicToken> out;
        for (const auto& id : share_ids) out.push_back({id, TokenKind::QuantumShare, sets});
        return out;
    }

    qsim::QState encode(const qsim::QState& s, const std::string& slot, const std::vector<std::string>& share_ids) const {
        if (share_ids.size() != shares()) throw std::invalid_argument("share id count mismatch");
        switch (mode) {
            case EdgeCodeMode::Trivial:
            case EdgeCodeMode::Identity: return s.relabel(slot, share_ids[0]);
            case EdgeCodeMode::Code23: return code23_encode(s, slot, share_ids);
            case EdgeCodeMode::Symbolic: break;
        }
        throw std::logic_error("symbolic edge codes have no state-vector encoding");
    }

    // Decodes the star of v in place; returns the slot that then holds the secret.
    std::string decode_star(qsim::QState& s, int v, const std::vector<std::string>& share_ids) const {
        const auto st = star(v);
        switch (mode) {
            case EdgeCodeMode::Trivial:
            case EdgeCodeMode::Identity: return share_ids[st[0]];
            case EdgeCodeMode::Code23:
                s = code23_decode(s, share_ids, std::pair<int, int>{st[0] + 1, st[1] + 1});
                return share_ids[st[0]];
            case EdgeCodeMode::Symbolic: break;
        }
        throw std::logic_error("symbolic edge codes have no state-vector decoding");
    }
};

inline EdgeCode trivial_code() { return EdgeCode{1, EdgeCodeMode::Trivial, {}}; }

inline EdgeCode edge_code_build(int n, int secret_dim = 3) {
    if (n < 2) throw std::invalid_argument("edge codes need n >= 2");
    EdgeCode c;
    c.n = n;
    for (int i = 1; i <= n; ++i)
        for (int j = i + 1; j <= n; ++j) c.edges.emplace_back(i, j);
    if (n == 2)
        c.mode = EdgeCodeMode::Identity;
    else if (n == 3 && secret_dim == 3)
        c.mode = EdgeCodeMode::Code23;
    else
        c.mode = EdgeCodeMode::Symbolic;
    return c;
}

}  // namespace stq
