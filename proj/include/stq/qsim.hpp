#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace stq::qsim {

using cplx = std::complex<double>;
using Vec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXcd;

inline constexpr std::size_t kMaxTotalDim = std::size_t{1} << 16;

struct Slot {
    std::string label;
    int dim = 2;
};

class Register {
public:
    Register() = default;
    explicit Register(std::vector<Slot> slots) : slots_(std::move(slots)) { validate(); }

    const std::vector<Slot>& slots() const { return slots_; }
    std::size_t size() const { return slots_.size(); }
    std::size_t total_dim() const {
        std::size_t d = 1;
        for (const auto& s : slots_) d *= static_cast<std::size_t>(s.dim);
        return d;
    }
    bool has(const std::string& label) const { return find(label) >= 0; }
    int find(const std::string& label) const {
        for (std::size_t i = 0; i < slots_.size(); ++i)
            if (slots_[i].label == label) return static_cast<int>(i);
        return -1;
    }
    int index_of(const std::string& label) const {
        const int i = find(label);
        if (i < 0) throw std::invalid_argument("no slot labelled '" + label + "'");
        return i;
    }
    int dim(const std::string& label) const { return slots_[index_of(label)].dim; }
    std::vector<std::string> labels() const {
        std::vector<std::string> out;
        for (const auto& s : slots_) out.push_back(s.label);
        return out;
    }
    std::vector<int> dims() const {
        std::vector<int> out;
        for (const auto& s : slots_) out.push_back(s.dim);
        return out;
    }

private:
    void validate() const {
        double total = 1;
        for (std::size_t i = 0; i < slots_.size(); ++i) {
            if (slots_[i].dim < 2) throw std::invalid_argument("slot dimension must be at least 2");
            for (std::size_t j = 0; j < i; ++j)
                if (slots_[i].label == slots_[j].label)
                    throw std::invalid_argument("duplicate slot label '" + slots_[i].label + "'");
            total *= slots_[i].dim;
        }
        if (total > static_cast<double>(kMaxTotalDim)) throw std::length_error("register exceeds dimension guard");
    }

    std::vector<Slot> slots_;
};

class QState {
public:
    QState() = default;

    static QState pure(Register reg, Vec psi) {
        if (static_cast<std::size_t>(psi.size()) != reg.total_dim())
            throw std::invalid_argument("amplitude vector does not match register");
        QState s;
        s.reg_ = std::move(reg);
        s.pure_ = true;
        s.psi_ = std::move(psi);
        return s;
    }
    static QState density(Register reg, Mat rho) {
        const auto d = static_cast<Eigen::Index>(reg.total_dim());
        if (rho.rows() != d || rho.cols() != d) throw std::invalid_argument("density matrix does not match register");
        QState s;
        s.reg_ = std::move(reg);
        s.pure_ = false;
        s.rho_ = std::move(rho);
        return s;
    }

    const Register& reg() const { return reg_; }
    bool is_pure() const { return pure_; }
    const Vec& amplitudes() const {
        if (!pure_) throw std::logic_error("state is not pure");
        return psi_;
    }
    Vec& amplitudes_mut() { return psi_; }
    const Mat& density_ref() const {
        if (pure_) throw std::logic_error("state is pure");
        return rho_;
    }
    Mat density_matrix() const { return pure_ ? Mat(psi_ * psi_.adjoint()) : rho_; }
    QState as_density() const { return density(reg_, density_matrix()); }
    double trace() const { return pure_ ? psi_.squaredNorm() : rho_.trace().real(); }

    QState relabel(const std::string& from, const std::string& to) const {
        auto slots = reg_.slots();
        slots[reg_.index_of(from)].label = to;
        QState s = *this;
        s.reg_ = Register(std::move(slots));
        return s;
    }

private:
    Register reg_;
    bool pure_ = true;
    Vec psi_;
    Mat rho_;
};

namespace detail {

// Flat offsets for the listed slots (row-major, first listed slot most significant)
// and for the remaining slots, so index = sub[k] + rest[r].
struct Split {
    std::vector<std::size_t> sub, rest;
    std::size_t sub_dim = 1;
};

inline Split split(const Register& reg, const std::vector<int>& idx) {
    const auto& slots = reg.slots();
    std::vector<std::size_t> stride(slots.size());
    std::size_t s = 1;
    for (std::size_t i = slots.size(); i-- > 0;) {
        stride[i] = s;
        s *= static_cast<std::size_t>(slots[i].dim);
    }
    std::vector<bool> chosen(slots.size(), false);
    for (int i : idx) {
        if (chosen[i]) throw std::invalid_argument("slot listed twice");
        chosen[i] = true;
    }
    auto offsets = [&](const std::vector<int>& which) {
        std::vector<std::size_t> out{0};
        for (int i : which) {
            std::vector<std::size_t> next;
            next.reserve(out.size() * slots[i].dim);
            for (auto base : out)
                for (int k = 0; k < slots[i].dim; ++k) next.push_back(base + k * stride[i]);
            out.swap(next);
        }
        return out;
    };
    std::vector<int> others;
    for (std::size_t i = 0; i < slots.size(); ++i)
        if (!chosen[i]) others.push_back(static_cast<int>(i));
    Split sp;
    sp.sub = offsets(idx);
    sp.rest = offsets(others);
    sp.sub_dim = sp.sub.size();
    return sp;
}

inline std::vector<int> indices(const Register& reg, const std::vector<std::string>& labels) {
    std::vector<int> out;
    for (const auto& l : labels) out.push_back(reg.index_of(l));
    return out;
}

// Applies op to the listed slots of every column of m.
inline void apply_columns(Mat& m, const Mat& op, const Split& sp) {
    Vec buf(static_cast<Eigen::Index>(sp.sub_dim));
    for (Eigen::Index c = 0; c < m.cols(); ++c)
        for (auto r : sp.rest) {
            for (std::size_t k = 0; k < sp.sub_dim; ++k) buf[k] = m(r + sp.sub[k], c);
            Vec out = op * buf;
            for (std::size_t k = 0; k < sp.sub_dim; ++k) m(r + sp.sub[k], c) = out[k];
        }
}

}  // namespace detail

inline QState basis_state(const Register& reg, const std::vector<int>& digits) {
    if (digits.size() != reg.size()) throw std::invalid_argument("digit count does not match register");
    std::size_t idx = 0;
    for (std::size_t i = 0; i < digits.size(); ++i) {
        if (digits[i] < 0 || digits[i] >= reg.slots()[i].dim) throw std::invalid_argument("basis digit out of range");
        idx = idx * reg.slots()[i].dim + digits[i];
    }
    Vec psi = Vec::Zero(static_cast<Eigen::Index>(reg.total_dim()));
    psi[static_cast<Eigen::Index>(idx)] = 1.0;
    return QState::pure(reg, psi);
}

inline QState single(const std::string& label, const Vec& psi) {
    return QState::pure(Register({{label, static_cast<int>(psi.size())}}), psi);
}

inline QState maximally_entangled(int d, const std::string& a = "A", const std::string& b = "B") {
    if (d < 2) throw std::invalid_argument("dimension must be at least 2");
    Vec psi = Vec::Zero(d * d);
    for (int i = 0; i < d; ++i) psi[i * d + i] = 1.0 / std::sqrt(static_cast<double>(d));
    return QState::pure(Register({{a, d}, {b, d}}), psi);
}

inline Mat weyl(int d, int a, int b) {
    if (d < 2 || a < 0 || a >= d || b < 0 || b >= d) throw std::invalid_argument("weyl indices out of range");
    Mat w = Mat::Zero(d, d);
    const double pi = std::acos(-1.0);
    for (int j = 0; j < d; ++j) w((j + a) % d, j) = std::polar(1.0, 2.0 * pi * ((static_cast<long>(b) * j) % d) / d);
    return w;
}

inline QState tensor(const QState& a, const QState& b) {
    auto slots = a.reg().slots();
    for (const auto& s : b.reg().slots()) slots.push_back(s);
    Register reg(std::move(slots));
    if (a.is_pure() && b.is_pure()) {
        const Vec& x = a.amplitudes();
        const Vec& y = b.amplitudes();
        Vec psi(x.size() * y.size());
        for (Eigen::Index i = 0; i < x.size(); ++i) psi.segment(i * y.size(), y.size()) = x[i] * y;
        return QState::pure(std::move(reg), std::move(psi));
    }
    const Mat x = a.density_matrix(), y = b.density_matrix();
    Mat rho(x.rows() * y.rows(), x.cols() * y.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = 0; j < x.cols(); ++j) rho.block(i * y.rows(), j * y.cols(), y.rows(), y.cols()) = x(i, j) * y;
    return QState::density(std::move(reg), std::move(rho));
}

// Applies a (not necessarily unitary) operator to the listed slots.
inline QState apply(const QState& s, const Mat& op, const std::vector<std::string>& labels) {
    const auto idx = detail::indices(s.reg(), labels);
    const auto sp = detail::split(s.reg(), idx);
    if (op.rows() != static_cast<Eigen::Index>(sp.sub_dim) || op.cols() != op.rows())
        throw std::invalid_argument("operator does not match slot dimensions");
    if (s.is_pure()) {
        Mat m = s.amplitudes();
        detail::apply_columns(m, op, sp);
        return QState::pure(s.reg(), m.col(0));
    }
    Mat m = s.density_ref();
    detail::apply_columns(m, op, sp);
    Mat mt = m.adjoint();
    detail::apply_columns(mt, op, sp);
    return QState::density(s.reg(), mt.adjoint());
}

// Replaces slot `in` by the listed output slots through the isometry v
// (columns indexed by the input basis, rows by the outputs' joint basis).
inline QState apply_isometry(const QState& s, const std::string& in, const std::vector<Slot>& outputs, const Mat& v) {
    if (!s.is_pure()) throw std::invalid_argument("isometries are applied to pure states only");
    const int pos = s.reg().index_of(in);
    const int din = s.reg().slots()[pos].dim;
    std::size_t dout = 1;
    for (const auto& o : outputs) dout *= static_cast<std::size_t>(o.dim);
    if (v.cols() != din || v.rows() != static_cast<Eigen::Index>(dout))
        throw std::invalid_argument("isometry does not match slot dimensions");
    std::vector<Slot> slots;
    for (int i = 0; i < pos; ++i) slots.push_back(s.reg().slots()[i]);
    for (const auto& o : outputs) slots.push_back(o);
    for (std::size_t i = pos + 1; i < s.reg().size(); ++i) slots.push_back(s.reg().slots()[i]);
    Register reg(std::move(slots));
    std::size_t before = 1, after = 1;
    for (int i = 0; i < pos; ++i) before *= s.reg().slots()[i].dim;
    for (std::size_t i = pos + 1; i < s.reg().size(); ++i) after *= s.reg().slots()[i].dim;
    const Vec& psi = s.amplitudes();
    Vec out = Vec::Zero(static_cast<Eigen::Index>(before * dout * after));
    for (std::size_t b = 0; b < before; ++b)
        for (int k = 0; k < din; ++k)
            for (std::size_t a = 0; a < after; ++a) {
                const cplx amp = psi[static_cast<Eigen::Index>((b * din + k) * after + a)];
                if (amp == cplx(0)) continue;
                for (std::size_t o = 0; o < dout; ++o)
                    out[static_cast<Eigen::Index>((b * dout + o) * after + a)] += amp * v(static_cast<Eigen::Index>(o), k);
            }
    return QState::pure(std::move(reg), std::move(out));
}

inline QState partial_trace(const QState& s, const std::vector<std::string>& keep) {
    if (keep.empty()) throw std::invalid_argument("partial trace needs at least one kept slot");
    const auto idx = detail::indices(s.reg(), keep);
    const auto sp = detail::split(s.reg(), idx);
    std::vector<Slot> slots;
    for (int i : idx) slots.push_back(s.reg().slots()[i]);
    const auto K = static_cast<Eigen::Index>(sp.sub_dim);
    Mat rho = Mat::Zero(K, K);
    if (s.is_pure()) {
        const Vec& psi = s.amplitudes();
        Mat m(K, static_cast<Eigen::Index>(sp.rest.size()));
        for (Eigen::Index k = 0; k < K; ++k)
            for (std::size_t r = 0; r < sp.rest.size(); ++r) m(k, static_cast<Eigen::Index>(r)) = psi[sp.sub[k] + sp.rest[r]];
        rho = m * m.adjoint();
    } else {
        const Mat& full = s.density_ref();
        for (Eigen::Index i = 0; i < K; ++i)
            for (Eigen::Index j = 0; j < K; ++j) {
                cplx acc = 0;
                for (auto r : sp.rest) acc += full(sp.sub[i] + r, sp.sub[j] + r);
                rho(i, j) = acc;
            }
    }
    return QState::density(Register(std::move(slots)), std::move(rho));
}

// Contracts the listed slots against phi (bra), removing them; result is unnormalized.
inline QState project_out(const QState& s, const std::vector<std::string>& labels, const Vec& phi) {
    if (!s.is_pure()) throw std::invalid_argument("projection is applied to pure states only");
    const auto idx = detail::indices(s.reg(), labels);
    const auto sp = detail::split(s.reg(), idx);
    if (static_cast<std::size_t>(phi.size()) != sp.sub_dim) throw std::invalid_argument("projector does not match slots");
    std::vector<Slot> slots;
    for (std::size_t i = 0; i < s.reg().size(); ++i)
        if (std::find(idx.begin(), idx.end(), static_cast<int>(i)) == idx.end()) slots.push_back(s.reg().slots()[i]);
    const Vec& psi = s.amplitudes();
    Vec out(static_cast<Eigen::Index>(sp.rest.size()));
    for (std::size_t r = 0; r < sp.rest.size(); ++r) {
        cplx acc = 0;
        for (std::size_t k = 0; k < sp.sub_dim; ++k) acc += std::conj(phi[k]) * psi[sp.rest[r] + sp.sub[k]];
        out[static_cast<Eigen::Index>(r)] = acc;
    }
    if (slots.empty()) throw std::invalid_argument("cannot project out every slot");
    return QState::pure(Register(std::move(slots)), std::move(out));
}

inline QState normalized(const QState& s) {
    const double tr = s.trace();
    if (!(tr > 0)) throw std::domain_error("cannot normalize a zero state");
    if (s.is_pure()) return QState::pure(s.reg(), s.amplitudes() / std::sqrt(tr));
    return QState::density(s.reg(), s.density_ref() / tr);
}

// (W_{a,b} ⊗ I)|Φ+⟩.
inline Vec bell_vector(int d, int a, int b) {
    const Mat w = weyl(d, a, b);
    Vec v(d * d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) v[i * d + j] = w(i, j) / std::sqrt(static_cast<double>(d));
    return v;
}

inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

struct BellOutcome {
    int a = 0, b = 0;
    double probability = 0;
    QState post;
};

// Born probabilities of every Bell outcome on (s1, s2), index a*d + b.
inline std::vector<double> bell_probabilities(const QState& s, const std::string& s1, const std::string& s2) {
    const int d = s.reg().dim(s1);
    if (s.reg().dim(s2) != d) throw std::invalid_argument("Bell measurement needs equal slot dimensions");
    const QState rho = partial_trace(s, {s1, s2});
    std::vector<double> p;
    for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) {
            const Vec v = bell_vector(d, a, b);
            p.push_back(std::max(0.0, (v.adjoint() * rho.density_ref() * v)(0, 0).real()));
        }
    return p;
}

inline QState bell_projected(const QState& s, const std::string& s1, const std::string& s2, int a, int b) {
    const int d = s.reg().dim(s1);
    const Vec v = bell_vector(d, a, b);
    const Mat proj = v * v.adjoint();
    return apply(s, proj, {s1, s2});
}

inline BellOutcome bell_measure(const QState& s, const std::string& s1, const std::string& s2, std::mt19937_64& rng) {
    const int d = s.reg().dim(s1);
    const auto p = bell_probabilities(s, s1, s2);
    double total = 0;
    for (double x : p) total += x;
    double r = uniform01(rng) * total, acc = 0;
    std::size_t k = 0;
    for (; k + 1 < p.size(); ++k) {
        acc += p[k];
        if (r < acc) break;
    }
    BellOutcome out;
    out.a = static_cast<int>(k) / d;
    out.b = static_cast<int>(k) % d;
    out.probability = p[k] / total;
    out.post = normalized(bell_projected(s, s1, s2, out.a, out.b));
    return out;
}

inline BellOutcome bell_measure(const QState& s, const std::string& s1, const std::string& s2, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return bell_measure(s, s1, s2, rng);
}

inline Vec haar_random(int d, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    Vec v(d);
    for (int i = 0; i < d; ++i) v[i] = cplx(g(rng), g(rng));
    return v / v.norm();
}

inline Mat hermitian_sqrt(const Mat& m) {
    Eigen::SelfAdjointEigenSolver<Mat> es(m);
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
}

inline void require_same_shape(const QState& a, const QState& b) {
    if (a.reg().dims() != b.reg().dims()) throw std::invalid_argument("states have different register shapes");
}

// Uhlmann fidelity (squared convention: |⟨ψ|φ⟩|² for pure states).
inline double fidelity(const QState& a, const QState& b) {
    require_same_shape(a, b);
    if (a.is_pure() && b.is_pure()) return std::norm(a.amplitudes().dot(b.amplitudes()));
    if (a.is_pure()) return (a.amplitudes().adjoint() * b.density_ref() * a.amplitudes())(0, 0).real();
    if (b.is_pure()) return (b.amplitudes().adjoint() * a.density_ref() * b.amplitudes())(0, 0).real();
    const Mat sa = hermitian_sqrt(a.density_ref());
    const Mat m = sa * b.density_ref() * sa;
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (m + m.adjoint()), Eigen::EigenvaluesOnly);
    double f = 0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) f += std::sqrt(std::max(0.0, es.eigenvalues()[i]));
    return f * f;
}

inline double trace_norm_hermitian(const Mat& m) {
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (m + m.adjoint()), Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().sum();
}

inline double trace_distance(const QState& a, const QState& b) {
    require_same_shape(a, b);
    return 0.5 * trace_norm_hermitian(a.density_matrix() - b.density_matrix());
}

struct Comparison {
    double fidelity;
    double trace_distance;
};

inline Comparison compare(const QState& a, const QState& b) { return {fidelity(a, b), trace_distance(a, b)}; }

inline QState maximally_mixed(const std::string& label, int d) {
    return QState::density(Register({{label, d}}), Mat::Identity(d, d) / static_cast<double>(d));
}

inline double expectation(const QState& s, const Mat& op, const std::vector<std::string>& labels) {
    const QState r = partial_trace(s, labels);
    return (op * r.density_ref()).trace().real();
}

// Reorders slots to the given label order (all labels must be listed).
inline QState reorder(const QState& s, const std::vector<std::string>& order) {
    if (order.size() != s.reg().size()) throw std::invalid_argument("reorder must list every slot");
    if (s.is_pure()) {
        const auto idx = detail::indices(s.reg(), order);
        const auto sp = detail::split(s.reg(), idx);
        std::vector<Slot> slots;
        for (int i : idx) slots.push_back(s.reg().slots()[i]);
        Vec out(s.amplitudes().size());
        for (std::size_t k = 0; k < sp.sub_dim; ++k) out[static_cast<Eigen::Index>(k)] = s.amplitudes()[sp.sub[k]];
        return QState::pure(Register(std::move(slots)), std::move(out));
    }
    return partial_trace(s, order);
}

}  // namespace stq::qsim
