#include "granular/histogram.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include <boost/math/special_functions/gamma.hpp>

namespace granular {

Grid1D::Grid1D(double lo_, double hi_, int bins_) : lo(lo_), hi(hi_), bins(bins_) {
    if (!(hi > lo) || bins < 1) throw std::invalid_argument("grid needs hi > lo and bins >= 1");
}

int Grid1D::index(double x) const {
    const double u = (x - lo) / (hi - lo) * bins;
    if (!(u >= 0.0)) return 0; // also NaN
    if (u >= bins) return bins - 1;
    return static_cast<int>(u);
}

PhaseHistogram::PhaseHistogram(Grid1D q, Grid1D p)
    : q_(q), p_(p), counts_(static_cast<std::size_t>(q.bins) * p.bins, 0),
      weights_(counts_.size(), 0.0) {}

void PhaseHistogram::add(double q, double p, double weight) {
    const std::size_t k = flat(q_.index(q), p_.index(p));
    ++counts_[k];
    weights_[k] += weight;
    ++total_count_;
    total_weight_ += weight;
}

void PhaseHistogram::merge(const PhaseHistogram& other) {
    if (other.counts_.size() != counts_.size() || other.q_.lo != q_.lo || other.q_.hi != q_.hi ||
        other.p_.lo != p_.lo || other.p_.hi != p_.hi) {
        throw std::invalid_argument("cannot merge histograms on different grids");
    }
    for (std::size_t k = 0; k < counts_.size(); ++k) {
        counts_[k] += other.counts_[k];
        weights_[k] += other.weights_[k];
    }
    total_count_ += other.total_count_;
    total_weight_ += other.total_weight_;
}

std::vector<double> PhaseHistogram::normalized(Normalization mode) const {
    std::vector<double> out(weights_.size(), 0.0);
    if (mode == Normalization::probability) {
        if (total_weight_ == 0.0) return out;
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = weights_[k] / total_weight_;
    } else {
        const double area = q_.width() * p_.width();
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = weights_[k] / area;
    }
    return out;
}

std::vector<double> PhaseHistogram::momentum_marginal() const {
    std::vector<double> out(p_.bins, 0.0);
    if (total_weight_ == 0.0) return out;
    for (int a = 0; a < q_.bins; ++a) {
        for (int b = 0; b < p_.bins; ++b) out[b] += weights_[flat(a, b)];
    }
    for (double& v : out) v /= total_weight_;
    return out;
}

std::string PhaseHistogram::csv(double t, bool header) const {
    std::string out = header ? "t,q_bin,p_bin,count,weight\n" : "";
    char buf[96];
    for (int a = 0; a < q_.bins; ++a) {
        for (int b = 0; b < p_.bins; ++b) {
            std::snprintf(buf, sizeof buf, "%.17g,%d,%d,%zu,%.17g\n", t, a, b, count(a, b), weight(a, b));
            out += buf;
        }
    }
    return out;
}

double l1_distance(const PhaseHistogram& a, const PhaseHistogram& b) {
    if (a.bins() != b.bins()) throw std::invalid_argument("l1_distance: grids differ");
    const auto pa = a.normalized();
    const auto pb = b.normalized();
    double d = 0.0;
    for (std::size_t k = 0; k < pa.size(); ++k) d += std::abs(pa[k] - pb[k]);
    return d;
}

std::pair<double, int> chi_square(const std::vector<double>& observed, const std::vector<double>& expected_prob,
                                  double min_expected) {
    if (observed.size() != expected_prob.size() || observed.empty()) {
        throw std::invalid_argument("chi_square: size mismatch");
    }
    double n = 0.0;
    for (double o : observed) n += o;
    std::vector<std::pair<double, double>> groups; // (observed, expected)
    double o_acc = 0.0, e_acc = 0.0;
    for (std::size_t k = 0; k < observed.size(); ++k) {
        o_acc += observed[k];
        e_acc += n * expected_prob[k];
        if (e_acc >= min_expected) {
            groups.emplace_back(o_acc, e_acc);
            o_acc = e_acc = 0.0;
        }
    }
    if (o_acc > 0.0 || e_acc > 0.0) {
        // leftover tail joins the last group
        if (groups.empty()) groups.emplace_back(0.0, 0.0);
        groups.back().first += o_acc;
        groups.back().second += e_acc;
    }
    double stat = 0.0;
    for (const auto& [o, e] : groups) {
        if (e > 0.0) stat += (o - e) * (o - e) / e;
    }
    return {stat, std::max(static_cast<int>(groups.size()) - 1, 1)};
}

double chi_square_pvalue(double statistic, int dof) {
    if (dof < 1) throw std::invalid_argument("dof must be >= 1");
    if (statistic <= 0.0) return 1.0;
    return boost::math::gamma_q(0.5 * dof, 0.5 * statistic);
}

} // namespace granular
