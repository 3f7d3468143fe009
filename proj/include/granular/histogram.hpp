#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace granular {

/// Uniform bins on [lo, hi). Values outside are clamped to the edge bins.
struct Grid1D {
    double lo = 0.0;
    double hi = 1.0;
    int bins = 1;

    Grid1D() = default;
    Grid1D(double lo, double hi, int bins);

    double width() const { return (hi - lo) / bins; }
    double centre(int k) const { return lo + (k + 0.5) * width(); }
    int index(double x) const;
};

enum class Normalization { probability, density };

/// Weighted 2D histogram over (q, p) for one-dimensional phase space.
class PhaseHistogram {
public:
    PhaseHistogram() = default;
    PhaseHistogram(Grid1D q, Grid1D p);

    void add(double q, double p, double weight = 1.0);
    void merge(const PhaseHistogram& other);

    const Grid1D& q_grid() const { return q_; }
    const Grid1D& p_grid() const { return p_; }
    std::size_t bins() const { return counts_.size(); }
    std::size_t flat(int qb, int pb) const { return static_cast<std::size_t>(qb) * p_.bins + pb; }

    std::size_t count(int qb, int pb) const { return counts_[flat(qb, pb)]; }
    double weight(int qb, int pb) const { return weights_[flat(qb, pb)]; }
    std::size_t total_count() const { return total_count_; }
    double total_weight() const { return total_weight_; }

    /// Bin values as probabilities (sum 1) or phase-space densities
    /// (weight / cell area).
    std::vector<double> normalized(Normalization mode = Normalization::probability) const;

    /// Momentum marginal, summed over q bins, as probabilities.
    std::vector<double> momentum_marginal() const;

    /// Rows `t,q_bin,p_bin,count,weight`, header included when asked.
    std::string csv(double t, bool header = true) const;

private:
    Grid1D q_;
    Grid1D p_;
    std::vector<std::size_t> counts_;
    std::vector<double> weights_;
    std::size_t total_count_ = 0;
    double total_weight_ = 0.0;
};

/// L1 distance between the probability-normalised histograms.
double l1_distance(const PhaseHistogram& a, const PhaseHistogram& b);

/// Pearson chi-square statistic of observed counts against expected
/// probabilities, pooling bins whose expectation is below `min_expected`.
/// Returns {statistic, degrees of freedom}.
std::pair<double, int> chi_square(const std::vector<double>& observed, const std::vector<double>& expected_prob,
                                  double min_expected = 5.0);

/// Upper tail probability of the chi-square distribution.
double chi_square_pvalue(double statistic, int dof);

} // namespace granular
