// confirmation_sampling.hpp
//
// Finds the minimum of a sampled distribution without knowing the sampling
// probabilities: keep the smallest element seen so far and stop once it has
// been drawn t more times after the draw that made it the minimum.
#pragma once

#include <cmath>
#include <concepts>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "cslsh/core.hpp"

namespace cslsh {

enum class CsStatus : std::uint8_t { confirmed, budget_exhausted };

template <class T>
struct CsResult {
    std::optional<T> reported;  // the tracked minimum; empty only if nothing was drawn
    std::size_t samples = 0;
    unsigned confirmations = 0;
    CsStatus status = CsStatus::budget_exhausted;

    [[nodiscard]] bool confirmed() const noexcept { return status == CsStatus::confirmed; }
};

/// Incremental form, for callers that interleave several searches or meter
/// their own budgets. "No tracked element" plays the role of infinity.
template <class T, class Less = std::less<T>>
class ConfirmationSampler {
public:
    explicit ConfirmationSampler(unsigned t, Less less = {}) : t_(t), less_(std::move(less)) {
        if (t == 0) throw input_error("confirmation count t must be positive");
    }

    /// Feeds one sample. Returns true once the tracked minimum has t confirmations.
    bool offer(const T& x) {
        if (done()) return true;
        ++samples_;
        if (best_ && x == *best_) {
            ++count_;
        } else if (!best_ || less_(x, *best_)) {
            best_ = x;
            count_ = 0;
        }
        return done();
    }

    [[nodiscard]] bool done() const noexcept { return count_ >= t_; }
    [[nodiscard]] const std::optional<T>& best() const noexcept { return best_; }
    [[nodiscard]] unsigned count() const noexcept { return count_; }
    [[nodiscard]] std::size_t samples() const noexcept { return samples_; }
    [[nodiscard]] unsigned t() const noexcept { return t_; }

    [[nodiscard]] CsResult<T> result() const {
        return {best_, samples_, count_, done() ? CsStatus::confirmed : CsStatus::budget_exhausted};
    }

private:
    unsigned t_;
    Less less_;
    std::optional<T> best_;
    unsigned count_ = 0;
    std::size_t samples_ = 0;
};

namespace detail {
template <class R>
struct unwrap_optional {
    using type = R;
};
template <class R>
struct unwrap_optional<std::optional<R>> {
    using type = R;
};
template <class R>
inline constexpr bool is_optional_v = false;
template <class R>
inline constexpr bool is_optional_v<std::optional<R>> = true;
}  // namespace detail

inline constexpr std::size_t kUnlimited = std::numeric_limits<std::size_t>::max();

/// Runs the stopping rule over `draw`. A source may return std::optional<T>;
/// an empty optional means the source ran dry and ends the run unconfirmed,
/// as does reaching max_samples.
template <class Source, class Less = std::less<>>
auto confirmation_sampling(Source&& draw, unsigned t, Less less = {}, std::size_t max_samples = kUnlimited) {
    using R = std::decay_t<std::invoke_result_t<Source&>>;
    using T = typename detail::unwrap_optional<R>::type;
    ConfirmationSampler<T, Less> sampler(t, std::move(less));
    while (!sampler.done() && sampler.samples() < max_samples) {
        if constexpr (detail::is_optional_v<R>) {
            auto x = draw();
            if (!x) break;
            sampler.offer(*x);
        } else {
            sampler.offer(draw());
        }
    }
    return sampler.result();
}

/// Probabilities p_1..p_n of elements listed in increasing order, so index 0
/// holds the minimum.
class DiscreteDistribution {
public:
    explicit DiscreteDistribution(std::vector<double> probabilities) : p_(std::move(probabilities)) {
        if (p_.empty()) throw input_error("distribution needs at least one element");
        double sum = 0, c = 0;
        for (double v : p_) {
            if (!(v >= 0) || !std::isfinite(v)) throw input_error("probabilities must be finite and nonnegative");
            const double y = v - c;
            const double s = sum + y;
            c = (s - sum) - y;
            sum = s;
        }
        if (std::abs(sum - 1.0) > 1e-12) throw input_error("probabilities must sum to 1 (got " + std::to_string(sum) + ")");
    }

    [[nodiscard]] std::size_t size() const noexcept { return p_.size(); }
    [[nodiscard]] double operator[](std::size_t i) const noexcept { return p_[i]; }
    [[nodiscard]] std::span<const double> probabilities() const noexcept { return p_; }

    /// Largest probability among the non-minimum elements (0 for n = 1).
    [[nodiscard]] double max_other() const noexcept {
        double m = 0;
        for (std::size_t i = 1; i < p_.size(); ++i) m = std::max(m, p_[i]);
        return m;
    }

private:
    std::vector<double> p_;
};

/// Upper bound (1 - p1) (p2 / (p1 + p2))^t on reporting anything but the minimum.
inline double failure_bound(double p1, double p2, unsigned t) {
    if (!(p1 > 0 && p1 <= 1)) throw input_error("failure_bound requires 0 < p1 <= 1");
    if (!(p2 >= 0 && p2 <= 1)) throw input_error("failure_bound requires 0 <= p2 <= 1");
    if (t == 0) throw input_error("confirmation count t must be positive");
    return (1 - p1) * std::pow(p2 / (p1 + p2), static_cast<double>(t));
}

/// (t + 1) / p1: expected draws until the minimum has been seen t + 1 times.
inline double expected_samples_bound(double p1, unsigned t) {
    if (!(p1 > 0 && p1 <= 1)) throw input_error("expected_samples_bound requires 0 < p1 <= 1");
    return (t + 1) / p1;
}

/// Exact probability that the stopping rule reports each element.
///
/// rho_i = (1 - sum_{j>i} rho_j) (p_i / sum_{s<=i} p_s)^(t+1), evaluated from
/// the largest element down. Element i is reported exactly when it is drawn
/// t + 1 times before any smaller element, given that no larger element was
/// reported first. Zero-probability elements are never reported.
inline std::vector<double> exact_output_distribution(const DiscreteDistribution& dist, unsigned t) {
    if (t == 0) throw input_error("confirmation count t must be positive");
    const std::size_t n = dist.size();
    std::vector<double> prefix(n);
    {
        double sum = 0, c = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double y = dist[i] - c;
            const double s = sum + y;
            c = (s - sum) - y;
            sum = s;
            prefix[i] = sum;
        }
    }
    std::vector<double> rho(n, 0.0);
    double tail = 0, comp = 0;  // Neumaier sum of rho_j, j > i
    for (std::size_t k = n; k-- > 0;) {
        if (dist[k] == 0) continue;
        const double ratio = std::min(1.0, dist[k] / prefix[k]);
        rho[k] = (1.0 - (tail + comp)) * std::pow(ratio, static_cast<double>(t + 1));
        const double s = tail + rho[k];
        comp += std::abs(tail) >= std::abs(rho[k]) ? (tail - s) + rho[k] : (rho[k] - s) + tail;
        tail = s;
    }
    return rho;
}

}  // namespace cslsh
