#pragma once

#include <string>
#include <vector>

#include "carrytail/copula.hpp"
#include "carrytail/date.hpp"
#include "carrytail/estimation.hpp"
#include "carrytail/matrix.hpp"

namespace carrytail::td {

enum class Side { Upper, Lower };

/// Probability that the first h coordinates are extreme given the last d - h are.
struct TdQuery {
    int d = 2;
    int h = 1;
    Side side = Side::Upper;

    void validate() const;  // 2 <= d, 1 <= h < d
};

/// Limits of the generalized coefficients, closed form per family.
double td_single(const copula::CopulaSpec& spec, const TdQuery& q);
double td_mixture(const copula::MixtureSpec& mix, const TdQuery& q);

/// Upper coefficient from the survival-function ratio at small t in extended precision.
/// Secondary check on td_single; accurate to roughly 1e-4 for the heavy-tailed families.
double td_upper_numeric(const copula::CopulaSpec& spec, int d, int h, double t = 1e-8);

/// Conditional exceedance frequency. Upper counts u > threshold, lower counts u < threshold.
double td_empirical(const Matrix& samples, const TdQuery& q, double threshold);

struct TailDependenceSeries {
    std::string basket_side;  // "high_ir" or "low_ir"
    std::vector<Date> dates;
    std::vector<int> dims;
    std::vector<double> upper;
    std::vector<double> lower;

    std::size_t size() const { return dates.size(); }
};

/// One point per fit: h = 1 and d = basket size of that window.
TailDependenceSeries td_series(const std::vector<estimation::WindowFit>& fits, const std::string& basket_side);

}  // namespace carrytail::td
