#include <cmath>
#include <mutex>
#include <vector>

#include "carrytail/copula.hpp"
#include "carrytail/error.hpp"

namespace carrytail::copula {

// Li_0(z) = z / (1 - z). Applying z d/dz to N_n / (1 - z)^(n+1) gives
//   N_{n+1} = z (1 - z) N_n' + (n + 1) z N_n.
const std::vector<double>& polylog_numerator(int n) {
    static std::mutex mu;
    static std::vector<std::vector<double>> table{{0.0, 1.0}};
    if (n < 0) throw InputError("polylog order must be a nonnegative integer");
    std::lock_guard lock(mu);
    while (static_cast<int>(table.size()) <= n) {
        const auto& prev = table.back();
        const int m = static_cast<int>(table.size()) - 1;
        std::vector<double> next(prev.size() + 1, 0.0);
        for (std::size_t i = 1; i < prev.size(); ++i) {
            const double di = static_cast<double>(i) * prev[i];  // coefficient of z^(i-1) in N'
            next[i] += di;                                       // z * N'
            next[i + 1] -= di;                                   // -z^2 * N'
        }
        for (std::size_t i = 0; i < prev.size(); ++i) next[i + 1] += (m + 1) * prev[i];
        while (next.size() > 2 && next.back() == 0.0) next.pop_back();
        table.push_back(std::move(next));
    }
    return table[static_cast<std::size_t>(n)];
}

double polylog_neg_int_continued(int n, double z) {
    if (!(z < 1.0)) throw InputError("Li_{-n}(z) has a pole at z = 1 and is only continued for z < 1");
    const auto& num = polylog_numerator(n);
    double p = 0.0;
    for (std::size_t i = num.size(); i-- > 0;) p = p * z + num[i];
    return p / std::pow(1.0 - z, n + 1);
}

double polylog_neg_int(int n, double z) {
    if (!(std::abs(z) < 1.0)) throw InputError("polylog_neg_int requires |z| < 1");
    return polylog_neg_int_continued(n, z);
}

}  // namespace carrytail::copula
