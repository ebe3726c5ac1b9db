#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "carrytail/copula.hpp"
#include "carrytail/data_ingest.hpp"
#include "carrytail/marginals.hpp"
#include "carrytail/matrix.hpp"

namespace carrytail::estimation {

/// Minimum window length accepted by either IFM stage.
inline constexpr std::size_t kMinRows = 60;
/// Pseudo-observations are clamped into [kPseudoClamp, 1 - kPseudoClamp].
inline constexpr double kPseudoClamp = 1e-6;

enum class Model { CFG, CG, OPC };

std::string_view model_name(Model m);  // "cfg", "cg", "opc"
Model parse_model(std::string_view name);
/// Free parameters counted by AIC: CFG 5, CG 3, OPC 2.
int param_count(Model m);

struct MarginalFit {
    std::string currency;
    marginals::LggdParams params;
    double loglik = 0.0;
    marginals::KsResult ks;
};

/// Stage-1 output: CDF-transformed window plus the marginal fits that produced it.
struct PseudoSample {
    Matrix v;
    std::shared_ptr<const data::LogReturnWindow> source_window;
    std::vector<MarginalFit> marginals;

    std::size_t rows() const { return v.rows(); }
    std::size_t dim() const { return v.cols(); }
    std::vector<marginals::LggdParams> marginal_params() const;
};

/// Builds a pseudo-sample directly from values already in (0,1) (no marginal stage).
PseudoSample pseudo_from_uniforms(const Matrix& v);

PseudoSample stage1_fit(const data::LogReturnWindow& window, std::span<const double> k_grid);
PseudoSample stage1_fit(const data::LogReturnWindow& window);

struct WindowFit {
    Date end_date;
    std::string side;  // "high_ir", "low_ir", or empty for ad hoc fits
    std::vector<std::string> basket;
    Model model = Model::CFG;
    copula::MixtureSpec mixture;
    double loglik = 0.0;       // copula log-likelihood
    double full_loglik = 0.0;  // copula term + marginal log densities
    double aic = 0.0;
    bool converged = false;
    int iterations = 0;
    std::vector<MarginalFit> marginals;

    /// Sets aic from loglik and the model's parameter count.
    void finalize();
    /// Throws std::logic_error if the AIC identity or mixture invariants are violated.
    void check_invariants() const;
};

// Optimizer ------------------------------------------------------------------

struct OptimizeOptions {
    int max_iterations = 500;
    double tolerance = 1e-8;       // stop when an accepted step gains less than this
    double fd_relative_step = 1e-5;
    int max_halvings = 30;
};

struct OptimizeResult {
    std::vector<double> x;
    double value = 0.0;
    std::vector<double> trace;  // objective after each accepted iterate, starting point first
    int iterations = 0;
    bool converged = false;
};

using Objective = std::function<double(std::span<const double>)>;

/// Maximizes `objective` over R^n by gradient ascent with central finite-difference
/// gradients, diagonally scaled by the finite-difference curvature, and a halving
/// backtracking line search. Non-finite objective values are treated as -infinity.
OptimizeResult optimize(const Objective& objective, std::vector<double> start, const OptimizeOptions& opts = {});

// Copula likelihood ---------------------------------------------------------------

/// Sum of mixture log densities over the rows of a pseudo-sample, with per-component
/// caching so that perturbing one component's parameters re-evaluates only that component.
class MixtureLikelihood {
public:
    explicit MixtureLikelihood(const Matrix& v);
    double operator()(const copula::MixtureSpec& mix);
    /// Per-row mixture log densities.
    std::vector<double> row_log_densities(const copula::MixtureSpec& mix);
    std::size_t rows() const { return rows_; }
    std::size_t dim() const { return dim_; }

private:
    const std::vector<double>& component(std::size_t slot, const copula::CopulaSpec& spec);

    std::size_t rows_;
    std::size_t dim_;
    std::vector<copula::detail::CoordLogs> logs_;
    struct Entry {
        copula::CopulaSpec spec;
        std::vector<double> values;
        std::uint64_t stamp = 0;
    };
    std::vector<std::vector<Entry>> cache_;
    std::uint64_t clock_ = 0;
};

/// Unconstrained parameterization of each model.
std::vector<double> default_start(Model m, std::size_t d);
copula::MixtureSpec decode(Model m, std::span<const double> x, std::size_t d);

struct Stage2Options {
    int random_starts = 4;
    std::uint64_t seed = 20130531;
    OptimizeOptions optimizer;
};

struct Stage2Diagnostics {
    std::vector<OptimizeResult> runs;  // one per start, start order
    std::size_t best_run = 0;
};

WindowFit stage2_fit(const PseudoSample& pseudo, Model model, const Stage2Options& opts = {},
                     Stage2Diagnostics* diagnostics = nullptr);

/// Copula term plus marginal log densities, evaluated row by row.
double full_log_likelihood(const PseudoSample& pseudo, const copula::MixtureSpec& mix);

struct ModelComparison {
    std::vector<WindowFit> fits;  // ascending AIC
    std::optional<double> aic_cg_minus_cfg;
    std::optional<double> aic_opc_minus_cfg;
    std::vector<std::pair<Model, std::string>> failures;
};

ModelComparison compare_models(const PseudoSample& pseudo, const Stage2Options& opts = {},
                               std::span<const Model> models = {});

}  // namespace carrytail::estimation
