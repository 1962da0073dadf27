#include "dhap/estimation/cdekf.hpp"

#include <string>

namespace dhap {

FilterBelief default_prior(const ctrl::State& x0, double t0, const FilterOptions& opts) {
    FilterBelief b;
    b.mean = x0;
    b.t = t0;
    ctrl::State d;
    d.setConstant(opts.p0_other * opts.p0_other);
    d[ctrl::idx::G] = opts.p0_glucose * opts.p0_glucose;
    d[ctrl::idx::GI] = opts.p0_glucose * opts.p0_glucose;
    d[ctrl::idx::LOG_SI] = opts.p0_log_si * opts.p0_log_si;
    b.cov = d.asDiagonal();
    return b;
}

FilterBelief predict(const FilterBelief& belief, const ctrl::Inputs& u, const ctrl::Params& p,
                     double dt, const FilterOptions& opts) {
    if (!(dt > 0.0)) throw FilterError("predict: dt must be positive");
    FilterBelief out = belief;
    auto f = [&](double, const ctrl::State& x) { return ctrl::drift(x, u, p); };
    cd_predict<ctrl::kStateDim, ctrl::kNoiseDim>(f, ctrl::diffusion(p), belief.t, dt, opts.h,
                                                 out.mean, out.cov, opts.cov_trace_cap);
    out.t = belief.t + dt;
    return out;
}

std::pair<FilterBelief, InnovationRecord> update(const FilterBelief& belief, double y,
                                                 const ctrl::Params& p) {
    FilterBelief out = belief;
    InnovationRecord rec;
    rec.t = belief.t;
    rec.y_hat = ctrl::output(belief.mean);
    auto [e, re] = cd_update<ctrl::kStateDim>(ctrl::output_jacobian(), p.R, y, out.mean, out.cov);
    rec.e = e;
    rec.Re = re;
    return {out, rec};
}

void zero_log_si_cov(FilterBelief& belief) {
    belief.cov.row(ctrl::idx::LOG_SI).setZero();
    belief.cov.col(ctrl::idx::LOG_SI).setZero();
}

void clip_log_si(FilterBelief& belief, double lo, double hi) {
    double& v = belief.mean[ctrl::idx::LOG_SI];
    v = std::min(std::max(v, lo), hi);
}

FilterPassResult filter_pass(const std::vector<double>& y, const std::vector<ctrl::Inputs>& u,
                             const ctrl::Params& p, const FilterBelief& prior, double dt,
                             const FilterOptions& opts, const std::vector<FilterHooks>* hooks) {
    if (y.size() != u.size() + 1) {
        throw FilterError("filter_pass: need N+1 measurements for N input intervals");
    }
    FilterPassResult result;
    result.innovations.reserve(y.size());
    FilterBelief belief = prior;
    for (std::size_t k = 0; k < y.size(); ++k) {
        const FilterHooks* hk = (hooks && k < hooks->size()) ? &(*hooks)[k] : nullptr;
        try {
            auto [updated, rec] = update(belief, y[k], p);
            belief = updated;
            result.innovations.push_back(rec);
            if (hk && hk->log_si_clip) {
                clip_log_si(belief, hk->log_si_clip->first, hk->log_si_clip->second);
            }
            if (k < u.size()) {
                if (hk && hk->zero_log_si_cov) zero_log_si_cov(belief);
                ctrl::Params pp = p;
                if (hk && hk->sigma_si_override) pp.sigma_SI = *hk->sigma_si_override;
                belief = predict(belief, u[k], pp, dt, opts);
            }
        } catch (const Error& err) {
            throw FilterError("filter_pass failed at sample " + std::to_string(k) + ": " +
                              err.what());
        }
    }
    result.final_belief = belief;
    return result;
}

} // namespace dhap
