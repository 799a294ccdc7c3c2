#include "martlab/follmer.hpp"

#include <cmath>
#include <stdexcept>

#include "martlab/calculus.hpp"
#include "martlab/parallel.hpp"

namespace martlab {

std::size_t PathBundle::explosion_count() const {
    std::size_t k = 0;
    for (const auto& m : meta) k += m.exploded;
    return k;
}

std::size_t PathBundle::tau_fired_count() const {
    std::size_t k = 0;
    for (const auto& m : meta) k += m.tau_fired && m.tau <= grid->horizon();
    return k;
}

double FollmerConfig::effective_u_budget() const {
    if (u_budget > 0.0) return u_budget;
    // No-crossing probability decays like exp(-(beta-1)^2 u / 8); pick the
    // budget so the residual is far below one path in 10^9.
    double bm1 = params.beta - 1.0;
    double u = 8.0 * 25.0 / (bm1 * bm1);  // e^-25 residual
    return std::max(u, 50.0);
}

Path girsanov_shift(const Path& w, const Path& theta) {
    require_same_grid(w, theta, "girsanov_shift");
    Path drift = time_integral(theta);
    std::size_t np = w.n_points();
    std::size_t ex = std::min(w.explosion_index(), theta.explosion_index());
    std::vector<double> out(np, 0.0);
    for (std::size_t i = 0; i < np && i < ex; ++i)
        out[i] = w.value_unchecked(i) - drift.value_unchecked(i);
    return Path(w.grid(), std::move(out), ex);
}

namespace {

Follmer1Realization simulate_one_follmer1(const FollmerConfig& cfg,
                                          const RandomSource& src,
                                          uint64_t path_index) {
    const PropParams& p = cfg.params;
    const TimeGrid& g = *p.grid;
    std::size_t np = g.n_points();

    SubStream noise(src, path_index, rng_domain::kFollmerOne, rng_sub::kCoord0);
    SubStream aux(src, path_index, rng_domain::kFollmerOne, rng_sub::kAuxUniform);

    std::vector<double> w(np), x(np, 0.0);
    w[0] = 0.0;
    x[0] = 1.0;
    std::size_t hit_index = kNever;
    bool cutoff_hit = false;
    double r_prev = 1.0;
    for (std::size_t i = 1; i < np; ++i) {
        double dt = g.dt(i - 1);
        w[i] = w[i - 1] + std::sqrt(dt) * noise.next_normal();
        if (hit_index != kNever) continue;  // barrier already crossed
        double r = 1.0 + w[i];
        if (r <= cfg.explosion_cutoff) {
            hit_index = i;
            cutoff_hit = r > 0.0;
            continue;
        }
        if (cfg.bridge_correction) {
            double pcross = std::exp(-2.0 * r_prev * r / dt);
            if (aux.next_uniform() < pcross) {
                hit_index = i;  // crossed strictly inside (t_{i-1}, t_i)
                continue;
            }
        }
        x[i] = 1.0 / r;
        r_prev = r;
    }

    Follmer1Realization out;
    out.w1 = Path(p.grid, std::move(w));
    out.x = Path(p.grid, std::move(x), hit_index);
    out.l = likelihood_ratio_L(out.x, p.beta);

    // tau can only be observed strictly before the explosion index.
    std::size_t tau_index = stopping_tau_index(out.l, p.threshold);
    if (tau_index >= hit_index) tau_index = kNever;

    PathMeta& m = out.meta;
    m.tau_index = tau_index;
    m.tau_fired = tau_index != kNever;
    m.tau = m.tau_fired ? g.time(tau_index)
                        : std::numeric_limits<double>::infinity();
    if (hit_index != kNever && !m.tau_fired) {
        m.sigma_index = hit_index;
        m.sigma = g.time(hit_index);
        m.exploded = true;
        m.cutoff_hit = cutoff_hit;
    }
    if (!m.exploded) {
        // density Z^(1) = X_{T ^ tau} under P^(1)
        std::size_t j = std::min(m.tau_fired ? tau_index : np - 1, np - 1);
        m.z_terminal = out.x.value_unchecked(j);
    }
    return out;
}

}  // namespace

PathBundle simulate_under_follmer1(const FollmerConfig& cfg, const RandomSource& src,
                                   std::size_t n_paths,
                                   const Follmer1Observer& observer) {
    cfg.params.validate();
    PathBundle b;
    b.measure = MeasureTag::Follmer1;
    b.grid = cfg.params.grid;
    b.beta = cfg.params.beta;
    b.threshold = cfg.params.threshold;
    b.seed = src.master_seed();
    b.meta.resize(n_paths);
    unsigned threads = cfg.n_threads ? cfg.n_threads : default_thread_count();
    parallel_for(n_paths, threads, [&](std::size_t i, unsigned worker) {
        Follmer1Realization r = simulate_one_follmer1(cfg, src, i);
        b.meta[i] = r.meta;
        if (observer) observer(i, worker, r);
    });
    return b;
}

namespace {

FollmerBetaRealization simulate_one_follmer_beta(const FollmerConfig& cfg,
                                                 const RandomSource& src,
                                                 uint64_t path_index,
                                                 BetaVariant variant) {
    const PropParams& p = cfg.params;
    const TimeGrid& g = *p.grid;
    std::size_t np = g.n_points();
    double beta = p.beta;
    double log_c = std::log(p.threshold);
    double u_budget = cfg.effective_u_budget();

    SubStream noise(src, path_index, rng_domain::kFollmerBeta, rng_sub::kCoord0);

    // March in the quadratic-variation clock u = int X^2 ds, where the state
    // is exact in law: d log X = -dB_u + (beta - 1/2) du under P^(beta), and
    // log L = (beta-1) log X - beta(beta-1) u / 2 drifts upward, so tau fires
    // almost surely. Steps are capped at du_target (threshold resolution) and
    // at the quadratic variation remaining to the next grid time; physical
    // time advances by du / X^2, which may underflow harmlessly to zero when
    // X is astronomically large.
    double logx = 0.0, u = 0.0, t = 0.0;
    std::size_t substeps = 0;
    FollmerBetaRealization out;
    PathMeta& m = out.meta;

    std::vector<double> s(np);
    s[0] = 1.0;
    double s_frozen = 0.0;

    auto log_l = [&](double lx, double uu) {
        return (beta - 1.0) * lx - 0.5 * beta * (beta - 1.0) * uu;
    };

    for (std::size_t i = 1; i < np; ++i) {
        double t_target = g.time(i);
        while (t < t_target && !m.tau_fired && !m.exploded) {
            double x2 = std::exp(2.0 * logx);
            double du_to_grid = x2 * (t_target - t);
            bool grid_limited = du_to_grid <= cfg.du_target;
            double du = grid_limited ? du_to_grid : cfg.du_target;
            double dB = std::sqrt(du) * noise.next_normal();
            double logx_new = logx - dB + (beta - 0.5) * du;
            if (grid_limited) {
                t = t_target;
            } else {
                t += 0.5 * du * (std::exp(-2.0 * logx) + std::exp(-2.0 * logx_new));
            }
            logx = logx_new;
            u += du;
            ++substeps;
            if (log_l(logx, u) >= log_c) {
                m.tau_fired = true;
                m.tau = std::min(t, t_target);
                m.tau_index = i;  // first grid index at/after the crossing
                m.q_at_stop = u;
                s_frozen = std::exp(-logx);
            } else if (u > u_budget) {
                // Never observed in practice: the threshold crossing is
                // almost sure under P^(beta). Recorded honestly if hit.
                m.exploded = true;
                m.sigma = std::min(t, t_target);
                m.sigma_index = i;
                m.q_at_stop = u;
            }
        }
        if (m.exploded) {
            s[i] = s[i - 1];
            continue;
        }
        if (!m.tau_fired) {
            s[i] = std::exp(-logx);
            t = t_target;
            continue;
        }
        // after tau: Example-1 price is frozen; the Example-2 variant keeps
        // moving as a driftless lognormal under its supermartingale measure.
        if (variant == BetaVariant::PropIntegrand) {
            s[i] = s_frozen;
        } else {
            double t_from = std::max(std::min(m.tau, t_target), g.time(i - 1));
            double dt_post = t_target - t_from;
            double prev = (g.time(i - 1) >= m.tau) ? s[i - 1] : s_frozen;
            double dW = std::sqrt(dt_post) * noise.next_normal();
            s[i] = prev * std::exp(dW - 0.5 * dt_post);
        }
        t = t_target;
    }

    if (!m.exploded) {
        double z_at_stop =
            std::exp(beta * logx - 0.5 * beta * (beta - 1.0) * u);
        if (m.tau_fired) {
            m.z_terminal = z_at_stop;  // frozen at tau
        } else {
            m.z_terminal = z_at_stop;
            m.q_at_stop = u;
        }
    }
    out.s = Path(p.grid, std::move(s),
                 m.exploded ? m.sigma_index : kNever);
    out.substeps = substeps;
    return out;
}

}  // namespace

PathBundle simulate_under_follmer_beta(const FollmerConfig& cfg,
                                       const RandomSource& src, std::size_t n_paths,
                                       BetaVariant variant,
                                       const FollmerBetaObserver& observer) {
    cfg.params.validate();
    PathBundle b;
    b.measure = variant == BetaVariant::PropIntegrand ? MeasureTag::FollmerBeta
                                                      : MeasureTag::ExampleTwoTilde;
    b.grid = cfg.params.grid;
    b.beta = cfg.params.beta;
    b.threshold = cfg.params.threshold;
    b.seed = src.master_seed();
    b.meta.resize(n_paths);
    unsigned threads = cfg.n_threads ? cfg.n_threads : default_thread_count();
    parallel_for(n_paths, threads, [&](std::size_t i, unsigned worker) {
        FollmerBetaRealization r = simulate_one_follmer_beta(cfg, src, i, variant);
        b.meta[i] = r.meta;
        if (observer) observer(i, worker, r);
    });
    return b;
}

McEstimate defect_direct(std::span<const double> z_terminals) {
    if (z_terminals.empty())
        throw std::invalid_argument("defect_direct: empty bundle");
    Accumulator acc;
    for (double z : z_terminals) acc.add(1.0 - z);
    return acc.estimate();
}

ExplosionDefect defect_via_explosion(const PathBundle& bundle, double level) {
    if (bundle.meta.empty())
        throw std::invalid_argument("defect_via_explosion: empty bundle");
    std::size_t k = bundle.explosion_count();
    std::size_t n = bundle.n_paths();
    ExplosionDefect d;
    double p = static_cast<double>(k) / static_cast<double>(n);
    d.normal_approx.mean = p;
    d.normal_approx.n = n;
    d.normal_approx.stderr_ = std::sqrt(p * (1.0 - p) / static_cast<double>(n));
    d.normal_approx.stderr_defined = true;
    d.exact = binomial_exact(k, n, level);
    return d;
}

}  // namespace martlab
