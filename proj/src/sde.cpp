#include "martlab/sde.hpp"

#include <cmath>

#include "martlab/calculus.hpp"

namespace martlab {

Path sample_brownian(const GridPtr& grid, const RandomSource& src,
                     uint64_t path_index, uint32_t domain, uint32_t substream) {
    SubStream s(src, path_index, domain, substream);
    std::size_t np = grid->n_points();
    std::vector<double> w(np);
    w[0] = 0.0;
    for (std::size_t i = 1; i < np; ++i)
        w[i] = w[i - 1] + std::sqrt(grid->dt(i - 1)) * s.next_normal();
    return Path(grid, std::move(w));
}

XPathPair simulate_X(const GridPtr& grid, const RandomSource& src,
                     uint64_t path_index) {
    SubStream s1(src, path_index, rng_domain::kBesselX, rng_sub::kCoord0);
    SubStream s2(src, path_index, rng_domain::kBesselX, rng_sub::kCoord1);
    SubStream s3(src, path_index, rng_domain::kBesselX, rng_sub::kCoord2);
    std::size_t np = grid->n_points();
    std::vector<double> x(np), w(np);
    double b1 = 0.0, b2 = 0.0, b3 = 0.0;
    x[0] = 1.0;
    w[0] = 0.0;
    double xdt_acc = 0.0;  // trapezoidal int_0^t X ds
    double x_prev = 1.0;
    for (std::size_t i = 1; i < np; ++i) {
        double sd = std::sqrt(grid->dt(i - 1));
        b1 += sd * s1.next_normal();
        b2 += sd * s2.next_normal();
        b3 += sd * s3.next_normal();
        double r = std::sqrt((1.0 + b1) * (1.0 + b1) + b2 * b2 + b3 * b3);
        double xi = 1.0 / r;
        xdt_acc += 0.5 * (x_prev + xi) * grid->dt(i - 1);
        x[i] = xi;
        w[i] = r - 1.0 - xdt_acc;
        x_prev = xi;
    }
    return XPathPair{Path(grid, std::move(x)), Path(grid, std::move(w))};
}

Path x_dw_integral_via_log(const Path& x) {
    std::size_t np = x.n_points();
    std::vector<double> x2(np);
    for (std::size_t i = 0; i < np && i < x.explosion_index(); ++i) {
        double v = x.value_unchecked(i);
        x2[i] = v * v;
    }
    Path q(x.grid(), std::move(x2), x.explosion_index());
    Path qint = time_integral(q);
    std::vector<double> out(np, 0.0);
    for (std::size_t i = 0; i < np && i < x.explosion_index(); ++i)
        out[i] = -std::log(x.value_unchecked(i)) - 0.5 * qint.value_unchecked(i);
    return Path(x.grid(), std::move(out), x.explosion_index());
}

}  // namespace martlab
