#include "martlab/grid.hpp"

#include <cmath>
#include <stdexcept>

namespace martlab {

std::shared_ptr<const TimeGrid> TimeGrid::uniform(double horizon,
                                                  std::size_t n_steps) {
    if (!(horizon > 0.0) || !std::isfinite(horizon))
        throw std::invalid_argument("TimeGrid: horizon must be positive");
    if (n_steps == 0) throw std::invalid_argument("TimeGrid: n_steps must be >= 1");
    std::vector<double> t(n_steps + 1);
    for (std::size_t i = 0; i <= n_steps; ++i)
        t[i] = horizon * static_cast<double>(i) / static_cast<double>(n_steps);
    t[0] = 0.0;
    t[n_steps] = horizon;  // endpoint exact by construction
    return std::shared_ptr<const TimeGrid>(new TimeGrid(std::move(t)));
}

std::shared_ptr<const TimeGrid> TimeGrid::from_times(std::vector<double> times) {
    if (times.size() < 2) throw std::invalid_argument("TimeGrid: need >= 2 times");
    if (times.front() != 0.0)
        throw std::invalid_argument("TimeGrid: times must start at 0");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1]))
            throw std::invalid_argument("TimeGrid: times must be strictly increasing");
    return std::shared_ptr<const TimeGrid>(new TimeGrid(std::move(times)));
}

GridPtr make_grid(double horizon, std::size_t n_steps) {
    return TimeGrid::uniform(horizon, n_steps);
}

Path::Path(GridPtr grid, std::vector<double> values, std::size_t explosion_index)
    : grid_(std::move(grid)), values_(std::move(values)),
      explosion_index_(explosion_index) {
    if (!grid_) throw std::invalid_argument("Path: null grid");
    if (values_.size() != grid_->n_points())
        throw std::invalid_argument("Path: values do not match grid");
}

Path Path::constant(const GridPtr& grid, double value) {
    return Path(grid, std::vector<double>(grid->n_points(), value));
}

double Path::operator[](std::size_t i) const {
    if (exploded(i))
        throw std::logic_error("Path: reading an exploded sample as finite");
    return values_[i];
}

void require_same_grid(const Path& a, const Path& b, const char* where) {
    if (a.grid() != b.grid())
        throw std::invalid_argument(std::string(where) + ": paths on different grids");
}

}  // namespace martlab
