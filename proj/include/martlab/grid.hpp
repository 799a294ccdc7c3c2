#pragma once

#include <cstddef>
#include <limits>
#include <memory>
#include <vector>

namespace martlab {

// Deterministic time grid on [0, T]. Uniform by default; an explicit set of
// times may be supplied (e.g. refinement near 0), subject to the same
// invariants: strictly increasing, times[0] == 0, times[n_steps] == T.
class TimeGrid {
  public:
    static std::shared_ptr<const TimeGrid> uniform(double horizon,
                                                   std::size_t n_steps);
    static std::shared_ptr<const TimeGrid> from_times(std::vector<double> times);

    double horizon() const { return times_.back(); }
    std::size_t n_steps() const { return times_.size() - 1; }
    std::size_t n_points() const { return times_.size(); }
    double time(std::size_t i) const { return times_[i]; }
    double dt(std::size_t step) const { return times_[step + 1] - times_[step]; }
    const std::vector<double>& times() const { return times_; }

  private:
    explicit TimeGrid(std::vector<double> times) : times_(std::move(times)) {}
    std::vector<double> times_;
};

using GridPtr = std::shared_ptr<const TimeGrid>;

GridPtr make_grid(double horizon, std::size_t n_steps);

// Sample index marking "never" for explosion/stopping bookkeeping.
inline constexpr std::size_t kNever = std::numeric_limits<std::size_t>::max();

// A discretely sampled trajectory with extended-value (explosion) support.
// Explosion is an absorbing index, not a sentinel float: samples at
// index >= explosion_index() are +infinity and must not be read as finite.
class Path {
  public:
    Path() = default;
    Path(GridPtr grid, std::vector<double> values,
         std::size_t explosion_index = kNever);
    static Path constant(const GridPtr& grid, double value);

    const GridPtr& grid() const { return grid_; }
    std::size_t n_points() const { return values_.size(); }
    std::size_t explosion_index() const { return explosion_index_; }
    bool exploded(std::size_t i) const { return i >= explosion_index_; }
    bool ever_explodes() const { return explosion_index_ != kNever; }

    // Finite sample access; throws on an exploded sample.
    double operator[](std::size_t i) const;
    double value_unchecked(std::size_t i) const { return values_[i]; }
    double front() const { return (*this)[0]; }
    double back() const { return (*this)[values_.size() - 1]; }

    std::vector<double>& mutable_values() { return values_; }
    const std::vector<double>& values() const { return values_; }
    void set_explosion_index(std::size_t i) { explosion_index_ = i; }

  private:
    GridPtr grid_;
    std::vector<double> values_;
    std::size_t explosion_index_ = kNever;
};

void require_same_grid(const Path& a, const Path& b, const char* where);

}  // namespace martlab
