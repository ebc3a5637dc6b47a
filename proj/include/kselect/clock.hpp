#pragma once

#include <chrono>

namespace kselect {

/// Time source used wherever a cost is measured. Tests and reproducible runs
/// inject FixedClock; production code uses SteadyClock.
class Clock {
public:
    virtual ~Clock() = default;
    /// Seconds since an arbitrary epoch. Successive calls never decrease.
    virtual double now() = 0;
};

class SteadyClock final : public Clock {
public:
    double now() override
    {
        using namespace std::chrono;
        return duration<double>(steady_clock::now().time_since_epoch()).count();
    }
};

/// Advances by a constant step on every read, so any measured interval
/// bracketed by two reads is exactly `step` seconds.
class FixedClock final : public Clock {
public:
    explicit FixedClock(double step = 0.0) : step_(step) {}

    double now() override
    {
        t_ += step_;
        return t_;
    }

private:
    double step_;
    double t_ = 0.0;
};

/// Measures `fn` with `clock`; returns elapsed seconds, never negative.
template <typename Fn>
double measure(Clock& clock, Fn&& fn)
{
    const double start = clock.now();
    fn();
    const double stop = clock.now();
    return stop > start ? stop - start : 0.0;
}

} // namespace kselect
