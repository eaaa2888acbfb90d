#ifndef PIEZO_INCIDENT_HPP
#define PIEZO_INCIDENT_HPP

#include <Eigen/Dense>

namespace piezo {

// Degree-10 polynomial ramp approximating the Heaviside step: 0 for t <= 0,
// 1 for t >= 1, C^4 in between.
double smooth_heaviside(double t);
double smooth_heaviside_deriv(double t);

// Incident plane wave v(x, t) = f(tau), tau = t - x.dir/c - delay.
// PLANE_PULSE: f = amplitude * chi_[0,window](tau) sin(omega tau)
// CAUSAL_SINE: f = amplitude * H(tau) sin(omega tau)
class IncidentWave {
public:
    enum class Kind { None, PlanePulse, CausalSine };
    Kind kind = Kind::None;
    double amplitude = 0.0;
    double omega = 0.0;
    double window = 0.0; // PLANE_PULSE only
    Eigen::Vector2d direction = Eigen::Vector2d(1.0, 0.0);
    double delay = 0.0;
    double speed = 1.0; // c of the surrounding fluid

    void normalize_direction();

    double value(const Eigen::Vector2d& x, double t) const;
    Eigen::Vector2d gradient(const Eigen::Vector2d& x, double t) const;

    // earliest time the wave can be nonzero at x
    double arrival_time(const Eigen::Vector2d& x) const {
        return x.dot(direction) / speed + delay;
    }

private:
    double profile(double tau) const;
    double profile_deriv(double tau) const;
};

// Prescribed electric potential on the grounded boundary.
// STEP: amplitude * H(t);  SINE: amplitude * H(t) sin(omega t).
class GroundingSignal {
public:
    enum class Kind { None, Step, Sine };
    Kind kind = Kind::None;
    double amplitude = 0.0;
    double omega = 0.0;

    double value(double t) const;
};

} // namespace piezo

#endif
