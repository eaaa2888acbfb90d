#include "piezo/incident.hpp"
#include "piezo/errors.hpp"

#include <cmath>

namespace piezo {

double smooth_heaviside(double t) {
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    double u = t - 1.0;
    double poly = 1.0 + u * (-5.0 + u * (15.0 + u * (-35.0 + u * (70.0 - 126.0 * u))));
    return std::pow(t, 5) * poly;
}

double smooth_heaviside_deriv(double t) {
    if (t <= 0.0 || t >= 1.0) return 0.0;
    double u = t - 1.0;
    double poly = 1.0 + u * (-5.0 + u * (15.0 + u * (-35.0 + u * (70.0 - 126.0 * u))));
    double dpoly = -5.0 + u * (30.0 + u * (-105.0 + u * (280.0 - 630.0 * u)));
    return 5.0 * std::pow(t, 4) * poly + std::pow(t, 5) * dpoly;
}

void IncidentWave::normalize_direction() {
    double n = direction.norm();
    if (n <= 0.0) throw ConfigError("incident direction must be nonzero");
    direction /= n;
}

double IncidentWave::profile(double tau) const {
    if (tau <= 0.0) return 0.0;
    switch (kind) {
    case Kind::None: return 0.0;
    case Kind::PlanePulse:
        return tau <= window ? amplitude * std::sin(omega * tau) : 0.0;
    case Kind::CausalSine:
        return amplitude * smooth_heaviside(tau) * std::sin(omega * tau);
    }
    return 0.0;
}

double IncidentWave::profile_deriv(double tau) const {
    if (tau <= 0.0) return 0.0;
    switch (kind) {
    case Kind::None: return 0.0;
    case Kind::PlanePulse:
        return tau <= window ? amplitude * omega * std::cos(omega * tau) : 0.0;
    case Kind::CausalSine:
        return amplitude * (smooth_heaviside_deriv(tau) * std::sin(omega * tau) +
                            smooth_heaviside(tau) * omega * std::cos(omega * tau));
    }
    return 0.0;
}

double IncidentWave::value(const Eigen::Vector2d& x, double t) const {
    return profile(t - arrival_time(x));
}

Eigen::Vector2d IncidentWave::gradient(const Eigen::Vector2d& x, double t) const {
    return -profile_deriv(t - arrival_time(x)) / speed * direction;
}

double GroundingSignal::value(double t) const {
    switch (kind) {
    case Kind::None: return 0.0;
    case Kind::Step: return amplitude * smooth_heaviside(t);
    case Kind::Sine: return amplitude * smooth_heaviside(t) * std::sin(omega * t);
    }
    return 0.0;
}

} // namespace piezo
