#include "logokit/backend/schedule.hpp"

#include <cmath>
#include <string>

#include "logokit/core/errors.hpp"

namespace logokit::diffusion {

NoiseSchedule NoiseSchedule::linear_variance(int num_steps, double beta_start, double beta_end) {
    if (num_steps < 1) throw DomainError("NoiseSchedule: num_steps must be >= 1");
    if (!(beta_start > 0.0 && beta_end >= beta_start && beta_end < 1.0)) {
        throw DomainError("NoiseSchedule: need 0 < beta_start <= beta_end < 1");
    }
    NoiseSchedule s;
    s.alpha_bar_.resize(num_steps + 1);
    s.alpha_bar_[0] = 1.0;
    double prod = 1.0;
    for (int i = 0; i < num_steps; ++i) {
        double beta = num_steps == 1
                          ? beta_start
                          : beta_start + (beta_end - beta_start) * static_cast<double>(i) / (num_steps - 1);
        prod *= 1.0 - beta;
        s.alpha_bar_[i + 1] = prod;
    }
    return s;
}

double NoiseSchedule::alpha_bar(int t) const {
    if (t < 0 || t >= static_cast<int>(alpha_bar_.size())) {
        throw DomainError("alpha_bar: t=" + std::to_string(t) + " outside [0, " +
                          std::to_string(num_steps()) + "]");
    }
    return alpha_bar_[t];
}

double NoiseSchedule::signal_weight(int t) const { return std::sqrt(alpha_bar(t)); }
double NoiseSchedule::noise_weight(int t) const { return std::sqrt(1.0 - alpha_bar(t)); }

Tensor noise_latent(const Tensor& z, int t, const Tensor& eps, const NoiseSchedule& schedule) {
    if (!z.same_shape(eps)) throw ShapeError("noise_latent: eps shape differs from z");
    if (t < 0 || t >= schedule.num_steps()) {
        throw DomainError("noise_latent: t=" + std::to_string(t) + " outside [0, " +
                          std::to_string(schedule.num_steps()) + ")");
    }
    if (t == 0) return z;
    const double sw = schedule.signal_weight(t);
    const double nw = schedule.noise_weight(t);
    Tensor out(z.shape);
    for (std::size_t i = 0; i < z.numel(); ++i) {
        out[i] = sw * z[i] + nw * eps[i];
    }
    return out;
}

}  // namespace logokit::diffusion
