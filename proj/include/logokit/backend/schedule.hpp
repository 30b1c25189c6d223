#pragma once

#include <vector>

#include "logokit/backend/tensor.hpp"

namespace logokit::diffusion {

/// Forward-process schedule: alpha_bar(t) is the cumulative signal variance,
/// with alpha_bar(0) = 1 exactly so t = 0 recovers the clean latent. Noise
/// level sqrt(1 - alpha_bar(t)) is strictly increasing in t.
class NoiseSchedule {
public:
    static NoiseSchedule linear_variance(int num_steps, double beta_start = 1e-4, double beta_end = 2e-2);

    int num_steps() const { return static_cast<int>(alpha_bar_.size()) - 1; }
    /// Valid for t in [0, num_steps].
    double alpha_bar(int t) const;
    double signal_weight(int t) const;  // sqrt(alpha_bar(t))
    double noise_weight(int t) const;   // sqrt(1 - alpha_bar(t))

private:
    std::vector<double> alpha_bar_;  // length num_steps + 1, alpha_bar_[0] = 1
};

/// z_t = signal_weight(t) * z + noise_weight(t) * eps. Throws ShapeError on a
/// shape mismatch and DomainError when t is outside [0, num_steps).
Tensor noise_latent(const Tensor& z, int t, const Tensor& eps, const NoiseSchedule& schedule);

}  // namespace logokit::diffusion
