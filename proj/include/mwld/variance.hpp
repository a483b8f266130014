#pragma once

#include <cstddef>

#include "mwld/core.hpp"

namespace mwld {

/// E[(ℓ − E[ℓ])²], population form (divide by n under uniform weights).
double loss_variance(const LossVector& losses);

/// Sample variance with the n − 1 denominator. Uniform weights only; used by
/// the Maurer deviation check and nowhere else.
double unbiased_loss_variance(const LossVector& losses);

/// Σ_b p̂(y=b)·Var̂[ℓ | y=b]. Both label classes must be present.
double conditional_loss_variance(const LossVector& losses, const LabelVector& labels);

/// Variance of the per-key mean loss: Σ_a p̂(a)·(m_a − m)².
double coarse_loss_variance(const LossVector& losses, const SensitiveKeyVector& keys);

/// Σ_b p̂(b)·Σ_a p̂(a|b)·(m_ab − m_b)². Both label classes must be present.
double conditional_coarse_loss_variance(const LossVector& losses, const SensitiveKeyVector& keys,
                                        const LabelVector& labels);

struct VarianceSandwich {
  double mwld_half = 0.0;
  double sqrt_variance = 0.0;
  double upper_envelope = 0.0;

  /// mwld_half <= sqrt_variance <= upper_envelope, each up to `tol`.
  bool ordered(double tol = 1e-9) const {
    return mwld_half <= sqrt_variance + tol && sqrt_variance <= upper_envelope + tol;
  }
  bool operator==(const VarianceSandwich&) const = default;
};

/// f(x) = x·sqrt(2 − 4 ln x) on [0, 1], with f(0) = 0.
double sandwich_envelope(double x);

/// Packs MWLD(w^{1/2}) and sqrt(Var) with the envelope f(MWLD(w^{1/2})).
/// Both inputs refer to losses already scaled into [0, 1].
VarianceSandwich sandwich(double mwld_half, double sqrt_variance);

/// Var[ℓ] <= 2γ²(1 + 2 ln(L/γ)) for losses in [0, L] with γ = MWLD(w^{1/2}).
double variance_upper_bound_general_L(double gamma, double L);

/// Radius r with P(|sqrt(Var) − sqrt(Var̂_{n−1})| > r) <= δ for losses in [0, 1].
double maurer_deviation(std::size_t n, double delta);

/// Radius for |Var[E[ℓ|A]] − Var̂[Ê[ℓ|A]]|, holding with probability at least
/// 1 − (T + 3)δ.
double coarse_deviation(std::size_t n, double delta, std::size_t settings);

}  // namespace mwld
