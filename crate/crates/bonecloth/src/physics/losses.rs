//! Differentiable training losses (built on the autodiff core).
