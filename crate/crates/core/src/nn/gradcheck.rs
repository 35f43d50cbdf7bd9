//! Central finite-difference checks of hand-written gradients.

use super::Params;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub checked: usize,
    /// Coordinates skipped because the loss has a kink (hinge, ReLU, clamp) within `h`.
    pub kinks: usize,
    pub max_rel_error: f64,
    pub worst: Option<(usize, f64, f64)>,
}

/// Compares `analytic` with central differences of `loss` around `params`.
///
/// The relative error of a coordinate is `|a − n| / max(|a|, |n|, floor)`; the floor keeps
/// near-zero gradients from dominating.
pub fn check<P: Params<f64>>(params: &P, analytic: &P, loss: impl Fn(&P) -> f64, h: f64, floor: f64) -> GradCheck {
    let base = params.flatten();
    let grad = analytic.flatten();
    let f0 = loss(params);
    let mut probe = params.clone();
    let mut at = |i: usize, x: f64| {
        let mut v = base.clone();
        v[i] = x;
        probe.load_flat(&v);
        loss(&probe)
    };
    let mut out = GradCheck {
        checked: 0,
        kinks: 0,
        max_rel_error: 0.0,
        worst: None,
    };
    for i in 0..base.len() {
        let fp = at(i, base[i] + h);
        let fm = at(i, base[i] - h);
        let (fwd, bwd) = ((fp - f0) / h, (f0 - fm) / h);
        if (fwd - bwd).abs() > 1e-3 * fwd.abs().max(bwd.abs()).max(1.0) {
            out.kinks += 1;
            continue;
        }
        let numeric = (fp - fm) / (2.0 * h);
        let rel = (grad[i] - numeric).abs() / grad[i].abs().max(numeric.abs()).max(floor);
        out.checked += 1;
        if rel > out.max_rel_error {
            out.max_rel_error = rel;
            out.worst = Some((i, grad[i], numeric));
        }
    }
    out
}
