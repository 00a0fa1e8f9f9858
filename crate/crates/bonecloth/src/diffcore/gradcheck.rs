//! Central finite-difference gradient verification used across the test
//! suites: perturb each input element by +-h, rebuild the forward pass, and
//! compare the numeric slope against the reverse-mode gradient.

use crate::diffcore::{Tape, Var};

pub const DEFAULT_STEP: f32 = 1e-3;
pub const DEFAULT_TOLERANCE: f32 = 1e-3;

/// Outcome of one gradient comparison.
#[derive(Debug, Clone)]
pub struct GradCheck {
    pub max_rel_error: f32,
    pub checked: usize,
}

/// Check `d loss / d input` for a scalar-valued rebuild closure.
///
/// `build` receives a fresh tape and the current input values and must return
/// (input var, loss var). The relative error uses a unit floor so tiny
/// gradients are compared absolutely at the same threshold.
pub fn check_gradient<F>(input: &[f32], h: f32, tol: f32, mut build: F) -> GradCheck
where
    F: FnMut(&mut Tape, &[f32]) -> (Var, Var),
{
    let mut tape = Tape::new();
    let (x, loss) = build(&mut tape, input);
    assert_eq!(tape.value(loss).len(), 1, "gradcheck needs a scalar loss");
    tape.backward(loss).expect("backward");
    let analytic = tape.grad(x).expect("input got no gradient").to_vec();
    assert_eq!(analytic.len(), input.len());

    let mut max_rel = 0.0f32;
    for j in 0..input.len() {
        let mut plus = input.to_vec();
        plus[j] += h;
        let mut minus = input.to_vec();
        minus[j] -= h;
        let fp = eval(&mut build, &plus);
        let fm = eval(&mut build, &minus);
        let numeric = (fp as f64 - fm as f64) / (2.0 * h as f64);
        let a = analytic[j] as f64;
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1.0);
        if rel as f32 > max_rel {
            max_rel = rel as f32;
        }
        assert!(
            rel as f32 <= tol,
            "gradient mismatch at element {j}: analytic {a:.6e}, numeric {numeric:.6e}, rel {rel:.3e}"
        );
    }
    GradCheck { max_rel_error: max_rel, checked: input.len() }
}

fn eval<F>(build: &mut F, input: &[f32]) -> f32
where
    F: FnMut(&mut Tape, &[f32]) -> (Var, Var),
{
    let mut tape = Tape::new();
    let (_, loss) = build(&mut tape, input);
    tape.value(loss)[0]
}
