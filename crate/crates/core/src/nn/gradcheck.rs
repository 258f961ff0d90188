//! Central finite-difference gradient checks.

use super::tape::{Tape, Var};
use super::tensor::Tensor;

/// Relative error `‖a − n‖ / max(‖a‖, ‖n‖)` between the analytic gradient
/// of each input and its central-difference estimate. `f` must build a
/// scalar from the given inputs.
pub fn check_gradients(inputs: &[Tensor], step: f64, f: impl Fn(&mut Tape, &[Var]) -> Var) -> Vec<f64> {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let out = f(&mut tape, &vars);
    let grads = tape.backward(out);
    let analytic: Vec<Vec<f64>> = vars
        .iter()
        .zip(inputs)
        .map(|(&v, t)| grads.get(v).map_or_else(|| vec![0.0; t.len()], <[f64]>::to_vec))
        .collect();
    drop(tape);

    let eval = |ins: &[Tensor]| {
        let mut tape = Tape::new();
        let vars: Vec<Var> = ins.iter().map(|t| tape.constant(t.clone())).collect();
        let out = f(&mut tape, &vars);
        tape.value(out).item()
    };

    let mut errors = Vec::with_capacity(inputs.len());
    let mut probe: Vec<Tensor> = inputs.to_vec();
    for k in 0..inputs.len() {
        let numeric: Vec<f64> = (0..inputs[k].len())
            .map(|i| {
                let x0 = inputs[k].data()[i];
                probe[k].data_mut()[i] = x0 + step;
                let up = eval(&probe);
                probe[k].data_mut()[i] = x0 - step;
                let down = eval(&probe);
                probe[k].data_mut()[i] = x0;
                (up - down) / (2.0 * step)
            })
            .collect();
        errors.push(relative_error(&analytic[k], &numeric));
    }
    errors
}

pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}
