//! Evaluators for the configured `f` and `g`.

use std::time::Duration;

use lanczos_composite::composite::Evaluator;

use crate::config::{InnerSpec, OuterSpec};
use crate::external::ExternalCommand;

pub fn inner_evaluator(spec: &InnerSpec, timeout: Option<Duration>) -> Evaluator<'static> {
    match spec {
        InnerSpec::SimpleFunctions { delta } => {
            let delta = delta.clone().unwrap_or_default();
            Evaluator::from_fn("f (simple-functions)", move |x: &[f64]| {
                1.0 / x.iter().zip(&delta).map(|(x, d)| x - d).product::<f64>()
            })
        }
        &InnerSpec::Constant { value } => {
            Evaluator::from_fn("f (constant)", move |_: &[f64]| value)
        }
        &InnerSpec::InverseReynolds { u0, width } => {
            Evaluator::from_fn("f (inverse-reynolds)", move |x: &[f64]| {
                x[1] / (x[0] * u0 * width)
            })
        }
        InnerSpec::External { command } => Evaluator::new(
            format!("f (`{command}`)"),
            ExternalCommand::new(command.clone(), timeout),
        ),
    }
}

pub fn outer_evaluator(spec: &OuterSpec, timeout: Option<Duration>) -> Evaluator<'static> {
    match spec {
        OuterSpec::Exp => Evaluator::from_fn("g (exp)", |t: &[f64]| t[0].exp()),
        OuterSpec::Identity => Evaluator::from_fn("g (identity)", |t: &[f64]| t[0]),
        OuterSpec::Poly { coefficients } => {
            let c = coefficients.clone();
            Evaluator::from_fn("g (poly)", move |t: &[f64]| horner(&c, t[0]))
        }
        OuterSpec::External { command } => Evaluator::new(
            format!("g (`{command}`)"),
            ExternalCommand::new(command.clone(), timeout),
        ),
    }
}

/// `sum_i c[i] t^i`.
pub fn horner(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * t + ci)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins() {
        let mut f = inner_evaluator(
            &InnerSpec::SimpleFunctions {
                delta: Some(vec![1.3, 1.3]),
            },
            None,
        );
        let v = f.evaluate(&[1.0, 1.0]).unwrap();
        assert!((v - 1.0 / 0.09).abs() < 1e-12);

        let mut f = inner_evaluator(
            &InnerSpec::InverseReynolds {
                u0: 0.01,
                width: 0.1,
            },
            None,
        );
        assert!((f.evaluate(&[1000.0, 1e-3]).unwrap() - 1e-3).abs() < 1e-15);

        assert_eq!(horner(&[1.0, 2.0, 3.0], 2.0), 17.0);
        let mut g = outer_evaluator(
            &OuterSpec::Poly {
                coefficients: vec![0.0, 0.0, 1.0],
            },
            None,
        );
        assert_eq!(g.evaluate(&[3.0]).unwrap(), 9.0);
        assert_eq!(g.evaluations(), 1);
    }
}
