use std::fmt;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::block::{cpwc_backward, cpwc_forward, CpwcGrads};
use crate::error::{invalid, Result};
use crate::params::CpwcParams;
use crate::tensor::{Element, Precision, Tensor};

/// Banks larger than this are checked on a seeded random subsample.
const MAX_CHECKED_PER_BANK: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GradientBank {
    Pwc,
    Stage1,
    Stage2,
    Input,
}

impl fmt::Display for GradientBank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GradientBank::Pwc => "pwc",
            GradientBank::Stage1 => "stage1",
            GradientBank::Stage2 => "stage2",
            GradientBank::Input => "input",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankReport {
    pub bank: GradientBank,
    pub size: usize,
    pub checked: usize,
    pub max_rel_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub epsilon: f64,
    pub tolerance: f64,
    pub banks: Vec<BankReport>,
    pub passed: bool,
}

impl CheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.banks.iter().map(|b| b.max_rel_err).fold(0.0, f64::max)
    }

    pub fn bank(&self, bank: GradientBank) -> Option<&BankReport> {
        self.banks.iter().find(|b| b.bank == bank)
    }

    /// Banks whose error reaches the tolerance.
    pub fn failing(&self) -> Vec<GradientBank> {
        self.banks
            .iter()
            .filter(|b| !(b.max_rel_err < self.tolerance))
            .map(|b| b.bank)
            .collect()
    }
}

/// `Σ y²`, the scalar loss used for gradient checks.
pub fn sum_of_squares_loss<T: Element>(y: &Tensor<T>) -> f64 {
    y.data().iter().map(|v| v.to_f64() * v.to_f64()).sum()
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-12)
}

fn indices(len: usize, bank: GradientBank) -> Vec<usize> {
    if len <= MAX_CHECKED_PER_BANK {
        return (0..len).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x6772_6164 ^ bank as u64);
    let mut idx = sample(&mut rng, len, MAX_CHECKED_PER_BANK).into_vec();
    idx.sort_unstable();
    idx
}

/// Compares [`cpwc_backward`] against central finite differences of
/// [`sum_of_squares_loss`].
pub fn finite_difference_check<T: Element>(
    p: &CpwcParams<T>,
    x: &Tensor<T>,
    epsilon: f64,
    tolerance: f64,
) -> Result<CheckReport> {
    check_gradients_with(p, x, epsilon, tolerance, cpwc_backward)
}

/// Like [`finite_difference_check`] but with a caller-supplied analytic
/// backward pass, e.g. a deliberately broken one.
pub fn check_gradients_with<T, F>(
    p: &CpwcParams<T>,
    x: &Tensor<T>,
    epsilon: f64,
    tolerance: f64,
    backward: F,
) -> Result<CheckReport>
where
    T: Element,
    F: Fn(&Tensor<T>, &CpwcParams<T>, &Tensor<T>) -> Result<CpwcGrads<T>>,
{
    if T::PRECISION != Precision::Double {
        return invalid("finite-difference checks require double precision");
    }
    if !(epsilon > 0.0 && epsilon <= 1e-2) {
        return invalid(format!("epsilon must lie in (0, 1e-2], got {epsilon}"));
    }
    let y = cpwc_forward(x, p)?;
    let grad_out = y.map(|v| T::from_f64(2.0) * v);
    let analytic = backward(x, p, &grad_out)?;

    let loss_at = |p: &CpwcParams<T>, x: &Tensor<T>| -> Result<f64> {
        Ok(sum_of_squares_loss(&cpwc_forward(x, p)?))
    };
    let central = |f: &dyn Fn(T) -> Result<f64>, v: T| -> Result<f64> {
        let plus = f(T::from_f64(v.to_f64() + epsilon))?;
        let minus = f(T::from_f64(v.to_f64() - epsilon))?;
        Ok((plus - minus) / (2.0 * epsilon))
    };

    let mut banks = Vec::new();
    let param_banks = [
        (GradientBank::Pwc, &p.pwc, &analytic.pwc),
        (GradientBank::Stage1, &p.stage1, &analytic.stage1),
        (GradientBank::Stage2, &p.stage2, &analytic.stage2),
    ];
    for (kind, weights, grads) in param_banks {
        let Some(weights) = weights else { continue };
        let Some(grads) = grads else {
            return invalid(format!("backward produced no {kind} gradient"));
        };
        if grads.len() != weights.len() {
            return invalid(format!("{kind} gradient has the wrong length"));
        }
        let mut worst: f64 = 0.0;
        let idx = indices(weights.len(), kind);
        for &i in &idx {
            let perturbed = |v: T| {
                let mut q = p.clone();
                let bank = match kind {
                    GradientBank::Pwc => q.pwc.as_mut(),
                    GradientBank::Stage1 => q.stage1.as_mut(),
                    _ => q.stage2.as_mut(),
                }
                .expect("bank present");
                bank[i] = v;
                loss_at(&q, x)
            };
            let numeric = central(&perturbed, weights[i])?;
            worst = worst.max(rel_err(grads[i].to_f64(), numeric));
        }
        banks.push(BankReport {
            bank: kind,
            size: weights.len(),
            checked: idx.len(),
            max_rel_err: worst,
        });
    }

    if analytic.input.shape() != x.shape() {
        return invalid("input gradient has the wrong shape");
    }
    let idx = indices(x.data().len(), GradientBank::Input);
    let mut worst: f64 = 0.0;
    for &i in &idx {
        let perturbed = |v: T| {
            let mut xq = x.clone();
            xq.data_mut()[i] = v;
            loss_at(p, &xq)
        };
        let numeric = central(&perturbed, x.data()[i])?;
        worst = worst.max(rel_err(analytic.input.data()[i].to_f64(), numeric));
    }
    banks.push(BankReport {
        bank: GradientBank::Input,
        size: x.data().len(),
        checked: idx.len(),
        max_rel_err: worst,
    });

    let passed = banks.iter().all(|b| b.max_rel_err < tolerance);
    Ok(CheckReport {
        epsilon,
        tolerance,
        banks,
        passed,
    })
}
