use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::conv::ConvFilterBank;
use crate::error::{invalid, Error, Result};
use crate::group::GroupPlan;
use crate::tensor::Element;
use crate::variant::CpwcVariant;

/// Weights of one CPWC block.
///
/// * `pwc`: `Z × C`, row-major by output channel.
/// * `stage1`: group after group, each `r_i × 3 × 3`.
/// * `stage2`: `Z × 3 × 3`.
///
/// A bank is `None` exactly when the variant disables that path.
#[derive(Debug, Clone, PartialEq)]
pub struct CpwcParams<T> {
    plan: GroupPlan,
    variant: CpwcVariant,
    stride: usize,
    stage1_offsets: Vec<usize>,
    pub pwc: Option<Vec<T>>,
    pub stage1: Option<Vec<T>>,
    pub stage2: Option<Vec<T>>,
}

fn offsets(plan: &GroupPlan) -> Vec<usize> {
    let mut acc = 0;
    let mut out: Vec<usize> = plan
        .groups()
        .iter()
        .map(|g| {
            let o = acc;
            acc += 9 * g.len();
            o
        })
        .collect();
    out.push(acc);
    out
}

fn check_bank<T>(name: &str, bank: &Option<Vec<T>>, wanted: bool, len: usize) -> Result<()> {
    match (bank, wanted) {
        (Some(b), true) if b.len() != len => Err(Error::ShapeMismatch {
            expected: format!("{len} {name} weights"),
            actual: format!("{} {name} weights", b.len()),
        }),
        (Some(_), true) | (None, false) => Ok(()),
        (None, true) => invalid(format!("{name} weights are required for this variant")),
        (Some(_), false) => invalid(format!("{name} weights must be absent for this variant")),
    }
}

impl<T: Element> CpwcParams<T> {
    pub fn new(
        plan: GroupPlan,
        variant: CpwcVariant,
        stride: usize,
        pwc: Option<Vec<T>>,
        stage1: Option<Vec<T>>,
        stage2: Option<Vec<T>>,
    ) -> Result<Self> {
        if stride == 0 {
            return invalid("stride must be at least 1");
        }
        let (c, z) = (plan.in_channels(), plan.out_channels());
        check_bank("pwc", &pwc, variant.has_pwc(), c * z)?;
        check_bank("stage-1", &stage1, variant.has_stage1(), 9 * plan.total_group_channels())?;
        check_bank("stage-2", &stage2, variant.has_stage2(), 9 * z)?;
        Ok(Self {
            stage1_offsets: offsets(&plan),
            plan,
            variant,
            stride,
            pwc,
            stage1,
            stage2,
        })
    }

    /// All active banks filled with zeros.
    pub fn zeros(plan: GroupPlan, variant: CpwcVariant, stride: usize) -> Result<Self> {
        let (c, z) = (plan.in_channels(), plan.out_channels());
        let s1 = 9 * plan.total_group_channels();
        Self::new(
            plan,
            variant,
            stride,
            variant.has_pwc().then(|| vec![T::ZERO; c * z]),
            variant.has_stage1().then(|| vec![T::ZERO; s1]),
            variant.has_stage2().then(|| vec![T::ZERO; 9 * z]),
        )
    }

    pub fn plan(&self) -> &GroupPlan {
        &self.plan
    }

    pub fn variant(&self) -> CpwcVariant {
        self.variant
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn in_channels(&self) -> usize {
        self.plan.in_channels()
    }

    pub fn out_channels(&self) -> usize {
        self.plan.out_channels()
    }

    /// Start of group `i`'s weights inside `stage1` (with a trailing total).
    pub fn stage1_offsets(&self) -> &[usize] {
        &self.stage1_offsets
    }

    /// Sum of the sizes of every present weight bank.
    pub fn num_weights(&self) -> usize {
        [&self.pwc, &self.stage1, &self.stage2]
            .iter()
            .map(|b| b.as_ref().map_or(0, Vec::len))
            .sum()
    }

    /// The pointwise path as a generic filter bank.
    pub fn pwc_bank(&self) -> Option<ConvFilterBank<T>> {
        let w = self.pwc.as_ref()?;
        Some(
            ConvFilterBank::dense(self.in_channels(), self.out_channels(), (1, 1), w.clone())
                .expect("pwc bank size validated at construction"),
        )
    }

    pub fn stage1_bank(&self) -> Option<ConvFilterBank<T>> {
        let w = self.stage1.as_ref()?;
        Some(
            ConvFilterBank::new((3, 3), self.plan.groups().to_vec(), w.clone())
                .expect("stage-1 bank size validated at construction"),
        )
    }

    /// Stage 2 as a bank over the stage-1 output channels.
    pub fn stage2_bank(&self) -> Option<ConvFilterBank<T>> {
        let w = self.stage2.as_ref()?;
        let channels = (0..self.out_channels()).map(|z| vec![z]).collect();
        Some(
            ConvFilterBank::new((3, 3), channels, w.clone())
                .expect("stage-2 bank size validated at construction"),
        )
    }

    /// Mutable views of the present banks, in pwc, stage-1, stage-2 order.
    pub fn banks_mut(&mut self) -> Vec<&mut Vec<T>> {
        [&mut self.pwc, &mut self.stage1, &mut self.stage2]
            .into_iter()
            .filter_map(Option::as_mut)
            .collect()
    }
}

/// Random weights with zero mean and variance `2 / fan_in` per bank.
///
/// Fan-in is `C` for the pointwise bank, `9 · r_i` for stage-1 group `i`
/// and `9` for stage 2. The same arguments always give identical weights.
pub fn init_params<T: Element>(
    plan: &GroupPlan,
    variant: CpwcVariant,
    stride: usize,
    seed: u64,
) -> Result<CpwcParams<T>> {
    let mut p = CpwcParams::zeros(plan.clone(), variant, stride)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fill = |bank: &mut [T], fan_in: usize, rng: &mut ChaCha8Rng| {
        let dist = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
        for w in bank {
            *w = T::from_f64(dist.sample(rng));
        }
    };
    let c = plan.in_channels();
    if let Some(w) = p.pwc.as_mut() {
        fill(w, c, &mut rng);
    }
    if let Some(w) = p.stage1.as_mut() {
        for (i, g) in plan.groups().iter().enumerate() {
            let (a, b) = (p.stage1_offsets[i], p.stage1_offsets[i + 1]);
            fill(&mut w[a..b], 9 * g.len(), &mut rng);
        }
    }
    if let Some(w) = p.stage2.as_mut() {
        fill(w, 9, &mut rng);
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::plan_groups;

    #[test]
    fn same_seed_is_bit_identical() {
        let plan = plan_groups(10, 3).unwrap();
        let a = init_params::<f64>(&plan, CpwcVariant::Full, 1, 7).unwrap();
        let b = init_params::<f64>(&plan, CpwcVariant::Full, 1, 7).unwrap();
        assert_eq!(a, b);
        let c = init_params::<f64>(&plan, CpwcVariant::Full, 1, 8).unwrap();
        assert_ne!(a.pwc, c.pwc);
        assert_ne!(a.stage1, c.stage1);
        assert_ne!(a.stage2, c.stage2);
    }

    #[test]
    fn variant_controls_present_banks() {
        let plan = plan_groups(4, 4).unwrap();
        let p = init_params::<f32>(&plan, CpwcVariant::NoStage2, 1, 0).unwrap();
        assert!(p.pwc.is_some() && p.stage1.is_some() && p.stage2.is_none());
        let p = init_params::<f32>(&plan, CpwcVariant::PwcOnly, 1, 0).unwrap();
        assert!(p.pwc.is_some() && p.stage1.is_none() && p.stage2.is_none());
        let p = init_params::<f32>(&plan, CpwcVariant::NoPwc, 1, 0).unwrap();
        assert!(p.pwc.is_none() && p.stage1.is_some() && p.stage2.is_some());
    }

    #[test]
    fn bank_sizes() {
        for (c, z) in [(256, 64), (3, 10), (10, 3), (8, 8)] {
            let plan = plan_groups(c, z).unwrap();
            let p = init_params::<f32>(&plan, CpwcVariant::Full, 1, 0).unwrap();
            assert_eq!(p.pwc.as_ref().unwrap().len(), c * z);
            assert_eq!(p.stage1.as_ref().unwrap().len(), 9 * c.max(z));
            assert_eq!(p.stage2.as_ref().unwrap().len(), 9 * z);
        }
    }

    #[test]
    fn rejects_mismatched_banks() {
        let plan = plan_groups(2, 2).unwrap();
        let err = CpwcParams::<f64>::new(plan.clone(), CpwcVariant::PwcOnly, 1, Some(vec![0.0; 3]), None, None);
        assert!(err.is_err());
        let err = CpwcParams::<f64>::new(plan.clone(), CpwcVariant::PwcOnly, 1, Some(vec![0.0; 4]), Some(vec![0.0; 18]), None);
        assert!(err.is_err());
        assert!(CpwcParams::<f64>::zeros(plan, CpwcVariant::Full, 0).is_err());
    }

    #[test]
    fn init_scale_follows_fan_in() {
        let plan = plan_groups(256, 64).unwrap();
        let p = init_params::<f64>(&plan, CpwcVariant::Full, 1, 3).unwrap();
        let var = |w: &[f64]| w.iter().map(|v| v * v).sum::<f64>() / w.len() as f64;
        let pwc = var(p.pwc.as_ref().unwrap());
        assert!((pwc - 2.0 / 256.0).abs() < 0.1 * 2.0 / 256.0, "pwc variance {pwc}");
        let s1 = var(p.stage1.as_ref().unwrap());
        assert!((s1 - 2.0 / 36.0).abs() < 0.1 * 2.0 / 36.0, "stage-1 variance {s1}");
    }
}
