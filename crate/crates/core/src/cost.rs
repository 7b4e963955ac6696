use crate::variant::CpwcVariant;

/// Weights in one CPWC block (no biases).
///
/// Pointwise `C·Z`, stage 1 `9·max(C, Z)`, stage 2 `9·Z`, each included only
/// when the variant enables that path.
pub fn count_cpwc(in_channels: u64, out_channels: u64, variant: CpwcVariant) -> u64 {
    let (c, z) = (in_channels, out_channels);
    let mut total = 0;
    if variant.has_pwc() {
        total += c * z;
    }
    if variant.has_stage1() {
        total += 9 * c.max(z);
    }
    if variant.has_stage2() {
        total += 9 * z;
    }
    total
}

/// Multiply-accumulates for one image at the given output resolution.
///
/// Every weight is applied once per output pixel; stage 2 runs at the
/// (already strided) stage-1 resolution, so all terms share `out_h · out_w`.
pub fn macs_cpwc(
    in_channels: u64,
    out_channels: u64,
    variant: CpwcVariant,
    out_h: u64,
    out_w: u64,
) -> u64 {
    out_h * out_w * count_cpwc(in_channels, out_channels, variant)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_example() {
        assert_eq!(count_cpwc(256, 64, CpwcVariant::Full), 19_264);
        assert_eq!(count_cpwc(256, 64, CpwcVariant::PwcOnly), 16_384);
        assert_eq!(count_cpwc(8, 8, CpwcVariant::Full), 208);
    }

    #[test]
    fn variant_terms() {
        assert_eq!(count_cpwc(256, 64, CpwcVariant::NoStage2), 16_384 + 2304);
        assert_eq!(count_cpwc(256, 64, CpwcVariant::NoPwc), 2304 + 576);
        assert_eq!(count_cpwc(256, 64, CpwcVariant::NoPwcNoStage2), 2304);
        assert_eq!(count_cpwc(3, 10, CpwcVariant::NoPwcNoStage2), 90);
    }

    #[test]
    fn macs() {
        assert_eq!(macs_cpwc(256, 64, CpwcVariant::Full, 56, 56), 60_411_904);
        assert_eq!(macs_cpwc(256, 64, CpwcVariant::NoStage2, 56, 56), 3136 * 18_688);
        assert_eq!(macs_cpwc(17, 5, CpwcVariant::PwcOnly, 1, 1), 85);
    }
}
